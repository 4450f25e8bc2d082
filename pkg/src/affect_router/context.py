"""Per-edge context features: weather, traffic, greenness, time, personal.

Live weather/traffic/satellite services are replaced by pluggable
providers: constant values, a CSV file keyed by lon/lat tile, a PNG
raster with a world file for greenness, or a synthetic smooth green
field. A ProviderSet bundles one of each plus a snapshot cache so a
whole-graph precompute touches each provider once per edge.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import AffectRouterError
from .geo import GeoPoint, midpoint
from .graph import ROAD_TYPES, RoadEdge

WEATHER_TERMS = ("clear", "clouds", "rain", "snow", "fog")
DAYTIMES = ("morning", "afternoon", "evening", "night")
# Order is the class-label order used across the whole system.
EMOTION_CLASSES = ("happy", "sad", "neutral", "angry", "contempt", "disgust", "fear", "surprise")

# Vegetation band of the HSV spectrum (degrees) plus minimum saturation
# and value; configurable via green_index arguments.
GREEN_HUE_RANGE = (65.0, 170.0)
GREEN_MIN_SATURATION = 0.15
GREEN_MIN_VALUE = 0.10


class ProviderError(AffectRouterError):
    """A context provider could not produce a value."""


@dataclass(frozen=True)
class WeatherInfo:
    feeltemp_outside: float
    windspeed: float
    cloud_coverage: float
    weather_term: str

    def __post_init__(self):
        if self.windspeed < 0:
            raise ValueError("windspeed must be >= 0")
        if not 0 <= self.cloud_coverage <= 100:
            raise ValueError("cloud_coverage must be in [0, 100]")
        if self.weather_term not in WEATHER_TERMS:
            raise ValueError(f"unknown weather_term {self.weather_term!r}")


@dataclass(frozen=True)
class TrafficInfo:
    freeflow_speed: float
    reducedspeed: float

    def __post_init__(self):
        if not self.freeflow_speed > 0:
            raise ValueError("freeflow_speed must be > 0")
        if self.reducedspeed < 0:
            raise ValueError("reducedspeed must be >= 0")
        if self.reducedspeed > self.freeflow_speed:
            raise ValueError("reducedspeed must not exceed freeflow_speed")


@dataclass(frozen=True)
class PersonalProfile:
    age: int
    before_emotion: str = "neutral"

    def __post_init__(self):
        if not 16 <= self.age <= 120:
            raise ValueError("age must be in [16, 120]")
        if self.before_emotion not in EMOTION_CLASSES:
            raise ValueError(f"unknown before_emotion {self.before_emotion!r}")


@dataclass(frozen=True)
class ContextSnapshot:
    """The full feature bundle for one edge at one time."""

    weather: WeatherInfo
    traffic: TrafficInfo
    road_type: str
    max_speed: Optional[float]
    n_lanes: Optional[int]
    satellite_greeness: float
    daytime: str
    personal: PersonalProfile

    def __post_init__(self):
        if self.road_type not in ROAD_TYPES:
            raise ValueError(f"unknown road_type {self.road_type!r}")
        if not 0.0 <= self.satellite_greeness <= 1.0:
            raise ValueError("satellite_greeness must be in [0, 1]")
        if self.daytime not in DAYTIMES:
            raise ValueError(f"unknown daytime {self.daytime!r}")


def daytime_bucket(local_hour: int) -> str:
    """Bucket an hour of day: morning [5,12), afternoon [12,18),
    evening [18,22), night otherwise."""
    if not 0 <= local_hour < 24:
        raise ValueError(f"hour {local_hour} outside [0, 24)")
    if 5 <= local_hour < 12:
        return "morning"
    if 12 <= local_hour < 18:
        return "afternoon"
    if 18 <= local_hour < 22:
        return "evening"
    return "night"


# ---------------------------------------------------------------------------
# Green raster
# ---------------------------------------------------------------------------


class GreenRaster:
    """RGB raster with a world-file affine transform (pixel -> lon/lat).

    Transform order follows the world-file convention: (a, d, b, e, c, f)
    with lon = a*col + b*row + c and lat = d*col + e*row + f, coordinates
    taken at pixel centers.
    """

    def __init__(self, pixels: np.ndarray, transform: Tuple[float, ...]):
        pixels = np.asarray(pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError("pixels must be HxWx3 RGB")
        a, d, b, e, _c, _f = transform
        det = a * e - b * d
        if det == 0:
            raise ValueError("geo transform is not invertible")
        self.pixels = pixels
        self.transform = tuple(float(v) for v in transform)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def geo_to_pixel(self, p: GeoPoint) -> Tuple[float, float]:
        """(col, row) in pixel space, not necessarily inside the raster."""
        a, d, b, e, c, f = self.transform
        det = a * e - b * d
        dx = p.lon - c
        dy = p.lat - f
        col = (e * dx - b * dy) / det
        row = (a * dy - d * dx) / det
        return col, row

    def contains(self, p: GeoPoint) -> bool:
        col, row = self.geo_to_pixel(p)
        return 0 <= round(col) < self.width and 0 <= round(row) < self.height


def load_green_raster(png_path, world_path=None) -> GreenRaster:
    """Read a PNG plus its 6-number world file (sidecar .pgw by default)."""
    from PIL import Image

    png_path = str(png_path)
    if world_path is None:
        stem = png_path.rsplit(".", 1)[0]
        world_path = stem + ".pgw"
    with open(world_path) as f:
        values = [float(line.strip()) for line in f if line.strip()]
    if len(values) != 6:
        raise ValueError(f"world file {world_path} must contain 6 numbers")
    img = Image.open(png_path).convert("RGB")
    return GreenRaster(np.asarray(img), tuple(values))


def _rgb_to_hsv(window: np.ndarray):
    rgb = window.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = mx - mn
    safe_delta = np.where(delta == 0, 1.0, delta)
    h_r = (60.0 * (g - b) / safe_delta) % 360.0
    h_g = 60.0 * (b - r) / safe_delta + 120.0
    h_b = 60.0 * (r - g) / safe_delta + 240.0
    hue = np.select([delta == 0, mx == r, mx == g], [0.0, h_r, h_g], default=h_b)
    sat = np.where(mx == 0, 0.0, delta / np.where(mx == 0, 1.0, mx))
    return hue, sat, mx


def green_index(raster: GreenRaster, p: GeoPoint, window_px: int = 15) -> float:
    """Fraction of vegetation-hued pixels in a window_px-sided square
    centered on p (clipped at raster borders)."""
    if window_px < 1:
        raise ValueError("window_px must be >= 1")
    col_f, row_f = raster.geo_to_pixel(p)
    col, row = round(col_f), round(row_f)
    if not (0 <= col < raster.width and 0 <= row < raster.height):
        raise ProviderError(f"coordinate not covered by raster: ({p.lat}, {p.lon})")
    half = window_px // 2
    r0 = max(0, row - half)
    c0 = max(0, col - half)
    r1 = min(raster.height, row - half + window_px)
    c1 = min(raster.width, col - half + window_px)
    window = raster.pixels[r0:r1, c0:c1]
    hue, sat, val = _rgb_to_hsv(window)
    lo, hi = GREEN_HUE_RANGE
    green = (hue >= lo) & (hue <= hi) & (sat >= GREEN_MIN_SATURATION) & (val >= GREEN_MIN_VALUE)
    return float(np.count_nonzero(green)) / green.size


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


class ConstantWeather:
    def __init__(self, info: WeatherInfo):
        self.info = info

    def weather_at(self, p: GeoPoint) -> WeatherInfo:
        return self.info


class ConstantTraffic:
    def __init__(self, info: TrafficInfo):
        self.info = info

    def traffic_at(self, p: GeoPoint) -> TrafficInfo:
        return self.info


class ConstantGreen:
    def __init__(self, value: float):
        if not 0.0 <= value <= 1.0:
            raise ValueError("green value must be in [0, 1]")
        self.value = value

    def green_at(self, p: GeoPoint) -> float:
        return self.value


class RasterGreen:
    def __init__(self, raster: GreenRaster, window_px: int = 15):
        self.raster = raster
        self.window_px = window_px

    def green_at(self, p: GeoPoint) -> float:
        return green_index(self.raster, p, self.window_px)


class SyntheticGreen:
    """Smooth deterministic green field; handy for large synthetic maps."""

    def __init__(self, scale_deg: float = 0.01, offset: float = 0.5, amplitude: float = 0.45):
        self.scale_deg = scale_deg
        self.offset = offset
        self.amplitude = amplitude

    def green_at(self, p: GeoPoint) -> float:
        s = math.sin(p.lon / self.scale_deg) * math.cos(p.lat / self.scale_deg)
        t = math.sin((p.lon + p.lat) / (2.3 * self.scale_deg))
        value = self.offset + self.amplitude * 0.5 * (s + t)
        return min(1.0, max(0.0, value))


class CsvWeatherTraffic:
    """Weather + traffic keyed by lon/lat tile, read from one CSV file.

    Columns: tile_x, tile_y, feeltemp_outside, windspeed, cloud_coverage,
    weather_term, freeflow_speed, reducedspeed. Tile indices are
    floor(lon / tile) and floor(lat / tile).
    """

    def __init__(self, path, tile_size_deg: float = 0.01):
        self.tile_size_deg = tile_size_deg
        self.path = str(path)
        self._table = {}
        with open(self.path, newline="") as f:
            for rec in csv.DictReader(f):
                key = (int(rec["tile_x"]), int(rec["tile_y"]))
                weather = WeatherInfo(
                    feeltemp_outside=float(rec["feeltemp_outside"]),
                    windspeed=float(rec["windspeed"]),
                    cloud_coverage=float(rec["cloud_coverage"]),
                    weather_term=rec["weather_term"],
                )
                traffic = TrafficInfo(
                    freeflow_speed=float(rec["freeflow_speed"]),
                    reducedspeed=float(rec["reducedspeed"]),
                )
                self._table[key] = (weather, traffic)
        if not self._table:
            raise ValueError(f"provider CSV {self.path} has no rows")

    def _tile(self, p: GeoPoint):
        return (
            math.floor(p.lon / self.tile_size_deg),
            math.floor(p.lat / self.tile_size_deg),
        )

    def _lookup(self, p: GeoPoint, kind: str):
        key = self._tile(p)
        try:
            return self._table[key]
        except KeyError:
            raise ProviderError(f"{kind} provider: no tile {key} in {self.path}") from None

    def weather_at(self, p: GeoPoint) -> WeatherInfo:
        return self._lookup(p, "weather")[0]

    def traffic_at(self, p: GeoPoint) -> TrafficInfo:
        return self._lookup(p, "traffic")[1]


class ProviderSet:
    """One weather, traffic, and green provider plus the snapshot cache.

    The epoch tags cached snapshots; invalidate() starts a new epoch and
    drops the cache. Reads are thread-safe; duplicate computation under
    contention is allowed but results agree (providers are deterministic).
    """

    def __init__(self, weather, traffic, green):
        self.weather = weather
        self.traffic = traffic
        self.green = green
        self.epoch = 0
        self._cache = {}
        self._lock = threading.Lock()

    def invalidate(self) -> None:
        with self._lock:
            self.epoch += 1
            self._cache.clear()

    def cache_get(self, key):
        return self._cache.get(key)

    def cache_put(self, key, value) -> None:
        with self._lock:
            self._cache[key] = value


def constant_providers(
    weather: Optional[WeatherInfo] = None,
    traffic: Optional[TrafficInfo] = None,
    green: float = 0.3,
) -> ProviderSet:
    """ProviderSet with fixed values everywhere; the offline default."""
    if weather is None:
        weather = WeatherInfo(13.0, 5.6, 76.0, "clear")
    if traffic is None:
        traffic = TrafficInfo(115.0, 7.295495)
    return ProviderSet(ConstantWeather(weather), ConstantTraffic(traffic), ConstantGreen(green))


def context_for_edge(
    edge: RoadEdge, providers: ProviderSet, at, profile: PersonalProfile
) -> ContextSnapshot:
    """Feature bundle for an edge, sampled at its geometric midpoint.

    `at` is a datetime in local time. Results are cached per
    (edge id, provider epoch, at, profile); failures are never cached.
    """
    key = (edge.id, providers.epoch, at, profile)
    cached = providers.cache_get(key)
    if cached is not None:
        return cached
    mid = midpoint(edge.geometry)
    try:
        weather = providers.weather.weather_at(mid)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"weather provider failed for edge {edge.id}: {exc}") from exc
    try:
        traffic = providers.traffic.traffic_at(mid)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"traffic provider failed for edge {edge.id}: {exc}") from exc
    try:
        green = providers.green.green_at(mid)
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"green provider failed for edge {edge.id}: {exc}") from exc
    snapshot = ContextSnapshot(
        weather=weather,
        traffic=traffic,
        road_type=edge.road_type,
        max_speed=edge.max_speed_kmh,
        n_lanes=edge.n_lanes,
        satellite_greeness=green,
        daytime=daytime_bucket(at.hour),
        personal=profile,
    )
    providers.cache_put(key, snapshot)
    return snapshot
