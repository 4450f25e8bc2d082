#!/usr/bin/env python3
"""Regenerate the demo bundle in demo/.

Everything is seeded, so reruns write byte-identical files. The bundle is
a synthetic 6x6 km grid city: an OSM extract, a greenness raster with its
world file, a tiled weather/traffic CSV, a small decision forest, a
config, and the derived graph and layer files.
"""

import datetime as dt
import math
import random
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from affect_router.context import (  # noqa: E402
    CsvWeatherTraffic,
    PersonalProfile,
    ProviderSet,
    RasterGreen,
    load_green_raster,
)
from affect_router.emotion import make_forest, save_model  # noqa: E402
from affect_router.graph import save_graph  # noqa: E402
from affect_router.layer import build_layer, save_layer  # noqa: E402
from affect_router.osm import build_graph, parse_osm_xml  # noqa: E402

DEMO = ROOT / "demo"

GRID = 15
LAT0, LON0 = 48.072, 11.458          # south-west corner intersection
DLAT, DLON = 0.004, 0.006            # ~445 m spacing both ways at 48 N

# Raster frame, slightly larger than the street grid.
RASTER_W, RASTER_H = 250, 250
RASTER_LON0, RASTER_LON1 = 11.45, 11.55
RASTER_LAT0, RASTER_LAT1 = 48.06, 48.14

BUILD_TIME = dt.datetime(2024, 6, 1, 12, 0, 0)


def street_type(index: int, vertical: bool) -> dict:
    if index % 5 == 2:
        if vertical:
            return {"highway": "primary", "maxspeed": "60", "lanes": "2"}
        return {"highway": "secondary", "maxspeed": "60", "lanes": "2"}
    if index % 5 == 0:
        return {"highway": "tertiary", "maxspeed": "50"}
    if index == 8:
        return {"highway": "living_street"}
    return {"highway": "residential", "maxspeed": "30"}


def make_osm() -> str:
    rng = random.Random(20240601)
    nodes = {}
    for r in range(GRID):
        for c in range(GRID):
            nid = 1000 + r * 100 + c
            lat = LAT0 + r * DLAT + rng.uniform(-0.0003, 0.0003)
            lon = LON0 + c * DLON + rng.uniform(-0.0004, 0.0004)
            nodes[nid] = (lat, lon)

    shape_id = 50000
    ways = []

    def bend_refs(a, b, amplitude):
        """Two extra nodes between a and b, offset off the straight line."""
        nonlocal shape_id
        (lat_a, lon_a), (lat_b, lon_b) = nodes[a], nodes[b]
        refs = [a]
        for frac in (1 / 3, 2 / 3):
            off = amplitude * math.sin(math.pi * frac)
            lat = lat_a + (lat_b - lat_a) * frac + off * (lon_b - lon_a) / DLON
            lon = lon_a + (lon_b - lon_a) * frac - off * (lat_b - lat_a) / DLAT
            nodes[shape_id] = (lat, lon)
            refs.append(shape_id)
            shape_id += 1
        refs.append(b)
        return refs

    way_id = 100
    for r in range(GRID):
        tags = street_type(r, vertical=False)
        if r == 3:
            tags = dict(tags, oneway="yes")
        for c in range(GRID - 1):
            a, b = 1000 + r * 100 + c, 1000 + r * 100 + c + 1
            if tags["highway"] in ("residential", "living_street") and rng.random() < 0.6:
                refs = bend_refs(a, b, rng.uniform(0.0002, 0.0006))
            else:
                refs = [a, b]
            ways.append((way_id, refs, tags))
            way_id += 1
    for c in range(GRID):
        tags = street_type(c, vertical=True)
        if c == 11:
            tags = dict(tags, oneway="yes")
        for r in range(GRID - 1):
            a, b = 1000 + r * 100 + c, 1000 + (r + 1) * 100 + c
            if tags["highway"] in ("residential", "living_street") and rng.random() < 0.6:
                refs = bend_refs(a, b, rng.uniform(0.0002, 0.0006))
            else:
                refs = [a, b]
            ways.append((way_id, refs, tags))
            way_id += 1

    lines = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6">']
    for nid in sorted(nodes):
        lat, lon = nodes[nid]
        lines.append(f'  <node id="{nid}" lat="{lat:.7f}" lon="{lon:.7f}"/>')
    for wid, refs, tags in ways:
        lines.append(f'  <way id="{wid}">')
        for ref in refs:
            lines.append(f'    <nd ref="{ref}"/>')
        for key, value in sorted(tags.items()):
            lines.append(f'    <tag k="{key}" v="{value}"/>')
        lines.append("  </way>")
    lines.append("</osm>")
    return "\n".join(lines) + "\n"


def make_raster() -> None:
    from PIL import Image

    rng = np.random.default_rng(7)
    base = np.zeros((RASTER_H, RASTER_W, 3), dtype=np.float64)
    base[..., 0] = 155 + 20 * rng.random((RASTER_H, RASTER_W))
    base[..., 1] = 150 + 20 * rng.random((RASTER_H, RASTER_W))
    base[..., 2] = 140 + 20 * rng.random((RASTER_H, RASTER_W))

    yy, xx = np.mgrid[0:RASTER_H, 0:RASTER_W]
    parks = [
        (60, 55, 28), (70, 180, 34), (150, 90, 40),
        (190, 200, 26), (205, 60, 30), (120, 150, 22),
    ]
    for cy, cx, radius in parks:
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
        base[mask, 0] = 62
        base[mask, 1] = 142
        base[mask, 2] = 54
    # Tree-lined corridor along the middle of the map.
    corridor = np.abs(yy - (110 + 25 * np.sin(xx / 30))) < 6
    base[corridor, 0] = 74
    base[corridor, 1] = 150
    base[corridor, 2] = 66

    image = Image.fromarray(base.astype(np.uint8), mode="RGB")
    image.save(DEMO / "greenness.png")

    px_lon = (RASTER_LON1 - RASTER_LON0) / RASTER_W
    px_lat = (RASTER_LAT1 - RASTER_LAT0) / RASTER_H
    world = [
        px_lon, 0.0, 0.0, -px_lat,
        RASTER_LON0 + px_lon / 2, RASTER_LAT1 - px_lat / 2,
    ]
    (DEMO / "greenness.pgw").write_text("".join(f"{v:.10f}\n" for v in world))


def make_providers_csv() -> None:
    rng = random.Random(11)
    lines = ["tile_x,tile_y,feeltemp_outside,windspeed,cloud_coverage,weather_term,freeflow_speed,reducedspeed"]
    for tx in range(1145, 1156):
        for ty in range(4805, 4815):
            if tx >= 1152:
                term, cloud = "rain", rng.uniform(70, 95)
            elif 1148 <= tx < 1152:
                term, cloud = "clouds", rng.uniform(40, 80)
            else:
                term, cloud = "clear", rng.uniform(0, 30)
            feeltemp = 14.0 + rng.uniform(-3, 5)
            wind = rng.uniform(1, 9)
            freeflow = rng.uniform(35, 70)
            reduced = rng.uniform(0, 12)
            lines.append(
                f"{tx},{ty},{feeltemp:.3f},{wind:.3f},{cloud:.3f},{term},{freeflow:.3f},{reduced:.3f}"
            )
    (DEMO / "providers.csv").write_text("\n".join(lines) + "\n")


def _leaf(rng, happy_boost):
    raw = [rng.uniform(0.2, 1.0) for _ in range(8)]
    raw[0] += happy_boost
    total = sum(raw)
    return ("leaf", tuple(v / total for v in raw))


def _tree(seed):
    """Depth-3 tree: greeness at the root, then road class or weather."""
    rng = random.Random(seed)
    green_t = rng.uniform(0.2, 0.45)
    weather_feature = rng.choice([11, 2])  # rain flag or cloud coverage
    weather_t = 0.5 if weather_feature == 11 else rng.uniform(40.0, 70.0)
    road_feature = rng.choice([14, 18])  # residential or motorway flag
    speed_t = rng.uniform(55.0, 85.0)
    nodes = [
        ("split", 7, green_t, 1, 2),
        ("split", road_feature, 0.5, 3, 4),
        ("split", weather_feature, weather_t, 5, 6),
        ("split", 4, speed_t, 7, 8),
        _leaf(rng, 2.2 if road_feature == 14 else 0.1),
        _leaf(rng, 6.0),
        _leaf(rng, 1.4),
        _leaf(rng, 1.0),
        _leaf(rng, 0.0),
    ]
    return nodes


def make_forest_file() -> None:
    forest = make_forest([_tree(seed) for seed in range(12)])
    (DEMO / "forest.json").write_bytes(save_model(forest))


def make_config() -> None:
    (DEMO / "config.toml").write_text(
        """[paths]
graph = "graph.npz"
layer = "layer.csv"
model = "forest.json"
green_raster = "greenness.png"
providers_csv = "providers.csv"

[weights]
mode = "happy_linear"
lambda = 20.0

[service]
host = "127.0.0.1"
port = 8080
lambda_grid = [0.0, 1.0, 5.0, 10.0, 20.0, 40.0, 100.0]
cors_origins = ["*"]

[simulation]
n = 100
seed = 1
min_separation_m = 1000.0
"""
    )


def main() -> None:
    DEMO.mkdir(exist_ok=True)
    (DEMO / "demo.osm").write_text(make_osm())
    make_raster()
    make_providers_csv()
    make_forest_file()
    make_config()

    with open(DEMO / "demo.osm", "rb") as fh:
        source = parse_osm_xml(fh)
    graph = build_graph(source)
    save_graph(graph, DEMO / "graph.npz")

    from affect_router.emotion import load_model

    forest = load_model((DEMO / "forest.json").read_bytes())
    csv_provider = CsvWeatherTraffic(DEMO / "providers.csv")
    providers = ProviderSet(
        weather=csv_provider,
        traffic=csv_provider,
        green=RasterGreen(load_green_raster(DEMO / "greenness.png"), window_px=15),
    )
    layer = build_layer(graph, providers, forest, PersonalProfile(age=30), BUILD_TIME)
    save_layer(layer, DEMO / "layer.csv")

    values = [entry.e for entry in layer.entries]
    print(f"nodes: {len(graph.nodes)}  edges: {len(graph.edges)}")
    print(f"e min/mean/max: {min(values):.4f} {sum(values) / len(values):.4f} {max(values):.4f}")


if __name__ == "__main__":
    main()
