"""HTTP API over one immutable (graph, layer, hierarchy) snapshot.

The server answers route, layer, and comparison queries for a graph
loaded at startup. Weight settings on a fixed grid of penalty values get
precomputed hierarchies; any other requested value falls back to plain
Dijkstra over freshly derived weights. Nothing here mutates state after
startup, so handlers can run concurrently without locks (the only cache,
off-grid weight views, is guarded by one).
"""

import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .geo import GeoPoint
from .graph import RoadGraph, edge_travel_time, nearest_node
from .layer import (
    DEFAULT_LAMBDA,
    EdgeEmotion,
    EmotionLayer,
    WeightParams,
    apply_weights,
)
from .routing import (
    CHIndex,
    NoRouteError,
    Path,
    Route,
    assemble_route,
    ch_preprocess,
    ch_query,
    dijkstra,
    turn_instructions,
)

DEFAULT_LAMBDA_GRID = (0.0, 1.0, 5.0, 10.0, 20.0, 40.0, 100.0)

# Off-grid weight views are derived per request; keep a small FIFO of them
# so a user dragging a slider through custom values does not rebuild the
# same array on every repeat.
_VIEW_CACHE_LIMIT = 32


def _uniform_layer(graph: RoadGraph) -> EmotionLayer:
    """Placeholder layer for servers running without an emotion model:
    every edge fully happy, base time from free-flow speed."""
    entries = tuple(
        EdgeEmotion(edge.id, 1.0, 1.0, edge_travel_time(edge)) for edge in graph.edges
    )
    return EmotionLayer(
        fingerprint=graph.fingerprint,
        entries=entries,
        model_id="uniform",
        built_at="1970-01-01T00:00:00",
    )


@dataclass
class ServiceSnapshot:
    """Everything a running server needs, built once at startup."""

    graph: RoadGraph
    layer: Optional[EmotionLayer]
    happy_mode: str = "happy_linear"
    lambda_grid: Tuple[float, ...] = DEFAULT_LAMBDA_GRID
    fallback_layer: Optional[EmotionLayer] = None
    views: Dict[Tuple[str, float], object] = field(default_factory=dict)
    indexes: Dict[Tuple[str, float], CHIndex] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def route_layer(self) -> EmotionLayer:
        return self.layer if self.layer is not None else self.fallback_layer

    def modes_ready(self) -> List[str]:
        modes = ["fastest"]
        if self.layer is not None:
            modes.append("happy")
        return modes

    def view_for(self, mode: str, lam: float):
        """Weight view for a request; off-grid values are derived lazily."""
        if mode == "fastest":
            lam = 0.0  # fastest weights do not depend on the penalty
        key = (mode, lam)
        if key in self.views:
            return self.views[key]
        with self._lock:
            if key in self.views:
                return self.views[key]
            params = (
                WeightParams("fastest")
                if mode == "fastest"
                else WeightParams(self.happy_mode, lam)
            )
            view = apply_weights(self.graph, self.route_layer, params)
            if len(self.views) >= len(self.lambda_grid) + 1 + _VIEW_CACHE_LIMIT:
                oldest = next(
                    k for k in self.views if k not in self.indexes
                )
                del self.views[oldest]
            self.views[key] = view
            return view

    def query(self, mode: str, lam: float, s: int, t: int) -> Path:
        if mode == "fastest":
            lam = 0.0
        key = (mode, lam)
        index = self.indexes.get(key)
        if index is not None:
            return ch_query(index, s, t)
        return dijkstra(self.graph, self.view_for(mode, lam), s, t)


def build_snapshot(
    graph: RoadGraph,
    layer: Optional[EmotionLayer] = None,
    happy_mode: str = "happy_linear",
    lambda_grid: Tuple[float, ...] = DEFAULT_LAMBDA_GRID,
    preprocess: bool = True,
) -> ServiceSnapshot:
    """Derive weight views for the grid and optionally preprocess
    hierarchies for them. With no layer, only fastest mode is served."""
    snapshot = ServiceSnapshot(
        graph=graph,
        layer=layer,
        happy_mode=happy_mode,
        lambda_grid=tuple(float(v) for v in lambda_grid),
        fallback_layer=_uniform_layer(graph) if layer is None else None,
    )
    keys = [("fastest", 0.0)]
    if layer is not None:
        keys += [("happy", lam) for lam in snapshot.lambda_grid]
    for mode, lam in keys:
        view = snapshot.view_for(mode, lam)
        if preprocess:
            snapshot.indexes[(mode, lam)] = ch_preprocess(graph, view)
    return snapshot


def _parse_point(raw: str) -> GeoPoint:
    parts = raw.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected lat,lon but got {raw!r}")
    lat, lon = float(parts[0]), float(parts[1])
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise ValueError(f"coordinates out of range: {raw!r}")
    return GeoPoint(lat, lon)


def _route_payload(
    route: Route, graph: RoadGraph, mode: str, lam: float, compute_ms: float
) -> dict:
    if route.path.edge_ids:
        instructions = [
            {"kind": i.kind, "node_id": i.node_id, "road_type": i.road_type}
            for i in turn_instructions(route, graph)
        ]
    else:
        instructions = []
    return {
        "geometry": {
            "type": "LineString",
            "coordinates": [[p.lon, p.lat] for p in route.geometry],
        },
        "duration_s": route.duration_s,
        "distance_m": route.distance_m,
        "mean_happiness": route.mean_happiness,
        "instructions": instructions,
        "mode": mode,
        "lambda": lam,
        "compute_ms": compute_ms,
    }


def create_app(
    snapshot: ServiceSnapshot,
    cors_origins: Tuple[str, ...] = ("*",),
    ui_dir: Optional[str] = None,
):
    from fastapi import FastAPI, Query
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse

    app = FastAPI(title="affect-router", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["GET"],
        allow_headers=["*"],
    )

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse({"error": message, "code": status}, status_code=status)

    def run_route(mode: str, lam: float, src: GeoPoint, dst: GeoPoint):
        """Returns (payload dict, assembled Route) or raises NoRouteError."""
        started = time.perf_counter()
        s = nearest_node(snapshot.graph, src).id
        t = nearest_node(snapshot.graph, dst).id
        if s == t:
            path = Path((), 0.0, s, t)
        else:
            path = snapshot.query(mode, lam, s, t)
        route = assemble_route(path, snapshot.graph, snapshot.route_layer)
        compute_ms = (time.perf_counter() - started) * 1000.0
        return _route_payload(route, snapshot.graph, mode, lam, compute_ms), route

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "graph_edges": len(snapshot.graph.edges),
            "layer_fingerprint": (
                snapshot.layer.fingerprint if snapshot.layer is not None else None
            ),
            "modes_ready": snapshot.modes_ready(),
        }

    @app.get("/route")
    def route(
        from_raw: str = Query(alias="from", default=""),
        to_raw: str = Query(alias="to", default=""),
        mode: str = "fastest",
        lam: float = Query(alias="lambda", default=DEFAULT_LAMBDA),
    ):
        try:
            src = _parse_point(from_raw)
            dst = _parse_point(to_raw)
        except ValueError as exc:
            return error(400, str(exc))
        if mode not in ("fastest", "happy"):
            return error(400, f"unknown mode {mode!r}")
        if not lam >= 0:
            return error(400, "lambda must be >= 0")
        if mode == "happy" and snapshot.layer is None:
            return error(409, "no emotion layer loaded")
        try:
            payload, _ = run_route(mode, lam, src, dst)
        except NoRouteError as exc:
            return error(404, str(exc))
        return payload

    @app.get("/layer")
    def layer_geojson(bbox: str = ""):
        if snapshot.layer is None:
            return error(409, "no emotion layer loaded")
        parts = bbox.split(",")
        if len(parts) != 4:
            return error(400, f"expected bbox=minlon,minlat,maxlon,maxlat but got {bbox!r}")
        try:
            minlon, minlat, maxlon, maxlat = (float(p) for p in parts)
        except ValueError:
            return error(400, f"bbox is not numeric: {bbox!r}")
        if minlon > maxlon or minlat > maxlat:
            return error(400, "bbox min exceeds max")
        features = []
        for edge in snapshot.graph.edges:
            lons = [p.lon for p in edge.geometry]
            lats = [p.lat for p in edge.geometry]
            if min(lons) > maxlon or max(lons) < minlon:
                continue
            if min(lats) > maxlat or max(lats) < minlat:
                continue
            entry = snapshot.layer.entries[edge.id]
            features.append(
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "LineString",
                        "coordinates": [[p.lon, p.lat] for p in edge.geometry],
                    },
                    "properties": {
                        "edge_id": edge.id,
                        "e": entry.e,
                        "c": entry.c,
                        "road_type": edge.road_type,
                    },
                }
            )
        return {"type": "FeatureCollection", "features": features}

    @app.get("/compare")
    def compare(
        from_raw: str = Query(alias="from", default=""),
        to_raw: str = Query(alias="to", default=""),
        lam: float = Query(alias="lambda", default=DEFAULT_LAMBDA),
    ):
        try:
            src = _parse_point(from_raw)
            dst = _parse_point(to_raw)
        except ValueError as exc:
            return error(400, str(exc))
        if not lam >= 0:
            return error(400, "lambda must be >= 0")
        if snapshot.layer is None:
            return error(409, "no emotion layer loaded")
        try:
            fastest_payload, fastest_route = run_route("fastest", lam, src, dst)
            happy_payload, happy_route = run_route("happy", lam, src, dst)
        except NoRouteError as exc:
            return error(404, str(exc))
        from .analysis import route_overlap

        return {
            "fastest": fastest_payload,
            "happy": happy_payload,
            "overlap_pct": route_overlap(fastest_route, happy_route),
            "duration_delta_s": happy_payload["duration_s"] - fastest_payload["duration_s"],
        }

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
