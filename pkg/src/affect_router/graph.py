"""Directed road graph: types, native (de)serialization, lookups, travel times.

A RoadGraph is immutable after construction and safe to share across
threads. Edge ids are dense (0..n-1) so per-edge data can live in flat
arrays; node ids are stable 64-bit identifiers (OSM node ids survive
ingestion).
"""

from __future__ import annotations

import gzip
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

from . import AffectRouterError
from .geo import GeoPoint, haversine, polyline_length_m

ROAD_TYPES = (
    "residential",
    "living_street",
    "primary",
    "secondary",
    "tertiary",
    "motorway",
    "trunk",
    "unclassified",
    "service",
)

# Fallback speeds by road type (km/h) used when a way carries no maxspeed tag.
DEFAULT_SPEEDS_KMH = {
    "motorway": 120.0,
    "trunk": 100.0,
    "primary": 80.0,
    "secondary": 70.0,
    "tertiary": 60.0,
    "residential": 30.0,
    "living_street": 10.0,
    "service": 15.0,
    "unclassified": 50.0,
}

# Effective speed never drops below this under reported congestion.
MIN_EFFECTIVE_SPEED_KMH = 5.0

GRAPH_FORMAT_VERSION = 1

LENGTH_REL_TOL = 1e-6


class GraphFormatError(AffectRouterError):
    """Raised when a native graph file violates the format contract."""


@dataclass(frozen=True)
class RoadNode:
    id: int
    point: GeoPoint


@dataclass(frozen=True)
class RoadEdge:
    id: int
    from_node: int
    to_node: int
    geometry: tuple  # tuple[GeoPoint, ...], >= 2 points
    length_m: float
    road_type: str
    max_speed_kmh: Optional[float]  # None reads as "unknown"
    n_lanes: Optional[int]

    def __post_init__(self):
        if len(self.geometry) < 2:
            raise ValueError(f"edge {self.id}: geometry needs >= 2 points")
        if self.road_type not in ROAD_TYPES:
            raise ValueError(f"edge {self.id}: unknown road_type {self.road_type!r}")
        if self.max_speed_kmh is not None and not self.max_speed_kmh > 0:
            raise ValueError(f"edge {self.id}: max_speed_kmh must be positive")
        if self.n_lanes is not None and self.n_lanes < 1:
            raise ValueError(f"edge {self.id}: n_lanes must be positive")


class RoadGraph:
    """Immutable directed road graph with per-node adjacency lists."""

    def __init__(self, nodes: Iterable[RoadNode], edges: Iterable[RoadEdge]):
        node_list = sorted(nodes, key=lambda n: n.id)
        self.nodes = {n.id: n for n in node_list}
        if len(self.nodes) != len(node_list):
            raise ValueError("duplicate node id")
        self.edges = tuple(sorted(edges, key=lambda e: e.id))
        for i, e in enumerate(self.edges):
            if e.id != i:
                raise ValueError(f"edge ids must be dense 0..n-1, got {e.id} at {i}")
            self._validate_edge(e)
        out: dict = {nid: [] for nid in self.nodes}
        inc: dict = {nid: [] for nid in self.nodes}
        for e in self.edges:
            out[e.from_node].append(e.id)
            inc[e.to_node].append(e.id)
        self.out_edges = {nid: tuple(eids) for nid, eids in out.items()}
        self.in_edges = {nid: tuple(eids) for nid, eids in inc.items()}
        self._fingerprint: Optional[str] = None

    def _validate_edge(self, e: RoadEdge) -> None:
        for endpoint in (e.from_node, e.to_node):
            if endpoint not in self.nodes:
                raise ValueError(f"edge {e.id}: endpoint {endpoint} not in graph")
        if e.geometry[0] != self.nodes[e.from_node].point:
            raise ValueError(f"edge {e.id}: geometry start does not match from-node")
        if e.geometry[-1] != self.nodes[e.to_node].point:
            raise ValueError(f"edge {e.id}: geometry end does not match to-node")
        expect = polyline_length_m(e.geometry)
        if expect == 0.0:
            ok = e.length_m == 0.0
        else:
            ok = abs(e.length_m - expect) <= LENGTH_REL_TOL * expect
        if not ok:
            raise ValueError(
                f"edge {e.id}: length_m {e.length_m} inconsistent with geometry ({expect})"
            )

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def fingerprint(self) -> str:
        """64-bit hex digest of the canonical native serialization."""
        if self._fingerprint is None:
            digest = hashlib.sha256(canonical_graph_bytes(self)).hexdigest()
            self._fingerprint = digest[:16]
        return self._fingerprint

    def bounding_box(self):
        """(min_lat, min_lon, max_lat, max_lon) over all nodes."""
        lats = [n.point.lat for n in self.nodes.values()]
        lons = [n.point.lon for n in self.nodes.values()]
        return min(lats), min(lons), max(lats), max(lons)


def nearest_node(graph: RoadGraph, p: GeoPoint) -> RoadNode:
    """Node minimizing haversine distance to p; ties go to the smallest id."""
    if not graph.nodes:
        raise ValueError("empty graph")
    best = min(graph.nodes.values(), key=lambda n: (haversine(n.point, p), n.id))
    return best


def edge_travel_time(edge: RoadEdge, traffic=None) -> float:
    """Base travel time of an edge in seconds.

    With traffic info present the effective speed is the reported freeflow
    speed minus the congestion reduction, floored at 5 km/h and capped at
    the legal maximum. Without traffic the legal maximum applies.
    """
    if edge.max_speed_kmh is None:
        raise ValueError(f"edge {edge.id}: max_speed unresolved")
    if traffic is None:
        speed = edge.max_speed_kmh
    else:
        speed = min(
            edge.max_speed_kmh,
            max(MIN_EFFECTIVE_SPEED_KMH, traffic.freeflow_speed - traffic.reducedspeed),
        )
    if edge.length_m == 0.0:
        return 0.0
    return edge.length_m / (speed / 3.6)


# ---------------------------------------------------------------------------
# Native file format: JSON (optionally gzipped), format_version 1.
# ---------------------------------------------------------------------------


def _speed_json(v):
    return "unknown" if v is None else v


def _lanes_json(v):
    return "unknown" if v is None else v


def graph_to_dict(graph: RoadGraph) -> dict:
    return {
        "format_version": GRAPH_FORMAT_VERSION,
        "nodes": [
            {"id": n.id, "point": {"lat": n.point.lat, "lon": n.point.lon}}
            for n in graph.nodes.values()
        ],
        "edges": [
            {
                "id": e.id,
                "from": e.from_node,
                "to": e.to_node,
                "geometry": [{"lat": p.lat, "lon": p.lon} for p in e.geometry],
                "length_m": e.length_m,
                "road_type": e.road_type,
                "max_speed_kmh": _speed_json(e.max_speed_kmh),
                "n_lanes": _lanes_json(e.n_lanes),
            }
            for e in graph.edges
        ],
    }


def canonical_graph_bytes(graph: RoadGraph) -> bytes:
    """Deterministic serialization; identical graphs yield identical bytes."""
    return json.dumps(graph_to_dict(graph), sort_keys=True, separators=(",", ":")).encode()


def save_graph(graph: RoadGraph, path) -> None:
    """Write the canonical native file; a .gz suffix enables gzip (mtime=0)."""
    payload = canonical_graph_bytes(graph)
    path = str(path)
    if path.endswith(".gz"):
        with open(path, "wb") as raw:
            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
                f.write(payload)
    else:
        with open(path, "wb") as f:
            f.write(payload)


def graph_from_dict(doc: dict) -> RoadGraph:
    if not isinstance(doc, dict):
        raise GraphFormatError("graph file must contain a JSON object")
    if doc.get("format_version") != GRAPH_FORMAT_VERSION:
        raise GraphFormatError(f"unsupported format_version {doc.get('format_version')!r}")
    try:
        nodes = [
            RoadNode(int(n["id"]), GeoPoint(float(n["point"]["lat"]), float(n["point"]["lon"])))
            for n in doc["nodes"]
        ]
        edges = []
        for rec in doc["edges"]:
            speed = rec["max_speed_kmh"]
            lanes = rec["n_lanes"]
            edges.append(
                RoadEdge(
                    id=int(rec["id"]),
                    from_node=int(rec["from"]),
                    to_node=int(rec["to"]),
                    geometry=tuple(
                        GeoPoint(float(p["lat"]), float(p["lon"])) for p in rec["geometry"]
                    ),
                    length_m=float(rec["length_m"]),
                    road_type=rec["road_type"],
                    max_speed_kmh=None if speed == "unknown" else float(speed),
                    n_lanes=None if lanes == "unknown" else int(lanes),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"malformed graph record: {exc}") from exc
    try:
        return RoadGraph(nodes, edges)
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from exc


def load_graph(path) -> RoadGraph:
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    try:
        with opener(path, "rb") as f:
            doc = json.loads(f.read().decode())
    except (OSError, ValueError) as exc:
        raise GraphFormatError(f"cannot read graph file {path}: {exc}") from exc
    return graph_from_dict(doc)
