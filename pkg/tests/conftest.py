import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from affect_router.geo import GeoPoint, polyline_length_m  # noqa: E402
from affect_router.graph import RoadEdge, RoadGraph, RoadNode  # noqa: E402


def mk_graph(node_points, edge_specs):
    """Build a RoadGraph from {node_id: (lat, lon)} and (from, to, kwargs) specs.

    Geometry defaults to the straight two-point segment; length is derived
    from the geometry unless given.
    """
    nodes = [RoadNode(nid, GeoPoint(lat, lon)) for nid, (lat, lon) in node_points.items()]
    points = {n.id: n.point for n in nodes}
    edges = []
    for i, (u, v, kw) in enumerate(edge_specs):
        kw = dict(kw)
        geometry = tuple(kw.pop("geometry", (points[u], points[v])))
        length = kw.pop("length_m", polyline_length_m(geometry))
        edges.append(
            RoadEdge(
                id=i,
                from_node=u,
                to_node=v,
                geometry=geometry,
                length_m=length,
                road_type=kw.pop("road_type", "residential"),
                max_speed_kmh=kw.pop("max_speed_kmh", 30.0),
                n_lanes=kw.pop("n_lanes", 1),
            )
        )
    return RoadGraph(nodes, edges)


def grid_graph(rows, cols, seed, p_drop=0.1, spacing=0.002):
    """Jittered road-like grid with bidirectional edges, some dropped."""
    import random

    rng = random.Random(seed)
    ids = {}
    points = {}
    nid = 0
    for r in range(rows):
        for c in range(cols):
            lat = 48.0 + (r + rng.uniform(-0.25, 0.25)) * spacing
            lon = 11.0 + (c + rng.uniform(-0.25, 0.25)) * spacing
            ids[(r, c)] = nid
            points[nid] = (lat, lon)
            nid += 1
    specs = []
    for (r, c), u in ids.items():
        for dr, dc in ((0, 1), (1, 0)):
            if (r + dr, c + dc) in ids and rng.random() >= p_drop:
                v = ids[(r + dr, c + dc)]
                specs.append((u, v, {}))
                specs.append((v, u, {}))
    return mk_graph(points, specs)


def mk_view(graph, weights=None, seed=0, mode="fastest", lam=0.0):
    """WeightedView over explicit or seeded-random positive weights."""
    import random
    import zlib

    import numpy as np

    from affect_router.layer import WeightParams, WeightedView

    if weights is None:
        rng = random.Random(seed)
        weights = [rng.uniform(1.0, 10.0) for _ in graph.edges]
    arr = np.asarray(weights, dtype=np.float64)
    arr.setflags(write=False)
    return WeightedView(
        fingerprint=graph.fingerprint,
        params=WeightParams(mode, lam),
        weights=arr,
        checksum=zlib.adler32(arr.tobytes()),
    )
