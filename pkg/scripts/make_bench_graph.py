#!/usr/bin/env python3
"""Regenerate demo/bench_graph.npz, the large synthetic grid used for
latency measurements: a seeded 75x75 jittered street grid, about 22k
directed edges at 200 m spacing. Rerunning writes identical bytes."""

import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from affect_router.geo import GeoPoint, polyline_length_m  # noqa: E402
from affect_router.graph import RoadEdge, RoadGraph, RoadNode, save_graph  # noqa: E402

ROWS = COLS = 75
SPACING = 0.002  # degrees, about 220 m
LAT0, LON0 = 48.0, 11.0
SEED = 424242
P_DROP = 0.04


def street_kind(index: int):
    if index % 10 == 5:
        return "primary", 60.0, 2
    if index % 10 == 0:
        return "secondary", 60.0, 2
    if index % 5 == 2:
        return "tertiary", 50.0, 1
    return "residential", 30.0, 1


def main() -> None:
    rng = random.Random(SEED)
    ids = {}
    nodes = []
    nid = 0
    for r in range(ROWS):
        for c in range(COLS):
            lat = LAT0 + (r + rng.uniform(-0.25, 0.25)) * SPACING
            lon = LON0 + (c + rng.uniform(-0.25, 0.25)) * SPACING
            ids[(r, c)] = nid
            nodes.append(RoadNode(nid, GeoPoint(lat, lon)))
            nid += 1
    points = {n.id: n.point for n in nodes}

    edges = []

    def add(u, v, road_type, speed, lanes):
        geometry = (points[u], points[v])
        edges.append(
            RoadEdge(
                id=len(edges),
                from_node=u,
                to_node=v,
                geometry=geometry,
                length_m=polyline_length_m(geometry),
                road_type=road_type,
                max_speed_kmh=speed,
                n_lanes=lanes,
            )
        )

    for r in range(ROWS):
        for c in range(COLS):
            u = ids[(r, c)]
            if c + 1 < COLS and rng.random() >= P_DROP:
                road_type, speed, lanes = street_kind(r)
                v = ids[(r, c + 1)]
                add(u, v, road_type, speed, lanes)
                add(v, u, road_type, speed, lanes)
            if r + 1 < ROWS and rng.random() >= P_DROP:
                road_type, speed, lanes = street_kind(c)
                v = ids[(r + 1, c)]
                add(u, v, road_type, speed, lanes)
                add(v, u, road_type, speed, lanes)

    graph = RoadGraph(nodes, edges)
    out = ROOT / "demo" / "bench_graph.npz"
    save_graph(graph, out)
    print(f"nodes: {len(graph.nodes)}  edges: {len(graph.edges)}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
