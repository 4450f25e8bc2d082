"""Shortest-weight queries and route assembly.

Two engines answer the same question: plain Dijkstra (the exact,
fully tie-broken baseline) and a contraction hierarchy built per
(layer, params) pair for fast repeated queries. Both operate on a
WeightedView; the hierarchy keeps the view it was built from and
refuses to answer once that view's checksum no longer matches.

Tie-breaking in Dijkstra is total: weight, then fewer edges, then the
lexicographically smallest edge-id sequence. That makes mode
equivalences (e.g. lambda = 0 versus fastest) exact statements about
edge sequences rather than just weights.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from . import AffectRouterError
from .geo import GeoPoint, bearing_change_deg, initial_bearing_deg
from .graph import RoadGraph
from .layer import EmotionLayer, LayerError, WeightedView

CH_FORMAT_VERSION = 1
_INF = math.inf


class NoRouteError(AffectRouterError):
    """Target unreachable from source."""


class StaleIndexError(AffectRouterError):
    """Hierarchy no longer matches its weights."""


class IndexFormatError(AffectRouterError):
    """Persisted hierarchy is malformed or belongs elsewhere."""


@dataclass(frozen=True)
class Path:
    edge_ids: Tuple[int, ...]
    total_weight: float
    source: int
    target: int


def _check_view(graph: RoadGraph, view: WeightedView) -> None:
    if view.fingerprint != graph.fingerprint:
        raise ValueError("weights do not match graph")


def dijkstra(graph: RoadGraph, view: WeightedView, s: int, t: int) -> Path:
    """Minimum-weight path with deterministic total tie-breaking."""
    for node in (s, t):
        if node not in graph.nodes:
            raise ValueError(f"unknown node {node}")
    _check_view(graph, view)
    if s == t:
        return Path((), 0.0, s, t)
    w = view.weights
    edges = graph.edges
    out_edges = graph.out_edges
    # Labels are (dist, hops, edge-id path); tuple order is the
    # tie-break order, and extending a label preserves it.
    best = {s: (0.0, 0, ())}
    heap = [(0.0, 0, (), s)]
    while heap:
        dist, hops, path, u = heapq.heappop(heap)
        current = best.get(u)
        if current is not None and (dist, hops, path) > current:
            continue
        if u == t:
            return Path(path, float(dist), s, t)
        for eid in out_edges[u]:
            v = edges[eid].to_node
            cand = (dist + w[eid], hops + 1, path + (eid,))
            old = best.get(v)
            if old is None or cand < old:
                best[v] = cand
                heapq.heappush(heap, cand + (v,))
    raise NoRouteError(f"no route from {s} to {t}")


# ---------------------------------------------------------------------------
# Contraction hierarchy
# ---------------------------------------------------------------------------


class CHIndex:
    """Contraction order plus the shortcut overlay for one WeightedView.

    Arcs 0..n_original-1 are the graph's edges; the rest are shortcuts
    whose (middle, child1, child2) let queries unpack them back to
    original edge ids.
    """

    def __init__(
        self,
        node_ids,
        rank,
        arc_from,
        arc_to,
        arc_weight,
        arc_middle,
        arc_child1,
        arc_child2,
        n_original,
        fingerprint,
        params,
        checksum,
        view: Optional[WeightedView] = None,
    ):
        self.node_ids = tuple(node_ids)
        self.index_of = {nid: i for i, nid in enumerate(self.node_ids)}
        self.rank = np.asarray(rank, dtype=np.int64)
        self.arc_from = np.asarray(arc_from, dtype=np.int64)
        self.arc_to = np.asarray(arc_to, dtype=np.int64)
        self.arc_weight = np.asarray(arc_weight, dtype=np.float64)
        self.arc_middle = np.asarray(arc_middle, dtype=np.int64)
        self.arc_child1 = np.asarray(arc_child1, dtype=np.int64)
        self.arc_child2 = np.asarray(arc_child2, dtype=np.int64)
        self.n_original = n_original
        self.fingerprint = fingerprint
        self.params = params
        self.checksum = checksum
        self.view = view
        for arr in (
            self.rank,
            self.arc_from,
            self.arc_to,
            self.arc_weight,
            self.arc_middle,
            self.arc_child1,
            self.arc_child2,
        ):
            arr.setflags(write=False)
        # Upward adjacency: forward relaxes rank-increasing arcs from
        # their tail, backward walks rank-decreasing arcs from their head.
        n = len(self.node_ids)
        self.fwd_adj: List[List[Tuple[int, float, int]]] = [[] for _ in range(n)]
        self.bwd_adj: List[List[Tuple[int, float, int]]] = [[] for _ in range(n)]
        rank_arr = self.rank
        for a in range(len(self.arc_from)):
            u = int(self.arc_from[a])
            v = int(self.arc_to[a])
            wgt = float(self.arc_weight[a])
            if rank_arr[v] > rank_arr[u]:
                self.fwd_adj[u].append((v, wgt, a))
            else:
                self.bwd_adj[v].append((u, wgt, a))

    @property
    def shortcut_count(self) -> int:
        return len(self.arc_from) - self.n_original


def ch_preprocess(graph: RoadGraph, view: WeightedView) -> CHIndex:
    """Contract all nodes by lazy edge-difference priority, inserting
    witness-checked shortcuts; deterministic for fixed inputs."""
    _check_view(graph, view)
    weights = view.weights
    if len(weights) and (not np.all(np.isfinite(weights)) or weights.min() <= 0):
        raise ValueError("hierarchy preprocessing requires positive finite weights")
    node_ids = list(graph.nodes)
    n = len(node_ids)
    idx_of = {nid: i for i, nid in enumerate(node_ids)}
    m = len(graph.edges)

    arc_from = [idx_of[e.from_node] for e in graph.edges]
    arc_to = [idx_of[e.to_node] for e in graph.edges]
    arc_weight = [float(weights[i]) for i in range(m)]
    arc_middle = [-1] * m
    arc_child1 = [-1] * m
    arc_child2 = [-1] * m

    out_arcs: List[List[int]] = [[] for _ in range(n)]
    in_arcs: List[List[int]] = [[] for _ in range(n)]
    for a in range(m):
        out_arcs[arc_from[a]].append(a)
        in_arcs[arc_to[a]].append(a)

    contracted = [False] * n
    rank = [0] * n
    contracted_neighbors = [0] * n

    def witness_distances(source, targets, cutoff, excluded):
        # Bounded exact Dijkstra in the remaining overlay, skipping the
        # node being contracted. No hop limit; the cutoff bounds work.
        dist = {source: 0.0}
        heap = [(0.0, source)]
        remaining = set(targets)
        while heap and remaining:
            d, x = heapq.heappop(heap)
            if d > cutoff:
                break
            if d > dist.get(x, _INF):
                continue
            remaining.discard(x)
            if not remaining:
                break
            for a in out_arcs[x]:
                y = arc_to[a]
                if contracted[y] or y == excluded:
                    continue
                nd = d + arc_weight[a]
                if nd <= cutoff and nd < dist.get(y, _INF):
                    dist[y] = nd
                    heapq.heappush(heap, (nd, y))
        return dist

    def shortcuts_for(x):
        ins = {}
        for a in in_arcs[x]:
            u = arc_from[a]
            if contracted[u] or u == x:
                continue
            key = (arc_weight[a], a)
            if u not in ins or key < ins[u]:
                ins[u] = key
        outs = {}
        for a in out_arcs[x]:
            v = arc_to[a]
            if contracted[v] or v == x:
                continue
            key = (arc_weight[a], a)
            if v not in outs or key < outs[v]:
                outs[v] = key
        needed = []
        for u in sorted(ins):
            wu, au = ins[u]
            targets = [v for v in outs if v != u]
            if not targets:
                continue
            cutoff = max(wu + outs[v][0] for v in targets)
            dist = witness_distances(u, targets, cutoff, x)
            for v in sorted(targets):
                wv, av = outs[v]
                through = wu + wv
                if dist.get(v, _INF) > through:
                    needed.append((u, v, through, au, av))
        return needed

    def degree(x):
        d = sum(1 for a in in_arcs[x] if not contracted[arc_from[a]] and arc_from[a] != x)
        d += sum(1 for a in out_arcs[x] if not contracted[arc_to[a]] and arc_to[a] != x)
        return d

    def priority(x):
        shortcuts = shortcuts_for(x)
        return len(shortcuts) - degree(x) + contracted_neighbors[x], shortcuts

    heap = []
    for x in range(n):
        prio, _ = priority(x)
        heap.append((prio, x))
    heapq.heapify(heap)

    order = 0
    while heap:
        _, x = heapq.heappop(heap)
        if contracted[x]:
            continue
        prio, shortcuts = priority(x)
        if heap and (prio, x) > heap[0]:
            heapq.heappush(heap, (prio, x))
            continue
        for u, v, wgt, a1, a2 in shortcuts:
            aid = len(arc_from)
            arc_from.append(u)
            arc_to.append(v)
            arc_weight.append(wgt)
            arc_middle.append(x)
            arc_child1.append(a1)
            arc_child2.append(a2)
            out_arcs[u].append(aid)
            in_arcs[v].append(aid)
        contracted[x] = True
        rank[x] = order
        order += 1
        touched = set()
        for a in in_arcs[x]:
            touched.add(arc_from[a])
        for a in out_arcs[x]:
            touched.add(arc_to[a])
        for y in touched:
            if y != x and not contracted[y]:
                contracted_neighbors[y] += 1

    return CHIndex(
        node_ids=node_ids,
        rank=rank,
        arc_from=arc_from,
        arc_to=arc_to,
        arc_weight=arc_weight,
        arc_middle=arc_middle,
        arc_child1=arc_child1,
        arc_child2=arc_child2,
        n_original=m,
        fingerprint=view.fingerprint,
        params=view.params,
        checksum=view.checksum,
        view=view,
    )


def _expand_arc(index: CHIndex, arc: int) -> List[int]:
    result = []
    stack = [arc]
    while stack:
        a = stack.pop()
        if a < index.n_original:
            result.append(a)
        else:
            # Children pushed right-first so originals come out in order.
            stack.append(int(index.arc_child2[a]))
            stack.append(int(index.arc_child1[a]))
    return result


def _upward_search(adj, start):
    dist = {start: 0.0}
    parent: Dict[int, Tuple[int, int]] = {}
    heap = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, _INF):
            continue
        for v, w, a in adj[u]:
            nd = d + w
            if nd < dist.get(v, _INF):
                dist[v] = nd
                parent[v] = (u, a)
                heapq.heappush(heap, (nd, v))
    return dist, parent


def ch_query(index: CHIndex, s: int, t: int) -> Path:
    """Bidirectional upward query; the returned path holds only
    original edge ids."""
    if index.view is not None and index.view.is_stale():
        raise StaleIndexError("fingerprint mismatch: weights changed after preprocessing")
    for node in (s, t):
        if node not in index.index_of:
            raise ValueError(f"unknown node {node}")
    if s == t:
        return Path((), 0.0, s, t)
    si = index.index_of[s]
    ti = index.index_of[t]
    dist_f, parent_f = _upward_search(index.fwd_adj, si)
    dist_b, parent_b = _upward_search(index.bwd_adj, ti)
    best = _INF
    meet = -1
    for node, df in dist_f.items():
        db = dist_b.get(node)
        if db is None:
            continue
        total = df + db
        if total < best or (total == best and node < meet):
            best = total
            meet = node
    if meet < 0:
        raise NoRouteError(f"no route from {s} to {t}")
    arcs_forward = []
    node = meet
    while node != si:
        prev, a = parent_f[node]
        arcs_forward.append(a)
        node = prev
    arcs_forward.reverse()
    arcs_backward = []
    node = meet
    while node != ti:
        prev, a = parent_b[node]
        arcs_backward.append(a)
        node = prev
    edge_ids: List[int] = []
    for a in arcs_forward + arcs_backward:
        edge_ids.extend(_expand_arc(index, a))
    total = float(sum(index.arc_weight[e] for e in edge_ids))
    return Path(tuple(edge_ids), total, s, t)


def save_ch_index(index: CHIndex, path) -> None:
    """Persist the hierarchy as a versioned npz sidecar."""
    meta = {
        "format_version": CH_FORMAT_VERSION,
        "fingerprint": index.fingerprint,
        "mode": index.params.mode,
        "lam": index.params.lam,
        "checksum": index.checksum,
        "n_original": index.n_original,
        "node_count": len(index.node_ids),
    }
    np.savez_compressed(
        path,
        meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
        node_ids=np.asarray(index.node_ids, dtype=np.int64),
        rank=index.rank,
        arc_from=index.arc_from,
        arc_to=index.arc_to,
        arc_weight=index.arc_weight,
        arc_middle=index.arc_middle,
        arc_child1=index.arc_child1,
        arc_child2=index.arc_child2,
    )


def load_ch_index(path, graph: RoadGraph, view: WeightedView) -> CHIndex:
    """Load a persisted hierarchy; it must match the graph and view."""
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            arrays = {k: data[k] for k in data.files if k != "meta"}
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise IndexFormatError(f"cannot read hierarchy file {path}: {exc}") from exc
    if meta.get("format_version") != CH_FORMAT_VERSION:
        raise IndexFormatError(f"unsupported hierarchy format_version {meta.get('format_version')!r}")
    if meta.get("fingerprint") != graph.fingerprint or meta.get("fingerprint") != view.fingerprint:
        raise IndexFormatError("hierarchy does not match graph")
    if meta.get("mode") != view.params.mode or meta.get("lam") != view.params.lam:
        raise IndexFormatError("hierarchy was built for different weight parameters")
    if meta.get("checksum") != view.checksum:
        raise StaleIndexError("hierarchy was built from different weights")
    return CHIndex(
        node_ids=arrays["node_ids"].tolist(),
        rank=arrays["rank"],
        arc_from=arrays["arc_from"],
        arc_to=arrays["arc_to"],
        arc_weight=arrays["arc_weight"],
        arc_middle=arrays["arc_middle"],
        arc_child1=arrays["arc_child1"],
        arc_child2=arrays["arc_child2"],
        n_original=meta["n_original"],
        fingerprint=meta["fingerprint"],
        params=view.params,
        checksum=meta["checksum"],
        view=view,
    )


# ---------------------------------------------------------------------------
# Route assembly
# ---------------------------------------------------------------------------


class RouteEdge(NamedTuple):
    edge_id: int
    e: float
    c: float
    road_type: str
    base_time_s: float
    length_m: float


@dataclass(frozen=True)
class Route:
    path: Path
    geometry: Tuple[GeoPoint, ...]
    duration_s: float
    distance_m: float
    mean_happiness: float
    per_edge: Tuple[RouteEdge, ...]


def assemble_route(path: Path, graph: RoadGraph, layer: EmotionLayer) -> Route:
    """Materialize geometry, duration, distance, and the time-weighted
    mean happiness for a path. Empty path: zero-length route with
    mean_happiness 1 by convention."""
    if layer.fingerprint != graph.fingerprint:
        raise LayerError("layer does not match graph")
    if not path.edge_ids:
        return Route(path, (), 0.0, 0.0, 1.0, ())
    geometry: List[GeoPoint] = []
    duration = 0.0
    distance = 0.0
    weighted_e = 0.0
    per_edge = []
    previous_end = path.source
    for eid in path.edge_ids:
        edge = graph.edges[eid]
        if edge.from_node != previous_end:
            raise ValueError(f"edge {eid} does not continue the path at node {previous_end}")
        previous_end = edge.to_node
        entry = layer.entries[eid]
        duration += entry.base_time_s
        distance += edge.length_m
        weighted_e += entry.e * entry.base_time_s
        geometry.extend(edge.geometry if not geometry else edge.geometry[1:])
        per_edge.append(
            RouteEdge(eid, entry.e, entry.c, edge.road_type, entry.base_time_s, edge.length_m)
        )
    if previous_end != path.target:
        raise ValueError("path does not end at its target node")
    return Route(
        path=path,
        geometry=tuple(geometry),
        duration_s=duration,
        distance_m=distance,
        mean_happiness=weighted_e / duration,
        per_edge=tuple(per_edge),
    )


@dataclass(frozen=True)
class TurnInstruction:
    kind: str
    node_id: int
    road_type: str


def _classify_turn(delta: float) -> Optional[str]:
    magnitude = abs(delta)
    if magnitude < 30.0:
        return None
    if magnitude <= 120.0:
        return "turn_right" if delta > 0 else "turn_left"
    if magnitude <= 160.0:
        return "sharp_right" if delta > 0 else "sharp_left"
    return "u_turn"


def turn_instructions(route: Route, graph: RoadGraph) -> List[TurnInstruction]:
    """Depart/turn/arrive list; near-straight transitions are dropped."""
    if not route.path.edge_ids:
        raise ValueError("route is empty")
    edges = [graph.edges[eid] for eid in route.path.edge_ids]
    out = [TurnInstruction("depart", route.path.source, edges[0].road_type)]
    for previous, nxt in zip(edges, edges[1:]):
        bearing_in = initial_bearing_deg(previous.geometry[-2], previous.geometry[-1])
        bearing_out = initial_bearing_deg(nxt.geometry[0], nxt.geometry[1])
        kind = _classify_turn(bearing_change_deg(bearing_in, bearing_out))
        if kind is not None:
            out.append(TurnInstruction(kind, previous.to_node, nxt.road_type))
    out.append(TurnInstruction("arrive", route.path.target, edges[-1].road_type))
    return out
