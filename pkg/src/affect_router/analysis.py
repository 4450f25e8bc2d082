"""Route comparison statistics and the simulation runner.

Covers the geometry metrics (circumradius-based curviness, directed
edge overlap), the statistics toolbox (Mann-Whitney U with exact and
normal-approximation branches, simple OLS with R^2/BIC), seeded OD pair
sampling, and the batch simulation that compares fastest against happy
routes over many pairs.
"""

from __future__ import annotations

import json
import math
import os
import random
from collections import deque
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from scipy import stats

from .context import ProviderSet
from .geo import GeoPoint, haversine, midpoint
from .graph import DEFAULT_SPEEDS_KMH, RoadGraph
from .layer import EmotionLayer, WeightParams, apply_weights
from .routing import NoRouteError, Route, assemble_route, dijkstra

DEGENERACY_TOL = 1e-12
BIC_CONVENTION = "n*ln(RSS/n) + k*ln(n), k=2"


def circumradius(a: float, b: float, c: float) -> float:
    """Radius of the circle through a triangle with side lengths a, b, c;
    infinite for degenerate (collinear) triangles."""
    if a < 0 or b < 0 or c < 0:
        raise ValueError("side lengths must be non-negative")
    factors = (b + c - a, c + a - b, a + b - c)
    if any(f < -DEGENERACY_TOL for f in factors):
        raise ValueError(f"triangle inequality violated for sides ({a}, {b}, {c})")
    product = (a + b + c) * factors[0] * factors[1] * factors[2]
    if a + b + c <= DEGENERACY_TOL or any(f <= DEGENERACY_TOL for f in factors):
        return math.inf
    return a * b * c / math.sqrt(product)


def polyline_curviness(points: Sequence[GeoPoint]) -> float:
    """Length-weighted mean reciprocal circumradius over consecutive
    point triples, in 1/m. Fewer than 3 points: 0."""
    if len(points) < 3:
        return 0.0
    weighted = 0.0
    total = 0.0
    for p0, p1, p2 in zip(points, points[1:], points[2:]):
        a = haversine(p0, p1)
        b = haversine(p1, p2)
        c = haversine(p0, p2)
        try:
            radius = circumradius(a, b, c)
        except ValueError:
            # Rounding on near-collinear triples; treat as straight.
            radius = math.inf
        kappa = 0.0 if math.isinf(radius) else 1.0 / radius
        span = (a + b) / 2.0
        weighted += span * kappa
        total += span
    return weighted / total if total > 0 else 0.0


def route_curviness(route: Route) -> float:
    return polyline_curviness(route.geometry)


def route_overlap(r1: Route, r2: Route) -> float:
    """Percent of shared directed-edge length relative to the longer
    route. Either route empty: 0.

    All three sums run over edge ids in ascending order so that two
    identical routes come out at exactly 100 regardless of path order.
    """
    if not r1.path.edge_ids or not r2.path.edge_ids:
        return 0.0
    lengths1 = {pe.edge_id: pe.length_m for pe in r1.per_edge}
    lengths2 = {pe.edge_id: pe.length_m for pe in r2.per_edge}
    shared = sorted(set(lengths1) & set(lengths2))
    length1 = sum(lengths1[e] for e in sorted(lengths1))
    length2 = sum(lengths2[e] for e in sorted(lengths2))
    denominator = max(length1, length2)
    if not shared or denominator <= 0:
        return 0.0
    return 100.0 * (sum(lengths1[e] for e in shared) / denominator)


@dataclass(frozen=True)
class MwuResult:
    u_statistic: float
    p_value: float
    method: str
    n1: int
    n2: int


@lru_cache(maxsize=None)
def _u_counts(m: int, n: int) -> Tuple[int, ...]:
    """counts[s] = number of rank arrangements of m x's and n y's with
    exactly s (x above y) pairs."""
    if m == 0 or n == 0:
        return (1,)
    with_x_on_top = _u_counts(m - 1, n)
    with_y_on_top = _u_counts(m, n - 1)
    out = [0] * (m * n + 1)
    for s, count in enumerate(with_x_on_top):
        out[s + n] += count
    for s, count in enumerate(with_y_on_top):
        out[s] += count
    return tuple(out)


EXACT_MWU_LIMIT = 16


def mann_whitney_u(x: Sequence[float], y: Sequence[float]) -> MwuResult:
    """Two-sided Mann-Whitney U. Exact null enumeration for small
    tie-free samples, else normal approximation with tie and continuity
    corrections."""
    n1, n2 = len(x), len(y)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    u = 0.0
    for xv in x:
        for yv in y:
            if xv > yv:
                u += 1.0
            elif xv == yv:
                u += 0.5
    combined = sorted(list(x) + list(y))
    has_ties = any(a == b for a, b in zip(combined, combined[1:]))
    if n1 + n2 <= EXACT_MWU_LIMIT and not has_ties:
        counts = _u_counts(n1, n2)
        total = sum(counts)
        u_int = int(round(u))
        lower = sum(counts[: u_int + 1]) / total
        upper = sum(counts[u_int:]) / total
        p = min(1.0, 2.0 * min(lower, upper))
        return MwuResult(u, p, "exact", n1, n2)
    big_n = n1 + n2
    mu = n1 * n2 / 2.0
    tie_term = 0.0
    run = 1
    for a, b in zip(combined, combined[1:]):
        if a == b:
            run += 1
        else:
            tie_term += run**3 - run
            run = 1
    tie_term += run**3 - run
    variance = n1 * n2 / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if variance <= 0:
        return MwuResult(u, 1.0, "normal_approx", n1, n2)
    sd = math.sqrt(variance)
    if u > mu:
        z = (u - mu - 0.5) / sd
    elif u < mu:
        z = (u - mu + 0.5) / sd
    else:
        z = 0.0
    p = 2.0 * float(stats.norm.sf(abs(z)))
    p = min(1.0, max(p, 5e-324))
    return MwuResult(u, p, "normal_approx", n1, n2)


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    bic: float
    slope_p_value: float
    n: int


def ols_fit(x: Sequence[float], y: Sequence[float]) -> RegressionResult:
    """Simple least squares y = intercept + slope*x with R^2, BIC
    (convention in BIC_CONVENTION), and the slope's t-test p-value."""
    n = len(x)
    if n != len(y):
        raise ValueError("x and y must have equal length")
    if n < 2:
        raise ValueError("need at least 2 observations")
    mean_x = sum(x) / n
    mean_y = sum(y) / n
    sxx = sum((xv - mean_x) ** 2 for xv in x)
    if sxx == 0:
        raise ValueError("degenerate regressor: x is constant")
    sxy = sum((xv - mean_x) * (yv - mean_y) for xv, yv in zip(x, y))
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    rss = sum((yv - (intercept + slope * xv)) ** 2 for xv, yv in zip(x, y))
    tss = sum((yv - mean_y) ** 2 for yv in y)
    r_squared = 0.0 if tss == 0 else 1.0 - rss / tss
    bic = -math.inf if rss == 0 else n * math.log(rss / n) + 2.0 * math.log(n)
    if n < 3:
        p_value = math.nan
    else:
        se_sq = rss / (n - 2) / sxx
        if se_sq <= 0:
            p_value = 0.0 if slope != 0 else 1.0
        else:
            t = slope / math.sqrt(se_sq)
            p_value = 2.0 * float(stats.t.sf(abs(t), n - 2))
    return RegressionResult(slope, intercept, r_squared, bic, p_value, n)


@dataclass(frozen=True)
class OdPair:
    origin: int
    destination: int


def _reachable_from(graph: RoadGraph, origin: int) -> frozenset:
    seen = {origin}
    queue = deque([origin])
    while queue:
        u = queue.popleft()
        for eid in graph.out_edges[u]:
            v = graph.edges[eid].to_node
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return frozenset(seen)


def sample_od_pairs(
    graph: RoadGraph,
    n: int,
    rng_seed: int,
    min_separation_m: float = 1000.0,
) -> List[OdPair]:
    """Seeded uniform node pairs, rejecting close or unreachable ones.

    Budget: 50*n draws; exhausting it raises with the rejection tally.
    """
    if n == 0:
        return []
    rng = random.Random(rng_seed)
    node_ids = list(graph.nodes)
    if len(node_ids) < 2:
        raise ValueError("graph has fewer than 2 nodes")
    points = {nid: graph.nodes[nid].point for nid in node_ids}
    reachable: Dict[int, frozenset] = {}
    pairs: List[OdPair] = []
    budget = 50 * n
    rejected_identical = rejected_close = rejected_unreachable = 0
    for _ in range(budget):
        if len(pairs) == n:
            break
        origin = rng.choice(node_ids)
        destination = rng.choice(node_ids)
        if origin == destination:
            rejected_identical += 1
            continue
        if haversine(points[origin], points[destination]) < min_separation_m:
            rejected_close += 1
            continue
        if origin not in reachable:
            reachable[origin] = _reachable_from(graph, origin)
        if destination not in reachable[origin]:
            rejected_unreachable += 1
            continue
        pairs.append(OdPair(origin, destination))
    if len(pairs) < n:
        raise ValueError(
            f"sampled only {len(pairs)} of {n} pairs in {budget} draws "
            f"(identical {rejected_identical}, too close {rejected_close}, "
            f"unreachable {rejected_unreachable})"
        )
    return pairs


def roadtype_shares(route: Route) -> Dict[str, float]:
    """Fraction of route travel time spent on each road type."""
    if not route.per_edge:
        raise ValueError("route is empty")
    shares: Dict[str, float] = {}
    for pe in route.per_edge:
        shares[pe.road_type] = shares.get(pe.road_type, 0.0) + pe.base_time_s
    return {k: v / route.duration_s for k, v in shares.items()}


@dataclass(frozen=True)
class PairMetrics:
    origin: int
    destination: int
    fastest_s: float
    happy_s: float
    overlap_pct: float
    identical: bool
    happy_mean_e: float
    fastest_mean_e: float
    happy_curv: float
    fastest_curv: float
    happy_green: float
    fastest_green: float
    happy_maxspeed: float
    fastest_maxspeed: float
    happy_freeflow: float
    fastest_freeflow: float


@dataclass(frozen=True)
class SimulationReport:
    mode: str
    lam: float
    seed: int
    n_requested: int
    n_accepted: int
    n_skipped: int
    rows: Tuple[PairMetrics, ...]
    regression: Optional[RegressionResult]
    mean_overlap_pct: float
    identical_fraction: float
    roadtype_table: Dict[str, Dict[str, float]]
    characteristics: Dict[str, Dict[str, float]]
    bic_convention: str = BIC_CONVENTION


class _EdgeSampler:
    """Per-edge green/freeflow lookups via the provider set, cached."""

    def __init__(self, graph: RoadGraph, providers: Optional[ProviderSet]):
        self.graph = graph
        self.providers = providers
        self.cache: Dict[int, Tuple[float, float]] = {}

    def green_freeflow(self, edge_id: int) -> Tuple[float, float]:
        if edge_id not in self.cache:
            if self.providers is None:
                self.cache[edge_id] = (math.nan, math.nan)
            else:
                mid = midpoint(self.graph.edges[edge_id].geometry)
                green = self.providers.green.green_at(mid)
                freeflow = self.providers.traffic.traffic_at(mid).freeflow_speed
                self.cache[edge_id] = (green, freeflow)
        return self.cache[edge_id]


def _time_weighted(route: Route, value_of) -> float:
    if route.duration_s <= 0:
        return math.nan
    acc = 0.0
    for pe in route.per_edge:
        acc += value_of(pe) * pe.base_time_s
    return acc / route.duration_s


def _route_metrics(route: Route, graph: RoadGraph, sampler: _EdgeSampler):
    green = _time_weighted(route, lambda pe: sampler.green_freeflow(pe.edge_id)[0])
    freeflow = _time_weighted(route, lambda pe: sampler.green_freeflow(pe.edge_id)[1])

    def speed_of(pe):
        edge = graph.edges[pe.edge_id]
        if edge.max_speed_kmh is not None:
            return edge.max_speed_kmh
        return DEFAULT_SPEEDS_KMH[edge.road_type]

    maxspeed = _time_weighted(route, speed_of)
    return route_curviness(route), green, freeflow, maxspeed


def _mwu_or_nan(happy: List[float], fastest: List[float]) -> Dict[str, float]:
    clean_h = [v for v in happy if not math.isnan(v)]
    clean_f = [v for v in fastest if not math.isnan(v)]
    entry = {
        "happy_mean": sum(clean_h) / len(clean_h) if clean_h else math.nan,
        "fastest_mean": sum(clean_f) / len(clean_f) if clean_f else math.nan,
    }
    if clean_h and clean_f:
        result = mann_whitney_u(clean_h, clean_f)
        entry["mwu_p"] = result.p_value
    else:
        entry["mwu_p"] = math.nan
    return entry


def run_simulation(
    graph: RoadGraph,
    layer: EmotionLayer,
    params: WeightParams,
    n: int,
    seed: int,
    providers: Optional[ProviderSet] = None,
    min_separation_m: float = 1000.0,
) -> SimulationReport:
    """Compare fastest and happy routes over n seeded OD pairs.

    Green and freeflow columns need a provider set; without one they are
    reported as nan. Routing failures skip the pair and are counted.
    """
    fastest_view = apply_weights(graph, layer, WeightParams("fastest", 0.0))
    happy_view = apply_weights(graph, layer, params)
    pairs = sample_od_pairs(graph, n, seed, min_separation_m)
    sampler = _EdgeSampler(graph, providers)
    rows: List[PairMetrics] = []
    happy_share_rows: List[Dict[str, float]] = []
    fastest_share_rows: List[Dict[str, float]] = []
    skipped = 0
    for pair in pairs:
        try:
            fast_path = dijkstra(graph, fastest_view, pair.origin, pair.destination)
            happy_path = dijkstra(graph, happy_view, pair.origin, pair.destination)
        except NoRouteError:
            skipped += 1
            continue
        fast_route = assemble_route(fast_path, graph, layer)
        happy_route = assemble_route(happy_path, graph, layer)
        happy_share_rows.append(roadtype_shares(happy_route) if happy_route.per_edge else {})
        fastest_share_rows.append(roadtype_shares(fast_route) if fast_route.per_edge else {})
        h_curv, h_green, h_free, h_speed = _route_metrics(happy_route, graph, sampler)
        f_curv, f_green, f_free, f_speed = _route_metrics(fast_route, graph, sampler)
        rows.append(
            PairMetrics(
                origin=pair.origin,
                destination=pair.destination,
                fastest_s=fast_route.duration_s,
                happy_s=happy_route.duration_s,
                overlap_pct=route_overlap(fast_route, happy_route),
                identical=fast_path.edge_ids == happy_path.edge_ids,
                happy_mean_e=happy_route.mean_happiness,
                fastest_mean_e=fast_route.mean_happiness,
                happy_curv=h_curv,
                fastest_curv=f_curv,
                happy_green=h_green,
                fastest_green=f_green,
                happy_maxspeed=h_speed,
                fastest_maxspeed=f_speed,
                happy_freeflow=h_free,
                fastest_freeflow=f_free,
            )
        )
    regression = None
    if len(rows) >= 2:
        x = [r.fastest_s / 60.0 for r in rows]
        y = [r.happy_s / 60.0 for r in rows]
        if max(x) > min(x):
            regression = ols_fit(x, y)
    mean_overlap = sum(r.overlap_pct for r in rows) / len(rows) if rows else math.nan
    identical_fraction = (
        sum(1 for r in rows if r.identical) / len(rows) if rows else math.nan
    )
    roadtype_table = _roadtype_table(happy_share_rows, fastest_share_rows)
    characteristics = {
        "happiness": _mwu_or_nan(
            [r.happy_mean_e for r in rows], [r.fastest_mean_e for r in rows]
        ),
        "curviness": _mwu_or_nan(
            [r.happy_curv for r in rows], [r.fastest_curv for r in rows]
        ),
        "greenness": _mwu_or_nan(
            [r.happy_green for r in rows], [r.fastest_green for r in rows]
        ),
        "max_speed": _mwu_or_nan(
            [r.happy_maxspeed for r in rows], [r.fastest_maxspeed for r in rows]
        ),
        "freeflow": _mwu_or_nan(
            [r.happy_freeflow for r in rows], [r.fastest_freeflow for r in rows]
        ),
    }
    return SimulationReport(
        mode=params.mode,
        lam=params.lam,
        seed=seed,
        n_requested=n,
        n_accepted=len(rows),
        n_skipped=skipped,
        rows=tuple(rows),
        regression=regression,
        mean_overlap_pct=mean_overlap,
        identical_fraction=identical_fraction,
        roadtype_table=roadtype_table,
        characteristics=characteristics,
    )


def _roadtype_table(happy_shares, fastest_shares):
    """Mean share of travel time per road type and mode, with MWU
    p-values over the per-route share samples."""
    types = sorted({t for shares in happy_shares + fastest_shares for t in shares})
    table = {}
    for road_type in types:
        happy_sample = [shares.get(road_type, 0.0) for shares in happy_shares]
        fastest_sample = [shares.get(road_type, 0.0) for shares in fastest_shares]
        table[road_type] = _mwu_or_nan(happy_sample, fastest_sample)
    return table


@dataclass(frozen=True)
class SweepRow:
    lam: float
    mean_happy_s: float
    mean_fastest_s: float
    mean_overlap_pct: float


def lambda_sweep(
    graph: RoadGraph,
    layer: EmotionLayer,
    lambdas: Sequence[float],
    pairs: Sequence[OdPair],
) -> List[SweepRow]:
    """One fastest-versus-happy comparison per lambda (happy_linear)."""
    if not pairs:
        raise ValueError("no pairs to sweep over")
    fastest_view = apply_weights(graph, layer, WeightParams("fastest", 0.0))
    out = []
    for lam in lambdas:
        happy_view = apply_weights(graph, layer, WeightParams("happy_linear", lam))
        happy_total = 0.0
        fastest_total = 0.0
        overlap_total = 0.0
        for pair in pairs:
            fast_path = dijkstra(graph, fastest_view, pair.origin, pair.destination)
            happy_path = dijkstra(graph, happy_view, pair.origin, pair.destination)
            fast_route = assemble_route(fast_path, graph, layer)
            happy_route = assemble_route(happy_path, graph, layer)
            happy_total += happy_route.duration_s
            fastest_total += fast_route.duration_s
            overlap_total += route_overlap(fast_route, happy_route)
        count = len(pairs)
        out.append(
            SweepRow(lam, happy_total / count, fastest_total / count, overlap_total / count)
        )
    return out


PAIRS_CSV_HEADER = (
    "origin,destination,fastest_s,happy_s,overlap_pct,happy_mean_e,"
    "fastest_mean_e,happy_curv,fastest_curv,happy_green,fastest_green"
)


def save_report(report: SimulationReport, directory) -> None:
    """Write report.json (aggregates) and pairs.csv (per-pair rows)."""
    os.makedirs(directory, exist_ok=True)
    doc = {
        "mode": report.mode,
        "lambda": report.lam,
        "seed": report.seed,
        "n_requested": report.n_requested,
        "n_accepted": report.n_accepted,
        "n_skipped": report.n_skipped,
        "bic_convention": report.bic_convention,
        "regression": None if report.regression is None else asdict(report.regression),
        "mean_overlap_pct": report.mean_overlap_pct,
        "identical_fraction": report.identical_fraction,
        "roadtype_table": report.roadtype_table,
        "characteristics": report.characteristics,
    }
    with open(os.path.join(directory, "report.json"), "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")
    lines = [PAIRS_CSV_HEADER]
    for r in report.rows:
        lines.append(
            f"{r.origin},{r.destination},{r.fastest_s:.9g},{r.happy_s:.9g},"
            f"{r.overlap_pct:.9g},{r.happy_mean_e:.9g},{r.fastest_mean_e:.9g},"
            f"{r.happy_curv:.9g},{r.fastest_curv:.9g},{r.happy_green:.9g},"
            f"{r.fastest_green:.9g}"
        )
    with open(os.path.join(directory, "pairs.csv"), "w", newline="") as f:
        f.write("\n".join(lines) + "\n")
