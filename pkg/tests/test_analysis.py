"""Geometry metrics, statistics toolbox, OD sampling, and simulation."""

import itertools
import json
import math
import random

import pytest

from affect_router.analysis import (
    OdPair,
    circumradius,
    lambda_sweep,
    mann_whitney_u,
    ols_fit,
    polyline_curviness,
    roadtype_shares,
    route_overlap,
    run_simulation,
    sample_od_pairs,
    save_report,
)
from affect_router.geo import GeoPoint
from affect_router.layer import EdgeEmotion, EmotionLayer, WeightParams
from affect_router.routing import Path, assemble_route

from conftest import grid_graph, mk_graph


class TestCircumradius:
    def test_right_triangle(self):
        assert circumradius(3.0, 4.0, 5.0) == pytest.approx(2.5, abs=1e-12)

    def test_equilateral(self):
        assert circumradius(1.0, 1.0, 1.0) == pytest.approx(1 / math.sqrt(3), abs=1e-12)

    def test_collinear_is_infinite(self):
        assert math.isinf(circumradius(1.0, 1.0, 2.0))

    def test_zero_triangle_is_infinite(self):
        assert math.isinf(circumradius(0.0, 0.0, 0.0))

    def test_violated_inequality_rejected(self):
        with pytest.raises(ValueError, match="triangle"):
            circumradius(1.0, 1.0, 3.0)

    def test_negative_side_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            circumradius(-1.0, 1.0, 1.0)

    def test_symmetric_and_scales_linearly(self):
        rng = random.Random(5)
        for _ in range(25):
            a, b = rng.uniform(1, 10), rng.uniform(1, 10)
            c = rng.uniform(abs(a - b) + 0.1, a + b - 0.1)
            base = circumradius(a, b, c)
            for perm in itertools.permutations((a, b, c)):
                assert circumradius(*perm) == pytest.approx(base, rel=1e-12)
            k = rng.uniform(0.5, 3.0)
            assert circumradius(k * a, k * b, k * c) == pytest.approx(k * base, rel=1e-9)


def circle_points(radius_m, count, lat0=48.0, lon0=11.0):
    # Small-circle approximation: meters to degrees near lat0.
    out = []
    for i in range(count):
        angle = 2 * math.pi * i / count
        dlat = radius_m * math.cos(angle) / 111_194.9266
        dlon = radius_m * math.sin(angle) / (111_194.9266 * math.cos(math.radians(lat0)))
        out.append(GeoPoint(lat0 + dlat, lon0 + dlon))
    return out


class TestCurviness:
    def test_straight_polyline_is_zero(self):
        # Points along a meridian lie on a great circle, so the spherical
        # distances are exactly additive and every triple is collinear.
        points = [GeoPoint(48.0 + 0.001 * i, 11.0) for i in range(6)]
        assert polyline_curviness(points) == 0.0

    def test_two_points_is_zero(self):
        assert polyline_curviness([GeoPoint(48.0, 11.0), GeoPoint(48.0, 11.1)]) == 0.0

    def test_circle_of_100m_radius(self):
        points = circle_points(100.0, 12)
        points.append(points[0])
        assert polyline_curviness(points) == pytest.approx(0.01, abs=1e-4)

    def test_reversal_invariant(self):
        rng = random.Random(2)
        points = [
            GeoPoint(48.0 + rng.uniform(0, 0.01), 11.0 + 0.002 * i) for i in range(8)
        ]
        forward = polyline_curviness(points)
        backward = polyline_curviness(list(reversed(points)))
        assert forward == pytest.approx(backward, abs=1e-9)


def layer_for(graph, entries=None):
    if entries is None:
        entries = [(0.5, 0.5, 10.0)] * len(graph.edges)
    return EmotionLayer(
        fingerprint=graph.fingerprint,
        entries=tuple(EdgeEmotion(i, e, c, t) for i, (e, c, t) in enumerate(entries)),
        model_id="test",
        built_at="2024-01-01T00:00:00",
    )


def route_of(graph, layer, edge_ids):
    s = graph.edges[edge_ids[0]].from_node
    t = graph.edges[edge_ids[-1]].to_node
    return assemble_route(Path(tuple(edge_ids), 0.0, s, t), graph, layer)


class TestOverlap:
    def make(self):
        # Chain 1-2-3-4 plus a disjoint 3->5 detour of equal length.
        graph = mk_graph(
            {
                1: (48.0, 11.0),
                2: (48.0, 11.01),
                3: (48.0, 11.02),
                5: (48.0, 11.03),
            },
            [(1, 2, {}), (2, 3, {}), (3, 5, {})],
        )
        return graph, layer_for(graph)

    def test_identical_routes(self):
        graph, layer = self.make()
        r = route_of(graph, layer, [0, 1])
        assert route_overlap(r, r) == 100.0

    def test_disjoint_routes(self):
        graph, layer = self.make()
        assert route_overlap(route_of(graph, layer, [0]), route_of(graph, layer, [2])) == 0.0

    def test_shared_prefix_half(self):
        graph, layer = self.make()
        r1 = route_of(graph, layer, [0, 1])
        r2 = route_of(graph, layer, [0, 1, 2])
        # Shared length 2 edges of ~equal length over a 3-edge maximum.
        expected = 100.0 * (r1.distance_m / r2.distance_m)
        assert route_overlap(r1, r2) == pytest.approx(expected)
        assert route_overlap(r1, r2) == pytest.approx(route_overlap(r2, r1))

    def test_empty_route_is_zero(self):
        graph, layer = self.make()
        empty = assemble_route(Path((), 0.0, 1, 1), graph, layer)
        assert route_overlap(empty, route_of(graph, layer, [0])) == 0.0


def mwu_oracle_p(x, y):
    """Enumerate all assignments of the combined sample (tie-free)."""
    combined = sorted(x + y)
    n1 = len(x)

    def u_of(x_vals, y_vals):
        return sum(1 for a in x_vals for b in y_vals if a > b)

    observed = u_of(x, y)
    us = []
    for x_idx in itertools.combinations(range(len(combined)), n1):
        xs = [combined[i] for i in x_idx]
        ys = [combined[i] for i in range(len(combined)) if i not in x_idx]
        us.append(u_of(xs, ys))
    lower = sum(1 for u in us if u <= observed) / len(us)
    upper = sum(1 for u in us if u >= observed) / len(us)
    return min(1.0, 2 * min(lower, upper))


class TestMannWhitney:
    def test_reference_small_case(self):
        result = mann_whitney_u([1.0, 2.0], [3.0, 4.0])
        assert result.u_statistic == 0
        assert result.method == "exact"
        assert result.p_value == pytest.approx(2 / 6)

    def test_single_pair(self):
        result = mann_whitney_u([1.0], [2.0])
        assert result.u_statistic == 0
        assert result.p_value == 1.0

    def test_identical_samples_u_half(self):
        x = [1.0, 2.0, 3.0]
        result = mann_whitney_u(x, list(x))
        assert result.u_statistic == len(x) * len(x) / 2

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            mann_whitney_u([], [1.0])

    def test_exact_matches_enumeration_oracle(self):
        rng = random.Random(31)
        for _ in range(40):
            n1 = rng.randint(1, 4)
            n2 = rng.randint(1, 4)
            values = rng.sample(range(1000), n1 + n2)
            x = [float(v) for v in values[:n1]]
            y = [float(v) for v in values[n1:]]
            result = mann_whitney_u(x, y)
            assert result.method == "exact"
            assert result.p_value == pytest.approx(mwu_oracle_p(x, y), abs=1e-12)

    def test_normal_approx_close_to_exact(self):
        # n1 + n2 = 18 exceeds the exact-method cutoff but keeps the
        # enumeration oracle at C(18, 9) arrangements, which is cheap.
        rng = random.Random(8)
        worst = 0.0
        for _ in range(5):
            values = rng.sample(range(100000), 18)
            x = [float(v) for v in values[:9]]
            y = [float(v) for v in values[9:]]
            approx = mann_whitney_u(x, y)
            assert approx.method == "normal_approx"
            worst = max(worst, abs(approx.p_value - mwu_oracle_p(x, y)))
        assert worst < 0.01

    def test_ties_fall_back_to_approx(self):
        result = mann_whitney_u([1.0, 1.0], [1.0, 2.0])
        assert result.method == "normal_approx"
        assert 0 < result.p_value <= 1

    def test_u_bounds(self):
        rng = random.Random(4)
        for _ in range(20):
            x = [rng.uniform(0, 10) for _ in range(rng.randint(1, 6))]
            y = [rng.uniform(0, 10) for _ in range(rng.randint(1, 6))]
            result = mann_whitney_u(x, y)
            assert 0 <= result.u_statistic <= len(x) * len(y)
            assert 0 < result.p_value <= 1


class TestOls:
    def test_perfect_line(self):
        fit = ols_fit([0.0, 1.0, 2.0], [0.0, 1.0, 2.0])
        assert fit.slope == pytest.approx(1.0, abs=1e-12)
        assert fit.intercept == pytest.approx(0.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_constant_y(self):
        fit = ols_fit([0.0, 1.0, 2.0], [5.0, 5.0, 5.0])
        assert fit.slope == 0.0
        assert fit.r_squared == 0.0

    def test_reference_four_points(self):
        fit = ols_fit([0.0, 1.0, 2.0, 3.0], [0.0, 2.0, 3.0, 5.0])
        assert fit.slope == pytest.approx(1.6, abs=1e-9)
        assert fit.intercept == pytest.approx(0.1, abs=1e-9)

    def test_constant_x_rejected(self):
        with pytest.raises(ValueError, match="degenerate regressor"):
            ols_fit([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])

    def test_matches_closed_form_on_random_data(self):
        rng = random.Random(12)
        for _ in range(20):
            n = rng.randint(3, 40)
            x = [rng.uniform(-5, 5) for _ in range(n)]
            y = [2.5 * xi - 1.0 + rng.gauss(0, 1) for xi in x]
            fit = ols_fit(x, y)
            mx = sum(x) / n
            my = sum(y) / n
            sxx = sum((v - mx) ** 2 for v in x)
            sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
            assert fit.slope == pytest.approx(sxy / sxx, rel=1e-9)
            assert fit.intercept == pytest.approx(my - fit.slope * mx, rel=1e-9, abs=1e-9)
            assert 0.0 <= fit.r_squared <= 1.0
            assert 0.0 <= fit.slope_p_value <= 1.0

    def test_p_value_small_for_strong_slope(self):
        x = [float(i) for i in range(30)]
        y = [2.0 * v + 0.01 * ((-1) ** i) for i, v in enumerate(x)]
        fit = ols_fit(x, y)
        assert fit.slope_p_value < 1e-10


class TestOdSampling:
    def test_deterministic_per_seed(self):
        graph = grid_graph(5, 5, seed=1, p_drop=0.0)
        a = sample_od_pairs(graph, 10, rng_seed=7, min_separation_m=100.0)
        b = sample_od_pairs(graph, 10, rng_seed=7, min_separation_m=100.0)
        assert a == b
        assert len(a) == 10
        assert all(p.origin != p.destination for p in a)

    def test_zero_pairs(self):
        graph = grid_graph(3, 3, seed=1, p_drop=0.0)
        assert sample_od_pairs(graph, 0, rng_seed=1) == []

    def test_two_node_graph(self):
        graph = mk_graph(
            {1: (48.0, 11.0), 2: (48.0, 11.01)}, [(1, 2, {}), (2, 1, {})]
        )
        pairs = sample_od_pairs(graph, 5, rng_seed=3, min_separation_m=0.0)
        assert all(p in (OdPair(1, 2), OdPair(2, 1)) for p in pairs)

    def test_min_separation_respected(self):
        graph = grid_graph(5, 5, seed=2, p_drop=0.0)
        pairs = sample_od_pairs(graph, 8, rng_seed=5, min_separation_m=400.0)
        from affect_router.geo import haversine

        for p in pairs:
            d = haversine(graph.nodes[p.origin].point, graph.nodes[p.destination].point)
            assert d >= 400.0

    def test_budget_exhaustion_reports_counts(self):
        # Two nodes 1.1 km apart but min separation 5 km: nothing fits.
        graph = mk_graph(
            {1: (48.0, 11.0), 2: (48.0, 11.015)}, [(1, 2, {}), (2, 1, {})]
        )
        with pytest.raises(ValueError, match="too close"):
            sample_od_pairs(graph, 3, rng_seed=1, min_separation_m=5000.0)

    def test_unreachable_rejected(self):
        # 1 and 2 are connected; 3 is isolated but within range.
        graph = mk_graph(
            {1: (48.0, 11.0), 2: (48.0, 11.01), 3: (48.001, 11.005)},
            [(1, 2, {}), (2, 1, {})],
        )
        pairs = sample_od_pairs(graph, 4, rng_seed=2, min_separation_m=0.0)
        for p in pairs:
            assert 3 not in (p.origin, p.destination)


class TestRoadtypeShares:
    def test_single_type(self):
        graph = mk_graph(
            {1: (48.0, 11.0), 2: (48.0, 11.01)}, [(1, 2, {"road_type": "primary"})]
        )
        layer = layer_for(graph)
        shares = roadtype_shares(route_of(graph, layer, [0]))
        assert shares == {"primary": 1.0}

    def test_quarter_three_quarter_split(self):
        graph = mk_graph(
            {1: (48.0, 11.0), 2: (48.0, 11.01), 3: (48.0, 11.02)},
            [(1, 2, {"road_type": "residential"}), (2, 3, {"road_type": "primary"})],
        )
        layer = layer_for(graph, [(0.5, 0.5, 100.0), (0.5, 0.5, 300.0)])
        shares = roadtype_shares(route_of(graph, layer, [0, 1]))
        assert shares["residential"] == pytest.approx(0.25)
        assert shares["primary"] == pytest.approx(0.75)
        assert sum(shares.values()) == pytest.approx(1.0, abs=1e-9)

    def test_empty_route_rejected(self):
        graph = mk_graph({1: (48.0, 11.0), 2: (48.0, 11.01)}, [(1, 2, {})])
        layer = layer_for(graph)
        empty = assemble_route(Path((), 0.0, 1, 1), graph, layer)
        with pytest.raises(ValueError, match="empty"):
            roadtype_shares(empty)


def varied_layer(graph, seed=0):
    rng = random.Random(seed)
    entries = []
    for edge in graph.edges:
        e = rng.uniform(0.05, 0.95)
        entries.append((e, max(e, 0.3), rng.uniform(5.0, 50.0)))
    return layer_for(graph, entries)


class TestSimulation:
    def test_constant_layer_all_identical(self):
        graph = grid_graph(5, 5, seed=4, p_drop=0.0, spacing=0.02)
        layer = layer_for(graph, [(0.5, 0.5, 10.0 + 0.01 * i) for i in range(len(graph.edges))])
        report = run_simulation(
            graph, layer, WeightParams("happy_linear", 20.0), 12, seed=1,
            min_separation_m=1000.0,
        )
        assert report.n_accepted == 12
        assert report.identical_fraction == 1.0
        assert report.mean_overlap_pct == pytest.approx(100.0)
        assert report.regression is not None
        assert report.regression.slope == pytest.approx(1.0, abs=1e-9)

    def test_happy_duration_dominates(self):
        graph = grid_graph(6, 6, seed=5, p_drop=0.05, spacing=0.02)
        layer = varied_layer(graph, seed=5)
        report = run_simulation(
            graph, layer, WeightParams("happy_linear", 20.0), 15, seed=2,
            min_separation_m=1000.0,
        )
        for row in report.rows:
            assert row.happy_s >= row.fastest_s - 1e-9
            assert row.fastest_s > 0

    def test_triangle_detour_around_low_e_edge(self):
        # Direct edge is unhappy; two-edge detour is happy and only a
        # bit longer, so a large lambda flips the choice.
        graph = mk_graph(
            {1: (48.0, 11.0), 2: (48.013, 11.005), 3: (48.0, 11.01)},
            [(1, 3, {}), (1, 2, {}), (2, 3, {})],
        )
        layer = layer_for(
            graph, [(0.05, 0.5, 60.0), (0.95, 0.95, 50.0), (0.95, 0.95, 50.0)]
        )
        report = run_simulation(
            graph, layer, WeightParams("happy_linear", 20.0), 1, seed=3,
            min_separation_m=500.0,
        )
        row = report.rows[0]
        assert row.happy_s == pytest.approx(100.0)
        assert row.fastest_s == pytest.approx(60.0)
        assert row.overlap_pct == 0.0

    def test_deterministic_reports(self, tmp_path):
        graph = grid_graph(5, 5, seed=6, p_drop=0.1, spacing=0.02)
        layer = varied_layer(graph, seed=6)
        for name in ("one", "two"):
            report = run_simulation(
                graph, layer, WeightParams("happy_linear", 20.0), 8, seed=4,
                min_separation_m=800.0,
            )
            save_report(report, tmp_path / name)
        for file in ("report.json", "pairs.csv"):
            assert (tmp_path / "one" / file).read_bytes() == (
                tmp_path / "two" / file
            ).read_bytes()

    def test_report_files_shape(self, tmp_path):
        graph = grid_graph(5, 5, seed=7, p_drop=0.0, spacing=0.02)
        layer = varied_layer(graph, seed=7)
        report = run_simulation(
            graph, layer, WeightParams("happy_linear", 20.0), 6, seed=5,
            min_separation_m=800.0,
        )
        save_report(report, tmp_path)
        lines = (tmp_path / "pairs.csv").read_text().splitlines()
        assert lines[0] == (
            "origin,destination,fastest_s,happy_s,overlap_pct,happy_mean_e,"
            "fastest_mean_e,happy_curv,fastest_curv,happy_green,fastest_green"
        )
        assert len(lines) == 1 + report.n_accepted
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["bic_convention"].startswith("n*ln")
        assert doc["n_accepted"] == report.n_accepted
        assert "roadtype_table" in doc and "characteristics" in doc


class TestLambdaSweep:
    def test_zero_lambda_matches_fastest(self):
        graph = grid_graph(5, 5, seed=8, p_drop=0.0, spacing=0.02)
        layer = varied_layer(graph, seed=8)
        pairs = sample_od_pairs(graph, 6, rng_seed=9, min_separation_m=800.0)
        rows = lambda_sweep(graph, layer, [0.0], pairs)
        assert rows[0].mean_happy_s == rows[0].mean_fastest_s

    def test_happy_duration_non_decreasing_in_lambda(self):
        graph = grid_graph(5, 5, seed=9, p_drop=0.1, spacing=0.02)
        layer = varied_layer(graph, seed=9)
        pairs = sample_od_pairs(graph, 6, rng_seed=10, min_separation_m=800.0)
        rows = lambda_sweep(graph, layer, [0.0, 1.0, 5.0, 20.0, 100.0], pairs)
        durations = [r.mean_happy_s for r in rows]
        for a, b in zip(durations, durations[1:]):
            assert b >= a - 1e-9

    def test_empty_lambda_list(self):
        graph = grid_graph(3, 3, seed=10, p_drop=0.0, spacing=0.02)
        layer = varied_layer(graph, seed=10)
        pairs = sample_od_pairs(graph, 2, rng_seed=11, min_separation_m=500.0)
        assert lambda_sweep(graph, layer, [], pairs) == []

    def test_no_pairs_rejected(self):
        graph = grid_graph(3, 3, seed=11, p_drop=0.0, spacing=0.02)
        layer = varied_layer(graph, seed=11)
        with pytest.raises(ValueError, match="pairs"):
            lambda_sweep(graph, layer, [0.0], [])
