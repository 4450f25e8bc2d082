"""Operator entry point: ingest, build-layer, route, simulate, sweep,
bench, serve.

Exit codes: 0 ok, 2 usage or config problem, 3 data or build failure,
4 no route, 5 simulation failure, 6 service startup failure. Every
subcommand is deterministic for fixed inputs and seeds.
"""

import datetime as dt
import json
import socket
import statistics
import sys
import time
from pathlib import Path as FsPath

import click

from .context import (
    CsvWeatherTraffic,
    PersonalProfile,
    ProviderSet,
    RasterGreen,
    SyntheticGreen,
    constant_providers,
    load_green_raster,
)
from . import AffectRouterError
from .geo import GeoPoint
from .graph import load_graph, nearest_node, save_graph
from .emotion import heuristic_scorer, load_model
from .layer import (
    WeightParams,
    apply_weights,
    build_layer,
    load_layer,
    save_layer,
)
from .osm import build_graph, parse_osm_xml
from .routing import NoRouteError, assemble_route, ch_preprocess, ch_query, dijkstra, turn_instructions

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NO_ROUTE = 4
EXIT_SIMULATION = 5
EXIT_SERVICE = 6

# Layer builds default to a fixed clock so repeated runs write identical
# bytes; pass --at to score a different time of day.
DEFAULT_BUILD_TIME = "2024-06-01T12:00:00"

CONFIG_SECTIONS = {
    "paths": {"graph", "layer", "model", "green_raster", "providers_csv"},
    "weights": {"mode", "lambda"},
    "service": {"host", "port", "lambda_grid", "cors_origins", "ui_dir"},
    "simulation": {"n", "seed", "min_separation_m"},
}

CONFIG_DEFAULTS = {
    "paths": {},
    "weights": {"mode": "happy_linear", "lambda": 20.0},
    "service": {
        "host": "127.0.0.1",
        "port": 8000,
        "lambda_grid": [0.0, 1.0, 5.0, 10.0, 20.0, 40.0, 100.0],
        "cors_origins": ["*"],
        "ui_dir": None,
    },
    "simulation": {"n": 100, "seed": 1, "min_separation_m": 1000.0},
}


class ConfigError(Exception):
    pass


def load_config(path) -> dict:
    """Parse and validate a TOML config; unknown keys are rejected and
    all referenced paths must exist. Relative paths resolve against the
    config file's directory."""
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib

    path = FsPath(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc

    config = {section: dict(values) for section, values in CONFIG_DEFAULTS.items()}
    for section, values in raw.items():
        if section not in CONFIG_SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        for key, value in values.items():
            if key not in CONFIG_SECTIONS[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            config[section][key] = value

    base = path.parent
    for key, value in list(config["paths"].items()):
        resolved = base / value
        if not resolved.exists():
            raise ConfigError(f"paths.{key} does not exist: {resolved}")
        config["paths"][key] = str(resolved)
    ui_dir = config["service"]["ui_dir"]
    if ui_dir is not None:
        resolved = base / ui_dir
        if not resolved.is_dir():
            raise ConfigError(f"service.ui_dir does not exist: {resolved}")
        config["service"]["ui_dir"] = str(resolved)
    return config


def _config_from_ctx(ctx) -> dict:
    config_path = ctx.obj.get("config_path")
    if config_path is None:
        return {section: dict(values) for section, values in CONFIG_DEFAULTS.items()}
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)


def _pick(flag_value, config, section, key):
    return flag_value if flag_value is not None else config[section].get(key)


def _require_path(value, what) -> str:
    if value is None:
        click.echo(f"error: no {what} given (flag or config)", err=True)
        sys.exit(EXIT_USAGE)
    if not FsPath(value).exists():
        click.echo(f"error: {what} does not exist: {value}", err=True)
        sys.exit(EXIT_USAGE)
    return value


def _parse_latlon(value: str) -> GeoPoint:
    parts = value.split(",")
    try:
        if len(parts) != 2:
            raise ValueError
        point = GeoPoint(float(parts[0]), float(parts[1]))
    except ValueError:
        click.echo(f"error: expected lat,lon but got {value!r}", err=True)
        sys.exit(EXIT_USAGE)
    if not (-90.0 <= point.lat <= 90.0 and -180.0 <= point.lon <= 180.0):
        click.echo(f"error: coordinates out of range: {value!r}", err=True)
        sys.exit(EXIT_USAGE)
    return point


def _load_scorer(model_path, heuristic):
    if heuristic == (model_path is not None):
        click.echo("error: give exactly one of --model or --heuristic", err=True)
        sys.exit(EXIT_USAGE)
    if heuristic:
        return heuristic_scorer
    if not FsPath(model_path).exists():
        click.echo(f"error: model does not exist: {model_path}", err=True)
        sys.exit(EXIT_USAGE)
    with open(model_path, "rb") as fh:
        return load_model(fh.read())


def _providers(providers_csv, green_raster, green_window, synthetic_green) -> ProviderSet:
    base = constant_providers()
    weather, traffic, green = base.weather, base.traffic, base.green
    if providers_csv is not None:
        csv_provider = CsvWeatherTraffic(providers_csv)
        weather = traffic = csv_provider
    if green_raster is not None and synthetic_green:
        click.echo("error: --green-raster and --synthetic-green conflict", err=True)
        sys.exit(EXIT_USAGE)
    if green_raster is not None:
        green = RasterGreen(load_green_raster(green_raster), window_px=green_window)
    elif synthetic_green:
        green = SyntheticGreen()
    return ProviderSet(weather=weather, traffic=traffic, green=green)


@click.group()
@click.option(
    "--config",
    "config_path",
    envvar="AFFECT_ROUTER_CONFIG",
    default=None,
    help="TOML config file; flags override its values.",
)
@click.pass_context
def main(ctx, config_path):
    """Emotion-aware route planning over road graphs."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@click.argument("osm_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_graph_path", type=click.Path(dir_okay=False, writable=True))
def ingest(osm_path, out_graph_path):
    """Parse an OSM XML extract into the native graph format."""
    try:
        with open(osm_path, "rb") as fh:
            source = parse_osm_xml(fh)
        graph = build_graph(source)
        save_graph(graph, out_graph_path)
    except AffectRouterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    for warning in source.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"nodes: {len(graph.nodes)}")
    click.echo(f"edges: {len(graph.edges)}")


@main.command("build-layer")
@click.option("--graph", "graph_path", default=None, help="Input graph file.")
@click.option("--model", "model_path", default=None, help="Decision forest JSON.")
@click.option("--heuristic", is_flag=True, help="Score with the built-in heuristic instead of a model.")
@click.option("--out", "out_path", required=True, help="Output layer CSV.")
@click.option("--providers-csv", default=None, help="Tiled weather/traffic CSV.")
@click.option("--green-raster", default=None, help="Greenness raster image (with world file).")
@click.option("--green-window", default=15, show_default=True, help="Raster sampling window in pixels.")
@click.option("--synthetic-green", is_flag=True, help="Use the deterministic synthetic greenness field.")
@click.option("--at", "at_raw", default=DEFAULT_BUILD_TIME, show_default=True, help="Snapshot time (ISO 8601).")
@click.pass_context
def build_layer_cmd(ctx, graph_path, model_path, heuristic, out_path,
                    providers_csv, green_raster, green_window, synthetic_green, at_raw):
    """Score every edge and write the happiness layer."""
    config = _config_from_ctx(ctx)
    graph_path = _require_path(_pick(graph_path, config, "paths", "graph"), "graph")
    if model_path is None and not heuristic:
        model_path = config["paths"].get("model")
    try:
        at = dt.datetime.fromisoformat(at_raw)
    except ValueError:
        click.echo(f"error: --at is not ISO 8601: {at_raw!r}", err=True)
        sys.exit(EXIT_USAGE)
    try:
        scorer = _load_scorer(model_path, heuristic)
        graph = load_graph(graph_path)
        providers = _providers(providers_csv, green_raster, green_window, synthetic_green)
        layer = build_layer(graph, providers, scorer, PersonalProfile(age=30.0), at)
        save_layer(layer, out_path)
    except AffectRouterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    values = [entry.e for entry in layer.entries]
    if values:
        click.echo(f"edges scored: {len(values)}")
        click.echo(f"e min: {min(values):.6f}")
        click.echo(f"e mean: {sum(values) / len(values):.6f}")
        click.echo(f"e max: {max(values):.6f}")
    else:
        click.echo("edges scored: 0")


@main.command()
@click.option("--graph", "graph_path", default=None)
@click.option("--layer", "layer_path", default=None)
@click.option("--from", "from_raw", required=True, help="Origin lat,lon.")
@click.option("--to", "to_raw", required=True, help="Destination lat,lon.")
@click.option("--mode", type=click.Choice(["fastest", "happy"]), default="fastest", show_default=True)
@click.option("--lambda", "lam", type=float, default=None, help="Happiness penalty weight.")
@click.option("--geojson", "geojson_path", default=None, help="Write route geometry to this file.")
@click.pass_context
def route(ctx, graph_path, layer_path, from_raw, to_raw, mode, lam, geojson_path):
    """One-shot route query printed to stdout."""
    config = _config_from_ctx(ctx)
    graph_path = _require_path(_pick(graph_path, config, "paths", "graph"), "graph")
    layer_path = _require_path(_pick(layer_path, config, "paths", "layer"), "layer")
    lam = lam if lam is not None else float(config["weights"]["lambda"])
    if lam < 0:
        click.echo("error: lambda must be >= 0", err=True)
        sys.exit(EXIT_USAGE)
    src = _parse_latlon(from_raw)
    dst = _parse_latlon(to_raw)
    happy_formula = config["weights"]["mode"]
    try:
        graph = load_graph(graph_path)
        layer = load_layer(layer_path, graph)
        params = (
            WeightParams("fastest")
            if mode == "fastest"
            else WeightParams(happy_formula, lam)
        )
        view = apply_weights(graph, layer, params)
        s = nearest_node(graph, src).id
        t = nearest_node(graph, dst).id
        path = dijkstra(graph, view, s, t)
        result = assemble_route(path, graph, layer)
    except NoRouteError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_NO_ROUTE)
    except AffectRouterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    click.echo(f"duration_s: {result.duration_s!r}")
    click.echo(f"distance_m: {result.distance_m!r}")
    click.echo(f"mean_happiness: {result.mean_happiness!r}")
    if result.path.edge_ids:
        for step in turn_instructions(result, graph):
            click.echo(f"{step.kind} at node {step.node_id} ({step.road_type})")
    if geojson_path is not None:
        geometry = {
            "type": "LineString",
            "coordinates": [[p.lon, p.lat] for p in result.geometry],
        }
        with open(geojson_path, "w") as fh:
            json.dump(geometry, fh)
            fh.write("\n")


@main.command()
@click.option("--graph", "graph_path", default=None)
@click.option("--layer", "layer_path", default=None)
@click.option("--n", "n_pairs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--mode", type=click.Choice(["happy_linear", "happy_reciprocal", "paper_literal"]), default=None)
@click.option("--min-separation", "min_sep", type=float, default=None)
@click.option("--out", "out_dir", required=True)
@click.pass_context
def simulate(ctx, graph_path, layer_path, n_pairs, seed, lam, mode, min_sep, out_dir):
    """Route random origin/destination pairs both ways and write the report."""
    from .analysis import run_simulation, save_report

    config = _config_from_ctx(ctx)
    graph_path = _require_path(_pick(graph_path, config, "paths", "graph"), "graph")
    layer_path = _require_path(_pick(layer_path, config, "paths", "layer"), "layer")
    n_pairs = n_pairs if n_pairs is not None else int(config["simulation"]["n"])
    seed = seed if seed is not None else int(config["simulation"]["seed"])
    min_sep = min_sep if min_sep is not None else float(config["simulation"]["min_separation_m"])
    mode = mode if mode is not None else config["weights"]["mode"]
    lam = lam if lam is not None else float(config["weights"]["lambda"])
    try:
        graph = load_graph(graph_path)
        layer = load_layer(layer_path, graph)
        params = WeightParams(mode, lam)
        report = run_simulation(graph, layer, params, n_pairs, seed, min_separation_m=min_sep)
    except AffectRouterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_SIMULATION)
    save_report(report, out_dir)
    click.echo(f"pairs accepted: {report.n_accepted}")
    click.echo(f"pairs skipped: {report.n_skipped}")
    click.echo(f"mean overlap pct: {report.mean_overlap_pct!r}")
    if report.regression is not None:
        click.echo(f"regression slope: {report.regression.slope!r}")
        click.echo(f"regression r_squared: {report.regression.r_squared!r}")
    click.echo(f"wrote {FsPath(out_dir) / 'report.json'} and pairs.csv")


@main.command()
@click.option("--graph", "graph_path", default=None)
@click.option("--layer", "layer_path", default=None)
@click.option("--lambdas", default="0,1,5,10,20,40,100", show_default=True)
@click.option("--n", "n_pairs", type=int, default=None)
@click.option("--pairs-seed", type=int, default=None)
@click.option("--min-separation", "min_sep", type=float, default=None)
@click.option("--out", "out_dir", required=True)
@click.pass_context
def sweep(ctx, graph_path, layer_path, lambdas, n_pairs, pairs_seed, min_sep, out_dir):
    """Rerun one pair sample across a list of penalty weights."""
    from .analysis import lambda_sweep, sample_od_pairs

    config = _config_from_ctx(ctx)
    graph_path = _require_path(_pick(graph_path, config, "paths", "graph"), "graph")
    layer_path = _require_path(_pick(layer_path, config, "paths", "layer"), "layer")
    n_pairs = n_pairs if n_pairs is not None else int(config["simulation"]["n"])
    pairs_seed = pairs_seed if pairs_seed is not None else int(config["simulation"]["seed"])
    min_sep = min_sep if min_sep is not None else float(config["simulation"]["min_separation_m"])
    try:
        lambda_values = [float(v) for v in lambdas.split(",") if v.strip()]
    except ValueError:
        click.echo(f"error: --lambdas is not a comma-separated number list: {lambdas!r}", err=True)
        sys.exit(EXIT_USAGE)
    try:
        graph = load_graph(graph_path)
        layer = load_layer(layer_path, graph)
        pairs = sample_od_pairs(graph, n_pairs, pairs_seed, min_separation_m=min_sep)
        rows = lambda_sweep(graph, layer, lambda_values, pairs)
    except AffectRouterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_SIMULATION)
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["lambda,mean_happy_s,mean_fastest_s,mean_overlap_pct"]
    for row in rows:
        lines.append(
            f"{row.lam:.9g},{row.mean_happy_s:.9g},{row.mean_fastest_s:.9g},{row.mean_overlap_pct:.9g}"
        )
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    for line in lines:
        click.echo(line)


@main.command()
@click.option("--graph", "graph_path", default=None)
@click.option("--layer", "layer_path", default=None)
@click.option("--queries", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--lambda", "lam", type=float, default=20.0, show_default=True)
@click.option("--min-separation", "min_sep", type=float, default=1000.0, show_default=True)
@click.pass_context
def bench(ctx, graph_path, layer_path, queries, seed, lam, min_sep):
    """Measure hierarchy preprocessing time and query latency."""
    from .analysis import sample_od_pairs

    config = _config_from_ctx(ctx)
    graph_path = _require_path(_pick(graph_path, config, "paths", "graph"), "graph")
    layer_path = _require_path(_pick(layer_path, config, "paths", "layer"), "layer")
    try:
        graph = load_graph(graph_path)
        layer = load_layer(layer_path, graph)
        pairs = sample_od_pairs(graph, queries, seed, min_separation_m=min_sep)
    except AffectRouterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_SIMULATION)
    click.echo(f"graph edges: {len(graph.edges)}")
    click.echo(f"queries: {len(pairs)}")
    for mode_name, params in (
        ("fastest", WeightParams("fastest")),
        ("happy", WeightParams("happy_linear", lam)),
    ):
        view = apply_weights(graph, layer, params)
        started = time.perf_counter()
        index = ch_preprocess(graph, view)
        preprocess_s = time.perf_counter() - started
        timings = []
        for pair in pairs:
            begun = time.perf_counter()
            ch_query(index, pair.origin, pair.destination)
            timings.append((time.perf_counter() - begun) * 1000.0)
        timings.sort()
        p50 = statistics.median(timings)
        p95 = timings[min(len(timings) - 1, int(0.95 * len(timings)))]
        click.echo(f"{mode_name} ch_preprocess_s: {preprocess_s:.3f}")
        click.echo(f"{mode_name} shortcuts: {index.shortcut_count}")
        click.echo(f"{mode_name} mean_ms: {statistics.fmean(timings):.3f}")
        click.echo(f"{mode_name} p50_ms: {p50:.3f}")
        click.echo(f"{mode_name} p95_ms: {p95:.3f}")


@main.command()
@click.option("--listen", default=None, help="host:port, overriding the config.")
@click.pass_context
def serve(ctx, listen):
    """Run the HTTP service over the configured snapshot."""
    from .service import build_snapshot, create_app

    config = _config_from_ctx(ctx)
    host = config["service"]["host"]
    port = int(config["service"]["port"])
    if listen is not None:
        try:
            host, port_raw = listen.rsplit(":", 1)
            port = int(port_raw)
        except ValueError:
            click.echo(f"error: --listen must be host:port, got {listen!r}", err=True)
            sys.exit(EXIT_USAGE)
    graph_path = config["paths"].get("graph")
    if graph_path is None:
        click.echo("error: config has no paths.graph", err=True)
        sys.exit(EXIT_USAGE)
    try:
        graph = load_graph(graph_path)
        layer_path = config["paths"].get("layer")
        layer = load_layer(layer_path, graph) if layer_path else None
        snapshot = build_snapshot(
            graph,
            layer,
            happy_mode=config["weights"]["mode"],
            lambda_grid=tuple(float(v) for v in config["service"]["lambda_grid"]),
        )
    except AffectRouterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((host, port))
    except OSError as exc:
        click.echo(f"error: cannot listen on {host}:{port}: {exc}", err=True)
        sys.exit(EXIT_SERVICE)
    finally:
        probe.close()
    app = create_app(
        snapshot,
        cors_origins=tuple(config["service"]["cors_origins"]),
        ui_dir=config["service"]["ui_dir"],
    )
    import uvicorn

    click.echo(f"listening on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
