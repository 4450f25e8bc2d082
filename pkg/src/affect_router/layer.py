"""Whole-graph happiness layer and routing weight synthesis.

A layer stores, for every edge, the happiness pseudo-likelihood e, the
prediction confidence c, and the base travel time d. Weight modes turn
those into routing costs:

  fastest           d
  happy_linear      d * (1 + lambda * (1 - e*c))
  happy_reciprocal  d / (1 + lambda * e*c)
  paper_literal     d / (lambda * e*c)

happy_linear is the default (lambda = 20): it reduces to fastest at
lambda = 0 and trades seconds against unhappiness at a controlled rate.
paper_literal rescales every edge by the same 1/lambda, so its argmin is
lambda-invariant; it is kept for fidelity experiments.
"""

from __future__ import annotations

import hashlib
import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from . import AffectRouterError
from .context import ContextSnapshot, PersonalProfile, ProviderSet, context_for_edge
from .emotion import (
    DecisionForest,
    EmotionDistribution,
    encode_features,
    happy_weight,
    predict_distribution,
    save_model,
)
from .graph import RoadGraph, edge_travel_time

MODES = ("fastest", "happy_linear", "happy_reciprocal", "paper_literal")
DEFAULT_LAMBDA = 20.0

Scorer = Union[DecisionForest, Callable[[ContextSnapshot], EmotionDistribution]]


class LayerError(AffectRouterError):
    """Layer build, format, or graph-mismatch failure."""


@dataclass(frozen=True)
class EdgeEmotion:
    edge_id: int
    e: float
    c: float
    base_time_s: float

    def __post_init__(self):
        if not 0.01 <= self.e <= 1.0:
            raise ValueError(f"e={self.e!r} outside [0.01, 1]")
        if not 0.01 <= self.c <= 1.0:
            raise ValueError(f"c={self.c!r} outside [0.01, 1]")
        if not (math.isfinite(self.base_time_s) and self.base_time_s > 0):
            raise ValueError(f"base_time_s={self.base_time_s!r} must be finite and > 0")


@dataclass(frozen=True)
class WeightParams:
    mode: str = "happy_linear"
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError("lambda must be finite and >= 0")
        if self.mode == "paper_literal" and self.lam == 0:
            raise ValueError("paper_literal requires lambda > 0")


@dataclass(frozen=True)
class EmotionLayer:
    fingerprint: str
    entries: Tuple[EdgeEmotion, ...]
    model_id: str
    built_at: str
    provider_epoch: int = 0

    def __post_init__(self):
        for i, entry in enumerate(self.entries):
            if entry.edge_id != i:
                raise ValueError(f"entry {i} has edge_id {entry.edge_id}; ids must be dense")


def scorer_id(scorer: Scorer) -> str:
    if isinstance(scorer, DecisionForest):
        digest = hashlib.sha256(save_model(scorer)).hexdigest()[:12]
        return f"forest-{digest}"
    return getattr(scorer, "__name__", type(scorer).__name__)


def score_snapshot(scorer: Scorer, snapshot: ContextSnapshot) -> EmotionDistribution:
    if isinstance(scorer, DecisionForest):
        return predict_distribution(scorer, encode_features(snapshot))
    return scorer(snapshot)


def build_layer(
    graph: RoadGraph,
    providers: ProviderSet,
    scorer: Scorer,
    profile: PersonalProfile,
    at,
) -> EmotionLayer:
    """Score every edge once: snapshot -> distribution -> (e, c), plus the
    base travel time under the snapshot's traffic.

    Deterministic for fixed inputs; built_at records the `at` argument
    (not the wall clock) so rebuilds persist byte-identically.
    """
    entries = []
    for edge in graph.edges:
        try:
            snap = context_for_edge(edge, providers, at, profile)
            dist = score_snapshot(scorer, snap)
            e, c = happy_weight(dist)
            entries.append(
                EdgeEmotion(edge.id, e, c, edge_travel_time(edge, snap.traffic))
            )
        except (AffectRouterError, ValueError) as exc:
            raise LayerError(f"layer build failed at edge {edge.id}: {exc}") from exc
    return EmotionLayer(
        fingerprint=graph.fingerprint,
        entries=tuple(entries),
        model_id=scorer_id(scorer),
        built_at=at.isoformat(),
        provider_epoch=providers.epoch,
    )


def edge_weight(d: float, e: float, c: float, params: WeightParams) -> float:
    """Routing cost of one edge under the given mode; see module docstring."""
    if not (math.isfinite(d) and d >= 0):
        raise ValueError(f"base time {d!r} must be finite and >= 0")
    if not (math.isfinite(e) and math.isfinite(c)):
        raise ValueError("e and c must be finite")
    ec = e * c
    if params.mode == "fastest":
        return d
    if params.mode == "happy_linear":
        return d * (1.0 + params.lam * (1.0 - ec))
    if params.mode == "happy_reciprocal":
        return d / (1.0 + params.lam * ec)
    return d / (params.lam * ec)


@dataclass(frozen=True)
class WeightedView:
    """Immutable per-edge weight array for one (layer, params) pair."""

    fingerprint: str
    params: WeightParams
    weights: np.ndarray = field(compare=False)
    checksum: int

    def is_stale(self) -> bool:
        return zlib.adler32(self.weights.tobytes()) != self.checksum


def apply_weights(graph: RoadGraph, layer: EmotionLayer, params: WeightParams) -> WeightedView:
    if layer.fingerprint != graph.fingerprint:
        raise LayerError("layer does not match graph")
    if len(layer.entries) != len(graph.edges):
        raise LayerError(
            f"layer covers {len(layer.entries)} edges, graph has {len(graph.edges)}"
        )
    weights = np.fromiter(
        (edge_weight(en.base_time_s, en.e, en.c, params) for en in layer.entries),
        dtype=np.float64,
        count=len(layer.entries),
    )
    weights.setflags(write=False)
    return WeightedView(
        fingerprint=graph.fingerprint,
        params=params,
        weights=weights,
        checksum=zlib.adler32(weights.tobytes()),
    )


def save_layer(layer: EmotionLayer, path) -> None:
    """Write the layer CSV: three comment lines, a header, one row per
    edge at 9 significant digits."""
    lines = [
        f"# fingerprint={layer.fingerprint}",
        f"# model={layer.model_id}",
        f"# built_at={layer.built_at}",
        "edge_id,e,c,base_time_s",
    ]
    for en in layer.entries:
        lines.append(f"{en.edge_id},{en.e:.9g},{en.c:.9g},{en.base_time_s:.9g}")
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


def load_layer(path, graph: Optional[RoadGraph] = None) -> EmotionLayer:
    """Read a layer CSV; with a graph, check edge count and fingerprint."""
    meta = {}
    rows = []
    with open(path) as f:
        lines = [line.rstrip("\n") for line in f if line.strip()]
    body_start = 0
    for line in lines:
        if not line.startswith("#"):
            break
        body_start += 1
        text = line.lstrip("#").strip()
        if "=" in text:
            key, value = text.split("=", 1)
            meta[key.strip()] = value.strip()
    body = lines[body_start:]
    if not body or body[0] != "edge_id,e,c,base_time_s":
        raise LayerError(f"{path}: missing layer header row")
    if "fingerprint" not in meta:
        raise LayerError(f"{path}: missing fingerprint comment")
    for line in body[1:]:
        parts = line.split(",")
        if len(parts) != 4:
            raise LayerError(f"{path}: malformed row {line!r}")
        try:
            rows.append(
                EdgeEmotion(int(parts[0]), float(parts[1]), float(parts[2]), float(parts[3]))
            )
        except ValueError as exc:
            raise LayerError(f"{path}: bad row {line!r}: {exc}") from exc
    rows.sort(key=lambda en: en.edge_id)
    try:
        layer = EmotionLayer(
            fingerprint=meta["fingerprint"],
            entries=tuple(rows),
            model_id=meta.get("model", "unknown"),
            built_at=meta.get("built_at", "unknown"),
        )
    except ValueError as exc:
        raise LayerError(f"{path}: {exc}") from exc
    if graph is not None:
        if len(layer.entries) != len(graph.edges):
            raise LayerError(
                f"{path}: {len(layer.entries)} rows for a graph with {len(graph.edges)} edges"
            )
        if layer.fingerprint != graph.fingerprint:
            raise LayerError("layer does not match graph")
    return layer
