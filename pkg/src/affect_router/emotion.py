"""Decision-forest emotion inference and the fallback heuristic scorer.

Training happens elsewhere; this module loads a serialized forest,
encodes a ContextSnapshot into the fixed feature schema, and turns the
averaged 8-class pseudo-likelihoods into the (e, c) pair the routing
weights consume. A rule-based heuristic scorer stands in when no trained
forest is available.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

from . import AffectRouterError
from .context import DAYTIMES, EMOTION_CLASSES, WEATHER_TERMS, ContextSnapshot
from .graph import DEFAULT_SPEEDS_KMH, ROAD_TYPES

MODEL_FORMAT_VERSION = 1
SCHEMA_VERSION = 1
PROB_SUM_TOL = 1e-9
# Floor for e and c; keeps reciprocal weight modes bounded.
MIN_WEIGHT_PROB = 0.01

NUMERIC_FEATURES = (
    "feeltemp_outside",
    "windspeed",
    "cloud_coverage",
    "reducedspeed",
    "freeflow_speed",
    "max_speed",
    "n_lanes",
    "satellite_greeness",
    "age",
)
# One-hot blocks follow the numerics in this group order.
ONE_HOT_GROUPS = (
    ("weather_term", WEATHER_TERMS),
    ("road_type", ROAD_TYPES),
    ("daytime", DAYTIMES),
    ("before_emotion", EMOTION_CLASSES),
)
FEATURE_NAMES = NUMERIC_FEATURES + tuple(
    f"{group}={value}" for group, values in ONE_HOT_GROUPS for value in values
)
N_FEATURES = len(FEATURE_NAMES)
N_CLASSES = len(EMOTION_CLASSES)
HAPPY_INDEX = EMOTION_CLASSES.index("happy")

FeatureVector = Tuple[float, ...]


class ModelFormatError(AffectRouterError):
    """Serialized forest violates the model format."""


@dataclass(frozen=True)
class EmotionDistribution:
    p: Tuple[float, ...]

    def __post_init__(self):
        if len(self.p) != N_CLASSES:
            raise ValueError(f"distribution must have {N_CLASSES} entries")
        if any(v < 0 or v > 1 for v in self.p):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(self.p) - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {sum(self.p)!r}, expected 1")

    def __getitem__(self, i: int) -> float:
        return self.p[i]


# A tree node is ("split", feature, threshold, left, right) or ("leaf", p-tuple).
Node = tuple


@dataclass(frozen=True)
class DecisionTree:
    nodes: Tuple[Node, ...]


@dataclass(frozen=True)
class DecisionForest:
    trees: Tuple[DecisionTree, ...]
    schema_version: int = SCHEMA_VERSION
    class_labels: Tuple[str, ...] = EMOTION_CLASSES


def encode_features(snapshot: ContextSnapshot) -> FeatureVector:
    """Encode a snapshot under the fixed schema: 9 numerics then the
    one-hot blocks. Unknown max_speed falls back to the road-type
    default, unknown n_lanes to 1."""
    max_speed = snapshot.max_speed
    if max_speed is None:
        max_speed = DEFAULT_SPEEDS_KMH[snapshot.road_type]
    n_lanes = snapshot.n_lanes if snapshot.n_lanes is not None else 1
    values = [
        snapshot.weather.feeltemp_outside,
        snapshot.weather.windspeed,
        snapshot.weather.cloud_coverage,
        snapshot.traffic.reducedspeed,
        snapshot.traffic.freeflow_speed,
        float(max_speed),
        float(n_lanes),
        snapshot.satellite_greeness,
        float(snapshot.personal.age),
    ]
    selected = {
        "weather_term": snapshot.weather.weather_term,
        "road_type": snapshot.road_type,
        "daytime": snapshot.daytime,
        "before_emotion": snapshot.personal.before_emotion,
    }
    for group, choices in ONE_HOT_GROUPS:
        chosen = selected[group]
        values.extend(1.0 if value == chosen else 0.0 for value in choices)
    return tuple(values)


def _validate_tree(nodes: Sequence[Node], tree_idx: int) -> None:
    def fail(msg):
        raise ModelFormatError(f"tree {tree_idx}: {msg}")

    if not nodes:
        fail("empty tree")
    for i, node in enumerate(nodes):
        if node[0] == "split":
            _, feature, threshold, left, right = node
            if not 0 <= feature < N_FEATURES:
                fail(f"node {i} references feature {feature}")
            if not isinstance(threshold, float) or threshold != threshold:
                fail(f"node {i} has invalid threshold {threshold!r}")
            for child in (left, right):
                if not isinstance(child, int) or not 0 <= child < len(nodes):
                    fail(f"node {i} references node {child}")
        else:
            probs = node[1]
            if len(probs) != N_CLASSES:
                fail(f"node {i} leaf has {len(probs)} probabilities")
            if any(v < 0 for v in probs):
                fail(f"node {i} leaf has negative probability")
            total = sum(probs)
            if abs(total - 1.0) > PROB_SUM_TOL:
                fail(f"node {i} leaf probabilities sum to {total!r}")
    # Structure: everything reachable from the root, nothing cyclic
    # (acyclic <=> every path ends in a leaf).
    seen = set()
    stack = [0]
    while stack:
        idx = stack.pop()
        if idx in seen:
            continue
        seen.add(idx)
        node = nodes[idx]
        if node[0] == "split":
            stack.extend((node[3], node[4]))
    if len(seen) != len(nodes):
        unreachable = sorted(set(range(len(nodes))) - seen)
        fail(f"unreachable nodes {unreachable}")
    indegree = dict.fromkeys(seen, 0)
    for idx in seen:
        node = nodes[idx]
        if node[0] == "split":
            indegree[node[3]] += 1
            indegree[node[4]] += 1
    queue = [i for i, d in indegree.items() if d == 0]
    removed = 0
    while queue:
        idx = queue.pop()
        removed += 1
        node = nodes[idx]
        if node[0] == "split":
            for child in (node[3], node[4]):
                indegree[child] -= 1
                if indegree[child] == 0:
                    queue.append(child)
    if removed != len(seen):
        fail("cyclic node references")


def make_forest(trees: Sequence[Sequence[Node]]) -> DecisionForest:
    """Validate raw node arrays and assemble an immutable forest."""
    if not trees:
        raise ModelFormatError("forest has no trees")
    validated = []
    for t, nodes in enumerate(trees):
        normalized = tuple(
            ("split", n[1], float(n[2]), n[3], n[4])
            if n[0] == "split"
            else ("leaf", tuple(float(v) for v in n[1]))
            for n in nodes
        )
        _validate_tree(normalized, t)
        validated.append(DecisionTree(normalized))
    return DecisionForest(trees=tuple(validated))


def predict_distribution(forest: DecisionForest, fv: Sequence[float]) -> EmotionDistribution:
    """Average the leaf distributions reached by fv across all trees.

    Split convention: value <= threshold goes left.
    """
    if len(fv) != N_FEATURES:
        raise ValueError(f"feature vector has {len(fv)} values, schema needs {N_FEATURES}")
    totals = [0.0] * N_CLASSES
    for tree in forest.trees:
        nodes = tree.nodes
        node = nodes[0]
        while node[0] == "split":
            _, feature, threshold, left, right = node
            node = nodes[left] if fv[feature] <= threshold else nodes[right]
        for k, v in enumerate(node[1]):
            totals[k] += v
    n = len(forest.trees)
    return EmotionDistribution(tuple(v / n for v in totals))


def happy_weight(dist: EmotionDistribution) -> Tuple[float, float]:
    """(e, c): happiness pseudo-likelihood and top-class confidence,
    both floored at 0.01."""
    e = max(MIN_WEIGHT_PROB, dist.p[HAPPY_INDEX])
    c = max(MIN_WEIGHT_PROB, max(dist.p))
    return e, c


def heuristic_scorer(snapshot: ContextSnapshot) -> EmotionDistribution:
    """Rule-based stand-in for a trained forest.

    base = clamp01(0.25 + 0.3*green + 0.2*min(1, freeflow/100)
                   + 0.15*[road in {residential, tertiary}]
                   - 0.2*[weather in {rain, snow}])
    happy gets base, neutral 70% of the rest, the other six split the
    remainder evenly.
    """
    base = (
        0.25
        + 0.3 * snapshot.satellite_greeness
        + 0.2 * min(1.0, snapshot.traffic.freeflow_speed / 100.0)
        + (0.15 if snapshot.road_type in ("residential", "tertiary") else 0.0)
        - (0.2 if snapshot.weather.weather_term in ("rain", "snow") else 0.0)
    )
    base = min(1.0, max(0.0, base))
    rest = 1.0 - base
    p = [rest * 0.3 / 6.0] * N_CLASSES
    p[HAPPY_INDEX] = base
    p[EMOTION_CLASSES.index("neutral")] = rest * 0.7
    return EmotionDistribution(tuple(p))


def load_model(data: Union[bytes, str]) -> DecisionForest:
    """Parse and validate a forest from its JSON serialization."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format_version {doc.get('format_version')!r}"
        )
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ModelFormatError(
            f"model schema_version {doc.get('schema_version')!r} does not match {SCHEMA_VERSION}"
        )
    if tuple(doc.get("class_labels", ())) != EMOTION_CLASSES:
        raise ModelFormatError("class_labels must list the 8 classes in canonical order")
    raw_trees = doc.get("trees")
    if not isinstance(raw_trees, list) or not raw_trees:
        raise ModelFormatError("model must contain a non-empty trees array")
    trees = []
    for t, raw_nodes in enumerate(raw_trees):
        if not isinstance(raw_nodes, list):
            raise ModelFormatError(f"tree {t} is not a node array")
        nodes = []
        for i, rec in enumerate(raw_nodes):
            if not isinstance(rec, dict) or len(rec) != 1:
                raise ModelFormatError(f"tree {t} node {i} must be a split or leaf object")
            if "split" in rec:
                s = rec["split"]
                try:
                    nodes.append(("split", s["f"], float(s["t"]), s["l"], s["r"]))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ModelFormatError(f"tree {t} node {i}: bad split record: {exc}") from exc
            elif "leaf" in rec:
                probs = rec["leaf"].get("p")
                if not isinstance(probs, list):
                    raise ModelFormatError(f"tree {t} node {i}: leaf needs a p array")
                nodes.append(("leaf", tuple(float(v) for v in probs)))
            else:
                raise ModelFormatError(f"tree {t} node {i} must be a split or leaf object")
        trees.append(nodes)
    return make_forest(trees)


def save_model(forest: DecisionForest) -> bytes:
    """Serialize a forest; load_model(save_model(f)) is structurally f."""
    trees = []
    for tree in forest.trees:
        records = []
        for node in tree.nodes:
            if node[0] == "split":
                _, f, t, l, r = node
                records.append({"split": {"f": f, "t": t, "l": l, "r": r}})
            else:
                records.append({"leaf": {"p": list(node[1])}})
        trees.append(records)
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "schema_version": SCHEMA_VERSION,
        "class_labels": list(EMOTION_CLASSES),
        "trees": trees,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
