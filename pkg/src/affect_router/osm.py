"""OpenStreetMap XML ingestion.

parse_osm_xml keeps every way carrying a highway tag plus the nodes those
ways reference; build_graph splits retained ways at shared junctions into
directed edges. PBF is out of scope, XML only.
"""

from __future__ import annotations

import io
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import AffectRouterError
from .geo import GeoPoint, polyline_length_m
from .graph import DEFAULT_SPEEDS_KMH, ROAD_TYPES, RoadEdge, RoadGraph, RoadNode

MPH_TO_KMH = 1.609344


class OsmParseError(AffectRouterError):
    """Malformed OSM XML."""


@dataclass(frozen=True)
class OsmWay:
    id: int
    node_ids: Tuple[int, ...]
    road_type: str
    max_speed_kmh: Optional[float]
    n_lanes: Optional[int]
    direction: str  # "both" | "forward" | "backward"


@dataclass
class RoadNetworkSource:
    """Nodes and highway ways retained from an OSM document."""

    nodes: Dict[int, GeoPoint]
    ways: List[OsmWay]
    warnings: List[str] = field(default_factory=list)


def _parse_maxspeed(value: str) -> Optional[float]:
    value = value.strip()
    if value.lower().endswith("mph"):
        try:
            return float(value[:-3].strip()) * MPH_TO_KMH
        except ValueError:
            return None
    try:
        speed = float(value)
    except ValueError:
        return None
    return speed if speed > 0 else None


def _parse_lanes(value: str) -> Optional[int]:
    try:
        lanes = int(value.strip())
    except ValueError:
        return None
    return lanes if lanes >= 1 else None


def _parse_direction(oneway: Optional[str]) -> str:
    if oneway is None:
        return "both"
    v = oneway.strip().lower()
    if v in ("yes", "true", "1"):
        return "forward"
    if v in ("-1", "reverse"):
        return "backward"
    return "both"


def parse_osm_xml(document) -> RoadNetworkSource:
    """Parse OSM XML from bytes, str, or a binary file object.

    Ways without a highway tag are dropped. A way referencing a node that
    is not in the document is dropped with a warning. Unsupported highway
    values map to "unclassified" so connectivity survives odd tagging.
    """
    if isinstance(document, str):
        document = document.encode()
    if isinstance(document, (bytes, bytearray)):
        document = io.BytesIO(document)
    nodes: Dict[int, GeoPoint] = {}
    raw_ways = []
    try:
        for _, elem in ET.iterparse(document, events=("end",)):
            tag = elem.tag
            if tag == "node":
                nid = int(elem.attrib["id"])
                nodes[nid] = GeoPoint(float(elem.attrib["lat"]), float(elem.attrib["lon"]))
            elif tag == "way":
                refs = tuple(int(nd.attrib["ref"]) for nd in elem.findall("nd"))
                tags = {t.attrib["k"]: t.attrib["v"] for t in elem.findall("tag")}
                raw_ways.append((int(elem.attrib["id"]), refs, tags))
            if tag in ("node", "way", "relation"):
                elem.clear()
    except ET.ParseError as exc:
        line, col = exc.position
        raise OsmParseError(f"malformed OSM XML at line {line}, column {col}: {exc.msg}") from exc
    except (KeyError, ValueError) as exc:
        raise OsmParseError(f"malformed OSM element: {exc}") from exc

    warnings: List[str] = []
    ways: List[OsmWay] = []
    for way_id, refs, tags in raw_ways:
        highway = tags.get("highway")
        if highway is None:
            continue
        if len(refs) < 2:
            warnings.append(f"way {way_id}: fewer than 2 node refs, dropped")
            continue
        missing = [r for r in refs if r not in nodes]
        if missing:
            warnings.append(f"way {way_id}: references missing node {missing[0]}, dropped")
            continue
        road_type = highway if highway in ROAD_TYPES else "unclassified"
        ways.append(
            OsmWay(
                id=way_id,
                node_ids=refs,
                road_type=road_type,
                max_speed_kmh=_parse_maxspeed(tags["maxspeed"]) if "maxspeed" in tags else None,
                n_lanes=_parse_lanes(tags["lanes"]) if "lanes" in tags else None,
                direction=_parse_direction(tags.get("oneway")),
            )
        )

    used = {r for w in ways for r in w.node_ids}
    return RoadNetworkSource(
        nodes={nid: p for nid, p in nodes.items() if nid in used},
        ways=ways,
        warnings=warnings,
    )


def _junction_nodes(ways: List[OsmWay]) -> set:
    """Way endpoints plus nodes used more than once across retained ways."""
    usage: Counter = Counter()
    junctions = set()
    for w in ways:
        junctions.add(w.node_ids[0])
        junctions.add(w.node_ids[-1])
        usage.update(w.node_ids)
    junctions.update(nid for nid, count in usage.items() if count >= 2)
    return junctions


def build_graph(source: RoadNetworkSource, defaults: Optional[Dict[str, float]] = None) -> RoadGraph:
    """Materialize a RoadGraph from a parsed source.

    Ways split at junction nodes; bidirectional ways yield two directed
    edges sharing (reversed) geometry. Missing maxspeed falls back to the
    per-road-type default table, missing lanes to 1.
    """
    if defaults is None:
        defaults = DEFAULT_SPEEDS_KMH
    if not source.ways:
        raise ValueError("empty network")
    junctions = _junction_nodes(source.ways)

    nodes: Dict[int, RoadNode] = {}
    edges: List[RoadEdge] = []

    def add_edge(seg_nodes: List[int], way: OsmWay, reverse: bool) -> None:
        seq = list(reversed(seg_nodes)) if reverse else list(seg_nodes)
        geometry = tuple(source.nodes[nid] for nid in seq)
        length = polyline_length_m(geometry)
        speed = way.max_speed_kmh if way.max_speed_kmh is not None else defaults[way.road_type]
        edges.append(
            RoadEdge(
                id=len(edges),
                from_node=seq[0],
                to_node=seq[-1],
                geometry=geometry,
                length_m=length,
                road_type=way.road_type,
                max_speed_kmh=speed,
                n_lanes=way.n_lanes if way.n_lanes is not None else 1,
            )
        )
        for endpoint in (seq[0], seq[-1]):
            nodes.setdefault(endpoint, RoadNode(endpoint, source.nodes[endpoint]))

    for way in source.ways:
        # way endpoints are junctions, so every segment flushes here
        segment = [way.node_ids[0]]
        for nid in way.node_ids[1:]:
            segment.append(nid)
            if nid in junctions:
                if way.direction in ("both", "forward"):
                    add_edge(segment, way, reverse=False)
                if way.direction in ("both", "backward"):
                    add_edge(segment, way, reverse=True)
                segment = [nid]

    if not edges:
        raise ValueError("empty network")
    return RoadGraph(nodes.values(), edges)
