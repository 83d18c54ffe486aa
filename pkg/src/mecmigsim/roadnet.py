"""Planar road network: geometry, map matching, and along-road movement.

Coordinates are planar meters (local east / local north). Geographic input
is converted once at ingestion with an equirectangular projection, which is
adequate at city scale.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from random import Random
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    EmptyGraphError,
    GraphValidationError,
    InvalidDimsError,
    OutOfRangeError,
)

EARTH_RADIUS_M = 6_371_000.0

# Sub-nanometer movement is treated as arrival; avoids float dust at nodes.
_DIST_EPS = 1e-9


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def dist(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class Heading(Enum):
    """Travel direction along a segment: toward its to-node or its from-node."""

    FORWARD = 1
    BACKWARD = -1

    def flipped(self) -> "Heading":
        return Heading.BACKWARD if self is Heading.FORWARD else Heading.FORWARD


@dataclass(frozen=True)
class RoadPosition:
    segment_id: int
    offset: float
    heading: Heading


class RoadMatch(NamedTuple):
    """Result of projecting a point onto the road network."""

    segment_id: int
    offset: float
    lateral_m: float


class Segment:
    """One polyline road segment with precomputed vertex offsets."""

    __slots__ = ("segment_id", "from_node", "to_node", "polyline", "length", "_cum")

    def __init__(self, segment_id: int, from_node: int, to_node: int,
                 polyline: Sequence[Point]):
        if len(polyline) < 2:
            raise GraphValidationError(
                f"segment {segment_id}: polyline needs at least 2 points")
        self.segment_id = segment_id
        self.from_node = from_node
        self.to_node = to_node
        self.polyline = tuple(polyline)
        cum = [0.0]
        for a, b in zip(polyline, polyline[1:]):
            cum.append(cum[-1] + a.dist(b))
        self._cum = cum
        self.length = cum[-1]
        if self.length <= 0.0:
            raise GraphValidationError(f"segment {segment_id} has zero length")

    def point_at(self, offset: float) -> Point:
        off = min(max(offset, 0.0), self.length)
        i = bisect_right(self._cum, off) - 1
        if i >= len(self.polyline) - 1:
            return self.polyline[-1]
        a, b = self.polyline[i], self.polyline[i + 1]
        span = self._cum[i + 1] - self._cum[i]
        t = 0.0 if span == 0.0 else (off - self._cum[i]) / span
        return Point(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))


class RoadGraph:
    """Immutable planar road network. Safe to share read-only across runs."""

    def __init__(self, nodes: Iterable[tuple[int, Point]],
                 segments: Iterable[tuple[int, int, int, Sequence[Point]]]):
        self.nodes: dict[int, Point] = {}
        for node_id, p in nodes:
            if node_id in self.nodes:
                raise GraphValidationError(f"duplicate node id {node_id}")
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise GraphValidationError(f"node {node_id} has non-finite coordinates")
            self.nodes[node_id] = p

        self.segments: dict[int, Segment] = {}
        self.adjacency: dict[int, list[int]] = {n: [] for n in self.nodes}
        for seg_id, from_node, to_node, polyline in segments:
            if seg_id in self.segments:
                raise GraphValidationError(f"duplicate segment id {seg_id}")
            for end in (from_node, to_node):
                if end not in self.nodes:
                    raise GraphValidationError(
                        f"segment {seg_id} references unknown node {end}")
            seg = Segment(seg_id, from_node, to_node, polyline)
            if seg.polyline[0].dist(self.nodes[from_node]) > 1e-9:
                raise GraphValidationError(
                    f"segment {seg_id}: first polyline point does not match node {from_node}")
            if seg.polyline[-1].dist(self.nodes[to_node]) > 1e-9:
                raise GraphValidationError(
                    f"segment {seg_id}: last polyline point does not match node {to_node}")
            self.segments[seg_id] = seg
            self.adjacency[from_node].append(seg_id)
            if to_node != from_node:
                self.adjacency[to_node].append(seg_id)
        for n in self.adjacency:
            self.adjacency[n].sort()

        if self.segments:
            self._check_connected()
        self._proj = None  # lazy sub-edge arrays for match_road

    def _check_connected(self) -> None:
        start = next(iter(self.nodes))
        seen = {start}
        stack = [start]
        while stack:
            n = stack.pop()
            for sid in self.adjacency[n]:
                seg = self.segments[sid]
                for other in (seg.from_node, seg.to_node):
                    if other not in seen:
                        seen.add(other)
                        stack.append(other)
        if len(seen) != len(self.nodes):
            raise GraphValidationError(
                f"road graph is disconnected ({len(seen)} of {len(self.nodes)} nodes reachable)")

    def bbox(self) -> tuple[Point, Point]:
        xs = [p.x for s in self.segments.values() for p in s.polyline]
        ys = [p.y for s in self.segments.values() for p in s.polyline]
        return Point(min(xs), min(ys)), Point(max(xs), max(ys))

    def continuations(self, segment_id: int, node_id: int) -> list[int]:
        """Segments incident to node_id, excluding the arrival segment, sorted by id."""
        return [sid for sid in self.adjacency[node_id] if sid != segment_id]

    def _projection_arrays(self):
        if self._proj is None:
            ax, ay, bx, by, sid, base = [], [], [], [], [], []
            # Sub-edges ordered by (segment_id, vertex index) so that argmin's
            # first-minimum realizes the lowest-segment-id tie-break.
            for s in sorted(self.segments.values(), key=lambda s: s.segment_id):
                for i in range(len(s.polyline) - 1):
                    a, b = s.polyline[i], s.polyline[i + 1]
                    ax.append(a.x)
                    ay.append(a.y)
                    bx.append(b.x)
                    by.append(b.y)
                    sid.append(s.segment_id)
                    base.append(s._cum[i])
            dx = np.asarray(bx) - np.asarray(ax)
            dy = np.asarray(by) - np.asarray(ay)
            len2 = dx * dx + dy * dy
            self._proj = (np.asarray(ax), np.asarray(ay), dx, dy,
                          np.where(len2 == 0.0, 1.0, len2),
                          np.sqrt(len2), np.asarray(sid), np.asarray(base))
        return self._proj


def point_at(graph: RoadGraph, segment_id: int, offset: float) -> Point:
    return graph.segments[segment_id].point_at(offset)


def position_point(graph: RoadGraph, pos: RoadPosition) -> Point:
    return point_at(graph, pos.segment_id, pos.offset)


def match_road(graph: RoadGraph, p: Point) -> RoadMatch:
    """Project p onto the nearest point of any segment polyline.

    Returns the matched segment, the along-segment offset from its from-node,
    and the perpendicular (lateral) distance. Equidistant candidates resolve
    to the lowest segment id, then the lowest offset, so replays are total-ordered.
    """
    if not graph.segments:
        raise EmptyGraphError("cannot match against a graph with no segments")
    ax, ay, dx, dy, len2, seglen, sid, base = graph._projection_arrays()
    px, py = p.x - ax, p.y - ay
    t = np.clip((px * dx + py * dy) / len2, 0.0, 1.0)
    qx = px - t * dx
    qy = py - t * dy
    d2 = qx * qx + qy * qy
    i = int(np.argmin(d2))
    return RoadMatch(int(sid[i]), float(base[i] + t[i] * seglen[i]),
                     float(math.sqrt(d2[i])))


def project_geographic(lat: float, lon: float,
                       origin: tuple[float, float]) -> Point:
    """Equirectangular projection of geographic coordinates to local meters."""
    olat, olon = origin
    for name, value, bound in (("lat", lat, 90.0), ("lon", lon, 180.0),
                               ("origin lat", olat, 90.0), ("origin lon", olon, 180.0)):
        if not math.isfinite(value) or abs(value) > bound:
            raise OutOfRangeError(f"{name}={value} outside +/-{bound}")
    k = math.pi / 180.0 * EARTH_RADIUS_M
    x = (lon - olon) * math.cos(math.radians(olat)) * k
    y = (lat - olat) * k
    return Point(x, y)


def pick_continuation(rng: Random, options: Sequence[int]) -> int:
    """Uniform turn choice; consumes randomness only when a real choice exists."""
    if len(options) == 1:
        return options[0]
    return options[rng.randrange(len(options))]


def advance(graph: RoadGraph, pos: RoadPosition, distance: float,
            rng: Random) -> RoadPosition:
    """Move along the road in the heading direction.

    At nodes the continuation is a seeded uniform choice over incident
    segments excluding the arrival segment; dead-ends reverse the heading.
    """
    if distance < 0:
        raise OutOfRangeError("advance distance must be >= 0")
    seg = graph.segments[pos.segment_id]
    off = pos.offset
    heading = pos.heading
    remaining = distance
    while remaining > _DIST_EPS:
        room = (seg.length - off) if heading is Heading.FORWARD else off
        if remaining <= room + _DIST_EPS:
            step = min(remaining, room)
            off = off + step if heading is Heading.FORWARD else off - step
            remaining = 0.0
            break
        remaining -= room
        node = seg.to_node if heading is Heading.FORWARD else seg.from_node
        off = seg.length if heading is Heading.FORWARD else 0.0
        options = graph.continuations(seg.segment_id, node)
        if not options:
            heading = heading.flipped()
            continue
        nxt = graph.segments[pick_continuation(rng, options)]
        if nxt.from_node == node:
            seg, off, heading = nxt, 0.0, Heading.FORWARD
        else:
            seg, off, heading = nxt, nxt.length, Heading.BACKWARD
    return RoadPosition(seg.segment_id, min(max(off, 0.0), seg.length), heading)


def build_grid_graph(rows: int, cols: int, separation: float) -> RoadGraph:
    """Rectangular street grid: rows x cols blocks with streets every `separation` m."""
    if rows < 1 or cols < 1:
        raise InvalidDimsError(f"grid needs rows, cols >= 1 (got {rows}x{cols})")
    if separation <= 0:
        raise InvalidDimsError("separation must be positive")
    nodes = []
    for j in range(rows + 1):
        for i in range(cols + 1):
            nodes.append((j * (cols + 1) + i, Point(i * separation, j * separation)))
    node_pts = dict(nodes)
    segments = []
    seg_id = 0
    for j in range(rows + 1):
        for i in range(cols):
            a = j * (cols + 1) + i
            segments.append((seg_id, a, a + 1, [node_pts[a], node_pts[a + 1]]))
            seg_id += 1
    for j in range(rows):
        for i in range(cols + 1):
            a = j * (cols + 1) + i
            b = a + (cols + 1)
            segments.append((seg_id, a, b, [node_pts[a], node_pts[b]]))
            seg_id += 1
    return RoadGraph(nodes, segments)


def save_road_graph(graph: RoadGraph, path) -> None:
    doc = {
        "nodes": [{"id": nid, "x": p.x, "y": p.y}
                  for nid, p in sorted(graph.nodes.items())],
        "segments": [{"id": s.segment_id, "from": s.from_node, "to": s.to_node,
                      "polyline": [[p.x, p.y] for p in s.polyline]}
                     for s in sorted(graph.segments.values(),
                                     key=lambda s: s.segment_id)],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_road_graph(path) -> RoadGraph:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        nodes = [(int(n["id"]), Point(float(n["x"]), float(n["y"])))
                 for n in doc["nodes"]]
        segments = [(int(s["id"]), int(s["from"]), int(s["to"]),
                     [Point(float(x), float(y)) for x, y in s["polyline"]])
                    for s in doc["segments"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphValidationError(f"malformed road-graph file {path}: {exc}") from exc
    return RoadGraph(nodes, segments)
