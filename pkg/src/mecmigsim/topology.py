"""Base-station lattice, two-tier edge servers, and road coverage intervals.

Coverage is modeled as Voronoi regions of station centers, which for a
hexagonal lattice coincides with hexagonal cells. The regional tier groups
stations into rectangular blocks of lattice indices; a regional server's
coverage is the union of its stations' cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateBoundsError,
    InvalidClusterError,
    UnknownSegmentError,
)
from .roadnet import Heading, Point, RoadGraph

_INSIDE_EPS = 1e-9
# Intervals thinner than this are geometry artifacts and get merged away.
MIN_INTERVAL_M = 0.01


class Tier(Enum):
    LOCAL = "local"
    REGIONAL = "regional"


@dataclass(frozen=True)
class BaseStation:
    station_id: int
    center: Point
    # Lattice indices, kept so the regional tier can tile the index grid.
    col: int
    row: int


@dataclass(frozen=True)
class MecServer:
    server_id: int
    tier: Tier
    attached_stations: frozenset[int]
    ue_latency: float          # seconds UE <-> server
    processing_delay: float    # seconds of compute per task
    peer_bandwidth: float      # bytes/second between servers
    storage_capacity: float    # bytes available for container state


@dataclass(frozen=True)
class MecParams:
    """Per-tier latency and shared link/storage parameters."""

    local_latency_s: float = 0.010
    regional_latency_s: float = 0.050
    processing_delay_s: float = 0.010
    peer_bandwidth_bps: float = 12.5e6   # bytes/s
    storage_capacity_bytes: float = 1e12

    def latency(self, tier: Tier) -> float:
        return self.local_latency_s if tier is Tier.LOCAL else self.regional_latency_s


@dataclass(frozen=True)
class CoverageInterval:
    server_id: int
    segment_id: int
    start_offset: float
    end_offset: float

    @property
    def width(self) -> float:
        return self.end_offset - self.start_offset


def build_hex_lattice(bounds: tuple[Point, Point],
                      separation: float) -> list[BaseStation]:
    """Hexagonal station lattice anchored at the origin.

    Row j sits at y = j * separation * sqrt(3)/2; odd rows are shifted by
    separation/2. All lattice points inside `bounds` (inclusive) are returned.
    """
    lo, hi = bounds
    if separation <= 0:
        raise DegenerateBoundsError("separation must be positive")
    if hi.x - lo.x <= 0 or hi.y - lo.y <= 0:
        raise DegenerateBoundsError("bounding box must have positive area")
    row_h = separation * math.sqrt(3.0) / 2.0
    eps = _INSIDE_EPS * max(1.0, abs(hi.x), abs(hi.y), abs(lo.x), abs(lo.y))
    stations: list[BaseStation] = []
    j = math.ceil((lo.y - eps) / row_h)
    sid = 0
    while j * row_h <= hi.y + eps:
        y = j * row_h
        shift = (separation / 2.0) if (j % 2) else 0.0
        i = math.ceil((lo.x - shift - eps) / separation)
        while i * separation + shift <= hi.x + eps:
            stations.append(BaseStation(sid, Point(i * separation + shift, y), i, j))
            sid += 1
            i += 1
        j += 1
    return stations


def assign_cell(stations: Sequence[BaseStation], p: Point) -> int:
    """Station with minimum Euclidean distance to p; ties go to the lowest id."""
    best_id = -1
    best_d2 = math.inf
    for s in sorted(stations, key=lambda s: s.station_id):
        d2 = (p.x - s.center.x) ** 2 + (p.y - s.center.y) ** 2
        if d2 < best_d2:
            best_d2 = d2
            best_id = s.station_id
    return best_id


def build_tiers(stations: Sequence[BaseStation], cluster_cols: int,
                cluster_rows: int, params: MecParams) -> list[MecServer]:
    """One local server per station plus regional servers over index blocks.

    Blocks of the lattice index grid are cluster_cols x cluster_rows; a block
    left with a single station is merged into the nearest neighboring block so
    every regional server keeps at least two stations.
    """
    if cluster_cols < 1 or cluster_rows < 1:
        raise InvalidClusterError("cluster dimensions must be >= 1")
    if cluster_cols * cluster_rows == 1:
        raise InvalidClusterError(
            "1x1 clustering would give regional servers a single station")
    if len(stations) < 2:
        raise InvalidClusterError("regional tier needs at least two stations")

    servers = [
        MecServer(s.station_id, Tier.LOCAL, frozenset((s.station_id,)),
                  params.latency(Tier.LOCAL), params.processing_delay_s,
                  params.peer_bandwidth_bps, params.storage_capacity_bytes)
        for s in sorted(stations, key=lambda s: s.station_id)
    ]

    blocks: dict[tuple[int, int], list[int]] = {}
    for s in stations:
        key = (s.col // cluster_cols, s.row // cluster_rows)
        blocks.setdefault(key, []).append(s.station_id)

    centers = {s.station_id: s.center for s in stations}

    def centroid(members: list[int]) -> Point:
        xs = [centers[m].x for m in members]
        ys = [centers[m].y for m in members]
        return Point(sum(xs) / len(xs), sum(ys) / len(ys))

    # Fold singleton blocks into their nearest surviving block.
    while True:
        singles = [k for k, members in blocks.items() if len(members) == 1]
        if not singles:
            break
        if len(blocks) == 1:
            raise InvalidClusterError("cannot form a regional server from one station")
        key = singles[0]
        lone = blocks.pop(key)
        c = centroid(lone)
        target = min(blocks,
                     key=lambda k: (centroid(blocks[k]).dist(c), k))
        blocks[target].extend(lone)

    next_id = max(s.station_id for s in stations) + 1
    for _, key in enumerate(sorted(blocks)):
        members = frozenset(blocks[key])
        servers.append(MecServer(next_id, Tier.REGIONAL, members,
                                 params.latency(Tier.REGIONAL),
                                 params.processing_delay_s,
                                 params.peer_bandwidth_bps,
                                 params.storage_capacity_bytes))
        next_id += 1
    return servers


class CoverageMap:
    """Per (segment, tier) ordered coverage intervals partitioning [0, length].

    Immutable after construction; keeps a reference to the road graph it
    was built from so lookahead walks can follow segment adjacency.
    """

    def __init__(self, graph: RoadGraph,
                 intervals: dict[tuple[int, Tier], list[CoverageInterval]]):
        self.graph = graph
        self._intervals = intervals

    def intervals(self, segment_id: int, tier: Tier) -> list[CoverageInterval]:
        key = (segment_id, tier)
        if key not in self._intervals:
            raise UnknownSegmentError(f"segment {segment_id} not in coverage map")
        return self._intervals[key]

    def interval_at(self, segment_id: int, tier: Tier, offset: float,
                    heading: Heading = Heading.FORWARD) -> CoverageInterval:
        """Interval containing `offset`; boundary hits resolve in travel direction."""
        ivs = self.intervals(segment_id, tier)
        if heading is Heading.FORWARD:
            for iv in ivs:
                if offset < iv.end_offset:
                    return iv
            return ivs[-1]
        for iv in reversed(ivs):
            if offset > iv.start_offset:
                return iv
        return ivs[0]

    def dump_rows(self) -> list[tuple[int, str, int, float, float]]:
        rows = []
        for (seg_id, tier) in sorted(self._intervals,
                                     key=lambda k: (k[0], k[1].value)):
            for iv in self._intervals[(seg_id, tier)]:
                rows.append((seg_id, tier.value, iv.server_id,
                             iv.start_offset, iv.end_offset))
        return rows


def list_servers_on_road(mr: CoverageMap, segment_id: int,
                         tier: Tier) -> list[CoverageInterval]:
    """Ordered coverage intervals of one tier along one segment."""
    return mr.intervals(segment_id, tier)


def build_mr_map(graph: RoadGraph, servers: Sequence[MecServer],
                 stations: Sequence[BaseStation], step_m: float = 1.0,
                 refine_m: float = 1e-3) -> CoverageMap:
    """Walk every segment, label samples with their serving server per tier,
    and merge runs into intervals. Boundaries are refined by bisection.
    """
    order = sorted(stations, key=lambda s: s.station_id)
    sx = np.asarray([s.center.x for s in order])
    sy = np.asarray([s.center.y for s in order])
    ids = [s.station_id for s in order]

    station_to_regional: dict[int, int] = {}
    for srv in servers:
        if srv.tier is Tier.REGIONAL:
            for st in srv.attached_stations:
                station_to_regional[st] = srv.server_id
    station_to_local = {next(iter(srv.attached_stations)): srv.server_id
                        for srv in servers if srv.tier is Tier.LOCAL}

    def nearest_station(p: Point) -> int:
        d2 = (p.x - sx) ** 2 + (p.y - sy) ** 2
        return ids[int(np.argmin(d2))]

    def server_at(seg, offset: float, tier: Tier) -> int:
        st = nearest_station(seg.point_at(offset))
        return station_to_local[st] if tier is Tier.LOCAL else station_to_regional[st]

    tiers = [Tier.LOCAL]
    if station_to_regional:
        tiers.append(Tier.REGIONAL)

    intervals: dict[tuple[int, Tier], list[CoverageInterval]] = {}
    for seg in sorted(graph.segments.values(), key=lambda s: s.segment_id):
        n_steps = int(seg.length // step_m)
        offsets = [i * step_m for i in range(n_steps + 1)]
        if offsets[-1] < seg.length:
            offsets.append(seg.length)
        for tier in tiers:
            labels = [server_at(seg, o, tier) for o in offsets]
            cuts = [0.0]
            owners = [labels[0]]
            for k in range(1, len(offsets)):
                if labels[k] == labels[k - 1]:
                    continue
                lo, hi = offsets[k - 1], offsets[k]
                left = labels[k - 1]
                while hi - lo > refine_m:
                    mid = 0.5 * (lo + hi)
                    if server_at(seg, mid, tier) == left:
                        lo = mid
                    else:
                        hi = mid
                cuts.append(0.5 * (lo + hi))
                owners.append(labels[k])
            cuts.append(seg.length)

            # Drop slivers into the wider neighbor, then merge same-owner runs.
            while len(owners) > 1:
                widths = [cuts[i + 1] - cuts[i] for i in range(len(owners))]
                narrow = min(range(len(widths)), key=lambda i: widths[i])
                if widths[narrow] >= MIN_INTERVAL_M:
                    break
                if narrow == 0:
                    owners.pop(0)
                    cuts.pop(1)
                elif narrow == len(owners) - 1:
                    owners.pop()
                    cuts.pop(-2)
                else:
                    left_w = widths[narrow - 1]
                    right_w = widths[narrow + 1]
                    if left_w >= right_w:
                        owners.pop(narrow)
                        cuts.pop(narrow)
                    else:
                        owners.pop(narrow)
                        cuts.pop(narrow + 1)
                k = 1
                while k < len(owners):
                    if owners[k] == owners[k - 1]:
                        owners.pop(k)
                        cuts.pop(k)
                    else:
                        k += 1

            intervals[(seg.segment_id, tier)] = [
                CoverageInterval(owners[i], seg.segment_id, cuts[i], cuts[i + 1])
                for i in range(len(owners))
            ]
    return CoverageMap(graph, intervals)
