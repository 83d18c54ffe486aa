"""Vehicle trajectories on the road graph and per-UE kinematic state."""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from random import Random
from typing import Optional

from .errors import NonMonotonicTimeError, OutOfRangeError, ParseError
from .roadnet import (
    Heading,
    Point,
    RoadGraph,
    RoadPosition,
    advance,
    match_road,
    point_at,
    position_point,
    project_geographic,
)


@dataclass
class UeState:
    """One vehicle: road position, kinematics, task class, serving server."""

    ue_id: int
    pos: RoadPosition
    speed: float
    latency_class: "object" = None
    serving_server: Optional[int] = None
    reported_pos: Optional[RoadPosition] = None
    reported_speed: float = 0.0


@dataclass(frozen=True)
class ReportThresholds:
    """Status updates go out when movement exceeds these bounds or heading flips."""

    distance_m: float = 50.0
    speed_mps: float = 1.0


@dataclass
class Trace:
    ue_id: int
    samples: list[tuple[float, Point]] = field(default_factory=list)

    def time_range(self) -> tuple[float, float]:
        return self.samples[0][0], self.samples[-1][0]


def random_position(graph: RoadGraph, rng: Random) -> RoadPosition:
    """Seeded uniform draw: segment, offset along it, heading."""
    seg_ids = sorted(graph.segments)
    seg = graph.segments[seg_ids[rng.randrange(len(seg_ids))]]
    offset = rng.uniform(0.0, seg.length)
    heading = Heading.FORWARD if rng.random() < 0.5 else Heading.BACKWARD
    return RoadPosition(seg.segment_id, offset, heading)


def generate_trip(graph: RoadGraph, seed: int, speed: float, duration: float,
                  dt: float) -> Trace:
    """Constant-speed random trip sampled every dt seconds.

    The same seed always yields the same trace: the start position and every
    turn decision come from one Random(seed) stream.
    """
    if speed < 0:
        raise OutOfRangeError("speed must be >= 0")
    if duration <= 0 or dt <= 0:
        raise OutOfRangeError("duration and dt must be positive")
    rng = Random(seed)
    pos = random_position(graph, rng)
    trace = Trace(ue_id=0, samples=[(0.0, position_point(graph, pos))])
    steps = int(round(duration / dt))
    for k in range(1, steps + 1):
        pos = advance(graph, pos, speed * dt, rng)
        trace.samples.append((k * dt, position_point(graph, pos)))
    return trace


def write_traces_csv(traces: list[Trace], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["ue_id", "t_s", "x_m", "y_m"])
        for tr in traces:
            for t, p in tr.samples:
                w.writerow([tr.ue_id, repr(float(t)), repr(p.x), repr(p.y)])


def load_traces(path, origin: Optional[tuple[float, float]] = None) -> list[Trace]:
    """Parse trace CSV rows (ue_id, t, x, y) or (ue_id, t, lat, lon) with origin.

    Raises ParseError with row/column diagnostics and NonMonotonicTimeError
    when a UE's timestamps do not strictly increase.
    """
    traces: dict[int, Trace] = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or (row_no == 1 and row[0].strip().lower() == "ue_id"):
                continue
            if len(row) != 4:
                raise ParseError(f"{path}: row {row_no}: expected 4 columns, got {len(row)}")
            values = []
            for col_no, raw in enumerate(row, start=1):
                try:
                    values.append(float(raw))
                except ValueError as exc:
                    raise ParseError(
                        f"{path}: row {row_no}, column {col_no}: not a number: {raw!r}"
                    ) from exc
            ue_id = int(values[0])
            t = values[1]
            if origin is None:
                p = Point(values[2], values[3])
            else:
                p = project_geographic(values[2], values[3], origin)
            tr = traces.setdefault(ue_id, Trace(ue_id=ue_id))
            if tr.samples and t <= tr.samples[-1][0]:
                raise NonMonotonicTimeError(
                    f"{path}: row {row_no}: t={t} not after t={tr.samples[-1][0]} for ue {ue_id}")
            tr.samples.append((t, p))
    return [traces[k] for k in sorted(traces)]


def ingest_trace(path, origin: Optional[tuple[float, float]] = None,
                 ue_id: Optional[int] = None) -> Trace:
    """Load a single UE's trace from a CSV file; see load_traces for the format."""
    traces = load_traces(path, origin=origin)
    if not traces:
        raise ParseError(f"{path}: no trace rows")
    if ue_id is not None:
        for tr in traces:
            if tr.ue_id == ue_id:
                return tr
        raise ParseError(f"{path}: no rows for ue {ue_id}")
    if len(traces) > 1:
        raise ParseError(f"{path}: {len(traces)} UEs present, pass ue_id to pick one")
    return traces[0]


def kinematics_from_trace(trace: Trace, graph: RoadGraph,
                          t: float) -> tuple[RoadPosition, float]:
    """Interpolated, map-matched position plus implied speed at time t.

    Heading follows the sign of the matched-offset change over the bracketing
    samples; speed is the straight-line sample distance over the sample gap.
    """
    t0, t1 = trace.time_range()
    if not (t0 <= t <= t1):
        raise OutOfRangeError(f"t={t} outside trace range [{t0}, {t1}]")
    times = [s[0] for s in trace.samples]
    if len(trace.samples) == 1:
        p = trace.samples[0][1]
        m = match_road(graph, p)
        return RoadPosition(m.segment_id, m.offset, Heading.FORWARD), 0.0
    i = min(max(bisect_right(times, t) - 1, 0), len(times) - 2)
    (ta, pa), (tb, pb) = trace.samples[i], trace.samples[i + 1]
    frac = 0.0 if tb == ta else (t - ta) / (tb - ta)
    p = Point(pa.x + frac * (pb.x - pa.x), pa.y + frac * (pb.y - pa.y))
    m = match_road(graph, p)
    speed = pa.dist(pb) / (tb - ta)

    mb = match_road(graph, pb)
    if mb.segment_id == m.segment_id:
        heading = Heading.FORWARD if mb.offset >= m.offset else Heading.BACKWARD
    else:
        # Bracket ends on another segment: head toward the node they share.
        seg = graph.segments[m.segment_id]
        nxt = graph.segments[mb.segment_id]
        if seg.to_node in (nxt.from_node, nxt.to_node):
            heading = Heading.FORWARD
        elif seg.from_node in (nxt.from_node, nxt.to_node):
            heading = Heading.BACKWARD
        else:
            heading = Heading.FORWARD
    return RoadPosition(m.segment_id, m.offset, heading), speed


def should_report(ue: UeState, graph: RoadGraph,
                  thresholds: ReportThresholds) -> bool:
    """True when movement since the last report crosses a threshold.

    Triggers on displacement beyond distance_m, any heading flip, or a speed
    change beyond speed_mps. A positive result records the current state as
    the new reported baseline.
    """
    if thresholds.distance_m <= 0 or thresholds.speed_mps <= 0:
        raise OutOfRangeError("report thresholds must be positive")
    if ue.reported_pos is None:
        ue.reported_pos = ue.pos
        ue.reported_speed = ue.speed
        return True
    moved = position_point(graph, ue.pos).dist(position_point(graph, ue.reported_pos))
    trigger = (moved > thresholds.distance_m
               or ue.pos.heading is not ue.reported_pos.heading
               or abs(ue.speed - ue.reported_speed) > thresholds.speed_mps)
    if trigger:
        ue.reported_pos = ue.pos
        ue.reported_speed = ue.speed
    return trigger
