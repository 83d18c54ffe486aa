"""Server lookahead along the road, tier selection, and skip decisions.

Given a UE's road position, heading, speed, and latency class this module
produces the ordered list of coverage regions ahead and the migration target
under each prediction-based strategy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .errors import OutOfRangeError
from .roadnet import Heading, RoadPosition
from .topology import CoverageInterval, CoverageMap, Tier

DEFAULT_LOOKAHEAD = 16


@dataclass(frozen=True)
class LatencyClass:
    """Task delay tolerance: the end-to-end deadline the serving tier must meet."""

    name: str
    deadline: float  # seconds

    def __post_init__(self):
        if self.deadline <= 0:
            raise OutOfRangeError("latency class deadline must be positive")


LOW_LATENCY = LatencyClass("low", 0.030)
HIGH_LATENCY = LatencyClass("high", 0.150)


@dataclass(frozen=True)
class TierChoice:
    tier: Tier
    deadline_violated: bool


def select_tier(latency_class: LatencyClass, tier_latencies: dict[Tier, float],
                processing_delay: float) -> TierChoice:
    """Widest-coverage tier whose latency plus compute still meets the deadline.

    The regional tier wins whenever it is feasible; if no tier is feasible the
    UE falls back to local and the violation is flagged for the run report.
    """
    for tier in (Tier.REGIONAL, Tier.LOCAL):
        if tier not in tier_latencies:
            continue
        if tier_latencies[tier] + processing_delay <= latency_class.deadline:
            return TierChoice(tier, False)
    return TierChoice(Tier.LOCAL, True)


@dataclass(frozen=True)
class UpcomingEntry:
    """One coverage region ahead of the UE along its travel direction.

    `width` is the contiguous on-road stretch served by this server (merged
    across node transitions that keep the same server); `entry_distance` is
    measured from the UE's current position.
    """

    interval: CoverageInterval
    entry_distance: float
    width: float
    is_branch_alternate: bool = False

    @property
    def server_id(self) -> int:
        return self.interval.server_id


def next_servers(mr: CoverageMap, pos: RoadPosition, tier: Tier,
                 lookahead: int = DEFAULT_LOOKAHEAD) -> list[UpcomingEntry]:
    """Coverage regions ahead of pos, in travel order, current region first.

    The walk follows unique continuations across nodes. At a branching node it
    stops and appends the first region of every branch as equally ranked
    alternates; at a dead-end it stops (reversals are not speculated).
    """
    graph = mr.graph
    seg = graph.segments[pos.segment_id]
    heading = pos.heading
    cur = mr.interval_at(seg.segment_id, tier, pos.offset, heading)
    forward = heading is Heading.FORWARD
    first_width = (cur.end_offset - pos.offset) if forward else (pos.offset - cur.start_offset)
    entries = [UpcomingEntry(cur, 0.0, first_width)]
    dist = first_width
    offset = cur.end_offset if forward else cur.start_offset
    visited: set[tuple[int, Heading]] = {(seg.segment_id, heading)}

    while len(entries) < lookahead:
        seg_end = seg.length if forward else 0.0
        at_node = abs(offset - seg_end) <= 1e-9
        if not at_node:
            hd = Heading.FORWARD if forward else Heading.BACKWARD
            nxt = mr.interval_at(seg.segment_id, tier, offset, hd)
            entries.append(UpcomingEntry(nxt, dist, nxt.width))
            dist += nxt.width
            offset = nxt.end_offset if forward else nxt.start_offset
            continue

        node = seg.to_node if forward else seg.from_node
        options = graph.continuations(seg.segment_id, node)
        if not options:
            break
        if len(options) > 1:
            for sid in options:
                branch = graph.segments[sid]
                if branch.from_node == node:
                    iv = mr.interval_at(sid, tier, 0.0, Heading.FORWARD)
                else:
                    iv = mr.interval_at(sid, tier, branch.length, Heading.BACKWARD)
                entries.append(UpcomingEntry(iv, dist, iv.width, is_branch_alternate=True))
            break
        nxt_seg = graph.segments[options[0]]
        if nxt_seg.from_node == node:
            seg, forward, offset = nxt_seg, True, 0.0
            entry_heading = Heading.FORWARD
        else:
            seg, forward, offset = nxt_seg, False, nxt_seg.length
            entry_heading = Heading.BACKWARD
        if (seg.segment_id, entry_heading) in visited:
            break
        visited.add((seg.segment_id, entry_heading))
        iv = mr.interval_at(seg.segment_id, tier, offset, entry_heading)
        if iv.server_id == entries[-1].interval.server_id and not entries[-1].is_branch_alternate:
            # Same server continues across the node: extend the current region.
            last = entries[-1]
            entries[-1] = UpcomingEntry(last.interval, last.entry_distance,
                                        last.width + iv.width)
        else:
            entries.append(UpcomingEntry(iv, dist, iv.width))
        dist += iv.width
        offset = iv.end_offset if forward else iv.start_offset
    return entries


@dataclass(frozen=True)
class SkipOutcome:
    target: Optional[UpcomingEntry]
    skipped: tuple[int, ...]     # server ids relayed across
    relay_hops: int


def apply_skip_rule(upcoming: Sequence[UpcomingEntry], speed: float,
                    tau_min: float, relay_latency: float,
                    latency_class: LatencyClass, tier_latency: float,
                    processing_delay: float) -> SkipOutcome:
    """Skip coverage regions too short to be worth a migration.

    A region is skipped when its residence time (width / speed) stays under
    tau_min AND serving the UE across it by relaying through the retained
    server still meets the task deadline at the accumulated hop count. The
    target is the first region that survives; if everything is skippable the
    last region is targeted anyway.
    """
    if tau_min < 0:
        raise OutOfRangeError("tau_min must be >= 0")
    if not upcoming:
        return SkipOutcome(None, (), 0)
    skipped: list[int] = []
    hops = 0
    chosen: Optional[UpcomingEntry] = None
    for entry in upcoming:
        if entry.is_branch_alternate:
            chosen = _pick_alternate(upcoming, entry.entry_distance)
            break
        residence = entry.width / speed if speed > 0 else float("inf")
        relay_ok = (tier_latency + (hops + 1) * relay_latency + processing_delay
                    <= latency_class.deadline)
        if residence < tau_min and relay_ok:
            skipped.append(entry.server_id)
            hops += 1
            continue
        chosen = entry
        break
    if chosen is None:
        # Everything was skippable; the last region must be taken regardless.
        chosen = upcoming[-1]
        skipped.pop()
        hops -= 1
    return SkipOutcome(chosen, tuple(skipped), hops)


def _pick_alternate(entries: Sequence[UpcomingEntry],
                    entry_distance: float) -> UpcomingEntry:
    group = [e for e in entries
             if e.is_branch_alternate and e.entry_distance == entry_distance]
    return min(group, key=lambda e: e.server_id)


class StrategyKind(Enum):
    NEAREST = "nearest"
    PM = "pm"
    PM_OP = "pm-op"
    PM_TIER = "pm-tier"
    PM_OP_TIER = "pm-op-tier"

    @property
    def predictive(self) -> bool:
        return self is not StrategyKind.NEAREST

    @property
    def tiered(self) -> bool:
        return self in (StrategyKind.PM_TIER, StrategyKind.PM_OP_TIER)

    @property
    def skipping(self) -> bool:
        return self in (StrategyKind.PM_OP, StrategyKind.PM_OP_TIER)


@dataclass(frozen=True)
class PredictConfig:
    tier_latencies: dict[Tier, float]
    processing_delay: float
    tau_min: float = 10.0
    relay_latency: float = 0.005
    lookahead: int = DEFAULT_LOOKAHEAD


@dataclass(frozen=True)
class PredictionResult:
    upcoming: tuple[UpcomingEntry, ...]
    chosen_tier: Tier
    target: Optional[int]            # server id, None when nothing lies ahead
    skipped: tuple[int, ...]
    relay_hops: int
    deadline_violated: bool


def decide(kind: StrategyKind, pos: RoadPosition, speed: float,
           serving_server: Optional[int], latency_class: LatencyClass,
           mr: CoverageMap, cfg: PredictConfig) -> Optional[PredictionResult]:
    """Run one prediction round for a UE under the given strategy.

    Returns None for the reactive baseline, which never predicts. The target
    is never the currently serving server.
    """
    if not kind.predictive:
        return None
    violated = False
    tier = Tier.LOCAL
    if kind.tiered:
        choice = select_tier(latency_class, cfg.tier_latencies, cfg.processing_delay)
        tier, violated = choice.tier, choice.deadline_violated

    entries = next_servers(mr, pos, tier, cfg.lookahead)
    candidates = [e for e in entries if e.server_id != serving_server]
    if not candidates:
        return PredictionResult(tuple(entries), tier, None, (), 0, violated)

    if kind.skipping:
        outcome = apply_skip_rule(candidates, speed, cfg.tau_min,
                                  cfg.relay_latency, latency_class,
                                  cfg.tier_latencies[tier], cfg.processing_delay)
        target_entry, skipped, hops = outcome.target, outcome.skipped, outcome.relay_hops
    else:
        first = candidates[0]
        if first.is_branch_alternate:
            first = _pick_alternate(candidates, first.entry_distance)
        target_entry, skipped, hops = first, (), 0

    target = target_entry.server_id if target_entry is not None else None
    return PredictionResult(tuple(entries), tier, target, skipped, hops, violated)
