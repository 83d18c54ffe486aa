"""Deterministic discrete-event engine driving UEs, coverage crossings,
migration transfers, and handoffs.

Vehicles move at constant speed along seeded random trips; every change of
serving coverage region is an event. Transfer progress between two events of
the same session is advanced analytically (no fixed timestep), so byte
counters and downtimes are exact for piecewise-constant rates. Identical
config and seed give a bit-identical report.

Trips are derived from (seed, speed index) only, so every strategy in a sweep
sees the same vehicle population and trajectories at a given speed; that is
what makes per-route strategy comparisons meaningful. Per-cell seeds mixing in
the strategy index still exist for report tagging.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from random import Random
from typing import Optional

from . import migration, mobility, prediction, strategy as strategy_mod
from .config import ScenarioConfig
from .errors import InternalInvariantError
from .migration import ContainerSpec, MigrationSession
from .prediction import PredictConfig, PredictionResult, StrategyKind
from .report import MigrationRecord, RunReport, UeInfo
from .roadnet import Heading, RoadGraph, RoadPosition
from .strategy import HandoffDecision, SchedulePrepare, StartPrecopy
from .topology import (
    CoverageInterval,
    CoverageMap,
    MecParams,
    Tier,
    build_hex_lattice,
    build_mr_map,
    build_tiers,
)
from .roadnet import Point, pick_continuation

_EPS = 1e-9


def derive_seed(*parts) -> int:
    """Stable cross-platform seed mixing via SHA-256."""
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


class EventKind(Enum):
    COVERAGE_BOUNDARY = "coverage-boundary"
    PREPARE_BAND_ENTRY = "prepare-band-entry"
    TRANSFER_COMPLETE = "transfer-complete"
    ITERATION_TRIGGER = "iteration-trigger"
    TRACE_END = "trace-end"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    ue_id: Optional[int] = None
    data: object = None


@dataclass(frozen=True)
class Crossing:
    """Next serving-region change along a UE's path."""

    distance: float               # meters from the position the walk started at
    pos: RoadPosition             # exactly at the boundary, on the entered side
    from_server: int
    to_interval: CoverageInterval


@dataclass(frozen=True)
class Bounce:
    """Dead-end reversal on the way to the next crossing."""

    distance: float
    pos: RoadPosition


def walk_to_crossing(mr: CoverageMap, tier: Tier, pos: RoadPosition,
                     max_distance: float,
                     rng: Random) -> tuple[Optional[Crossing], tuple[Bounce, ...]]:
    """Follow the road (drawing turns) until the serving server changes.

    Dead-ends reverse the heading and are reported as bounces. Returns no
    crossing when none occurs within max_distance. Turn draws consume the
    UE's trip stream in path order, exactly like stepwise movement would.
    """
    graph = mr.graph
    seg = graph.segments[pos.segment_id]
    heading = pos.heading
    offset = pos.offset
    cur = mr.interval_at(seg.segment_id, tier, offset, heading)
    dist = 0.0
    bounces: list[Bounce] = []

    while True:
        forward = heading is Heading.FORWARD
        far = cur.end_offset if forward else cur.start_offset
        seg_end = seg.length if forward else 0.0
        interior = (cur.end_offset < seg.length - _EPS) if forward else (cur.start_offset > _EPS)
        if interior:
            d = dist + abs(far - offset)
            if d > max_distance:
                return None, tuple(bounces)
            new_pos = RoadPosition(seg.segment_id, far, heading)
            nxt = mr.interval_at(seg.segment_id, tier, far, heading)
            return Crossing(d, new_pos, cur.server_id, nxt), tuple(bounces)

        dist += abs(seg_end - offset)
        offset = seg_end
        if dist > max_distance:
            return None, tuple(bounces)
        node = seg.to_node if forward else seg.from_node
        options = graph.continuations(seg.segment_id, node)
        if not options:
            heading = heading.flipped()
            bounces.append(Bounce(dist, RoadPosition(seg.segment_id, offset, heading)))
            continue
        nxt_seg = graph.segments[pick_continuation(rng, options)]
        if nxt_seg.from_node == node:
            seg, heading, offset = nxt_seg, Heading.FORWARD, 0.0
        else:
            seg, heading, offset = nxt_seg, Heading.BACKWARD, nxt_seg.length
        entered = mr.interval_at(seg.segment_id, tier, offset, heading)
        if entered.server_id != cur.server_id:
            return (Crossing(dist, RoadPosition(seg.segment_id, offset, heading),
                             cur.server_id, entered), tuple(bounces))
        cur = entered


def build_scenario_topology(config: ScenarioConfig):
    """Stations, tiered servers, and coverage map for a scenario.

    Without an explicit lattice bbox the station lattice covers the road
    graph's extent padded by half a cell separation.
    """
    bbox = config.lattice_bbox
    if bbox is None:
        lo, hi = config.graph.bbox()
        pad = config.separation_m / 2.0
        bbox = (Point(lo.x - pad, lo.y - pad), Point(hi.x + pad, hi.y + pad))
    stations = build_hex_lattice(bbox, config.separation_m)
    params = MecParams(config.d_local_s, config.d_regional_s, config.d_p_s,
                       config.bandwidth_bps, config.storage_capacity_bytes)
    servers = build_tiers(stations, config.cluster_cols, config.cluster_rows,
                          params)
    mr = build_mr_map(config.graph, servers, stations)
    return stations, servers, mr


@dataclass
class _SessionRt:
    session: MigrationSession
    last_t: float
    trigger_scheduled: bool = False


@dataclass
class _UeRt:
    ue_id: int
    pos: RoadPosition
    speed: float
    klass: prediction.LatencyClass
    tier: Tier
    tier_violated: bool
    spec: ContainerSpec
    trip_rng: Random
    serving: int = -1
    srt: Optional[_SessionRt] = None
    plan: Optional[PredictionResult] = None
    relay_count: int = 0
    bounces: tuple[Bounce, ...] = ()

    @property
    def footprint(self) -> float:
        return self.spec.image_size + self.spec.ram_size


class _Engine:
    """One simulation run: one strategy, one speed, one seeded population."""

    def __init__(self, config: ScenarioConfig, kind: StrategyKind,
                 speed: float, duration: float, run_id: int,
                 cell_seed: int, trip_seed: int):
        self.cfg = config
        self.kind = kind
        self.speed = speed
        self.duration = duration
        self.bw = config.bandwidth_bps
        self.threshold = config.threshold_bytes

        self.graph = config.graph
        self.stations, self.servers, self.mr = build_scenario_topology(config)
        self.server_tier = {s.server_id: s.tier for s in self.servers}
        self.free_storage = {s.server_id: s.storage_capacity for s in self.servers}

        self.pcfg = PredictConfig(
            tier_latencies={Tier.LOCAL: config.d_local_s,
                            Tier.REGIONAL: config.d_regional_s},
            processing_delay=config.d_p_s,
            tau_min=config.tau_min_s,
            relay_latency=config.relay_latency_s,
        )

        self.report = RunReport(run_id=run_id, strategy=kind.value,
                                speed_mps=speed, seed=cell_seed,
                                trip_seed=trip_seed, ue_count=config.ue_count,
                                duration_s=duration)
        self.report.server_tiers = {sid: t.value for sid, t in self.server_tier.items()}
        self.all_sessions: list[MigrationSession] = []
        self.heap: list[tuple[float, int, Event]] = []
        self.seq = 0
        self.ues: dict[int, _UeRt] = {}
        self.trip_seed = trip_seed

    # ------------------------------------------------------------------ setup

    def _spawn_ues(self) -> None:
        cfg = self.cfg
        for i in range(cfg.ue_count):
            trip_rng = Random(derive_seed(self.trip_seed, "trip", i))
            profile_rng = Random(derive_seed(self.trip_seed, "profile", i))
            pos = mobility.random_position(self.graph, trip_rng)
            high = profile_rng.random() < cfg.high_fraction
            klass = cfg.high_class if high else cfg.low_class
            image = profile_rng.uniform(*cfg.image_range_bytes)
            ram = profile_rng.uniform(*cfg.ram_range_bytes)
            spec = ContainerSpec(image, ram, cfg.dirty_rate, cfg.start_model)

            if self.kind.tiered:
                choice = prediction.select_tier(klass, self.pcfg.tier_latencies,
                                                cfg.d_p_s)
            else:
                choice = prediction.select_tier(klass,
                                                {Tier.LOCAL: cfg.d_local_s},
                                                cfg.d_p_s)
            ue = _UeRt(ue_id=i, pos=pos, speed=self.speed, klass=klass,
                       tier=choice.tier, tier_violated=choice.deadline_violated,
                       spec=spec, trip_rng=trip_rng)
            ue.serving = self.mr.interval_at(pos.segment_id, ue.tier, pos.offset,
                                             pos.heading).server_id
            self.free_storage[ue.serving] -= ue.footprint
            self.ues[i] = ue
            self.report.ue_info[i] = UeInfo(klass.name, ue.tier.value, image, ram)

    # ------------------------------------------------------------ event queue

    def _push(self, t: float, ev: Event) -> None:
        heapq.heappush(self.heap, (t, self.seq, ev))
        self.seq += 1

    # -------------------------------------------------------------- sessions

    def _advance(self, srt: _SessionRt, t: float) -> None:
        dt = t - srt.last_t
        if dt > 1e-12 and srt.session.phase in (migration.Phase.IMAGE_SYNC,
                                                migration.Phase.CHECKPOINT_SYNC,
                                                migration.Phase.ITERATIVE_SYNC):
            migration.tick(srt.session, dt, self.bw, self.threshold)
        srt.last_t = max(srt.last_t, t)

    def _schedule_session_event(self, srt: _SessionRt, t: float) -> None:
        # Image/checkpoint completions are queue events; iterative-phase
        # cycles beyond the first trigger advance analytically instead of
        # flooding the queue (behavior is identical either way).
        nxt = migration.time_to_transition(srt.session, self.bw, self.threshold)
        if nxt is None:
            return
        dt, what = nxt
        if what == "trigger":
            if srt.trigger_scheduled:
                return
            srt.trigger_scheduled = True
            kind = EventKind.ITERATION_TRIGGER
        else:
            if srt.session.phase is migration.Phase.ITERATIVE_SYNC:
                return
            kind = EventKind.TRANSFER_COMPLETE
        self._push(t + dt, Event(kind, data=srt))

    def _begin_precopy(self, ue: _UeRt, target: int, t: float) -> bool:
        if self.free_storage[target] < ue.footprint:
            self.report.rejected_precopies += 1
            return False
        self.free_storage[target] -= ue.footprint
        sess = MigrationSession(source=ue.serving, target=target, spec=ue.spec)
        migration.begin(sess, t)
        self.all_sessions.append(sess)
        ue.srt = _SessionRt(sess, t)
        ue.relay_count = 0
        self._schedule_session_event(ue.srt, t)
        return True

    def _discard_session(self, ue: _UeRt, t: float) -> None:
        srt = ue.srt
        self._advance(srt, t)
        migration.abort(srt.session, t)
        self.free_storage[srt.session.target] += ue.footprint
        self._emit(ue, srt.session, t, 0.0, "discarded")
        ue.srt = None

    def _cold_transfer(self, ue: _UeRt, target: int, t: float) -> None:
        # Forced placement: the UE must be served, so cold transfers bypass
        # the storage admission that precopies respect.
        sess = MigrationSession(source=ue.serving, target=target, spec=ue.spec)
        migration.begin(sess, t)
        self.all_sessions.append(sess)
        downtime = migration.handoff(sess, t, self.bw)
        self.free_storage[target] -= ue.footprint
        self.free_storage[sess.source] += ue.footprint
        self._emit(ue, sess, t, downtime, "cold")
        ue.serving = target

    def _emit(self, ue: _UeRt, sess: MigrationSession, t: float,
              downtime: float, kind: str) -> None:
        self.report.records.append(MigrationRecord(
            run_id=self.report.run_id, ue_id=ue.ue_id, strategy=self.kind.value,
            speed_mps=self.speed, source_server=sess.source,
            target_server=sess.target, t_start_s=sess.t_started, t_handoff_s=t,
            traffic_bytes=migration.traffic(sess), downtime_s=downtime,
            kind=kind, relay_hops=ue.relay_count if kind != "cold" else 0,
            deadline_violated=ue.tier_violated,
            reached_iterative=sess.reached_iterative,
            handoff_bytes=sess.bytes_handoff_sent))

    # -------------------------------------------------------------- planning

    def _plan_motion(self, ue: _UeRt, t: float) -> Optional[Crossing]:
        max_dist = ue.speed * (self.duration - t)
        if max_dist <= 0:
            return None
        crossing, bounces = walk_to_crossing(self.mr, ue.tier, ue.pos,
                                             max_dist, ue.trip_rng)
        ue.bounces = bounces
        if bounces and self.kind.predictive:
            self._push(t + bounces[0].distance / ue.speed,
                       Event(EventKind.PREPARE_BAND_ENTRY, ue_id=ue.ue_id,
                             data=("bounce", 0)))
        if crossing is not None:
            if self.kind is StrategyKind.NEAREST:
                t_cross = t + crossing.distance / ue.speed
                prep_t = max(t, t_cross - self.cfg.prep_band_m / ue.speed)
                self._push(prep_t, Event(EventKind.PREPARE_BAND_ENTRY,
                                         ue_id=ue.ue_id,
                                         data=("nearest", crossing.to_interval.server_id)))
            self._push(t + crossing.distance / ue.speed,
                       Event(EventKind.COVERAGE_BOUNDARY, ue_id=ue.ue_id,
                             data=crossing))
        return crossing

    def _decide(self, ue: _UeRt) -> Optional[PredictionResult]:
        return prediction.decide(self.kind, ue.pos, ue.speed, ue.serving,
                                 ue.klass, self.mr, self.pcfg)

    def _entry_actions(self, ue: _UeRt, t: float) -> None:
        pred = self._decide(ue) if self.kind.predictive else None
        ue.plan = pred
        ue.relay_count = 0
        for action in strategy_mod.on_coverage_entry(self.kind, pred,
                                                     self.cfg.prep_band_m):
            if isinstance(action, StartPrecopy):
                self._begin_precopy(ue, action.prediction.target, t)
            # SchedulePrepare is realized by _plan_motion, which knows the
            # actual next boundary along the drawn path.

    # ------------------------------------------------------------ dispatching

    def _on_crossing(self, t: float, ue: _UeRt, crossing: Crossing) -> None:
        ue.pos = crossing.pos
        entered = crossing.to_interval.server_id
        if ue.srt is not None:
            self._advance(ue.srt, t)
        skipped = ue.plan.skipped if ue.plan is not None else ()
        session = ue.srt.session if ue.srt is not None else None
        decision = strategy_mod.on_handoff_signal(self.kind, session, entered,
                                                  skipped)
        if decision is HandoffDecision.SKIP_RELAY:
            ue.relay_count += 1
            self._plan_motion(ue, t)
            return
        if decision is HandoffDecision.COMPLETE:
            downtime = migration.handoff(session, t, self.bw)
            self._emit(ue, session, t, downtime, "precopy")
            self.free_storage[session.source] += ue.footprint
            ue.serving = entered
            ue.srt = None
        elif decision is HandoffDecision.DISCARD_AND_COLD:
            self._discard_session(ue, t)
            self._cold_transfer(ue, entered, t)
        elif decision is HandoffDecision.COLD:
            self._cold_transfer(ue, entered, t)
        else:
            raise InternalInvariantError(f"unhandled decision {decision}")
        self._plan_motion(ue, t)
        self._entry_actions(ue, t)

    def _on_prepare(self, t: float, ue: _UeRt, data) -> None:
        tag = data[0]
        if tag == "nearest":
            if ue.srt is None:
                self._begin_precopy(ue, data[1], t)
            return
        # Bounce: the UE reversed at a dead-end; refresh the prediction.
        idx = data[1]
        bounce = ue.bounces[idx]
        ue.pos = bounce.pos
        if idx + 1 < len(ue.bounces):
            self._push(t + (ue.bounces[idx + 1].distance - bounce.distance) / ue.speed,
                       Event(EventKind.PREPARE_BAND_ENTRY, ue_id=ue.ue_id,
                             data=("bounce", idx + 1)))
        pred = self._decide(ue)
        if ue.srt is not None:
            self._advance(ue.srt, t)
            if pred is not None and pred.target == ue.srt.session.target:
                ue.plan = pred
                return
            self._discard_session(ue, t)
        ue.plan = pred
        ue.relay_count = 0
        if pred is not None and pred.target is not None:
            self._begin_precopy(ue, pred.target, t)

    def _finalize(self, t: float) -> None:
        for ue in self.ues.values():
            if ue.srt is not None:
                self._discard_session(ue, t)
        self.report.total_bytes_sent = math.fsum(
            migration.traffic(s) for s in self.all_sessions)

    # ------------------------------------------------------------------- run

    def run(self) -> RunReport:
        self._spawn_ues()
        if self.duration <= 0:
            return self.report
        self._push(self.duration, Event(EventKind.TRACE_END))
        for ue in self.ues.values():
            self._plan_motion(ue, 0.0)
            self._entry_actions(ue, 0.0)

        while self.heap:
            t, _, ev = heapq.heappop(self.heap)
            if ev.kind is EventKind.TRACE_END:
                self._finalize(t)
                break
            if ev.kind is EventKind.COVERAGE_BOUNDARY:
                self._on_crossing(t, self.ues[ev.ue_id], ev.data)
            elif ev.kind is EventKind.PREPARE_BAND_ENTRY:
                self._on_prepare(t, self.ues[ev.ue_id], ev.data)
            elif ev.kind in (EventKind.TRANSFER_COMPLETE,
                             EventKind.ITERATION_TRIGGER):
                srt: _SessionRt = ev.data
                if srt.session.discarded or srt.session.phase is migration.Phase.DONE:
                    continue
                self._advance(srt, t)
                self._schedule_session_event(srt, t)
            else:
                raise InternalInvariantError(f"unknown event kind {ev.kind}")
        else:
            raise InternalInvariantError("event queue drained before trace end")
        return self.report


def _cell_duration(config: ScenarioConfig, speed: float) -> float:
    if config.travel_distance_m is not None:
        return config.travel_distance_m / speed
    return config.duration_s


def run_cell(config: ScenarioConfig, speed_idx: int, strategy_idx: int,
             run_id: int) -> RunReport:
    """Execute one (speed, strategy) cell of a sweep."""
    speed = config.speeds_mps[speed_idx]
    kind = config.strategies[strategy_idx]
    cell_seed = derive_seed(config.seed, "cell", speed_idx, strategy_idx)
    trip_seed = derive_seed(config.seed, "speed", speed_idx)
    engine = _Engine(config, kind, speed, _cell_duration(config, speed),
                     run_id, cell_seed, trip_seed)
    return engine.run()


def run(config: ScenarioConfig) -> RunReport:
    """Single run: the first configured speed and strategy."""
    return run_cell(config, 0, 0, run_id=0)


def sweep(config: ScenarioConfig, parallel: bool = False) -> list[RunReport]:
    """Cartesian product of configured speeds and strategies.

    Sequential by default for bit-stable logs; with parallel=True the cells
    run in worker processes and are merged back in cell order.
    """
    cells = [(i, j) for i in range(len(config.speeds_mps))
             for j in range(len(config.strategies))]
    if not parallel:
        return [run_cell(config, i, j, run_id=k)
                for k, (i, j) in enumerate(cells)]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor() as pool:
        futures = [pool.submit(run_cell, config, i, j, k)
                   for k, (i, j) in enumerate(cells)]
        return [f.result() for f in futures]
