"""Pre-copy migration engine: phases, byte-exact transfer accounting, downtime.

A session moves one container between two servers: the image first, then the
memory snapshot, then dirty-memory iterations whenever the backlog reaches the
sync threshold. The handoff stops the container and ships whatever is left;
downtime is that remainder over the link bandwidth plus the container start
time. One transfer is in flight per session at any moment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from .errors import (
    AlreadyActiveError,
    NotActiveError,
    NotDoneError,
    OutOfRangeError,
)

# Completion/trigger slack in bytes. Event times round-trip through floats,
# so a transfer advanced to its scheduled completion instant can be short by
# bandwidth * (a few ulps) ~ 1e-4 bytes; this tolerance absorbs that while
# staying far below one real byte.
_BYTE_EPS = 1e-3


@dataclass(frozen=True)
class StartTimeModel:
    """Container start time grows linearly with image size, clamped outside."""

    t_at_min: float = 0.200
    t_at_max: float = 1.000
    image_min: float = 100e6
    image_max: float = 2000e6


@dataclass(frozen=True)
class ContainerSpec:
    image_size: float                    # bytes of static image
    ram_size: float                      # bytes of the first memory snapshot
    dirty_rate: float                    # fraction of ram_size dirtied per second
    start_model: StartTimeModel = StartTimeModel()

    def __post_init__(self):
        if self.image_size <= 0 or self.ram_size <= 0 or self.dirty_rate < 0:
            raise OutOfRangeError("container sizes must be positive, dirty_rate >= 0")


def start_time(spec: ContainerSpec) -> float:
    """Seconds to start the container on the target, interpolated by image size."""
    m = spec.start_model
    if spec.image_size <= m.image_min:
        return m.t_at_min
    if spec.image_size >= m.image_max:
        return m.t_at_max
    frac = (spec.image_size - m.image_min) / (m.image_max - m.image_min)
    return m.t_at_min + frac * (m.t_at_max - m.t_at_min)


class Phase(IntEnum):
    IDLE = 0
    IMAGE_SYNC = 1
    CHECKPOINT_SYNC = 2
    ITERATIVE_SYNC = 3
    STOPPED = 4
    RESTORING = 5
    DONE = 6


_ACTIVE_PHASES = (Phase.IMAGE_SYNC, Phase.CHECKPOINT_SYNC, Phase.ITERATIVE_SYNC)


@dataclass
class MigrationSession:
    """One migration in flight; byte counters only ever grow."""

    source: int
    target: int
    spec: ContainerSpec
    phase: Phase = Phase.IDLE
    bytes_image_sent: float = 0.0
    bytes_checkpoint_sent: float = 0.0
    bytes_iterations_sent: float = 0.0
    bytes_handoff_sent: float = 0.0
    dirty_backlog: float = 0.0
    inflight_iteration: float = 0.0      # bytes left of the iteration being sent
    iteration_count: int = 0
    t_started: Optional[float] = None
    t_stopped: Optional[float] = None
    t_restored: Optional[float] = None
    transfer_busy_s: float = 0.0         # cumulative seconds the link was busy
    reached_iterative: bool = False
    discarded: bool = False


def begin(session: MigrationSession, t: float) -> None:
    """Start the image transfer. Dirty tracking begins once iterations can run."""
    if session.phase is not Phase.IDLE or session.discarded:
        raise AlreadyActiveError("session already started")
    session.phase = Phase.IMAGE_SYNC
    session.t_started = t


def _dirty_rate_bps(session: MigrationSession) -> float:
    return session.spec.dirty_rate * session.spec.ram_size


def tick(session: MigrationSession, dt: float, bandwidth: float,
         threshold: float) -> None:
    """Advance the active transfer by up to bandwidth * dt bytes.

    Image completion starts the snapshot transfer; snapshot completion enters
    the iterative phase, where dirty memory accumulates and an iteration of
    the whole backlog starts whenever the backlog reaches `threshold` with the
    link free. Dirtying continues while an iteration is in flight.
    """
    if dt <= 0 or bandwidth <= 0:
        raise OutOfRangeError("tick needs dt > 0 and bandwidth > 0")
    if session.phase not in _ACTIVE_PHASES or session.discarded:
        raise NotActiveError(f"session not active (phase {session.phase.name})")
    spec = session.spec
    rate = _dirty_rate_bps(session)
    left = dt
    while True:
        # Zero-time transition first: a due iteration starts immediately.
        if (session.phase is Phase.ITERATIVE_SYNC
                and session.inflight_iteration <= 0.0
                and session.dirty_backlog >= threshold - _BYTE_EPS):
            session.inflight_iteration = session.dirty_backlog
            session.dirty_backlog = 0.0
            continue
        if left <= 1e-15:
            break
        if session.phase is Phase.IMAGE_SYNC:
            remaining = spec.image_size - session.bytes_image_sent
            step = min(left, remaining / bandwidth)
            session.bytes_image_sent += bandwidth * step
            session.transfer_busy_s += step
            left -= step
            if spec.image_size - session.bytes_image_sent <= _BYTE_EPS:
                session.bytes_image_sent = spec.image_size
                session.phase = Phase.CHECKPOINT_SYNC
        elif session.phase is Phase.CHECKPOINT_SYNC:
            remaining = spec.ram_size - session.bytes_checkpoint_sent
            step = min(left, remaining / bandwidth)
            session.bytes_checkpoint_sent += bandwidth * step
            session.transfer_busy_s += step
            left -= step
            if spec.ram_size - session.bytes_checkpoint_sent <= _BYTE_EPS:
                session.bytes_checkpoint_sent = spec.ram_size
                session.phase = Phase.ITERATIVE_SYNC
                session.reached_iterative = True
        else:  # ITERATIVE_SYNC
            if session.inflight_iteration > 0.0:
                step = min(left, session.inflight_iteration / bandwidth)
                session.bytes_iterations_sent += bandwidth * step
                session.dirty_backlog += rate * step
                session.transfer_busy_s += step
                session.inflight_iteration -= bandwidth * step
                left -= step
                if session.inflight_iteration <= _BYTE_EPS:
                    session.bytes_iterations_sent += session.inflight_iteration
                    session.inflight_iteration = 0.0
                    session.iteration_count += 1
            elif rate > 0.0:
                t_fire = (threshold - session.dirty_backlog) / rate
                step = min(left, t_fire)
                session.dirty_backlog += rate * step
                left -= step
                if threshold - session.dirty_backlog <= _BYTE_EPS:
                    session.dirty_backlog = threshold
            else:
                break  # nothing dirtying, nothing to send


def time_to_transition(session: MigrationSession, bandwidth: float,
                       threshold: float) -> Optional[tuple[float, str]]:
    """Seconds until the session's next internal event, or None if quiescent.

    Returns ("complete", dt) for a transfer finishing or ("trigger", dt) for
    the backlog reaching the iteration threshold.
    """
    if session.phase not in _ACTIVE_PHASES or session.discarded:
        return None
    if session.phase is Phase.IMAGE_SYNC:
        return ((session.spec.image_size - session.bytes_image_sent) / bandwidth,
                "complete")
    if session.phase is Phase.CHECKPOINT_SYNC:
        return ((session.spec.ram_size - session.bytes_checkpoint_sent) / bandwidth,
                "complete")
    if session.inflight_iteration > 0.0:
        return (session.inflight_iteration / bandwidth, "complete")
    rate = _dirty_rate_bps(session)
    if session.dirty_backlog >= threshold - _BYTE_EPS:
        return (0.0, "trigger")
    if rate > 0.0:
        return ((threshold - session.dirty_backlog) / rate, "trigger")
    return None


def remaining_bytes(session: MigrationSession) -> float:
    """Bytes that must still move to make the target able to restore."""
    spec = session.spec
    unsent_image = spec.image_size - session.bytes_image_sent
    unsent_checkpoint = spec.ram_size - session.bytes_checkpoint_sent
    return (unsent_image + unsent_checkpoint + session.inflight_iteration
            + session.dirty_backlog)


def handoff(session: MigrationSession, t: float, bandwidth: float) -> float:
    """Stop the container, ship the remainder, restore on the target.

    Returns the downtime: remainder bytes over the bandwidth plus the
    container start time. Dirtying ceases the moment the container stops.
    """
    if session.phase not in _ACTIVE_PHASES or session.discarded:
        raise NotActiveError(f"cannot hand off in phase {session.phase.name}")
    r = remaining_bytes(session)
    session.bytes_handoff_sent = r
    session.dirty_backlog = 0.0
    session.inflight_iteration = 0.0
    downtime = r / bandwidth + start_time(session.spec)
    session.transfer_busy_s += r / bandwidth
    session.t_stopped = t
    session.t_restored = t + downtime
    session.phase = Phase.DONE
    return downtime


def abort(session: MigrationSession, t: float) -> None:
    """Discard the session; bytes already sent remain counted as traffic."""
    session.discarded = True
    session.t_stopped = t


def traffic(session: MigrationSession) -> float:
    """Total bytes this session has pushed so far (valid mid-flight)."""
    return (session.bytes_image_sent + session.bytes_checkpoint_sent
            + session.bytes_iterations_sent + session.bytes_handoff_sent)


def total_migration_time(session: MigrationSession, bandwidth: float) -> float:
    """Completed migration's wall transfer time: all bytes over the link rate."""
    if session.phase is not Phase.DONE:
        raise NotDoneError("total_migration_time needs a completed session")
    return traffic(session) / bandwidth
