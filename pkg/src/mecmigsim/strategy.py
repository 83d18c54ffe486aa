"""Binds prediction and migration into the five selectable strategies.

The reactive baseline only starts copying inside a geometric prepare band
before the serving boundary; the prediction-based strategies start the moment
the UE enters a coverage region, toward the predicted next server. The
skip-optimized variants relay across short regions instead of migrating.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .migration import MigrationSession
from .prediction import PredictionResult, StrategyKind

ALL_STRATEGIES = tuple(StrategyKind)


def strategy_from_label(label: str) -> StrategyKind:
    for kind in StrategyKind:
        if kind.value == label:
            return kind
    raise ValueError(f"unknown strategy {label!r}; pick one of "
                     + ", ".join(k.value for k in StrategyKind))


@dataclass(frozen=True)
class StartPrecopy:
    """Begin a precopy session now, toward the prediction's target."""

    prediction: PredictionResult


@dataclass(frozen=True)
class SchedulePrepare:
    """Begin a precopy once the UE is within `band_m` of the next boundary."""

    band_m: float


Action = object  # StartPrecopy | SchedulePrepare


def on_coverage_entry(kind: StrategyKind, prediction: Optional[PredictionResult],
                      prep_band_m: float) -> list[Action]:
    """Actions to take when a UE starts being served by a new region.

    Prediction-based strategies precopy immediately (maximum window); the
    reactive baseline waits for the prepare band. Predictions that found no
    server ahead produce no action.
    """
    if kind is StrategyKind.NEAREST:
        return [SchedulePrepare(prep_band_m)]
    if prediction is not None and prediction.target is not None:
        return [StartPrecopy(prediction)]
    return []


class HandoffDecision(Enum):
    COMPLETE = "complete"        # session targeted the entered server
    SKIP_RELAY = "skip-relay"    # entered region is relayed across, no handoff
    COLD = "cold"                # nothing prepared: full transfer in downtime
    DISCARD_AND_COLD = "discard-and-cold"  # mispredicted: drop session, go cold


def on_handoff_signal(kind: StrategyKind, session: Optional[MigrationSession],
                      entered_server: int,
                      skipped_servers: tuple[int, ...]) -> HandoffDecision:
    """Resolve a serving-boundary crossing against the session state.

    Crossing into a region the active prediction marked as skipped keeps the
    UE attached to its retained server through a relay; no migration happens.
    """
    if entered_server in skipped_servers:
        return HandoffDecision.SKIP_RELAY
    if session is None:
        return HandoffDecision.COLD
    if session.target == entered_server:
        return HandoffDecision.COMPLETE
    return HandoffDecision.DISCARD_AND_COLD
