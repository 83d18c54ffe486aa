"""Per-migration records, run reports, and (strategy, speed) aggregates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

MIGRATION_CSV_COLUMNS = [
    "run_id", "ue_id", "strategy", "speed_mps", "source_server", "target_server",
    "t_start_s", "t_handoff_s", "traffic_bytes", "downtime_s", "kind",
    "relay_hops", "deadline_violated",
]

SUMMARY_CSV_COLUMNS = [
    "strategy", "speed_mps", "runs", "ues", "migrations", "precopy", "cold",
    "discarded", "traffic_total_bytes", "traffic_mean_per_migration_bytes",
    "traffic_mean_per_ue_bytes", "downtime_mean_s", "downtime_max_s",
    "relay_hops_total", "deadline_violations",
]


@dataclass(frozen=True)
class MigrationRecord:
    """One migration, cold transfer, or discarded precopy."""

    run_id: int
    ue_id: int
    strategy: str
    speed_mps: float
    source_server: int
    target_server: int
    t_start_s: float
    t_handoff_s: float
    traffic_bytes: float
    downtime_s: float
    kind: str                      # precopy | cold | discarded
    relay_hops: int
    deadline_violated: bool
    # Diagnostics kept out of the CSV contract:
    reached_iterative: bool = False
    handoff_bytes: float = 0.0

    def csv_row(self) -> list:
        return [self.run_id, self.ue_id, self.strategy, repr(self.speed_mps),
                self.source_server, self.target_server, repr(self.t_start_s),
                repr(self.t_handoff_s), repr(self.traffic_bytes),
                repr(self.downtime_s), self.kind, self.relay_hops,
                int(self.deadline_violated)]


@dataclass(frozen=True)
class UeInfo:
    latency_class: str
    tier: str
    image_bytes: float
    ram_bytes: float


@dataclass
class RunReport:
    """All migrations of one (strategy, speed) run plus enough context to audit them."""

    run_id: int
    strategy: str
    speed_mps: float
    seed: int
    trip_seed: int
    ue_count: int
    duration_s: float
    records: list[MigrationRecord] = field(default_factory=list)
    ue_info: dict[int, UeInfo] = field(default_factory=dict)
    server_tiers: dict[int, str] = field(default_factory=dict)
    total_bytes_sent: float = 0.0      # across every session, discarded included
    rejected_precopies: int = 0


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    speed_mps: float
    runs: int
    ues: int
    migrations: int                    # precopy + cold records
    precopy: int
    cold: int
    discarded: int
    traffic_total_bytes: float
    traffic_mean_per_migration_bytes: float
    traffic_mean_per_ue_bytes: float
    downtime_mean_s: Optional[float]   # None when the group has no records
    downtime_max_s: Optional[float]
    relay_hops_total: int
    deadline_violations: int

    def csv_row(self) -> list:
        return [self.strategy, repr(self.speed_mps), self.runs, self.ues,
                self.migrations, self.precopy, self.cold, self.discarded,
                repr(self.traffic_total_bytes),
                repr(self.traffic_mean_per_migration_bytes),
                repr(self.traffic_mean_per_ue_bytes),
                "" if self.downtime_mean_s is None else repr(self.downtime_mean_s),
                "" if self.downtime_max_s is None else repr(self.downtime_max_s),
                self.relay_hops_total, self.deadline_violations]


def aggregate(reports: Iterable[RunReport]) -> list[SummaryRow]:
    """Group records by (strategy, speed) and average traffic and downtime.

    Cold and discarded migrations count toward both metrics. Traffic is
    reported per migration and per UE (total over the group's UEs); groups
    with no records report zero traffic and no downtime.
    """
    groups: dict[tuple[str, float], list[RunReport]] = {}
    for rep in reports:
        groups.setdefault((rep.strategy, rep.speed_mps), []).append(rep)

    rows = []
    for (strategy, speed) in sorted(groups):
        reps = groups[(strategy, speed)]
        records = [r for rep in reps for r in rep.records]
        ues = sum(rep.ue_count for rep in reps)
        total_traffic = math.fsum(r.traffic_bytes for r in records)
        downtimes = [r.downtime_s for r in records]
        n = len(records)
        rows.append(SummaryRow(
            strategy=strategy,
            speed_mps=speed,
            runs=len(reps),
            ues=ues,
            migrations=sum(1 for r in records if r.kind != "discarded"),
            precopy=sum(1 for r in records if r.kind == "precopy"),
            cold=sum(1 for r in records if r.kind == "cold"),
            discarded=sum(1 for r in records if r.kind == "discarded"),
            traffic_total_bytes=total_traffic,
            traffic_mean_per_migration_bytes=(total_traffic / n) if n else 0.0,
            traffic_mean_per_ue_bytes=(total_traffic / ues) if ues else 0.0,
            downtime_mean_s=(math.fsum(downtimes) / n) if n else None,
            downtime_max_s=max(downtimes) if n else None,
            relay_hops_total=sum(r.relay_hops for r in records),
            deadline_violations=sum(1 for r in records if r.deadline_violated),
        ))
    return rows


def write_migrations_csv(reports: Iterable[RunReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(MIGRATION_CSV_COLUMNS)
        for rep in reports:
            for record in rep.records:
                w.writerow(record.csv_row())


def write_summary_csv(rows: Iterable[SummaryRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_CSV_COLUMNS)
        for row in rows:
            w.writerow(row.csv_row())
