"""Scenario configuration: unit-suffixed file keys resolved into SI quantities.

The config file is a JSON document whose keys carry explicit units
(bandwidth_mbps, threshold_md_mbit, ...) so the bits/bytes ambiguity dies at
the boundary. Internally everything is meters, seconds, bytes, and m/s.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import ConfigError
from .migration import StartTimeModel
from .prediction import HIGH_LATENCY, LOW_LATENCY, LatencyClass
from .roadnet import Point, RoadGraph, build_grid_graph, load_road_graph
from .strategy import StrategyKind, strategy_from_label

MB = 1e6                # bytes
MBIT = 1e6 / 8.0        # bytes
KMH = 1.0 / 3.6         # m/s

DEFAULTS: dict[str, Any] = {
    "road_graph_file": None,
    "road_grid": None,                 # {"rows": int, "cols": int}
    "lattice_separation_m": 500.0,
    "lattice_bbox_m": None,            # [[minx, miny], [maxx, maxy]] or None
    "regional_cluster_cols": 3,
    "regional_cluster_rows": 3,
    "latency_local_ms": 10.0,
    "latency_regional_ms": 50.0,
    "processing_delay_ms": 10.0,
    "bandwidth_mbps": 100.0,
    "storage_capacity_gb": 1000.0,
    "ue_count": 100,
    "speeds_kmh": [5.0, 25.0, 50.0, 75.0, 100.0],
    "strategies": [k.value for k in StrategyKind],
    "high_latency_fraction": 0.5,
    "deadline_low_ms": 30.0,
    "deadline_high_ms": 150.0,
    "container_image_mb": [100.0, 2000.0],
    "container_ram_mb": [10.0, 200.0],
    "dirty_rate_per_s": 0.01,
    "threshold_md_mbit": 40.0,
    "start_time_ms": [200.0, 1000.0],
    "start_time_image_ref_mb": [100.0, 2000.0],
    "tau_min_s": 10.0,
    "relay_latency_ms": 5.0,
    "prep_band_m": 250.0,
    "duration_s": 600.0,
    "travel_distance_m": None,         # when set, per-run duration = this / speed
    "seed": 1,
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved scenario in SI units, ready for the engine."""

    graph: RoadGraph
    separation_m: float
    lattice_bbox: Optional[tuple[Point, Point]]
    cluster_cols: int
    cluster_rows: int
    d_local_s: float
    d_regional_s: float
    d_p_s: float
    bandwidth_bps: float          # bytes/second
    storage_capacity_bytes: float
    ue_count: int
    speeds_mps: tuple[float, ...]
    strategies: tuple[StrategyKind, ...]
    high_fraction: float
    low_class: LatencyClass
    high_class: LatencyClass
    image_range_bytes: tuple[float, float]
    ram_range_bytes: tuple[float, float]
    dirty_rate: float
    threshold_bytes: float
    start_model: StartTimeModel
    tau_min_s: float
    relay_latency_s: float
    prep_band_m: float
    duration_s: float
    travel_distance_m: Optional[float]
    seed: int
    raw: dict = field(repr=False, default_factory=dict)


def _require_positive(raw: dict, key: str) -> float:
    v = raw[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
        raise ConfigError(key, f"must be a positive number, got {v!r}")
    return float(v)


def _require_range(raw: dict, key: str) -> tuple[float, float]:
    v = raw[key]
    if (not isinstance(v, (list, tuple)) or len(v) != 2
            or any(not isinstance(x, (int, float)) or isinstance(x, bool) for x in v)):
        raise ConfigError(key, f"must be a [low, high] pair, got {v!r}")
    lo, hi = float(v[0]), float(v[1])
    if lo <= 0 or hi < lo:
        raise ConfigError(key, f"needs 0 < low <= high, got {v!r}")
    return lo, hi


def resolve_config(raw_in: dict, graph: Optional[RoadGraph] = None) -> ScenarioConfig:
    """Merge raw keys over defaults, validate, and convert units.

    A road graph may be passed directly (programmatic use); otherwise exactly
    one of road_graph_file / road_grid must be present.
    """
    unknown = set(raw_in) - set(DEFAULTS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown configuration key")
    raw = dict(DEFAULTS)
    raw.update(raw_in)

    if graph is None:
        if raw["road_graph_file"]:
            try:
                graph = load_road_graph(raw["road_graph_file"])
            except OSError as exc:
                raise ConfigError("road_graph_file", str(exc)) from exc
        elif raw["road_grid"]:
            grid = raw["road_grid"]
            if not isinstance(grid, dict) or "rows" not in grid or "cols" not in grid:
                raise ConfigError("road_grid", 'expects {"rows": r, "cols": c}')
            graph = build_grid_graph(int(grid["rows"]), int(grid["cols"]),
                                     float(raw["lattice_separation_m"]))
        else:
            raise ConfigError("road_graph_file",
                              "a road source is required: road_graph_file or road_grid")

    bbox = None
    if raw["lattice_bbox_m"] is not None:
        b = raw["lattice_bbox_m"]
        try:
            bbox = (Point(float(b[0][0]), float(b[0][1])),
                    Point(float(b[1][0]), float(b[1][1])))
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError("lattice_bbox_m",
                              "expects [[minx, miny], [maxx, maxy]]") from exc

    speeds = raw["speeds_kmh"]
    if not isinstance(speeds, (list, tuple)) or not speeds:
        raise ConfigError("speeds_kmh", "must be a nonempty list")
    speeds_mps = []
    for s in speeds:
        if not isinstance(s, (int, float)) or s <= 0:
            raise ConfigError("speeds_kmh", f"speeds must be positive, got {s!r}")
        speeds_mps.append(float(s) * KMH)

    labels = raw["strategies"]
    if not isinstance(labels, (list, tuple)) or not labels:
        raise ConfigError("strategies", "must be a nonempty list")
    try:
        strategies = tuple(strategy_from_label(str(s)) for s in labels)
    except ValueError as exc:
        raise ConfigError("strategies", str(exc)) from exc

    cluster_cols = int(_require_positive(raw, "regional_cluster_cols"))
    cluster_rows = int(_require_positive(raw, "regional_cluster_rows"))
    hf = raw["high_latency_fraction"]
    if not isinstance(hf, (int, float)) or not (0.0 <= hf <= 1.0):
        raise ConfigError("high_latency_fraction", f"must be within [0, 1], got {hf!r}")

    duration = raw["duration_s"]
    if not isinstance(duration, (int, float)) or duration < 0:
        raise ConfigError("duration_s", f"must be >= 0, got {duration!r}")
    travel = raw["travel_distance_m"]
    if travel is not None:
        if not isinstance(travel, (int, float)) or travel <= 0:
            raise ConfigError("travel_distance_m", f"must be positive, got {travel!r}")
        travel = float(travel)

    ue_count = raw["ue_count"]
    if not isinstance(ue_count, int) or isinstance(ue_count, bool) or ue_count < 1:
        raise ConfigError("ue_count", f"must be an integer >= 1, got {ue_count!r}")
    seed = raw["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed", f"must be an integer, got {seed!r}")

    image_mb = _require_range(raw, "container_image_mb")
    ram_mb = _require_range(raw, "container_ram_mb")
    start_ms = _require_range(raw, "start_time_ms")
    start_ref_mb = _require_range(raw, "start_time_image_ref_mb")
    dirty = raw["dirty_rate_per_s"]
    if not isinstance(dirty, (int, float)) or dirty < 0:
        raise ConfigError("dirty_rate_per_s", f"must be >= 0, got {dirty!r}")
    tau = raw["tau_min_s"]
    if not isinstance(tau, (int, float)) or tau < 0:
        raise ConfigError("tau_min_s", f"must be >= 0, got {tau!r}")

    return ScenarioConfig(
        graph=graph,
        separation_m=_require_positive(raw, "lattice_separation_m"),
        lattice_bbox=bbox,
        cluster_cols=cluster_cols,
        cluster_rows=cluster_rows,
        d_local_s=_require_positive(raw, "latency_local_ms") / 1e3,
        d_regional_s=_require_positive(raw, "latency_regional_ms") / 1e3,
        d_p_s=_require_positive(raw, "processing_delay_ms") / 1e3,
        bandwidth_bps=_require_positive(raw, "bandwidth_mbps") * MBIT,
        storage_capacity_bytes=_require_positive(raw, "storage_capacity_gb") * 1e9,
        ue_count=ue_count,
        speeds_mps=tuple(speeds_mps),
        strategies=strategies,
        high_fraction=float(hf),
        low_class=LatencyClass(LOW_LATENCY.name,
                               _require_positive(raw, "deadline_low_ms") / 1e3),
        high_class=LatencyClass(HIGH_LATENCY.name,
                                _require_positive(raw, "deadline_high_ms") / 1e3),
        image_range_bytes=(image_mb[0] * MB, image_mb[1] * MB),
        ram_range_bytes=(ram_mb[0] * MB, ram_mb[1] * MB),
        dirty_rate=float(dirty),
        threshold_bytes=_require_positive(raw, "threshold_md_mbit") * MBIT,
        start_model=StartTimeModel(start_ms[0] / 1e3, start_ms[1] / 1e3,
                                   start_ref_mb[0] * MB, start_ref_mb[1] * MB),
        tau_min_s=float(tau),
        relay_latency_s=_require_positive(raw, "relay_latency_ms") / 1e3,
        prep_band_m=_require_positive(raw, "prep_band_m"),
        duration_s=float(duration),
        travel_distance_m=travel,
        seed=seed,
        raw=raw,
    )


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<file>", f"{path} must hold a JSON object")
    return resolve_config(raw)


def apply_override(raw: dict, assignment: str) -> None:
    """Apply one KEY=VALUE override onto a raw config dict (values are JSON).

    The shorthand speed=<m/s> replaces the speed list with that singleton.
    """
    if "=" not in assignment:
        raise ConfigError("<override>", f"expected KEY=VALUE, got {assignment!r}")
    key, text = assignment.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text  # bare strings allowed
    if key == "speed":
        if not isinstance(value, (int, float)) or value <= 0:
            raise ConfigError("speed", f"override needs a positive m/s value, got {text!r}")
        raw["speeds_kmh"] = [float(value) * 3.6]
        return
    if key not in DEFAULTS:
        raise ConfigError(key, "unknown configuration key")
    raw[key] = value
