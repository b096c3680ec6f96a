"""Experiment orchestration: seeded replications, metric aggregation,
parameter sweeps, and CSV/lock-file emission.
"""

from __future__ import annotations

import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .controllers import compute_p_opt
from .engine import ControlPlane, run_slotted
from .eventmac import EventEngine
from .mac import CaptureModel, RunResult, Station, TrafficSource
from .scenario import (ConfigError, Scenario, emit_scenario, hidden_node_visibility,
                       parse_scenario)


def jain_index(throughputs: list[float]) -> float:
    """Fairness index (sum x)^2 / (n * sum x^2); 1 when all equal, 1/n worst."""
    if not throughputs:
        raise ValueError("empty throughput vector")
    if any(x < 0 for x in throughputs):
        raise ValueError("throughputs must be non-negative")
    sq = sum(x * x for x in throughputs)
    if sq == 0:
        raise ValueError("all-zero throughput vector")
    total = sum(throughputs)
    return (total * total) / (len(throughputs) * sq)


def _jain_or_none(throughputs: list[float]) -> float | None:
    """Fairness index, or None for degenerate (all-zero) allocations."""
    try:
        return jain_index(throughputs)
    except ValueError:
        return None


def pearson_r(xs: list[float], ys: list[float]) -> float:
    n = len(xs)
    if n != len(ys) or n < 2:
        raise ValueError("need two same-length vectors of length >= 2")
    mx = sum(xs) / n
    my = sum(ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    vy = sum((y - my) ** 2 for y in ys)
    if vx == 0 or vy == 0:
        return 0.0
    return cov / math.sqrt(vx * vy)


def _station_rng(run_seed: int, sid: int, purpose: str) -> random.Random:
    # Strings seed the Mersenne twister via a stable hash, so every station
    # gets an independent, platform-stable stream.
    return random.Random(f"{run_seed}/{purpose}/{sid}")


def _build_stations(scenario: Scenario, run_seed: int) -> list[Station]:
    profile = scenario.phy()
    jitter_rng = _station_rng(run_seed, 0, "snr")
    stations = []
    for idx, snr in enumerate(scenario.snr_db, start=1):
        if scenario.snr_jitter_db > 0:
            snr = snr + jitter_rng.gauss(0.0, scenario.snr_jitter_db)
        traffic = TrafficSource(
            scenario.traffic, scenario.payload_bytes,
            rng=_station_rng(run_seed, idx, "traffic"),
            burst_bytes=scenario.burst_bytes,
            silent_mean_s=scenario.silent_mean_s)
        if scenario.controller == "edca-static":
            cw, beb = scenario.static_cw, scenario.static_beb
        else:
            cw, beb = profile.cw_floor, True
        stations.append(Station(
            station_id=idx, snr_db=snr, profile=profile,
            rng=_station_rng(run_seed, idx, "mac"),
            traffic=traffic, cw_min=cw, beb=beb))
    return stations


def run_once(scenario: Scenario, rep: int, slot_log=None) -> RunResult:
    """One seeded replication; deterministic given (scenario, rep)."""
    scenario.validate()
    profile = scenario.phy()
    stations = _build_stations(scenario, scenario.seed + rep)
    capture = CaptureModel(mode=scenario.capture_mode,
                           threshold_db=scenario.capture_threshold_db)
    point = compute_p_opt(profile, scenario.payload_bytes)
    bounds = None
    if scenario.cw_floor_override or scenario.cw_ceiling_override:
        bounds = (scenario.cw_floor_override or profile.cw_floor,
                  scenario.cw_ceiling_override or profile.cw_ceiling)
    gains = None
    if scenario.kp_override is not None and scenario.ki_override is not None:
        gains = (scenario.kp_override, scenario.ki_override)
    control = ControlPlane(scenario.controller, [s.id for s in stations], profile,
                           point.p_opt, scenario.defer_min_samples,
                           gains_override=gains, cw_bounds=bounds)
    duration_us = int(scenario.duration_s * 1e6)
    if scenario.is_fully_connected():
        return run_slotted(stations, profile, capture, control, duration_us,
                           slot_log=slot_log)
    heard, ap_hears = hidden_node_visibility(scenario)
    engine = EventEngine(stations, profile, capture, control, heard, ap_hears,
                         duration_us, slot_log=slot_log)
    return engine.run()


@dataclass(frozen=True)
class ExperimentResult:
    scenario: Scenario
    runs: list[RunResult]
    seeds: list[int]

    @property
    def station_ids(self) -> list[int]:
        return self.runs[0].station_ids

    def throughput_matrix(self) -> list[list[float]]:
        """runs x stations, Mbps."""
        return [[r.throughput_mbps[i] for i in self.station_ids] for r in self.runs]

    def mean_station_throughput(self) -> dict[int, float]:
        n = len(self.runs)
        return {i: sum(r.throughput_mbps[i] for r in self.runs) / n
                for i in self.station_ids}

    def total_mean(self) -> float:
        return sum(r.total_mbps for r in self.runs) / len(self.runs)

    def total_std(self) -> float:
        m = self.total_mean()
        return math.sqrt(sum((r.total_mbps - m) ** 2 for r in self.runs)
                         / len(self.runs))

    def jain_per_run(self) -> list[float | None]:
        return [_jain_or_none([r.throughput_mbps[i] for i in self.station_ids])
                for r in self.runs]

    def jain_mean(self) -> float | None:
        js = [j for j in self.jain_per_run() if j is not None]
        if not js:
            return None
        return sum(js) / len(js)

    def delays_s(self) -> dict[int, list[float]]:
        out = {}
        for i in self.station_ids:
            vals = []
            for r in self.runs:
                vals.extend(d / 1e6 for d in r.transfer_delays_us[i])
            out[i] = vals
        return out


def run_experiment(scenario: Scenario, jobs: int = 1,
                   slot_log=None) -> ExperimentResult:
    """Run `replications` independent seeded replications and aggregate.

    Results are reduced in replication order regardless of completion order,
    so the output is identical for any job count. A slot_log callback, when
    given, traces the first replication only.
    """
    scenario.validate()
    reps = list(range(scenario.replications))
    if jobs > 1 and len(reps) > 1 and slot_log is None:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_once_star, [(scenario, r) for r in reps]))
    else:
        runs = [run_once(scenario, r, slot_log=slot_log if r == 0 else None)
                for r in reps]
    return ExperimentResult(scenario=scenario, runs=runs,
                            seeds=[scenario.seed + r for r in reps])


def _run_once_star(args):
    return run_once(*args)


SWEEP_AXES = ("n_stations", "capture_threshold", "lambda", "controller")


def sweep(base: Scenario, axis: str, values: list, jobs: int = 1
          ) -> list[tuple[object, ExperimentResult]]:
    """One experiment per axis value, derived from the base scenario.

    For the station-count axis, stations join in the configured order of link
    quality (ascending: worst link first).
    """
    if axis not in SWEEP_AXES:
        raise ConfigError("axis", f"unknown sweep axis {axis!r}; known: {SWEEP_AXES}")
    if not values:
        raise ConfigError("values", "empty sweep values")
    rows = []
    for v in values:
        rows.append((v, run_experiment(_apply_axis(base, axis, v), jobs=jobs)))
    return rows


def _apply_axis(base: Scenario, axis: str, value) -> Scenario:
    if axis == "n_stations":
        n = int(value)
        if n < 1 or n > base.n_stations:
            raise ConfigError("values",
                              f"n_stations {n} outside 1..{base.n_stations}")
        ordered = sorted(base.snr_db)  # ascending link quality
        if base.station_add_order == "descending":
            ordered = ordered[::-1]
        return replace(base, snr_db=tuple(ordered[:n]),
                       name=f"{base.name}/n{n}")
    if axis == "capture_threshold":
        return replace(base, capture_mode="threshold",
                       capture_threshold_db=float(value),
                       name=f"{base.name}/thr{value}")
    if axis == "lambda":
        # Value is the mean silent time (1/lambda) in seconds.
        return replace(base, traffic="onoff", silent_mean_s=float(value),
                       name=f"{base.name}/silent{value}")
    if axis == "controller":
        if value not in ("cac", "dac", "edca-static"):
            raise ConfigError("values", f"unknown controller {value!r}")
        return replace(base, controller=str(value), name=f"{base.name}/{value}")
    raise AssertionError(axis)


# -- output emission ----------------------------------------------------------

SUMMARY_HEADER = "scenario,seed,station,snr_db,throughput_mbps,jfi"
TRACE_HEADER = "t_ms,node,p_obs,p_own,error,cw_real,cw_quantized"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def emit_outputs(result: ExperimentResult, outdir: str) -> dict[str, str]:
    """Write summary.csv, trace.csv (first replication) and scenario.lock."""
    os.makedirs(outdir, exist_ok=True)
    paths = {name: os.path.join(outdir, name)
             for name in ("summary.csv", "trace.csv", "scenario.lock")}
    try:
        scenario = result.scenario
        snr_by_station = {i + 1: s for i, s in enumerate(scenario.snr_db)}
        with open(paths["summary.csv"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(SUMMARY_HEADER + "\n")
            for rep, run in enumerate(result.runs):
                jfi = _jain_or_none([run.throughput_mbps[i]
                                     for i in run.station_ids])
                for sid in run.station_ids:
                    fh.write(",".join([
                        scenario.name, str(result.seeds[rep]), str(sid),
                        _fmt(float(snr_by_station[sid])),
                        _fmt(run.throughput_mbps[sid]), _fmt(jfi)]) + "\n")
        with open(paths["trace.csv"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(TRACE_HEADER + "\n")
            for rec in result.runs[0].records:
                fh.write(",".join([
                    str(rec.t_ms), rec.node, _fmt(rec.p_obs), _fmt(rec.p_own),
                    _fmt(rec.error), _fmt(rec.cw_real),
                    _fmt(rec.cw_quantized) if rec.cw_quantized is not None else "",
                ]) + "\n")
        with open(paths["scenario.lock"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(emit_scenario(scenario))
    except OSError as exc:
        raise OSError(f"writing outputs under {outdir!r}: {exc}") from exc
    return paths


def load_locked_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
