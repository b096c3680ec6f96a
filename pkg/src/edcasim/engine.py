"""Beacon-interval orchestration shared by both channel engines, plus the
slotted simulation loop for fully connected topologies.
"""

from __future__ import annotations

import math

from .controllers import ControllerState, cac_step, compute_gains, dac_step, initial_state
from .estimators import BeaconCounters, estimate_p_obs, estimate_p_own
from .mac import CaptureModel, IntervalRecord, RunResult, Station, run_slot
from .phy import PhyProfile


class ControlPlane:
    """Runs the per-beacon controller updates and builds the trace records.

    mode "cac": one controller at the AP, window broadcast to every station.
    mode "dac": one controller per station, committed locally.
    mode "edca-static": no adaptation; estimates are still traced.
    """

    def __init__(self, mode: str, station_ids: list[int], profile: PhyProfile,
                 p_opt: float, min_samples: int = 20,
                 gains_override: tuple[float, float] | None = None,
                 cw_bounds: tuple[int, int] | None = None):
        if mode not in ("cac", "dac", "edca-static"):
            raise ValueError(f"unknown controller mode {mode!r}")
        self.mode = mode
        self.profile = profile
        self.p_opt = p_opt
        self.min_samples = min_samples
        floor, ceiling = cw_bounds or (profile.cw_floor, profile.cw_ceiling)
        if mode == "edca-static":
            self.gains = None
        else:
            m = profile.m_backoff_stages
            if gains_override is not None:
                from .controllers import PiGains
                self.gains = PiGains(k_p=gains_override[0], k_i=gains_override[1], m=m)
            else:
                self.gains = compute_gains(p_opt, m)
        self.cac_state: ControllerState | None = (
            initial_state(self.gains, floor, ceiling) if mode == "cac" else None)
        self.dac_states: dict[int, ControllerState] = (
            {i: initial_state(self.gains, floor, ceiling) for i in station_ids}
            if mode == "dac" else {})
        self.cw_cap_hits = 0   # announced/committed window pinned at a bound

    @staticmethod
    def _step_error(old: ControllerState, new: ControllerState) -> float | None:
        return new.prev_error if new is not old else None

    def beacon_update(self, t_ms: int, stations: list[Station],
                      ap_counters: BeaconCounters) -> list[IntervalRecord]:
        records = []
        ap_p_obs = estimate_p_obs(ap_counters, self.min_samples)

        if self.mode == "cac":
            old = self.cac_state
            self.cac_state, announced = cac_step(ap_counters, old, self.p_opt,
                                                 self.min_samples)
            err = self._step_error(old, self.cac_state)
            if announced in (self.cac_state.cw_floor, self.cac_state.cw_ceiling):
                self.cw_cap_hits += 1
            for s in stations:
                s.commit_cw_min(announced)
            records.append(IntervalRecord(t_ms, "ap", ap_p_obs, None, err,
                                          self.cac_state.cw_real, announced))
        else:
            records.append(IntervalRecord(t_ms, "ap", ap_p_obs, None, None,
                                          None, None))

        for s in stations:
            p_obs = estimate_p_obs(s.counters, self.min_samples)
            p_own = estimate_p_own(s.counters, self.profile.max_retry,
                                   s.dropped_this_interval)
            if self.mode == "dac":
                old = self.dac_states[s.id]
                new = dac_step(s.counters, old, self.p_opt,
                               self.profile.max_retry, s.dropped_this_interval,
                               self.min_samples)
                self.dac_states[s.id] = new
                err = self._step_error(old, new)
                if new is not old and new.cw_quantized in (new.cw_floor, new.cw_ceiling):
                    self.cw_cap_hits += 1
                s.commit_cw_min(new.cw_quantized)
                records.append(IntervalRecord(t_ms, f"sta{s.id}", p_obs, p_own,
                                              err, new.cw_real, new.cw_quantized))
            else:
                records.append(IntervalRecord(t_ms, f"sta{s.id}", p_obs, p_own,
                                              None, None, s.cw_min_current))

        ap_counters.roll_interval()
        for s in stations:
            s.roll_interval()
        return records


def _observe_decoded(outcome, stations: list[Station],
                     ap_counters: BeaconCounters) -> None:
    """Feed the decoded frame, if any, to every vantage point that heard it.

    The AP always decodes the surviving frame. Stations sniff frames from
    others only: a transmitting station (winner or loser) cannot receive.
    """
    if outcome.decoded is None:
        return
    flag = outcome.decoded_retry_flag
    ap_counters.observe_frame(flag)
    for s in stations:
        if s.id not in outcome.transmitters:
            s.counters.observe_frame(flag)


def run_slotted(stations: list[Station], profile: PhyProfile,
                capture: CaptureModel, control: ControlPlane,
                duration_us: int, slot_log=None) -> RunResult:
    """Simulate a fully connected WLAN for a whole number of beacon intervals."""
    ap_counters = BeaconCounters()
    n_intervals = duration_us // profile.beacon_interval
    if n_intervals < 1:
        raise ValueError("duration shorter than one beacon interval")

    slot = profile.slot_time
    records: list[IntervalRecord] = []
    t = 0
    next_beacon = profile.beacon_interval
    interval_idx = 0
    onoff = any(s.traffic.kind == "onoff" for s in stations)

    while interval_idx < n_intervals:
        if t >= next_beacon:
            records.extend(control.beacon_update(next_beacon // 1000,
                                                 stations, ap_counters))
            t += profile.beacon_airtime + profile.aifs
            next_beacon += profile.beacon_interval
            interval_idx += 1
            continue

        if onoff:
            for s in stations:
                s.maybe_activate(t)

        backlogged = [s for s in stations if s.backlogged]
        if not backlogged:
            pending = [s.traffic.arrival_us for s in stations
                       if s.traffic.arrival_us is not None]
            t = min([next_beacon] + [a for a in pending if a > t])
            continue

        min_counter = min(s.backoff_counter for s in backlogged)
        if min_counter > 0:
            jump = min(min_counter, max(1, math.ceil((next_beacon - t) / slot)))
            if onoff:
                arrivals = [s.traffic.arrival_us for s in stations
                            if not s.backlogged and s.traffic.arrival_us is not None]
                if arrivals:
                    jump = min(jump, max(1, math.ceil((min(arrivals) - t) / slot)))
            for s in backlogged:
                s.backoff_counter -= jump
            t += jump * slot
            continue

        outcome = run_slot(stations, capture, profile, now_us=t)
        _observe_decoded(outcome, stations, ap_counters)
        if slot_log is not None:
            slot_log(t, outcome)
        t += int(round(outcome.duration))

    return _collect(stations, records, n_intervals * profile.beacon_interval)


def _collect(stations: list[Station], records: list[IntervalRecord],
             duration_us: int) -> RunResult:
    delivered = {s.id: s.delivered_bytes for s in stations}
    thr = {s.id: 8.0 * s.delivered_bytes / duration_us for s in stations}
    return RunResult(
        duration_us=duration_us,
        delivered_bytes=delivered,
        throughput_mbps=thr,
        total_mbps=sum(thr.values()),
        records=records,
        transfer_delays_us={s.id: list(s.traffic.transfer_delays_us)
                            for s in stations},
        drops={s.id: s.frames_dropped_retry for s in stations},
        attempts={s.id: s.attempts_resolved for s in stations},
        successes={s.id: s.counters.successes_cumulative for s in stations},
        retries={s.id: s.counters.failures_cumulative for s in stations},
        sniffed_flags={s.id: (s.counters.r0_total, s.counters.r1_total)
                       for s in stations},
    )
