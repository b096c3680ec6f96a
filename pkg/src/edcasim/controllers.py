"""Contention-window adaptation: target operating point, PI gains, and the
centralized (AP-driven) and distributed (per-station) controller steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .estimators import BeaconCounters, estimate_p_obs, estimate_p_own
from .phy import PhyProfile, collision_duration


@dataclass(frozen=True)
class OptimalPoint:
    """Throughput-maximizing collision probability and the timings behind it."""

    p_opt: float
    t_e: float            # idle slot [us]
    t_c: float            # collision duration [us]

    def tau_opt_exact(self, n: int) -> float:
        """Per-station transmission probability that the approximation replaces."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return min(1.0, math.sqrt(2.0 * self.t_e / self.t_c) / n)

    def p_col_exact(self, n: int) -> float:
        """Collision probability at the exact optimum for n stations."""
        if n < 2:
            raise ValueError("n must be >= 2")
        return 1.0 - (1.0 - self.tau_opt_exact(n)) ** (n - 1)


@dataclass(frozen=True)
class PiGains:
    k_p: float
    k_i: float
    m: int

    def __post_init__(self):
        if not (math.isfinite(self.k_p) and math.isfinite(self.k_i)):
            raise ValueError("gains must be finite")
        if self.k_p <= 0 or self.k_i <= 0:
            raise ValueError("gains must be positive")


@dataclass(frozen=True)
class ControllerState:
    """PI controller state tracked across beacon intervals.

    The recurrence runs on the unquantized cw_real; quantization to a power
    of 2 happens only at commit time.
    """

    gains: PiGains
    cw_floor: int
    cw_ceiling: int
    cw_real: float
    cw_quantized: int
    prev_error: float = 0.0


def compute_p_opt(profile: PhyProfile, collision_payload: int) -> OptimalPoint:
    """Target collision probability 1 - exp(-sqrt(2*Te/Tc)).

    Independent of the number of stations; depends only on the idle slot and
    the collision cost for the configured payload.
    """
    t_c = collision_duration(profile, collision_payload)
    t_e = float(profile.slot_time)
    p = 1.0 - math.exp(-math.sqrt(2.0 * t_e / t_c))
    return OptimalPoint(p_opt=p, t_e=t_e, t_c=t_c)


def compute_gains(p_opt: float, m: int) -> PiGains:
    """PI gains from the target collision probability and backoff-stage count.

    Valid for p_opt < 0.5 where the geometric term stays benign.
    """
    if not 0.0 < p_opt < 0.5:
        raise ValueError(f"p_opt={p_opt} outside the (0, 0.5) design envelope")
    if m < 1:
        raise ValueError("m must be >= 1")
    geo = sum((2.0 * p_opt) ** k for k in range(m))
    den = p_opt * p_opt * (1.0 + p_opt * geo)
    return PiGains(k_p=0.8 / den, k_i=0.4 / (0.85 * den), m=m)


def cac_error(p_obs: float, p_opt: float) -> float:
    """Centralized error signal: positive when the network collides too much."""
    return p_obs - p_opt


def dac_error(p_obs_i: float, p_own_i: float, p_opt: float) -> float:
    """Distributed error signal: collision term plus fairness term.

    (p_obs - p_opt) drives the network to the target point; (p_obs - p_own)
    pushes stations that collide less than they observe toward larger windows.
    """
    return 2.0 * p_obs_i - p_own_i - p_opt


def quantize_cw(cw_real: float, cw_floor: int, cw_ceiling: int) -> int:
    """Nearest power of 2 in log space, clamped to the configured bounds.

    Half-way exponents resolve by round-half-to-even, matching rint().
    """
    if cw_real <= 0:
        raise ValueError("cw_real must be positive")
    exponent = round(math.log2(cw_real))  # banker's rounding on the exponent
    cw = 2 ** exponent
    return min(max(cw, cw_floor), cw_ceiling)


def pi_update(state: ControllerState, error: float | None) -> ControllerState:
    """One velocity-form PI step on the unquantized window.

    A deferred estimate (error is None) leaves the state untouched, including
    the stored previous error.
    """
    if error is None:
        return state
    g = state.gains
    cw = state.cw_real + g.k_p * error + (g.k_i - g.k_p) * state.prev_error
    cw = min(max(cw, float(state.cw_floor)), float(state.cw_ceiling))
    return replace(state, cw_real=cw,
                   cw_quantized=quantize_cw(cw, state.cw_floor, state.cw_ceiling),
                   prev_error=error)


def initial_state(gains: PiGains, cw_floor: int, cw_ceiling: int) -> ControllerState:
    """Cold start: window at the floor, no accumulated error."""
    return ControllerState(gains=gains, cw_floor=cw_floor, cw_ceiling=cw_ceiling,
                           cw_real=float(cw_floor), cw_quantized=cw_floor)


def cac_step(ap_counters: BeaconCounters, state: ControllerState,
             p_opt: float, min_samples: int = 20) -> tuple[ControllerState, int]:
    """Centralized update at the AP; returns the window to broadcast.

    When the estimate defers, the previous window is rebroadcast unchanged.
    """
    p_obs = estimate_p_obs(ap_counters, min_samples)
    error = None if p_obs is None else cac_error(p_obs, p_opt)
    new_state = pi_update(state, error)
    return new_state, new_state.cw_quantized


def dac_step(local_counters: BeaconCounters, state: ControllerState,
             p_opt: float, max_retry: int, dropped_this_interval: int = 0,
             min_samples: int = 20) -> ControllerState:
    """Distributed update at one station, committed locally only.

    Defers whenever either estimate is unavailable for the interval.
    """
    p_obs = estimate_p_obs(local_counters, min_samples)
    p_own = estimate_p_own(local_counters, max_retry, dropped_this_interval)
    if p_obs is None or p_own is None:
        return pi_update(state, None)
    return pi_update(state, dac_error(p_obs, p_own, p_opt))


def effective_cw_max(cw_min: int, m: int, cw_ceiling: int) -> int:
    """Backoff ceiling a station derives from its committed CW_min."""
    return min(cw_min * (2 ** m), cw_ceiling)
