"""Temperature-limit enforcement by reducing captured irradiance.

Two schemes, matching the two plant fidelities:

* lumped/static: a single loop-level intercept factor found on a 0.01 grid,
  the largest value that keeps the outlet at or below 392 °C;
* distributed: a per-collector proportional heuristic against staggered
  block limits (323/348/373/390 °C), with a deadband and a capped recovery
  rate. The heuristic is a documented stand-in; its gains are configurable.

Intercept factors live in [0, 1]; 1.0 means fully focused.
"""

from dataclasses import dataclass

import numpy as np

from . import plant
from .errors import DomainError
from .validation import as_float_array, check_positive

IF_GRID_STEP = 0.01
DEFAULT_DEFOCUS_GAIN = 0.004  # intercept-factor units per °C of excess per 0.25 s
DEFAULT_DEADBAND = 1.0  # °C below the limit before refocusing resumes
DEFAULT_RECOVERY_CAP = 1.0  # cap the recovery step at gain * this many °C
DEFOCUS_STEP_REFERENCE_DT = 0.25  # s; gains are quoted per this step
IF_FILTER_TAU = 600.0  # s, first-order low-pass on reported intercept factors


@dataclass(frozen=True)
class DefocusLimits:
    """Maximum temperatures for the two defocusing schemes."""

    lumped_t_max: float = 392.0  # °C, loop outlet (lumped/static scheme)
    collector_t_max: tuple = (323.0, 348.0, 373.0, 390.0)  # °C, block outlets

    def __post_init__(self):
        temps = self.collector_t_max
        if any(b <= a for a, b in zip(temps, temps[1:])):
            raise DomainError("collector_t_max must be strictly increasing")


DEFAULT_LIMITS = DefocusLimits()


def _grid_search_if(outlet_at, t_max):
    """Largest intercept factor on the 0.01 grid with outlet_at(IF) <= t_max.

    outlet_at must be monotone nondecreasing in IF (more captured irradiance
    never cools the loop), which makes bisection on the grid equivalent to
    scanning downward from 1.00 for the first qualifying value.
    """
    if outlet_at(1.0) <= t_max:
        return 1.0
    if outlet_at(0.0) > t_max:
        return 0.0
    steps = round(1.0 / IF_GRID_STEP)
    lo, hi = 0, steps  # grid index: lo qualifies, hi does not
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if outlet_at(mid / steps) <= t_max:
            lo = mid
        else:
            hi = mid
    return lo / steps


def lumped_defocus(params, t_in, t_a, irradiance_effective, q, limits=DEFAULT_LIMITS):
    """Steady outlet temperature and intercept factor of a defocused loop.

    If the fully focused steady outlet exceeds the limit, the intercept
    factor is reduced in 0.01 steps (scaling the effective irradiance) until
    the outlet complies; returns (t_out, intercept_factor). An infeasible
    case returns IF = 0 with the no-irradiance outlet.

    The largest qualifying grid value is located through the closed-form
    threshold at the limit temperature (properties and losses are pinned by
    the known outlet there), then verified against the grid semantics; the
    result is identical to a full downward scan.
    """
    t_max = limits.lumped_t_max
    solved = {}

    def outlet_at(intercept):
        if intercept not in solved:
            solved[intercept] = plant.static_outlet(
                params, t_in, t_a, irradiance_effective * intercept, q
            )
        return solved[intercept]

    if outlet_at(1.0) <= t_max:
        return outlet_at(1.0), 1.0
    if irradiance_effective <= 0.0:
        return outlet_at(0.0), 0.0

    t_mean = 0.5 * (t_in + t_max)
    pcp = plant._pcp_scalar(t_mean)
    h_l = plant._hl_scalar(t_mean, t_a)
    q_si = q / plant.SECONDS_PER_HOUR
    gain = params.optical_gain(irradiance_effective)
    ambient_loss = 0.8 * (0.5 * t_in - t_a) * params.loss_multiplier
    threshold = (
        t_max * (q_si * pcp + 0.4 * h_l) + ambient_loss - q_si * t_in * pcp
    ) / gain
    steps = round(1.0 / IF_GRID_STEP)
    k = min(max(int(np.floor(threshold * steps)), 0), steps - 1)
    while k > 0 and outlet_at(k / steps) > t_max:
        k -= 1
    while k < steps - 1 and outlet_at((k + 1) / steps) <= t_max:
        k += 1
    if k == 0 and outlet_at(0.0) > t_max:
        return outlet_at(0.0), 0.0
    return outlet_at(k / steps), k / steps


def lumped_step_defocus(params, state, t_a, irradiance_effective, dt,
                        limits=DEFAULT_LIMITS):
    """One defocused step of the dynamic lumped model.

    Same 0.01-grid rule as lumped_defocus, applied to the stepped outlet:
    the returned state never exceeds the lumped limit when the current state
    does not. Returns (new_state, intercept_factor).
    """

    def outlet_at(intercept):
        return plant.lumped_step(
            params, state, t_a, irradiance_effective * intercept, dt
        ).t_out

    best_if = _grid_search_if(outlet_at, limits.lumped_t_max)
    new_state = plant.lumped_step(
        params, state, t_a, irradiance_effective * best_if, dt
    )
    return new_state, best_if


def collector_defocus_step(
    block_temps,
    current_if,
    dt,
    limits=DEFAULT_LIMITS,
    gain=DEFAULT_DEFOCUS_GAIN,
    deadband=DEFAULT_DEADBAND,
    recovery_cap=DEFAULT_RECOVERY_CAP,
):
    """Per-collector intercept-factor update for the distributed model.

    For each collector block, the intercept factor decreases proportionally
    to the temperature excess over that block's limit, and recovers toward 1
    (at the same gain, capped) once the block sits more than the deadband
    below its limit. Gains are quoted per 0.25 s step and scaled linearly
    with dt. Accepts stacked inputs shaped (..., 4).
    """
    check_positive("dt", dt)
    temps = np.asarray(block_temps, dtype=float)
    factors = np.asarray(current_if, dtype=float)
    if temps.shape != factors.shape or temps.shape[-1] != plant.N_COLLECTORS:
        raise DomainError("block_temps and current_if must both be shaped (..., 4)")
    limit = np.asarray(limits.collector_t_max, dtype=float)
    scale = gain * dt / DEFOCUS_STEP_REFERENCE_DT
    excess = temps - limit
    decrease = np.where(excess > 0.0, scale * excess, 0.0)
    recovery = np.where(
        excess < -deadband,
        np.minimum(scale * (-excess - deadband), scale * recovery_cap),
        0.0,
    )
    return np.clip(factors - decrease + recovery, 0.0, 1.0)


def filter_if(raw, prev_filtered, dt, tau=IF_FILTER_TAU):
    """First-order low-pass on an intercept factor signal.

    y += (dt/tau)·(raw − y), with the coefficient clamped to [0, 1] so large
    steps cannot overshoot. Accepts scalars or arrays.
    """
    check_positive("dt", dt)
    coeff = min(dt / tau, 1.0)
    raw = np.asarray(raw, dtype=float)
    prev = np.asarray(prev_filtered, dtype=float)
    out = prev + coeff * (raw - prev)
    return out if out.ndim else float(out)


def block_outlet_temps(t_fluid):
    """Fluid temperature at each collector block's last segment, (..., 4)."""
    t_fluid = as_float_array("t_fluid", t_fluid, plant.N_SEGMENTS)
    return t_fluid[..., plant.BLOCK_OUTLET_INDEX]


@dataclass
class InterceptFactor:
    """Raw and low-pass-filtered intercept factor of one loop."""

    value: float = 1.0
    filtered_value: float = 1.0

    def update(self, raw, dt, tau=IF_FILTER_TAU):
        self.value = float(np.clip(raw, 0.0, 1.0))
        self.filtered_value = float(filter_if(self.value, self.filtered_value, dt, tau))
        return self
