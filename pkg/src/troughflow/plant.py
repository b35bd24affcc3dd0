"""Plant models for one collector loop and thermal-power accounting.

Three representations of a loop, in increasing fidelity:

* static: closed-form steady-state outlet temperature,
* lumped: single-ODE outlet-temperature dynamics (explicit Euler),
* distributed: coupled metal/fluid balances on a 151-segment grid
  (explicit upwind, 0.25 s steps).

Flow rates are in m³/h throughout; the models convert to m³/s internally
wherever a mass flow enters an energy balance. The static closed form is the
exact fixed point of the lumped dynamics by construction: both share the same
loss parameterization (a small 0.8·(0.5·T_in − T_a) ambient term plus
0.4·H_l·T_out, scaled by the (2 − α_Hl) fault multiplier on the first term).
"""

from dataclasses import dataclass, replace

import numpy as np

from . import physics
from .errors import ConvergenceError, DomainError, SimulationDivergence, StabilityError
from .validation import as_float_array, check_in_range, check_positive

SECONDS_PER_HOUR = 3600.0

# Simulated temperatures outside this band abort a run as divergence.
SANITY_BAND = (-20.0, 500.0)

# The loss fit goes negative below a fluid-to-ambient gap of ~58 °C; the
# models evaluate it at a floored gap so loss terms stay well-behaved when a
# loop runs near ambient (e.g. at night or during cold start).
MIN_LOSS_GAP = 60.0

# Distributed grid: 151 segments of 3.213 m; the active (irradiated) length
# maps to 144 segments split into 4 collector blocks of 36, with 7 passive
# joint segments laid out [1, 2, 2, 2, 0] from the inlet.
N_SEGMENTS = 151
SEGMENT_LENGTH = 3.213
N_COLLECTORS = 4
_PASSIVE_LAYOUT = (1, 2, 2, 2, 0)
_BLOCK_SIZE = 36

THERMAL_POWER_PENALTY = 3000.0  # W per m³/h of loop flow


def _segment_collector_map():
    """Collector index per segment (-1 for passive joints)."""
    seg = np.full(N_SEGMENTS, -1, dtype=int)
    idx = 0
    for c in range(N_COLLECTORS):
        idx += _PASSIVE_LAYOUT[c]
        seg[idx : idx + _BLOCK_SIZE] = c
        idx += _BLOCK_SIZE
    idx += _PASSIVE_LAYOUT[-1]
    assert idx == N_SEGMENTS
    return seg


SEGMENT_COLLECTOR = _segment_collector_map()
BLOCK_OUTLET_INDEX = np.array(
    [np.max(np.nonzero(SEGMENT_COLLECTOR == c)) for c in range(N_COLLECTORS)]
)


@dataclass(frozen=True)
class LoopParams:
    """Static physical parameters and fault multipliers of one loop.

    alpha_kopt in (0, 1] scales the optical gain; alpha_hl in [0, 1] sets the
    loss multiplier (2 - alpha_hl) in [1, 2] (1.0 means a healthy loop).
    """

    loop_length: float = 620.0  # m, total
    active_length: float = 593.0  # m, irradiated
    aperture_area: float = 3415.5  # m², per loop
    optical_efficiency: float = 0.73  # peak optical efficiency
    alpha_kopt: float = 1.0
    alpha_hl: float = 1.0
    n_collectors: int = N_COLLECTORS
    metal_density: float = 7850.0  # kg/m³ (carbon-steel receiver tube)
    metal_heat_capacity: float = 480.0  # J/(kg·°C)
    metal_cross_section: float = 2.1677e-4  # m²
    fluid_cross_section: float = 0.0036  # m²
    collector_aperture: float = 5.75  # m
    tube_perimeter: float = 0.2136  # m

    def __post_init__(self):
        for name in (
            "loop_length",
            "active_length",
            "aperture_area",
            "optical_efficiency",
            "metal_density",
            "metal_heat_capacity",
            "metal_cross_section",
            "fluid_cross_section",
            "collector_aperture",
            "tube_perimeter",
        ):
            check_positive(name, getattr(self, name))
        check_in_range("alpha_hl", self.alpha_hl, 0.0, 1.0)
        if not 0.0 < self.alpha_kopt <= 1.0:
            raise DomainError(f"alpha_kopt must be in (0, 1], got {self.alpha_kopt}")

    @property
    def loss_multiplier(self):
        return 2.0 - self.alpha_hl

    def optical_gain(self, irradiance_effective):
        """Absorbed power [W] for an effective irradiance I·n_o [W/m²]."""
        return (
            self.alpha_kopt
            * self.optical_efficiency
            * irradiance_effective
            * self.aperture_area
        )


@dataclass
class LumpedState:
    """Outlet-temperature state of the lumped loop model."""

    t_out: float  # °C
    t_in: float  # °C
    q: float  # m³/h

    def __post_init__(self):
        if self.q < 0.0:
            raise DomainError(f"flow must be >= 0, got {self.q}")


@dataclass
class DistributedState:
    """Fluid/metal temperature profiles of the distributed loop model."""

    t_fluid: np.ndarray  # (151,) °C
    t_metal: np.ndarray  # (151,) °C
    q: float  # m³/h
    segment_length: float = SEGMENT_LENGTH

    def __post_init__(self):
        self.t_fluid = as_float_array("t_fluid", self.t_fluid, N_SEGMENTS)
        self.t_metal = as_float_array("t_metal", self.t_metal, N_SEGMENTS)

    @property
    def outlet(self):
        return float(self.t_fluid[-1])

    def block_outlets(self):
        """Fluid temperature at the last segment of each collector block."""
        return self.t_fluid[BLOCK_OUTLET_INDEX]


@dataclass(frozen=True)
class PowerReport:
    """Per-loop and total thermal power with the flow penalty factor used."""

    per_loop: np.ndarray  # W
    total: float  # W
    penalty_factor: float = THERMAL_POWER_PENALTY


def uniform_profile(temperature, q):
    """Distributed state with both profiles at one temperature."""
    t = np.full(N_SEGMENTS, float(temperature))
    return DistributedState(t_fluid=t, t_metal=t.copy(), q=float(q))


def _clip_property_temp(t):
    return np.clip(t, *physics.TEMPERATURE_RANGE)


# Scalar fast paths for the solver-heavy static/lumped models: same
# coefficient tables as the physics module, no array plumbing. The physics
# functions remain the validated public surface; equivalence is under test.
_RHO_C = physics.FLUID_DENSITY_COEFFS
_CAP_C = physics.FLUID_HEAT_CAPACITY_COEFFS
_HL_C = physics.THERMAL_LOSS_COEFFS
_HL_R = physics.THERMAL_LOSS_RECIPROCAL


def _pcp_scalar(t):
    t = min(max(t, physics.TEMPERATURE_RANGE[0]), physics.TEMPERATURE_RANGE[1])
    rho = _RHO_C[0] + t * (_RHO_C[1] + t * _RHO_C[2])
    cap = _CAP_C[0] + t * (_CAP_C[1] + t * _CAP_C[2])
    return rho * cap


def _hl_scalar(t_fluid, t_ambient):
    gap = t_fluid - t_ambient
    if gap < MIN_LOSS_GAP:
        gap = MIN_LOSS_GAP
    return (
        _HL_C[0]
        + gap * (_HL_C[1] + gap * (_HL_C[2] + gap * _HL_C[3]))
        + _HL_R / gap
    )


def _loss_coeff(t_fluid, t_ambient):
    """Loss coefficient with the gap floored at MIN_LOSS_GAP (see module doc)."""
    gap = np.maximum(np.asarray(t_fluid, dtype=float) - t_ambient, MIN_LOSS_GAP)
    return physics.thermal_loss_coeff(t_ambient + gap, t_ambient)


def _lumped_rhs(params, t_out, t_in, t_a, irradiance_effective, q, loss_scale, pcp):
    """Right-hand side [W] of the lumped outlet-temperature balance."""
    t_mean = 0.5 * (t_in + t_out)
    h_l = _hl_scalar(t_mean, t_a)
    gain = params.optical_gain(irradiance_effective)
    loss = loss_scale * (
        params.loss_multiplier * 0.8 * (0.5 * t_in - t_a) + 0.4 * h_l * t_out
    )
    advection = (q / SECONDS_PER_HOUR) * pcp * (t_in - t_out)
    return gain - loss + advection


def static_outlet(
    params,
    t_in,
    t_a,
    irradiance_effective,
    q,
    tol=1e-3,
    max_iter=50,
    loss_scale=1.0,
    property_temperature=None,
):
    """Steady-state outlet temperature of one loop.

    Solves the closed-form steady balance by fixed-point iteration on the
    loop mean temperature (the loss coefficient and fluid properties depend
    on it). Converges in a couple of iterations; the iteration is damped by
    half if the residual sign flips twice in a row.

    Parameters
    ----------
    params : LoopParams
    t_in, t_a : float
        Inlet and ambient temperatures [°C].
    irradiance_effective : float
        I·n_o, already including any intercept-factor reduction [W/m²].
    q : float
        Loop flow [m³/h], >= the allocator floor (1e-6).
    tol : float
        Convergence tolerance on the outlet iterate [°C].
    loss_scale : float
        Analysis hook: scales both loss terms (0 disables losses).
    property_temperature : float, optional
        Analysis hook: evaluate fluid properties at this fixed temperature
        instead of the loop mean.

    Returns
    -------
    float
        Outlet temperature [°C].
    """
    if q < 1e-6:
        raise DomainError(f"flow must be >= 1e-6 m³/h, got {q}")
    if irradiance_effective < 0.0:
        raise DomainError(
            f"irradiance_effective must be >= 0, got {irradiance_effective}"
        )
    q_si = q / SECONDS_PER_HOUR
    gain = params.optical_gain(irradiance_effective)
    t_out = t_in
    prev_residual = 0.0
    damping = 1.0
    for _ in range(max_iter):
        t_mean = 0.5 * (t_in + t_out)
        t_prop = t_mean if property_temperature is None else property_temperature
        pcp = _pcp_scalar(t_prop)
        h_l = _hl_scalar(t_mean, t_a)
        numerator = (
            gain
            - loss_scale * 0.8 * (0.5 * t_in - t_a) * params.loss_multiplier
            + q_si * t_in * pcp
        )
        denominator = q_si * pcp + loss_scale * 0.4 * h_l
        if denominator <= 0.0:
            raise ConvergenceError(
                "static outlet balance lost positivity of its denominator",
                last_iterate=t_out,
            )
        new = numerator / denominator
        residual = new - t_out
        if abs(residual) < tol:
            return float(new)
        if residual * prev_residual < 0.0:
            # oscillating map (near-floor flows): damp progressively until
            # the damped iteration contracts
            damping = max(0.5 * damping, 1.0 / 64.0)
        prev_residual = residual
        t_out = t_out + damping * residual
    raise ConvergenceError(
        f"static outlet did not converge in {max_iter} iterations",
        last_iterate=t_out,
    )


def lumped_step(params, state, t_a, irradiance_effective, dt):
    """One explicit-Euler step of the lumped loop model.

    The loop thermal capacity uses the full loop length and fluid properties
    at the mean temperature; states leaving the sanity band abort.
    """
    if dt <= 0.0:
        raise DomainError(f"dt must be > 0, got {dt}")
    t_mean = 0.5 * (state.t_in + state.t_out)
    pcp = _pcp_scalar(t_mean)
    c_loop = params.loop_length * pcp * params.fluid_cross_section
    rhs = _lumped_rhs(
        params,
        state.t_out,
        state.t_in,
        t_a,
        irradiance_effective,
        state.q,
        loss_scale=1.0,
        pcp=pcp,
    )
    t_out = state.t_out + dt * rhs / c_loop
    if not SANITY_BAND[0] <= t_out <= SANITY_BAND[1]:
        raise SimulationDivergence(
            f"lumped outlet temperature {t_out:.1f} °C left the sanity band"
        )
    return replace(state, t_out=float(t_out))


def distributed_step(
    params, state, t_a, irradiance, n_o, if_per_collector, t_in, dt=0.25
):
    """One explicit step of the distributed (metal + fluid) loop model.

    The metal balance is integrated pointwise; the fluid balance uses
    first-order upwind advection from the inlet with the inlet temperature as
    the upstream ghost value. Each collector block's irradiance is scaled by
    its intercept factor; passive joint segments receive none.

    Raises StabilityError when the advective CFL number exceeds 1 and
    SimulationDivergence when any temperature leaves the sanity band.
    """
    if_blocks = as_float_array("if_per_collector", if_per_collector, N_COLLECTORS)
    t_fluid, t_metal = step_profiles(
        state.t_fluid,
        state.t_metal,
        state.q,
        t_in,
        t_a,
        irradiance,
        n_o,
        if_blocks,
        params,
        dt=dt,
    )
    return DistributedState(t_fluid=t_fluid, t_metal=t_metal, q=state.q)


def step_profiles(t_fluid, t_metal, q, t_in, t_a, irradiance, n_o, if_blocks,
                  params, dt=0.25, alpha_kopt=None, alpha_hl=None):
    """Vectorized distributed-model kernel.

    Accepts profile arrays shaped (..., 151) with matching leading dimensions
    on q (...,) and if_blocks (..., 4), so a whole field of loops steps in one
    call. alpha_kopt/alpha_hl default to the params values but may be given
    as per-loop arrays shaped (...,). Returns the new (t_fluid, t_metal).
    """
    t_fluid = np.asarray(t_fluid, dtype=float)
    t_metal = np.asarray(t_metal, dtype=float)
    q = np.asarray(q, dtype=float)
    if_blocks = np.asarray(if_blocks, dtype=float)
    check_positive("dt", dt)
    if np.any(q < 0.0):
        raise DomainError("flow must be >= 0")
    a_kopt = np.asarray(
        params.alpha_kopt if alpha_kopt is None else alpha_kopt, dtype=float
    )
    a_hl = np.asarray(params.alpha_hl if alpha_hl is None else alpha_hl, dtype=float)

    def per_segment(x):
        return x[..., None] if x.ndim else x

    q_si = q / SECONDS_PER_HOUR
    velocity = q_si / params.fluid_cross_section
    cfl = np.max(velocity) * dt / SEGMENT_LENGTH
    if cfl > 1.0:
        raise StabilityError(
            f"advective CFL {cfl:.3f} > 1 at dt={dt} s; reduce dt or flow"
        )

    active = SEGMENT_COLLECTOR >= 0
    intercept = np.ones(t_fluid.shape)
    intercept[..., active] = if_blocks[..., SEGMENT_COLLECTOR[active]]
    absorbed = np.where(
        active,
        per_segment(a_kopt)
        * n_o
        * params.collector_aperture
        * params.optical_efficiency
        * irradiance
        * intercept,
        0.0,
    )

    h_l = _loss_coeff(t_metal, t_a) * per_segment(2.0 - a_hl)
    h_t = physics.convective_coeff(per_segment(q), _clip_property_temp(t_fluid))
    metal_capacity = (
        params.metal_density * params.metal_heat_capacity * params.metal_cross_section
    )
    d_metal = (
        absorbed
        + h_l * params.collector_aperture * (t_a - t_metal)
        + params.tube_perimeter * h_t * (t_fluid - t_metal)
    ) / metal_capacity

    pcp = physics.volumetric_heat_capacity(_clip_property_temp(t_fluid))
    upstream = np.empty_like(t_fluid)
    upstream[..., 0] = t_in
    upstream[..., 1:] = t_fluid[..., :-1]
    advection = -per_segment(velocity) * (t_fluid - upstream) / SEGMENT_LENGTH
    exchange = -params.tube_perimeter * h_t * (t_fluid - t_metal) / (
        pcp * params.fluid_cross_section
    )

    new_fluid = t_fluid + dt * (advection + exchange)
    new_metal = t_metal + dt * d_metal
    if (
        np.any(new_fluid < SANITY_BAND[0])
        or np.any(new_fluid > SANITY_BAND[1])
        or np.any(new_metal < SANITY_BAND[0])
        or np.any(new_metal > SANITY_BAND[1])
    ):
        raise SimulationDivergence("distributed profile left the sanity band")
    return new_fluid, new_metal


def thermal_power(params, q, t_in, t_out):
    """Net thermal power of one loop [W].

    Mass flow times the enthalpy rise, with fluid properties at the loop mean
    temperature, minus the flow penalty k·q (k = 3000, q in m³/h) that
    discourages piling all flow onto the most efficient loops.
    """
    if q < 0.0:
        raise DomainError(f"flow must be >= 0, got {q}")
    pcp = _pcp_scalar(0.5 * (t_in + t_out))
    return float(
        (q / SECONDS_PER_HOUR) * pcp * (t_out - t_in) - THERMAL_POWER_PENALTY * q
    )


def field_power(per_loop_powers):
    """Sum per-loop powers into a PowerReport."""
    per_loop = as_float_array("per_loop_powers", per_loop_powers)
    if per_loop.size == 0:
        raise DomainError("field_power requires at least one loop power")
    return PowerReport(per_loop=per_loop, total=float(np.sum(per_loop)))
