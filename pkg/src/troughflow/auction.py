"""Market-based flow allocation across the loops of one sector.

Each control tick the allocator runs a fixed number of auction rounds. In a
round, every loop's thermal power is predicted at its current flow and at
virtual probe flows one quantum up and down; the resulting demand/supply
powers set per-loop prices and a single clearing price (the mean of all
demand and supply powers per quantum). Loops whose demand price beats the
clearing price (and whose probe-up power wins) receive flow proportionally
to the margin; symmetric for supply. Flows are floored, capped at the sector
total, and rescaled so they always sum to the sector flow.

Flows are in m³/h. The update gain K multiplies a power difference in W, so
a typical saturated-loop demand margin (~5e4 W) moves ~0.5 m³/h per round.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import defocus, plant
from .errors import DomainError
from .validation import as_float_array, check_positive

EQUAL_SHARE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class AuctionConfig:
    """Allocator tuning constants (defaults are the trial-and-error set)."""

    n_iterations: int = 10  # auction rounds per control tick
    n_valve_iterations: int = 150  # aperture-inversion iterations
    delta_q: float = 1.0  # m³/h, virtual probe quantum
    gain: float = 1e-5  # m³/h per W of price margin
    valve_gain: float = 0.25  # aperture units per unit normalized flow error
    q_floor: float = 1e-6  # m³/h, minimum loop flow
    outer_sample_time: float = 30.0  # s, flow-split (valve-to-flow) period
    controller_sample_time: float = 180.0  # s, aperture-update period

    def __post_init__(self):
        for name in (
            "delta_q",
            "gain",
            "valve_gain",
            "q_floor",
            "outer_sample_time",
            "controller_sample_time",
        ):
            check_positive(name, getattr(self, name))
        if self.q_floor >= self.delta_q:
            raise DomainError("q_floor must be smaller than delta_q")


@dataclass
class AuctionBook:
    """Per-round record of flows, powers, prices and the clearing price."""

    q: np.ndarray  # m³/h, flows the round started from
    power: np.ndarray  # W, at current flow
    power_up: np.ndarray  # W, at flow + delta_q
    power_down: np.ndarray  # W, at flow - delta_q (floored)
    p_demand: np.ndarray = field(init=False)  # W
    p_supply: np.ndarray = field(init=False)  # W
    c_demand: np.ndarray = field(init=False)  # W per m³/h
    c_supply: np.ndarray = field(init=False)  # W per m³/h
    clearing_price: float = field(init=False)
    failed: bool = False

    def finalize(self, cfg):
        self.p_demand = self.power_up - self.power
        self.p_supply = self.power_down - self.power
        self.c_demand = self.p_demand / cfg.delta_q
        self.c_supply = self.p_supply / cfg.delta_q
        self.clearing_price = auction_price(self.p_demand, self.p_supply, cfg)
        return self


def probe_flows(q, cfg):
    """Virtual probe flows (q + Δq, max(q − Δq, floor)) for one loop."""
    if q < cfg.q_floor:
        raise DomainError(f"flow {q} below the allocator floor {cfg.q_floor}")
    return q + cfg.delta_q, max(q - cfg.delta_q, cfg.q_floor)


def auction_price(p_demand, p_supply, cfg):
    """Clearing price: mean of all demand and supply powers per quantum."""
    p_demand = as_float_array("p_demand", p_demand)
    p_supply = as_float_array("p_supply", p_supply)
    n = p_demand.shape[-1]
    if n < 1:
        raise DomainError("auction_price requires at least one loop")
    return float(
        (np.sum(p_demand) + np.sum(p_supply)) / (2.0 * n * cfg.delta_q)
    )


def auction_round(q, total_flow, cfg, predictor):
    """One full auction round; returns (new_flows, book).

    predictor(i, flow) must return loop i's predicted thermal power [W].
    If any prediction raises, the round aborts and returns the input flows
    with book.failed set.
    """
    q = as_float_array("q", q).copy()
    n = q.size
    power = np.empty(n)
    power_up = np.empty(n)
    power_down = np.empty(n)
    try:
        for i in range(n):
            up, down = probe_flows(q[i], cfg)
            power[i] = predictor(i, q[i])
            power_up[i] = predictor(i, up)
            power_down[i] = predictor(i, down)
    except Exception:
        book = AuctionBook(q=q.copy(), power=power, power_up=power_up,
                           power_down=power_down, failed=True)
        return q, book

    book = AuctionBook(
        q=q.copy(), power=power, power_up=power_up, power_down=power_down
    ).finalize(cfg)

    c_au = book.clearing_price
    raise_flow = (
        (book.c_demand > c_au) & (power_up > power) & (power_up > power_down)
    )
    lower_flow = (
        (book.c_supply > c_au) & (power_down > power) & (power_down > power_up)
    )
    q[raise_flow] += cfg.gain * (book.p_demand[raise_flow] - c_au)
    q[lower_flow] -= cfg.gain * (book.p_supply[lower_flow] - c_au)

    if not (raise_flow.any() or lower_flow.any()):
        return q, book  # idempotent: untouched flows are returned exactly

    np.clip(q, cfg.q_floor, total_flow, out=q)
    q *= total_flow / np.sum(q)
    return q, book


def allocate(q0, total_flow, cfg, predictor):
    """Run the configured number of auction rounds from the given flows.

    Returns (flows, books); a failed round leaves flows unchanged and stops
    the allocation early.
    """
    q = as_float_array("q0", q0).copy()
    books = []
    for _ in range(cfg.n_iterations):
        q, book = auction_round(q, total_flow, cfg, predictor)
        books.append(book)
        if book.failed:
            break
    return q, books


def flows_from_valves(apertures, total_flow):
    """Proportional split of the sector flow by valve aperture."""
    v = as_float_array("apertures", apertures)
    s = float(np.sum(v))
    if s <= 0.0:
        raise DomainError("apertures must not all be zero")
    return v * (total_flow / s)


def valves_from_flows(q_target, total_flow, cfg):
    """Invert the proportional split: apertures realizing the target flows.

    The aperture of the loop with the largest target is fixed at 1 (any
    other choice could demand apertures above 1); the rest follow an
    iterative proportional correction on the flow error, normalized by the
    mean loop flow so the step size is independent of flow units. Emits a
    warning if the residual exceeds 1% of the sector flow per loop after
    the configured iterations.
    """
    q_target = as_float_array("q_target", q_target)
    n = q_target.size
    if np.any(q_target < cfg.q_floor):
        raise DomainError("target flows must respect the allocator floor")
    if abs(np.sum(q_target) - total_flow) > 1e-6 * total_flow:
        raise DomainError("target flows must sum to the sector flow")
    fixed = int(np.argmax(q_target))
    v = np.ones(n)
    mean_flow = total_flow / n
    free = np.arange(n) != fixed
    for _ in range(cfg.n_valve_iterations):
        realized = flows_from_valves(v, total_flow)
        error = q_target - realized
        if np.max(np.abs(error)) < EQUAL_SHARE_TOLERANCE * total_flow:
            break
        v[free] = np.clip(
            v[free] + cfg.valve_gain * error[free] / mean_flow, 1e-3, 1.0
        )
    residual = np.max(np.abs(q_target - flows_from_valves(v, total_flow)))
    if residual > 0.01 * total_flow:
        warnings.warn(
            f"aperture inversion residual {residual:.4g} m³/h exceeds 1% of "
            f"the sector flow after {cfg.n_valve_iterations} iterations",
            RuntimeWarning,
            stacklevel=2,
        )
    return v


def make_static_predictor(loop_params, t_in, t_a, irradiance_effective,
                          limits=defocus.DEFAULT_LIMITS):
    """Loop-power oracle over the defocused steady-state model.

    The returned callable maps (loop_index, flow) to predicted thermal power
    with the outlet-temperature cap applied, which is what gives the market a
    reason to move flow: a capped loop gains power with flow, an uncapped one
    only pays more penalty.
    """

    def predictor(i, q):
        t_out, _ = defocus.lumped_defocus(
            loop_params[i], t_in, t_a, irradiance_effective, q, limits
        )
        return plant.thermal_power(loop_params[i], q, t_in, t_out)

    return predictor


def equal_flows(n_loops, total_flow):
    """The no-allocation baseline split."""
    return np.full(n_loops, total_flow / n_loops)
