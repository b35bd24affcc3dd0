"""Closed-loop day simulation driver, metrics, and run comparison.

Two-layer timing: every t_s1 the sector flow is split across loops through
the valve apertures (and the plant advances one outer step); every t_s2 the
selected controller updates the apertures. Defocusing is applied at every
plant step. Metrics are accumulated over the daylight window (direct
irradiance above 10 W/m²) and exported as one CSV row per outer tick.
"""

import csv
import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from . import auction as auction_mod
from . import defocus, plant
from .errors import ComparisonError, SimulationDivergence
from .scenario import Scenario

DAYLIGHT_DNI_WM2 = 10.0
DISTRIBUTED_DT = 0.25  # s, inner integration step of the distributed model

# Gila Bend weather mix used for the weighted means (sunny, partly, cloudy).
WEATHER_WEIGHTS = (0.575, 0.4228, 0.0022)


def weighted_mean(sunny, partly_cloudy, cloudy):
    """Weather-mix weighted mean of one metric across the three day classes."""
    w_sun, w_part, w_cloud = WEATHER_WEIGHTS
    return w_sun * sunny + w_part * partly_cloudy + w_cloud * cloudy


# --- plant drivers ----------------------------------------------------------


class _StaticField:
    """Memoryless plant: the defocused steady outlet at the current inputs."""

    def __init__(self, loop_params, t_in):
        self.loop_params = loop_params
        self.t_out = np.full(len(loop_params), t_in)
        self.loop_if = np.ones(len(loop_params))

    def advance(self, flows, t_in, t_a, irradiance_effective, dt):
        for i, lp in enumerate(self.loop_params):
            self.t_out[i], self.loop_if[i] = defocus.lumped_defocus(
                lp, t_in, t_a, irradiance_effective, flows[i]
            )


class _LumpedField:
    """Per-loop single-ODE outlet dynamics with stepwise defocusing."""

    def __init__(self, loop_params, t_in):
        self.loop_params = loop_params
        self.states = [
            plant.LumpedState(t_out=t_in, t_in=t_in, q=1.0) for _ in loop_params
        ]
        self.t_out = np.full(len(loop_params), t_in)
        self.loop_if = np.ones(len(loop_params))

    def advance(self, flows, t_in, t_a, irradiance_effective, dt):
        for i, lp in enumerate(self.loop_params):
            state = self.states[i]
            state.q = float(flows[i])
            state.t_in = t_in
            new_state, factor = defocus.lumped_step_defocus(
                lp, state, t_a, irradiance_effective, dt
            )
            self.states[i] = new_state
            self.t_out[i] = new_state.t_out
            self.loop_if[i] = factor


class _DistributedField:
    """Stacked metal/fluid profiles for all loops, stepped at 0.25 s.

    Per-collector intercept factors follow the proportional heuristic every
    inner step; the loop-level intercept factor reported to metrics and to
    the controller is the collector mean passed through the 10-minute
    low-pass filter.
    """

    def __init__(self, loop_params, t_in):
        n = len(loop_params)
        self.loop_params = loop_params
        self.base_params = loop_params[0]
        self.alpha_kopt = np.array([lp.alpha_kopt for lp in loop_params])
        self.alpha_hl = np.array([lp.alpha_hl for lp in loop_params])
        self.t_fluid = np.full((n, plant.N_SEGMENTS), t_in)
        self.t_metal = np.full((n, plant.N_SEGMENTS), t_in)
        self.if_blocks = np.ones((n, plant.N_COLLECTORS))
        self.filtered_if = np.ones(n)
        self.t_out = np.full(n, t_in)
        self.loop_if = np.ones(n)
        self.block_peak = np.full((n, plant.N_COLLECTORS), -np.inf)
        self.collector_if_min = np.ones((n, plant.N_COLLECTORS))

    def advance(self, flows, t_in, t_a, irradiance, n_o, dt):
        n_sub = max(1, round(dt / DISTRIBUTED_DT))
        sub_dt = dt / n_sub
        for _ in range(n_sub):
            self.t_fluid, self.t_metal = plant.step_profiles(
                self.t_fluid,
                self.t_metal,
                flows,
                t_in,
                t_a,
                irradiance,
                n_o,
                self.if_blocks,
                self.base_params,
                dt=sub_dt,
                alpha_kopt=self.alpha_kopt,
                alpha_hl=self.alpha_hl,
            )
            block_temps = self.t_fluid[:, plant.BLOCK_OUTLET_INDEX]
            self.block_peak = np.maximum(self.block_peak, block_temps)
            self.if_blocks = defocus.collector_defocus_step(
                block_temps, self.if_blocks, sub_dt
            )
        self.t_out = self.t_fluid[:, -1].copy()
        raw = self.if_blocks.mean(axis=1)
        self.filtered_if = defocus.filter_if(raw, self.filtered_if, dt)
        self.loop_if = self.filtered_if.copy()


def _make_field(scenario, loop_params):
    t_in = scenario.inlet_temperature
    if scenario.model == "static":
        return _StaticField(loop_params, t_in)
    if scenario.model == "lumped":
        return _LumpedField(loop_params, t_in)
    return _DistributedField(loop_params, t_in)


# --- controller state vector -------------------------------------------------


def feature_names(n_loops):
    """Column names of the controller state vector, in order."""
    names = ["t_in"]
    names += [f"t_out_{i + 1}" for i in range(n_loops)]
    names += ["t_ambient", "irradiance_effective"]
    names += [f"if_{i + 1}" for i in range(n_loops)]
    names += ["t_out_mean", "if_mean"]
    names += [f"v_{i + 1}" for i in range(n_loops)]
    return names


def build_features(t_in, t_out, t_a, irradiance_effective, loop_if, apertures):
    """Controller state vector: 3·n_loops + 5 entries (35 for ten loops)."""
    t_out = np.asarray(t_out, dtype=float)
    loop_if = np.asarray(loop_if, dtype=float)
    apertures = np.asarray(apertures, dtype=float)
    return np.concatenate(
        [
            [t_in],
            t_out,
            [t_a, irradiance_effective],
            loop_if,
            [t_out.mean(), loop_if.mean()],
            apertures,
        ]
    )


# --- metrics -----------------------------------------------------------------


@dataclass
class RunMetrics:
    """Per-tick traces and day-level summaries of one simulation run."""

    scenario_name: str
    model: str
    controller: str
    seed: int
    inputs_hash: str
    time_s: np.ndarray
    dni: np.ndarray
    t_ambient: np.ndarray
    n_o: np.ndarray
    q_total: np.ndarray
    t_out: np.ndarray  # (ticks, loops)
    q: np.ndarray  # (ticks, loops)
    apertures: np.ndarray  # (ticks, loops)
    intercept: np.ndarray  # (ticks, loops)
    power: np.ndarray  # (ticks, loops) W
    controller_seconds: np.ndarray
    controller_invocations: int
    flow_split_count: int

    @property
    def power_total(self):
        return self.power.sum(axis=1)

    @property
    def spread(self):
        return self.t_out.std(axis=1)

    @property
    def daylight(self):
        return self.dni > DAYLIGHT_DNI_WM2

    @property
    def mean_thermal_power_mw(self):
        return float(self.power_total[self.daylight].mean() / 1e6)

    @property
    def mean_intercept_factor_pct(self):
        return float(self.intercept[self.daylight].mean() * 100.0)

    @property
    def mean_spread_c(self):
        return float(self.spread[self.daylight].mean())

    @property
    def mean_controller_seconds(self):
        if self.controller_seconds.size == 0:
            return 0.0
        return float(self.controller_seconds.mean())

    def fingerprint(self):
        """Hash of the deterministic traces (excludes wall-clock timings)."""
        h = hashlib.sha256()
        for arr in (
            self.time_s,
            self.dni,
            self.t_ambient,
            self.n_o,
            self.q_total,
            self.t_out,
            self.q,
            self.apertures,
            self.intercept,
            self.power,
        ):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def summary_text(self):
        lines = [
            f"scenario: {self.scenario_name}",
            f"inputs_hash: {self.inputs_hash}",
            f"model: {self.model}",
            f"controller: {self.controller}",
            f"seed: {self.seed}",
            f"ticks: {self.time_s.size}",
            f"controller_invocations: {self.controller_invocations}",
            f"flow_splits: {self.flow_split_count}",
            f"daylight_ticks: {int(self.daylight.sum())}",
            f"mean_thermal_power_mw: {self.mean_thermal_power_mw:.2f}",
            f"mean_intercept_factor_pct: {self.mean_intercept_factor_pct:.2f}",
            f"mean_temperature_spread_c: {self.mean_spread_c:.3f}",
            f"mean_controller_seconds: {self.mean_controller_seconds:.3e}",
        ]
        return "\n".join(lines) + "\n"

    def save_csv(self, path):
        n_loops = self.t_out.shape[1]
        header = ["time_s", "dni_wm2", "t_ambient_c", "n_o", "q_total_m3h"]
        for stem in ("t_out", "q", "v", "if", "p_th_w"):
            header += [f"{stem}_{i + 1}" for i in range(n_loops)]
        header += ["p_total_w", "t_out_spread_c"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(self.time_s.size):
                row = [
                    self.time_s[k],
                    self.dni[k],
                    self.t_ambient[k],
                    self.n_o[k],
                    self.q_total[k],
                ]
                for block in (self.t_out, self.q, self.apertures, self.intercept,
                              self.power):
                    row.extend(block[k])
                row += [self.power_total[k], self.spread[k]]
                writer.writerow([repr(float(x)) for x in row])
        return path


# --- controllers -------------------------------------------------------------


def _make_controller(scenario, loop_params, cfg):
    """Returns controller(t_in, t_a, i_eff, q_total, state, apertures) -> apertures."""
    if scenario.controller == "none":
        return None
    if scenario.controller == "auction":

        def controller(t_in, t_a, i_eff, q_total, state, apertures):
            q0 = auction_mod.flows_from_valves(apertures, q_total)
            predictor = auction_mod.make_static_predictor(
                loop_params, t_in, t_a, i_eff
            )
            flows, _ = auction_mod.allocate(q0, q_total, cfg, predictor)
            return auction_mod.valves_from_flows(flows, q_total, cfg)

        return controller

    from .imitation import ApertureImitator  # deferred: imitation imports simulate

    imitator = ApertureImitator.load(scenario.ann_model_path)

    def controller(t_in, t_a, i_eff, q_total, state, apertures):
        features = build_features(
            t_in, state.t_out, t_a, i_eff, state.loop_if, apertures
        )
        return imitator.apertures(features)

    return controller


# --- driver ------------------------------------------------------------------


def run_scenario(scenario: Scenario, on_controller_tick=None):
    """Simulate one scenario day and return its RunMetrics.

    on_controller_tick(tick_index, features, new_apertures), when given, is
    called at every controller invocation with the state vector seen by the
    controller and the apertures it produced (used for dataset generation).

    Model divergence raises SimulationDivergence carrying the failure time.
    """
    loop_params = scenario.loop_params()
    cfg = auction_mod.AuctionConfig(
        outer_sample_time=scenario.t_s1, controller_sample_time=scenario.t_s2
    )
    controller = _make_controller(scenario, loop_params, cfg)
    fld = _make_field(scenario, loop_params)

    t_start, t_end = scenario.profile.span
    n_ticks = int((t_end - t_start) / scenario.t_s1)
    ratio = round(scenario.t_s2 / scenario.t_s1)
    n_loops = scenario.n_loops
    t_in = scenario.inlet_temperature

    apertures = np.ones(n_loops)
    record = {
        name: np.zeros(n_ticks)
        for name in ("time_s", "dni", "t_ambient", "n_o", "q_total")
    }
    per_loop = {
        name: np.zeros((n_ticks, n_loops))
        for name in ("t_out", "q", "apertures", "intercept", "power")
    }
    controller_seconds = []
    controller_invocations = 0

    for k in range(n_ticks):
        t = t_start + k * scenario.t_s1
        dni, t_a, n_o = scenario.geometric_efficiency(t)
        i_eff = dni * n_o
        q_total = scenario.flow.at(t, i_eff)

        if controller is not None and k % ratio == 0:
            started = time.perf_counter()
            new_apertures = controller(t_in, t_a, i_eff, q_total, fld, apertures)
            controller_seconds.append(time.perf_counter() - started)
            controller_invocations += 1
            if on_controller_tick is not None:
                features = build_features(
                    t_in, fld.t_out, t_a, i_eff, fld.loop_if, apertures
                )
                on_controller_tick(controller_invocations - 1, features,
                                   np.asarray(new_apertures, dtype=float))
            apertures = np.asarray(new_apertures, dtype=float)
        elif controller is None and k % ratio == 0:
            controller_invocations += 1  # baseline still counts its ticks

        flows = auction_mod.flows_from_valves(apertures, q_total)
        try:
            if scenario.model == "distributed":
                fld.advance(flows, t_in, t_a, dni, n_o, scenario.t_s1)
            else:
                fld.advance(flows, t_in, t_a, i_eff, scenario.t_s1)
        except SimulationDivergence as exc:
            raise SimulationDivergence(
                f"{scenario.name}: diverged at t={t:.0f} s: {exc}", time_s=t
            ) from exc

        record["time_s"][k] = t
        record["dni"][k] = dni
        record["t_ambient"][k] = t_a
        record["n_o"][k] = n_o
        record["q_total"][k] = q_total
        per_loop["t_out"][k] = fld.t_out
        per_loop["q"][k] = flows
        per_loop["apertures"][k] = apertures
        per_loop["intercept"][k] = fld.loop_if
        per_loop["power"][k] = [
            plant.thermal_power(loop_params[i], flows[i], t_in, fld.t_out[i])
            for i in range(n_loops)
        ]

    return RunMetrics(
        scenario_name=scenario.name,
        model=scenario.model,
        controller=scenario.controller,
        seed=scenario.seed,
        inputs_hash=scenario.inputs_fingerprint(),
        time_s=record["time_s"],
        dni=record["dni"],
        t_ambient=record["t_ambient"],
        n_o=record["n_o"],
        q_total=record["q_total"],
        t_out=per_loop["t_out"],
        q=per_loop["q"],
        apertures=per_loop["apertures"],
        intercept=per_loop["intercept"],
        power=per_loop["power"],
        controller_seconds=np.asarray(controller_seconds),
        controller_invocations=controller_invocations,
        flow_split_count=n_ticks,
    )


# --- comparison --------------------------------------------------------------


@dataclass
class ComparisonReport:
    """Baseline-vs-candidate deltas for one scenario's exogenous inputs."""

    baseline: RunMetrics
    candidate: RunMetrics
    power_delta_mw: float = field(init=False)
    power_delta_pct: float = field(init=False)
    intercept_delta_pct: float = field(init=False)
    spread_ratio: float = field(init=False)
    controller_time_ratio: float = field(init=False)

    def __post_init__(self):
        if self.baseline.inputs_hash != self.candidate.inputs_hash:
            raise ComparisonError(
                "runs are not comparable: scenario inputs differ "
                f"({self.baseline.inputs_hash} vs {self.candidate.inputs_hash})"
            )
        base_p = self.baseline.mean_thermal_power_mw
        cand_p = self.candidate.mean_thermal_power_mw
        self.power_delta_mw = cand_p - base_p
        self.power_delta_pct = 100.0 * (cand_p - base_p) / abs(base_p)
        self.intercept_delta_pct = (
            self.candidate.mean_intercept_factor_pct
            - self.baseline.mean_intercept_factor_pct
        )
        base_spread = self.baseline.mean_spread_c
        self.spread_ratio = (
            self.candidate.mean_spread_c / base_spread if base_spread > 0 else np.nan
        )
        base_t = self.baseline.mean_controller_seconds
        self.controller_time_ratio = (
            self.candidate.mean_controller_seconds / base_t if base_t > 0 else np.nan
        )

    def text(self):
        b, c = self.baseline, self.candidate
        lines = [
            f"inputs_hash: {b.inputs_hash}",
            f"baseline: {b.controller} ({b.model})",
            f"candidate: {c.controller} ({c.model})",
            f"baseline_power_mw: {b.mean_thermal_power_mw:.2f}",
            f"candidate_power_mw: {c.mean_thermal_power_mw:.2f}",
            f"power_delta_mw: {self.power_delta_mw:+.2f}",
            f"power_delta_pct: {self.power_delta_pct:+.2f}",
            f"baseline_if_pct: {b.mean_intercept_factor_pct:.2f}",
            f"candidate_if_pct: {c.mean_intercept_factor_pct:.2f}",
            f"if_delta_pct: {self.intercept_delta_pct:+.2f}",
            f"spread_ratio: {self.spread_ratio:.3f}",
            f"controller_time_ratio: {self.controller_time_ratio:.3f}",
        ]
        return "\n".join(lines) + "\n"

    def save_traces_csv(self, path):
        """All traces of both runs side by side, one row per tick."""
        b, c = self.baseline, self.candidate
        n_loops = b.t_out.shape[1]
        header = ["time_s", "dni_wm2"]
        for tag, run in (("base", b), ("cand", c)):
            header += [f"{tag}_p_total_w", f"{tag}_spread_c", f"{tag}_if_mean"]
            header += [f"{tag}_t_out_{i + 1}" for i in range(n_loops)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(b.time_s.size):
                row = [b.time_s[k], b.dni[k]]
                for run in (b, c):
                    row += [
                        run.power_total[k],
                        run.spread[k],
                        run.intercept[k].mean(),
                    ]
                    row += list(run.t_out[k])
                writer.writerow([repr(float(x)) for x in row])
        return path


def compare_runs(baseline, candidate):
    """Build the comparison report; raises ComparisonError on mismatched inputs."""
    return ComparisonReport(baseline=baseline, candidate=candidate)
