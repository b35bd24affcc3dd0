"""Plant model tests: static/dynamic consistency, PDE energy budget, power."""

import numpy as np
import pytest

from troughflow import physics, plant
from troughflow.errors import DomainError, SimulationDivergence, StabilityError


def lumped_rhs_watts(params, t_out, t_in, t_a, i_eff, q):
    """Independent re-statement of the lumped balance for oracle use."""
    t_mean = 0.5 * (t_in + t_out)
    pcp = physics.fluid_density(min(max(t_mean, 0.0), 450.0)) * physics.fluid_heat_capacity(
        min(max(t_mean, 0.0), 450.0)
    )
    h_l = physics.thermal_loss_coeff(t_a + max(t_mean - t_a, plant.MIN_LOSS_GAP), t_a)
    gain = params.alpha_kopt * params.optical_efficiency * i_eff * params.aperture_area
    loss = (2.0 - params.alpha_hl) * 0.8 * (0.5 * t_in - t_a) + 0.4 * h_l * t_out
    return gain - loss + (q / 3600.0) * pcp * (t_in - t_out)


def bisect_steady_outlet(params, t_in, t_a, i_eff, q, lo=-10.0, hi=4000.0):
    """Scalar root of the lumped balance by bisection (independent oracle)."""
    f_lo = lumped_rhs_watts(params, lo, t_in, t_a, i_eff, q)
    f_hi = lumped_rhs_watts(params, hi, t_in, t_a, i_eff, q)
    assert f_lo * f_hi < 0, "bracket must straddle the root"
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = lumped_rhs_watts(params, mid, t_in, t_a, i_eff, q)
        if f_lo * f_mid <= 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


class TestStaticOutlet:
    def test_no_gain_no_gradient(self):
        p = plant.LoopParams()
        t = plant.static_outlet(p, 25.0, 25.0, 0.0, 20.0)
        assert t == pytest.approx(25.0, abs=0.05)

    def test_large_flow_limit(self):
        p = plant.LoopParams()
        t = plant.static_outlet(p, 293.0, 25.0, 855.0, 1e6)
        assert t == pytest.approx(293.0, abs=0.5)
        t2 = plant.static_outlet(p, 293.0, 25.0, 855.0, 1e7)
        assert abs(t2 - 293.0) < abs(t - 293.0)

    def test_nominal_sunny_case_vs_bisection_oracle(self):
        p = plant.LoopParams()
        i_eff = 900.0 * 0.95
        q = 38.0
        expected = bisect_steady_outlet(p, 293.0, 25.0, i_eff, q)
        got = plant.static_outlet(p, 293.0, 25.0, i_eff, q, tol=1e-6)
        assert got == pytest.approx(expected, abs=1e-3)

    def test_randomized_vs_bisection_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(40):
            p = plant.LoopParams(
                alpha_kopt=rng.uniform(0.85, 1.0), alpha_hl=rng.uniform(0.0, 1.0)
            )
            t_in = rng.uniform(250.0, 300.0)
            t_a = rng.uniform(0.0, 40.0)
            i_eff = rng.uniform(0.0, 1000.0)
            q = rng.uniform(10.0, 80.0)
            expected = bisect_steady_outlet(p, t_in, t_a, i_eff, q)
            got = plant.static_outlet(p, t_in, t_a, i_eff, q, tol=1e-6)
            assert got == pytest.approx(expected, abs=1e-3)

    def test_flow_floor_enforced(self):
        with pytest.raises(DomainError):
            plant.static_outlet(plant.LoopParams(), 293.0, 25.0, 800.0, 1e-7)

    def test_negative_irradiance_rejected(self):
        with pytest.raises(DomainError):
            plant.static_outlet(plant.LoopParams(), 293.0, 25.0, -1.0, 20.0)

    def test_zero_loss_doubles_temperature_rise(self):
        # with losses disabled and fluid properties frozen, the rise is
        # exactly proportional to the absorbed power
        p = plant.LoopParams()
        kwargs = dict(loss_scale=0.0, property_temperature=340.0, tol=1e-9)
        rise1 = plant.static_outlet(p, 293.0, 25.0, 400.0, 38.0, **kwargs) - 293.0
        rise2 = plant.static_outlet(p, 293.0, 25.0, 800.0, 38.0, **kwargs) - 293.0
        assert rise2 == pytest.approx(2.0 * rise1, rel=1e-6)


class TestLumpedStep:
    def test_zero_rhs_keeps_state(self):
        # no irradiance, outlet at inlet, ambient at half the inlet so the
        # main loss term vanishes; the small 0.4*H_l*t_out residual of the
        # printed balance moves the state by only ~3e-5 degC per step
        p = plant.LoopParams()
        state = plant.LumpedState(t_out=293.0, t_in=293.0, q=30.0)
        new = plant.lumped_step(p, state, 146.5, 0.0, dt=30.0)
        assert new.t_out == pytest.approx(293.0, abs=1e-3)

    def test_static_solution_is_fixed_point(self):
        p = plant.LoopParams(alpha_kopt=0.93, alpha_hl=0.4)
        t_in, t_a, i_eff, q = 293.0, 25.0, 820.0, 36.0
        t_star = plant.static_outlet(p, t_in, t_a, i_eff, q, tol=1e-9)
        state = plant.LumpedState(t_out=t_star, t_in=t_in, q=q)
        new = plant.lumped_step(p, state, t_a, i_eff, dt=30.0)
        assert abs(new.t_out - t_star) < 1e-6

    def test_step_response_monotone(self):
        p = plant.LoopParams()
        state = plant.LumpedState(t_out=293.0, t_in=293.0, q=30.0)
        previous = state.t_out
        for _ in range(200):
            state = plant.lumped_step(p, state, 25.0, 700.0, dt=30.0)
            assert state.t_out >= previous - 1e-12
            previous = state.t_out

    def test_convergence_to_static_solution(self):
        p = plant.LoopParams(alpha_kopt=0.9)
        t_in, t_a, i_eff, q = 290.0, 20.0, 640.0, 33.0
        state = plant.LumpedState(t_out=t_in, t_in=t_in, q=q)
        for _ in range(5000):
            new = plant.lumped_step(p, state, t_a, i_eff, dt=30.0)
            if abs(new.t_out - state.t_out) < 1e-8:
                state = new
                break
            state = new
        t_static = plant.static_outlet(p, t_in, t_a, i_eff, q)
        assert abs(state.t_out - t_static) < 0.5

    def test_divergence_aborts(self):
        p = plant.LoopParams()
        state = plant.LumpedState(t_out=499.0, t_in=293.0, q=1.0)
        with pytest.raises(SimulationDivergence):
            for _ in range(10000):
                state = plant.lumped_step(p, state, 25.0, 1000.0, dt=30.0)


def reference_energy_budget(params, state, t_a, irradiance, n_o, if_blocks, t_in, dt):
    """Independent per-term energy bookkeeping over all segments [J]."""
    t_f, t_m, q = state.t_fluid, state.t_metal, state.q
    dx = plant.SEGMENT_LENGTH
    seg = plant.SEGMENT_COLLECTOR
    active = seg >= 0
    intercept = np.where(active, np.asarray(if_blocks)[np.maximum(seg, 0)], 0.0)
    absorbed = np.sum(
        params.alpha_kopt
        * n_o
        * params.collector_aperture
        * params.optical_efficiency
        * irradiance
        * intercept
        * dx
    )
    gap = np.maximum(t_m - t_a, plant.MIN_LOSS_GAP)
    h_l = physics.thermal_loss_coeff(t_a + gap, t_a) * (2.0 - params.alpha_hl)
    losses = np.sum(h_l * params.collector_aperture * (t_m - t_a) * dx)
    pcp = physics.fluid_density(np.clip(t_f, 0, 450)) * physics.fluid_heat_capacity(
        np.clip(t_f, 0, 450)
    )
    upstream = np.concatenate([[t_in], t_f[:-1]])
    advective = np.sum((q / 3600.0) * pcp * (t_f - upstream))
    return (absorbed - losses - advective) * dt, pcp


class TestDistributedStep:
    def test_isothermal_equilibrium_without_sun(self):
        p = plant.LoopParams()
        t_a = 250.0  # equal to the profile so every exchange term sees zero gap
        state = plant.uniform_profile(250.0, 30.0)
        new = plant.distributed_step(p, state, t_a, 0.0, 0.95, np.ones(4), 250.0)
        # loss term is evaluated at the floored gap but multiplies (t_a - t_m) = 0
        assert np.allclose(new.t_fluid, 250.0, atol=1e-12)
        assert np.allclose(new.t_metal, 250.0, atol=1e-12)

    def test_energy_budget_closes(self):
        rng = np.random.default_rng(31)
        p = plant.LoopParams(alpha_kopt=0.9, alpha_hl=0.3)
        for _ in range(30):
            state = plant.DistributedState(
                t_fluid=rng.uniform(100, 400, plant.N_SEGMENTS),
                t_metal=rng.uniform(100, 440, plant.N_SEGMENTS),
                q=rng.uniform(5.0, 60.0),
            )
            t_a = rng.uniform(0, 40)
            irr = rng.uniform(0, 1000)
            n_o = rng.uniform(0.5, 1.0)
            if_blocks = rng.uniform(0.2, 1.0, 4)
            t_in = rng.uniform(250, 300)
            dt = 0.25
            expected, pcp = reference_energy_budget(
                p, state, t_a, irr, n_o, if_blocks, t_in, dt
            )
            new = plant.distributed_step(p, state, t_a, irr, n_o, if_blocks, t_in, dt)
            d_fluid = np.sum(
                pcp * p.fluid_cross_section * plant.SEGMENT_LENGTH
                * (new.t_fluid - state.t_fluid)
            )
            d_metal = np.sum(
                p.metal_density * p.metal_heat_capacity * p.metal_cross_section
                * plant.SEGMENT_LENGTH * (new.t_metal - state.t_metal)
            )
            scale = abs(expected) + 1.0
            assert abs((d_fluid + d_metal) - expected) / scale < 1e-6

    def test_fluid_and_metal_relax_toward_each_other(self):
        p = plant.LoopParams()
        state = plant.DistributedState(
            t_fluid=np.full(plant.N_SEGMENTS, 300.0),
            t_metal=np.full(plant.N_SEGMENTS, 340.0),
            q=20.0,
        )
        # no sun, ambient at fluid temperature: only exchange acts on metal
        new = plant.distributed_step(p, state, 300.0, 0.0, 0.9, np.ones(4), 300.0)
        assert np.all(new.t_metal < state.t_metal)
        assert np.all(new.t_fluid[1:] >= state.t_fluid[1:])

    def test_cfl_violation_raises(self):
        p = plant.LoopParams()
        state = plant.uniform_profile(300.0, 2000.0)  # ~154 m/s -> CFL >> 1
        with pytest.raises(StabilityError):
            plant.distributed_step(p, state, 25.0, 0.0, 0.9, np.ones(4), 293.0)

    def test_sanity_band_divergence(self):
        p = plant.LoopParams()
        state = plant.uniform_profile(499.9, 30.0)
        with pytest.raises(SimulationDivergence):
            for _ in range(100000):
                state = plant.distributed_step(
                    p, state, 45.0, 1050.0, 1.0, np.ones(4), 499.0
                )

    def test_block_outlets_are_increasing_under_sun(self):
        p = plant.LoopParams()
        state = plant.uniform_profile(293.0, 30.0)
        for _ in range(4 * 1200):  # 20 min
            state = plant.distributed_step(
                p, state, 25.0, 900.0, 0.95, np.ones(4), 293.0
            )
        blocks = state.block_outlets()
        assert np.all(np.diff(blocks) > 0)
        assert state.outlet == pytest.approx(blocks[-1], abs=1e-9)

    def test_steady_outlet_monotone_in_flow(self):
        p = plant.LoopParams()
        outs = []
        for q in (20.0, 30.0, 45.0):
            state = plant.uniform_profile(293.0, q)
            for _ in range(4 * 2400):  # 40 min is enough to settle
                state = plant.distributed_step(
                    p, state, 25.0, 850.0, 0.95, np.ones(4), 293.0
                )
            outs.append(state.outlet)
        assert outs[0] > outs[1] > outs[2]

    def test_vectorized_field_matches_per_loop(self):
        p = plant.LoopParams()
        rng = np.random.default_rng(7)
        alphas = rng.uniform(0.85, 1.0, 3)
        hls = rng.uniform(0.0, 1.0, 3)
        t_f = rng.uniform(280, 360, (3, plant.N_SEGMENTS))
        t_m = t_f + rng.uniform(0, 10, (3, plant.N_SEGMENTS))
        q = rng.uniform(20, 40, 3)
        if_blocks = rng.uniform(0.5, 1.0, (3, 4))
        stacked_f, stacked_m = plant.step_profiles(
            t_f, t_m, q, 293.0, 25.0, 800.0, 0.92, if_blocks, p,
            alpha_kopt=alphas, alpha_hl=hls,
        )
        for i in range(3):
            pi = plant.LoopParams(alpha_kopt=alphas[i], alpha_hl=hls[i])
            fi, mi = plant.step_profiles(
                t_f[i], t_m[i], q[i], 293.0, 25.0, 800.0, 0.92, if_blocks[i], pi
            )
            assert np.allclose(stacked_f[i], fi, atol=1e-12)
            assert np.allclose(stacked_m[i], mi, atol=1e-12)


class TestThermalPower:
    def test_zero_flow(self):
        assert plant.thermal_power(plant.LoopParams(), 0.0, 293.0, 393.0) == 0.0

    def test_no_rise_leaves_only_penalty(self):
        p = plant.LoopParams()
        assert plant.thermal_power(p, 0.005, 300.0, 300.0) == pytest.approx(
            -3000.0 * 0.005
        )

    def test_hand_evaluation_chain(self):
        # mean temperature 343: evaluate both property fits then the power
        rho = physics.fluid_density(343.0)
        cap = physics.fluid_heat_capacity(343.0)
        q = 30.0
        expected = (q / 3600.0) * rho * cap * (393.0 - 293.0) - 3000.0 * q
        assert plant.thermal_power(plant.LoopParams(), q, 293.0, 393.0) == pytest.approx(
            expected, rel=1e-12
        )

    def test_linear_in_flow_at_fixed_outlet(self):
        p = plant.LoopParams()
        base = plant.thermal_power(p, 10.0, 293.0, 380.0)
        assert plant.thermal_power(p, 20.0, 293.0, 380.0) == pytest.approx(
            2.0 * base, rel=1e-12
        )

    def test_negative_flow_rejected(self):
        with pytest.raises(DomainError):
            plant.thermal_power(plant.LoopParams(), -1.0, 293.0, 393.0)


class TestFieldPower:
    def test_single_loop_identity(self):
        report = plant.field_power([123.4])
        assert report.total == 123.4

    def test_all_zero(self):
        assert plant.field_power(np.zeros(10)).total == 0.0

    def test_linearity_ten_equal_loops(self):
        report = plant.field_power([1.5e6] * 10)
        assert report.total == pytest.approx(10 * 1.5e6, rel=1e-12)

    def test_total_matches_sum_exactly(self):
        rng = np.random.default_rng(3)
        values = rng.uniform(-1e6, 3e6, 10)
        report = plant.field_power(values)
        assert report.total == pytest.approx(float(np.sum(values)), rel=1e-9)
        assert report.penalty_factor == 3000.0

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            plant.field_power([])


def test_scalar_property_paths_match_physics_module():
    rng = np.random.default_rng(44)
    for _ in range(100):
        t = rng.uniform(0.0, 450.0)
        t_a = rng.uniform(0.0, 40.0)
        assert plant._pcp_scalar(t) == pytest.approx(
            physics.fluid_density(t) * physics.fluid_heat_capacity(t), rel=1e-12
        )
        gap = max(t - t_a, plant.MIN_LOSS_GAP)
        assert plant._hl_scalar(t, t_a) == pytest.approx(
            physics.thermal_loss_coeff(t_a + gap, t_a), rel=1e-12
        )


class TestLoopParams:
    def test_fault_ranges_validated(self):
        with pytest.raises(DomainError):
            plant.LoopParams(alpha_kopt=0.0)
        with pytest.raises(DomainError):
            plant.LoopParams(alpha_hl=1.5)

    def test_loss_multiplier_range(self):
        assert plant.LoopParams(alpha_hl=1.0).loss_multiplier == 1.0
        assert plant.LoopParams(alpha_hl=0.0).loss_multiplier == 2.0

    def test_segment_layout(self):
        assert plant.SEGMENT_COLLECTOR.size == 151
        active = plant.SEGMENT_COLLECTOR >= 0
        assert active.sum() == 144  # round(151 * 593 / 620)
        counts = [(plant.SEGMENT_COLLECTOR == c).sum() for c in range(4)]
        assert counts == [36, 36, 36, 36]
        # block outlets are ordered along the loop
        assert np.all(np.diff(plant.BLOCK_OUTLET_INDEX) > 0)
