"""Correlation tests: frozen hand evaluations, properties, domain errors."""

import math

import numpy as np
import pytest

from troughflow import physics
from troughflow.errors import DomainError, SingularityError


class TestFluidDensity:
    def test_constant_term_only(self):
        assert physics.fluid_density(0.0) == 1061.5

    def test_hand_evaluation_300(self):
        # 1061.5 - 0.5787*300 - 9.0242e-4*300^2
        assert physics.fluid_density(300.0) == pytest.approx(806.6722, abs=1e-9)

    def test_hand_evaluation_100(self):
        # 1061.5 - 57.87 - 9.0242
        assert physics.fluid_density(100.0) == pytest.approx(994.6058, abs=1e-9)

    def test_out_of_range_errors_name_bound(self):
        with pytest.raises(DomainError, match="<= 450"):
            physics.fluid_density(451.0)
        with pytest.raises(DomainError, match=">= 0"):
            physics.fluid_density(-1.0)

    def test_positive_and_strictly_decreasing(self):
        temps = np.linspace(0.0, 450.0, 901)
        rho = physics.fluid_density(temps)
        assert np.all(rho > 0)
        assert np.all(np.diff(rho) < 0)

    def test_horner_vs_naive_power(self):
        a0, a1, a2 = physics.FLUID_DENSITY_COEFFS
        for t in np.linspace(0, 450, 91):
            horner = a0 + t * (a1 + t * a2)
            naive = a0 + a1 * math.pow(t, 1) + a2 * math.pow(t, 2)
            got = physics.fluid_density(float(t))
            assert got == pytest.approx(horner, rel=1e-9)
            assert got == pytest.approx(naive, rel=1e-9)


class TestFluidHeatCapacity:
    def test_constant_term_only(self):
        assert physics.fluid_heat_capacity(0.0) == 1552.049

    def test_hand_evaluation_300(self):
        assert physics.fluid_heat_capacity(300.0) == pytest.approx(2362.574, abs=1e-9)

    def test_hand_evaluation_nominal_393(self):
        # 1552.049 + 2.38501*393 + 0.0010558*393^2
        assert physics.fluid_heat_capacity(393.0) == pytest.approx(2652.4251842, abs=1e-6)

    def test_positive_on_range(self):
        temps = np.linspace(0.0, 450.0, 451)
        assert np.all(physics.fluid_heat_capacity(temps) > 0)

    def test_horner_agreement(self):
        a0, a1, a2 = physics.FLUID_HEAT_CAPACITY_COEFFS
        for t in np.linspace(0, 450, 91):
            assert physics.fluid_heat_capacity(float(t)) == pytest.approx(
                a0 + t * (a1 + t * a2), rel=1e-9
            )


class TestThermalLossCoeff:
    def test_hand_evaluation_gap_200(self):
        # 1.137e-8*8e6 - 3.235e-6*4e4 + 1.444e-4*200 + 8.179e-2 - 4.796/200
        assert physics.thermal_loss_coeff(225.0, 25.0) == pytest.approx(
            0.04825, abs=1e-9
        )

    def test_small_gap_dominated_by_reciprocal(self):
        # at a 1 degree gap the -4.796/gap term dominates; the fit is only
        # physically meaningful for large gaps
        value = physics.thermal_loss_coeff(26.0, 25.0)
        expected = 1.137e-8 - 3.235e-6 + 1.444e-4 + 8.179e-2 - 4.796
        assert value == pytest.approx(expected, rel=1e-12)
        assert value < 0

    def test_zero_gap_is_singular(self):
        with pytest.raises(SingularityError):
            physics.thermal_loss_coeff(25.0, 25.0)
        with pytest.raises(SingularityError):
            physics.thermal_loss_coeff(20.0, 25.0)

    def test_continuous_and_finite_on_10_400(self):
        gaps = np.linspace(10.0, 400.0, 4001)
        values = physics.thermal_loss_coeff(gaps + 20.0, 20.0)
        assert np.all(np.isfinite(values))
        # no jumps: neighbouring samples stay close
        assert np.max(np.abs(np.diff(values))) < 0.01


class TestConvectiveCoeff:
    def test_zero_flow_annihilates(self):
        assert physics.convective_coeff(0.0, 300.0) == 0.0

    def test_unit_prefactor_at_3600(self):
        a0, a1, a2, a3, a4 = physics.CONVECTIVE_COEFFS
        t = 250.0
        poly = a0 + a1 * t + a2 * t**2 + a3 * t**3 + a4 * t**4
        assert physics.convective_coeff(3600.0, t) == pytest.approx(poly, rel=1e-12)

    def test_prefactor_scaling_law(self):
        base = physics.convective_coeff(3600.0, 310.0)
        assert physics.convective_coeff(7200.0, 310.0) == pytest.approx(
            2.0**0.8 * base, rel=1e-12
        )

    def test_power_law_in_flow(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            q = rng.uniform(0.1, 100.0)
            alpha = rng.uniform(0.1, 10.0)
            t = rng.uniform(0.0, 450.0)
            assert physics.convective_coeff(alpha * q, t) == pytest.approx(
                alpha**0.8 * physics.convective_coeff(q, t), rel=1e-12
            )

    def test_negative_flow_rejected(self):
        with pytest.raises(DomainError):
            physics.convective_coeff(-1.0, 300.0)

    def test_physical_magnitude_at_operating_point(self):
        # tube-side coefficient should be O(1e3) W/(m2 C) at working flow
        assert 500.0 < physics.convective_coeff(30.0, 350.0) < 10000.0


class TestGeometricEfficiency:
    def test_collapses_to_cos_latitude(self):
        for lat in (0.0, 15.0, 37.0, 60.0):
            assert physics.geometric_efficiency(lat, 0.0, 0.0) == pytest.approx(
                math.cos(math.radians(lat)), rel=1e-12
            )

    def test_equator_equinox_90deg_hour_angle(self):
        assert physics.geometric_efficiency(0.0, 0.0, 90.0) == pytest.approx(1.0)

    def test_direct_evaluation_of_closed_form(self):
        phi, dec, om = 37.0, 23.45, 30.0
        p, d, o = (math.radians(v) for v in (phi, dec, om))
        raw = (
            math.sin(p) * math.sin(d)
            + math.cos(d) ** 2 * math.sin(o) ** 2
            + math.cos(p) * math.cos(d) * math.cos(o)
        )
        expected = min(1.0, max(0.0, math.sqrt(raw * raw)))
        assert physics.geometric_efficiency(phi, dec, om) == pytest.approx(
            expected, rel=1e-12
        )

    def test_clamped_to_unit_interval(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            value = physics.geometric_efficiency(
                rng.uniform(-90, 90), rng.uniform(-23.45, 23.45), rng.uniform(-120, 120)
            )
            assert 0.0 <= value <= 1.0

    def test_even_in_hour_angle(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            lat = rng.uniform(-90, 90)
            dec = rng.uniform(-23.45, 23.45)
            om = rng.uniform(0, 180)
            assert physics.geometric_efficiency(lat, dec, om) == physics.geometric_efficiency(
                lat, dec, -om
            )

    def test_latitude_bound(self):
        with pytest.raises(DomainError):
            physics.geometric_efficiency(91.0, 0.0, 0.0)


class TestSolarAngles:
    def test_noon_hour_angle_zero(self):
        _, omega = physics.solar_angles(100, 12.0)
        assert omega == 0.0

    def test_near_equinox_declination(self):
        # Cooper's formula at n=81: 23.45*sin(360*(284+81)/365 deg) = 0
        dec, _ = physics.solar_angles(81, 12.0)
        assert dec == pytest.approx(23.45 * math.sin(math.radians(360.0 * 365 / 365)), abs=1e-9)
        assert abs(dec) < 1e-9

    def test_solstice_declination(self):
        dec, _ = physics.solar_angles(172, 12.0)
        assert dec == pytest.approx(
            23.45 * math.sin(math.radians(360.0 * (284 + 172) / 365.0)), rel=1e-12
        )
        assert dec == pytest.approx(23.45, abs=1e-3)

    def test_hour_angle_rate(self):
        _, omega = physics.solar_angles(10, 15.0)
        assert omega == pytest.approx(45.0)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            physics.solar_angles(0, 12.0)
        with pytest.raises(DomainError):
            physics.solar_angles(400, 12.0)
        with pytest.raises(DomainError):
            physics.solar_angles(100, 24.0)


def test_fluid_sample_bundles_both_fits():
    sample = physics.fluid_sample(300.0)
    assert sample.density == physics.fluid_density(300.0)
    assert sample.heat_capacity == physics.fluid_heat_capacity(300.0)


def test_solar_geometry_composes():
    geo = physics.solar_geometry(37.0, 172, 10.0)
    dec, ha = physics.solar_angles(172, 10.0)
    assert geo.declination == dec
    assert geo.hour_angle == ha
    assert geo.geometric_efficiency == physics.geometric_efficiency(37.0, dec, ha)
    assert 0.0 <= geo.geometric_efficiency <= 1.0
