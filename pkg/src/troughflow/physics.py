"""Empirical correlations for the heat-transfer fluid and solar geometry.

All functions are pure and accept scalars or numpy arrays. Temperatures are
in degrees Celsius, flow rates in m³/h (the package-wide convention; see the
README), coefficients in SI.

Correlation validity: the fluid property fits cover [0, 450] °C (Therminol
VP-1 class oil, nominal operation near 390 °C); the thermal-loss fit is only
physically meaningful for fluid-to-ambient gaps of several tens of degrees
and goes negative below a gap of roughly 58 °C.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError
from .validation import check_in_range

# Fluid property fits, density in kg/m³ and heat capacity in J/(kg·°C),
# evaluated at the fluid temperature in °C.
FLUID_DENSITY_COEFFS = (1061.5, -0.5787, -9.0242e-4)
FLUID_HEAT_CAPACITY_COEFFS = (1552.049, 2.38501, 0.0010558)

# Thermal-loss coefficient fit, W/(m²·°C) as a function of the fluid-to-ambient
# temperature gap: cubic polynomial plus a reciprocal term.
THERMAL_LOSS_COEFFS = (8.179e-2, 1.444e-4, -3.235e-6, 1.137e-8)
THERMAL_LOSS_RECIPROCAL = -4.796

# Convective (tube-side) coefficient fit, W/(m²·°C): (q/3600)^0.8 times a
# quartic in fluid temperature, q in m³/h. The cubic coefficient is the
# corrected -1.356114e-3; the commonly printed -1.356114e+3 is dimensionally
# inconsistent with the neighbouring terms and makes the coefficient hugely
# negative at every operating temperature.
CONVECTIVE_COEFFS = (5.011334e3, 479.1142, 2.679214e-1, -1.356114e-3, -7.182817e-7)
CONVECTIVE_FLOW_EXPONENT = 0.8
CONVECTIVE_FLOW_DIVISOR = 3600.0

TEMPERATURE_RANGE = (0.0, 450.0)


def fluid_density(temperature):
    """Density of the heat-transfer fluid.

    Parameters
    ----------
    temperature : float or ndarray
        Fluid temperature [°C], within [0, 450].

    Returns
    -------
    float or ndarray
        Density [kg/m³].
    """
    check_in_range("temperature", temperature, *TEMPERATURE_RANGE)
    a0, a1, a2 = FLUID_DENSITY_COEFFS
    t = np.asarray(temperature, dtype=float)
    out = a0 + a1 * t + a2 * t * t
    return out if out.ndim else float(out)


def fluid_heat_capacity(temperature):
    """Specific heat capacity of the heat-transfer fluid.

    Parameters
    ----------
    temperature : float or ndarray
        Fluid temperature [°C], within [0, 450].

    Returns
    -------
    float or ndarray
        Heat capacity [J/(kg·°C)].
    """
    check_in_range("temperature", temperature, *TEMPERATURE_RANGE)
    a0, a1, a2 = FLUID_HEAT_CAPACITY_COEFFS
    t = np.asarray(temperature, dtype=float)
    out = a0 + a1 * t + a2 * t * t
    return out if out.ndim else float(out)


def volumetric_heat_capacity(temperature):
    """Density times heat capacity [J/(m³·°C)] at one temperature."""
    return fluid_density(temperature) * fluid_heat_capacity(temperature)


def thermal_loss_coeff(t_fluid, t_ambient):
    """Receiver thermal-loss coefficient.

    Evaluates the loss fit on the fluid-to-ambient gap. The final reciprocal
    term makes the fit singular at zero gap and negative for gaps below about
    58 °C; callers that operate near ambient must guard the gap themselves.

    Parameters
    ----------
    t_fluid, t_ambient : float or ndarray
        Fluid and ambient temperatures [°C]; requires t_fluid > t_ambient.

    Returns
    -------
    float or ndarray
        Loss coefficient [W/(m²·°C)].
    """
    gap = np.asarray(t_fluid, dtype=float) - np.asarray(t_ambient, dtype=float)
    if np.any(gap <= 0.0):
        raise SingularityError(
            "thermal_loss_coeff requires t_fluid > t_ambient "
            f"(min gap {np.min(gap)} °C divides the reciprocal term)"
        )
    c0, c1, c2, c3 = THERMAL_LOSS_COEFFS
    out = c3 * gap**3 + c2 * gap**2 + c1 * gap + c0 + THERMAL_LOSS_RECIPROCAL / gap
    return out if out.ndim else float(out)


def convective_coeff(flow, temperature):
    """Tube-side convective heat-transfer coefficient.

    Parameters
    ----------
    flow : float or ndarray
        Volumetric flow rate [m³/h], >= 0.
    temperature : float or ndarray
        Fluid temperature [°C], within [0, 450].

    Returns
    -------
    float or ndarray
        Convective coefficient [W/(m²·°C)]; scales as flow^0.8.
    """
    q = np.asarray(flow, dtype=float)
    if np.any(q < 0.0):
        raise DomainError(f"flow must be >= 0, got {np.min(q)}")
    check_in_range("temperature", temperature, *TEMPERATURE_RANGE)
    t = np.asarray(temperature, dtype=float)
    a0, a1, a2, a3, a4 = CONVECTIVE_COEFFS
    poly = a0 + a1 * t + a2 * t**2 + a3 * t**3 + a4 * t**4
    out = (q / CONVECTIVE_FLOW_DIVISOR) ** CONVECTIVE_FLOW_EXPONENT * poly
    return out if out.ndim else float(out)


def geometric_efficiency(latitude, declination, hour_angle):
    """Cosine-type efficiency coupling sun position and a N-S tracking trough.

    Parameters
    ----------
    latitude : float
        Site latitude [deg], within [-90, 90].
    declination : float
        Solar declination [deg].
    hour_angle : float
        Hour angle [deg], 0 at solar noon; the result is even in this angle.

    Returns
    -------
    float
        Efficiency, clamped into [0, 1] (the raw closed form can exceed 1
        away from noon).
    """
    check_in_range("latitude", latitude, -90.0, 90.0)
    lat = np.radians(latitude)
    dec = np.radians(declination)
    ha = np.radians(hour_angle)
    raw = (
        np.sin(lat) * np.sin(dec)
        + np.cos(dec) ** 2 * np.sin(ha) ** 2
        + np.cos(lat) * np.cos(dec) * np.cos(ha)
    )
    return float(np.clip(np.sqrt(raw * raw), 0.0, 1.0))


def solar_angles(day_of_year, solar_hour):
    """Solar declination (Cooper's formula) and hour angle.

    Parameters
    ----------
    day_of_year : int
        Day number, 1..366.
    solar_hour : float
        Solar time in hours, [0, 24).

    Returns
    -------
    (float, float)
        Declination and hour angle [deg]; hour angle is 15°/h from noon.
    """
    if not 1 <= day_of_year <= 366:
        raise DomainError(f"day_of_year must be in [1, 366], got {day_of_year}")
    if not 0.0 <= solar_hour < 24.0:
        raise DomainError(f"solar_hour must be in [0, 24), got {solar_hour}")
    declination = 23.45 * np.sin(np.radians(360.0 * (284 + day_of_year) / 365.0))
    hour_angle = 15.0 * (solar_hour - 12.0)
    return float(declination), float(hour_angle)


def sun_efficiency(latitude, day_of_year, solar_hour):
    """Geometric efficiency at a site and time (composes the two ops above)."""
    declination, hour_angle = solar_angles(day_of_year, solar_hour)
    return geometric_efficiency(latitude, declination, hour_angle)


@dataclass(frozen=True)
class FluidSample:
    """Fluid state at one temperature: density and heat capacity bundle."""

    temperature: float  # °C
    density: float  # kg/m³
    heat_capacity: float  # J/(kg·°C)


def fluid_sample(temperature):
    """Evaluate both property fits at one temperature."""
    return FluidSample(
        temperature=float(temperature),
        density=fluid_density(temperature),
        heat_capacity=fluid_heat_capacity(temperature),
    )


@dataclass(frozen=True)
class SolarGeometry:
    """Sun position angles and the resulting geometric efficiency."""

    latitude: float  # deg
    declination: float  # deg
    hour_angle: float  # deg
    geometric_efficiency: float  # dimensionless, [0, 1]


def solar_geometry(latitude, day_of_year, solar_hour):
    """Sun angles and geometric efficiency for a site at a solar time."""
    declination, hour_angle = solar_angles(day_of_year, solar_hour)
    return SolarGeometry(
        latitude=float(latitude),
        declination=declination,
        hour_angle=hour_angle,
        geometric_efficiency=geometric_efficiency(latitude, declination, hour_angle),
    )
