"""Scenario configuration, irradiance profiles, and deterministic RNG.

A scenario bundles a day's exogenous inputs (irradiance, ambient
temperature, total sector flow schedule), per-loop fault multipliers, the
plant model, the controller, and timing. Scenarios come from flat typed
key=value config files (with `include` support) or are built in code.

Profile CSVs carry the header time_s,dni_wm2,t_ambient_c with an optional
fourth n_o column when the geometric efficiency is precomputed. All random
draws (fault sampling, dataset shuffles, weight init) derive from the single
scenario seed through named substreams.
"""

import csv
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import physics, plant
from .errors import ConfigError, IngestionError

MAX_PROFILE_GAP_S = 300.0
PROFILE_HEADER = ("time_s", "dni_wm2", "t_ambient_c")

N_LOOPS_DEFAULT = 10


def substream(seed, name):
    """Deterministic named RNG substream of a scenario seed."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


@dataclass(frozen=True)
class Profile:
    """Validated day profile: strictly increasing times, non-negative DNI."""

    time_s: np.ndarray
    dni: np.ndarray
    t_ambient: np.ndarray
    n_o: np.ndarray | None = None  # optional precomputed geometric efficiency

    def __post_init__(self):
        object.__setattr__(self, "time_s", np.asarray(self.time_s, dtype=float))
        object.__setattr__(self, "dni", np.asarray(self.dni, dtype=float))
        object.__setattr__(self, "t_ambient", np.asarray(self.t_ambient, dtype=float))
        if self.n_o is not None:
            object.__setattr__(self, "n_o", np.asarray(self.n_o, dtype=float))

    @property
    def span(self):
        return float(self.time_s[0]), float(self.time_s[-1])

    def sample(self, t):
        """Piecewise-linear interpolation at time t [s]."""
        dni = float(np.interp(t, self.time_s, self.dni))
        t_a = float(np.interp(t, self.time_s, self.t_ambient))
        n_o = (
            float(np.interp(t, self.time_s, self.n_o))
            if self.n_o is not None
            else None
        )
        return dni, t_a, n_o


def _validate_profile(time_s, dni, t_ambient, n_o, source="profile"):
    time_s = np.asarray(time_s, dtype=float)
    if time_s.size < 2:
        raise IngestionError(f"{source}: needs at least two samples")
    dt = np.diff(time_s)
    if np.any(dt <= 0):
        # dt[i] spans samples i..i+1; the offender i+1 sits on file line i+3
        bad = int(np.argmax(dt <= 0))
        raise IngestionError(
            f"{source}: non-increasing time at line {bad + 3} "
            f"(t={time_s[bad + 1]:g} follows {time_s[bad]:g})"
        )
    if np.any(dt > MAX_PROFILE_GAP_S):
        bad = int(np.argmax(dt > MAX_PROFILE_GAP_S))
        raise IngestionError(
            f"{source}: gap of {np.max(dt):g} s exceeds {MAX_PROFILE_GAP_S:g} s "
            f"at line {bad + 3}"
        )
    if np.any(np.asarray(dni, dtype=float) < 0):
        raise IngestionError(f"{source}: negative irradiance")
    return Profile(time_s=time_s, dni=dni, t_ambient=t_ambient, n_o=n_o)


def load_profile(path):
    """Read and validate a profile CSV (see module docstring for columns)."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"profile file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header[:3] != list(PROFILE_HEADER):
            raise IngestionError(
                f"{path}: header must start with {','.join(PROFILE_HEADER)}, "
                f"got {','.join(header[:3])}"
            )
        has_no = len(header) >= 4 and header[3] == "n_o"
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row[: 4 if has_no else 3]]
            except ValueError as exc:
                raise IngestionError(f"{path}:{lineno}: {exc}") from None
            rows.append(values)
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    n_o = data[:, 3] if has_no else None
    return _validate_profile(data[:, 0], data[:, 1], data[:, 2], n_o, source=str(path))


def save_profile(profile, path):
    """Write a profile CSV; load_profile(save_profile(p)) round-trips bit-exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(PROFILE_HEADER) + (["n_o"] if profile.n_o is not None else [])
        writer.writerow(header)
        for i in range(profile.time_s.size):
            row = [
                repr(float(profile.time_s[i])),
                repr(float(profile.dni[i])),
                repr(float(profile.t_ambient[i])),
            ]
            if profile.n_o is not None:
                row.append(repr(float(profile.n_o[i])))
            writer.writerow(row)
    return path


def clear_sky_profile(
    start_hour=7.0,
    end_hour=19.0,
    peak_dni=950.0,
    ambient_base=22.0,
    ambient_swing=8.0,
    sample_s=30.0,
    cloud_events=(),
):
    """Synthetic day: sine-bump DNI plus square-well cloud events.

    cloud_events is a sequence of (start_hour, duration_hours, depth) with
    depth in [0, 1]; depth 1 removes all direct irradiance during the event.
    """
    times = np.arange(start_hour * 3600.0, end_hour * 3600.0 + 0.5 * sample_s, sample_s)
    x = (times - start_hour * 3600.0) / ((end_hour - start_hour) * 3600.0)
    dni = peak_dni * np.maximum(0.0, np.sin(np.pi * x))
    for start, duration, depth in cloud_events:
        inside = (times >= start * 3600.0) & (times < (start + duration) * 3600.0)
        dni[inside] *= 1.0 - min(max(depth, 0.0), 1.0)
    t_ambient = ambient_base + ambient_swing * np.maximum(0.0, np.sin(np.pi * x))
    return Profile(time_s=times, dni=dni, t_ambient=t_ambient)


def random_cloud_events(rng, n_events, start_hour=7.0, end_hour=19.0):
    """Draw cloud events inside the day span from an RNG substream."""
    events = []
    for _ in range(n_events):
        start = rng.uniform(start_hour + 1.0, end_hour - 2.0)
        duration = rng.uniform(0.1, 1.0)
        depth = rng.uniform(0.4, 1.0)
        events.append((float(start), float(duration), float(depth)))
    return events


def campaign_profiles(n_profiles, seed, start_hour=8.0, end_hour=18.0,
                      sample_s=30.0):
    """Synthetic training campaign: cycles sunny / partly cloudy / cloudy days.

    Peak irradiance, ambient conditions, and cloud patterns vary per profile
    through a named substream of the seed, so a campaign is reproducible.
    """
    rng = substream(seed, "campaign-profiles")
    profiles = []
    for k in range(n_profiles):
        weather = ("sunny", "partly", "cloudy")[k % 3]
        n_events = {"sunny": 0, "partly": rng.integers(1, 4), "cloudy": rng.integers(4, 8)}[
            weather
        ]
        events = random_cloud_events(rng, int(n_events), start_hour, end_hour)
        profiles.append(
            clear_sky_profile(
                start_hour=start_hour,
                end_hour=end_hour,
                peak_dni=float(rng.uniform(800.0, 1000.0)),
                ambient_base=float(rng.uniform(15.0, 30.0)),
                ambient_swing=float(rng.uniform(4.0, 10.0)),
                sample_s=sample_s,
                cloud_events=events,
            )
        )
    return profiles


@dataclass(frozen=True)
class FlowSchedule:
    """Total sector flow Q(t) [m³/h]: constant, irradiance tracking, or table.

    tracking mode: Q = max(minimum, peak · I_eff/reference) — the stand-in
    for the external sector controller, which is out of scope.
    """

    mode: str = "tracking"
    total: float = 300.0  # constant mode [m³/h]
    peak: float = 380.0  # tracking mode [m³/h]
    reference_irradiance: float = 900.0  # tracking mode [W/m²]
    minimum: float = 60.0  # tracking mode floor [m³/h]
    table: tuple = ()  # schedule mode: ((time_s, q), ...)

    def at(self, t, irradiance_effective):
        if self.mode == "constant":
            return self.total
        if self.mode == "tracking":
            return max(
                self.minimum,
                self.peak * irradiance_effective / self.reference_irradiance,
            )
        if self.mode == "schedule":
            if not self.table:
                raise ConfigError("schedule flow mode requires a table")
            pts = np.asarray(self.table, dtype=float)
            return float(np.interp(t, pts[:, 0], pts[:, 1]))
        raise ConfigError(f"unknown flow mode {self.mode!r}")


@dataclass(frozen=True)
class Scenario:
    """One day-long closed-loop simulation setup."""

    profile: Profile
    latitude: float = 37.0
    day_of_year: int = 172
    inlet_temperature: float = 293.0  # °C, shared sector inlet
    n_loops: int = N_LOOPS_DEFAULT
    alpha_kopt: tuple = (1.0,) * N_LOOPS_DEFAULT
    alpha_hl: tuple = (1.0,) * N_LOOPS_DEFAULT
    optical_efficiency: float = 0.73
    model: str = "static"  # static | lumped | distributed
    controller: str = "none"  # none | auction | ann
    ann_model_path: str | None = None
    flow: FlowSchedule = field(default_factory=FlowSchedule)
    t_s1: float = 30.0  # s, flow-split period
    t_s2: float = 180.0  # s, controller period
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        if self.model not in ("static", "lumped", "distributed"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.controller not in ("none", "auction", "ann"):
            raise ConfigError(f"unknown controller {self.controller!r}")
        if self.controller == "auction" and self.model == "distributed":
            raise ConfigError(
                "the auction controller is only supported on the static and "
                "lumped models; use the ann controller for the distributed model"
            )
        if self.controller == "ann" and not self.ann_model_path:
            raise ConfigError("controller 'ann' requires ann_model_path")
        if len(self.alpha_kopt) != self.n_loops or len(self.alpha_hl) != self.n_loops:
            raise ConfigError("fault arrays must have one entry per loop")
        ratio = self.t_s2 / self.t_s1
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("t_s2 must be an integer multiple of t_s1")

    def loop_params(self):
        return [
            plant.LoopParams(
                optical_efficiency=self.optical_efficiency,
                alpha_kopt=self.alpha_kopt[i],
                alpha_hl=self.alpha_hl[i],
            )
            for i in range(self.n_loops)
        ]

    def geometric_efficiency(self, t):
        """n_o at simulation time t [s], from the profile column if present."""
        dni, t_a, n_o = self.profile.sample(t)
        if n_o is None:
            hour = (t / 3600.0) % 24.0
            n_o = physics.sun_efficiency(self.latitude, self.day_of_year, hour)
        return dni, t_a, n_o

    def inputs_fingerprint(self, include_model=True):
        """Hash of everything that defines comparable runs (not the controller)."""
        h = hashlib.sha256()
        for arr in (self.profile.time_s, self.profile.dni, self.profile.t_ambient):
            h.update(arr.tobytes())
        if self.profile.n_o is not None:
            h.update(self.profile.n_o.tobytes())
        parts = [
            self.latitude,
            self.day_of_year,
            self.inlet_temperature,
            self.n_loops,
            tuple(self.alpha_kopt),
            tuple(self.alpha_hl),
            self.optical_efficiency,
            self.flow,
            self.t_s1,
            self.t_s2,
            self.seed,
        ]
        if include_model:
            parts.append(self.model)
        h.update(repr(parts).encode())
        return h.hexdigest()[:16]


def sample_faults(rng, n_loops, kopt_range=(0.85, 1.0), hl_range=(0.0, 1.0)):
    """Random per-loop fault multipliers (uniform in the given ranges)."""
    return (
        tuple(float(x) for x in rng.uniform(*kopt_range, size=n_loops)),
        tuple(float(x) for x in rng.uniform(*hl_range, size=n_loops)),
    )


# --- flat typed key=value config files ------------------------------------

_SCALARS = {
    "latitude": float,
    "day_of_year": int,
    "inlet_temperature": float,
    "n_loops": int,
    "optical_efficiency": float,
    "model": str,
    "controller": str,
    "ann_model": str,
    "profile": str,
    "t_s1": float,
    "t_s2": float,
    "seed": int,
    "name": str,
    "flow_mode": str,
    "flow_total": float,
    "flow_peak": float,
    "flow_reference_irradiance": float,
    "flow_min": float,
    "synthetic_start_hour": float,
    "synthetic_end_hour": float,
    "synthetic_peak_dni": float,
    "synthetic_ambient_base": float,
    "synthetic_ambient_swing": float,
    "synthetic_sample_s": float,
    "synthetic_cloud_events": int,
    "alpha_kopt": str,
    "alpha_hl": str,
}


def _read_config_lines(path, seen=None):
    path = Path(path)
    seen = seen or set()
    if path.resolve() in seen:
        raise ConfigError(f"config include cycle at {path}")
    seen.add(path.resolve())
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    items = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("include "):
            included = _read_config_lines(
                (path.parent / line[len("include "):].strip()), seen
            )
            items.update(included)
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCALARS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            items[key] = _SCALARS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return items


def _parse_fault_list(text, n_loops, rng, kind):
    text = text.strip()
    if text == "random":
        ranges = {"alpha_kopt": (0.85, 1.0), "alpha_hl": (0.0, 1.0)}[kind]
        return tuple(float(x) for x in rng.uniform(*ranges, size=n_loops))
    values = tuple(float(v) for v in text.split(","))
    if len(values) == 1:
        values = values * n_loops
    if len(values) != n_loops:
        raise ConfigError(f"{kind} needs 1 or {n_loops} comma-separated values")
    return values


def scenario_from_config(path):
    """Build a Scenario from a flat key=value config file."""
    items = _read_config_lines(path)
    base = Path(path).parent
    seed = items.get("seed", 0)
    n_loops = items.get("n_loops", N_LOOPS_DEFAULT)

    profile_spec = items.get("profile", "synthetic")
    if profile_spec == "synthetic":
        events = ()
        n_events = items.get("synthetic_cloud_events", 0)
        start_hour = items.get("synthetic_start_hour", 7.0)
        end_hour = items.get("synthetic_end_hour", 19.0)
        if n_events:
            events = random_cloud_events(
                substream(seed, "clouds"), n_events, start_hour, end_hour
            )
        profile = clear_sky_profile(
            start_hour=start_hour,
            end_hour=end_hour,
            peak_dni=items.get("synthetic_peak_dni", 950.0),
            ambient_base=items.get("synthetic_ambient_base", 22.0),
            ambient_swing=items.get("synthetic_ambient_swing", 8.0),
            sample_s=items.get("synthetic_sample_s", 30.0),
            cloud_events=events,
        )
    else:
        profile_path = Path(profile_spec)
        if not profile_path.is_absolute():
            profile_path = base / profile_path
        profile = load_profile(profile_path)

    fault_rng = substream(seed, "faults")
    alpha_kopt = _parse_fault_list(
        items.get("alpha_kopt", "1.0"), n_loops, fault_rng, "alpha_kopt"
    )
    alpha_hl = _parse_fault_list(
        items.get("alpha_hl", "1.0"), n_loops, fault_rng, "alpha_hl"
    )

    flow = FlowSchedule(
        mode=items.get("flow_mode", "tracking"),
        total=items.get("flow_total", 300.0),
        peak=items.get("flow_peak", 380.0),
        reference_irradiance=items.get("flow_reference_irradiance", 900.0),
        minimum=items.get("flow_min", 60.0),
    )

    ann_model = items.get("ann_model")
    if ann_model and not Path(ann_model).is_absolute():
        ann_model = str(base / ann_model)

    return Scenario(
        profile=profile,
        latitude=items.get("latitude", 37.0),
        day_of_year=items.get("day_of_year", 172),
        inlet_temperature=items.get("inlet_temperature", 293.0),
        n_loops=n_loops,
        alpha_kopt=alpha_kopt,
        alpha_hl=alpha_hl,
        optical_efficiency=items.get("optical_efficiency", 0.73),
        model=items.get("model", "static"),
        controller=items.get("controller", "none"),
        ann_model_path=ann_model,
        flow=flow,
        t_s1=items.get("t_s1", 30.0),
        t_s2=items.get("t_s2", 180.0),
        seed=seed,
        name=items.get("name", Path(path).stem),
    )


def with_controller(scenario, controller, ann_model_path=None, model=None):
    """Clone a scenario with a different controller (for comparisons)."""
    return replace(
        scenario,
        controller=controller,
        ann_model_path=ann_model_path
        if ann_model_path is not None
        else scenario.ann_model_path,
        model=model if model is not None else scenario.model,
    )
