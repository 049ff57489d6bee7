"""Experiment configuration: flat sectioned key = value text files.

Sections and keys mirror the device/pulse/noise/solver/sweep/output split
used by the command line tools; every command reads the same format and
ignores sections it does not need.  Validation collects every offending key
before failing so a bad file is reported in one pass.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

from .circuit import SCALING_FIXED, SCALING_SQRT, ChainConfig, make_chain
from .control import DEFAULT_FOURIER_COEFFS, SHAPE_FLATTOP, SHAPE_FOURIER


class ConfigError(ValueError):
    """Invalid experiment configuration; message lists every offending key."""


DEFAULT_CONFIG = """\
[device]
freqs_ghz = 5.0, 7.0, 5.65, 7.2, 5.2
anharm_ghz = -0.3
g_mhz = 130, 150, 170, 190
nu_ref_ghz = 6.0
dims = 3, 3, 3, 3, 3
scaling = sqrt-frequency

[pulse]
shape = fourier-adiabatic
ramp_frac = 0.3
idle_ghz = 5.65
gate_times_ns = 40, 50, 60, 70, 80, 90, 100, 110, 120

[noise]
q_factors = 1e3, 5e3, 1e4, 1e5, 1e6, inf

[solver]
dt_ns = 0.25
eig_tol = 1e-9

[sweep]
bus_min_ghz = 5.3
bus_max_ghz = 6.6
points = 400

[output]
path = buschain_out.csv
"""

_SECTION_KEYS = {
    "device": ("freqs_ghz", "anharm_ghz", "g_mhz", "nu_ref_ghz", "dims", "scaling"),
    "pulse": ("shape", "ramp_frac", "idle_ghz", "gate_times_ns"),
    "noise": ("q_factors",),
    "solver": ("dt_ns", "eig_tol"),
    "sweep": ("bus_min_ghz", "bus_max_ghz", "points"),
    "output": ("path",),
}
_OPTIONAL_KEYS = {"pulse": ("fourier_coeffs", "optimize")}


@dataclass
class ExperimentConfig:
    freqs: tuple[float, ...]
    anharm: float
    g_list_mhz: tuple[float, ...]
    nu_ref: float
    dims: tuple[int, ...]
    scaling: str
    shape: str
    ramp_frac: float
    idle: float
    gate_times: tuple[float, ...]
    q_factors: tuple[float, ...]
    dt: float
    eig_tol: float
    bus_min: float
    bus_max: float
    points: int
    out_path: str
    fourier_coeffs: tuple[float, ...] = DEFAULT_FOURIER_COEFFS
    optimize: bool = False

    def chain_for(self, g_mhz: float) -> ChainConfig:
        return make_chain(self.freqs, self.anharm, g_mhz / 1e3, nu_ref=self.nu_ref,
                          levels=self.dims, scaling=self.scaling)

    def grid_points(self) -> list[float]:
        import numpy as np

        return list(np.linspace(self.bus_min, self.bus_max, self.points))

    def echo_lines(self, version: str) -> list[str]:
        fmt = _format_value
        lines = [f"# buschain {version}"]
        sections = {
            "device": [("freqs_ghz", fmt(self.freqs)), ("anharm_ghz", fmt(self.anharm)),
                       ("g_mhz", fmt(self.g_list_mhz)), ("nu_ref_ghz", fmt(self.nu_ref)),
                       ("dims", fmt(self.dims)), ("scaling", self.scaling)],
            "pulse": [("shape", self.shape), ("ramp_frac", fmt(self.ramp_frac)),
                      ("idle_ghz", fmt(self.idle)), ("gate_times_ns", fmt(self.gate_times)),
                      ("fourier_coeffs", fmt(self.fourier_coeffs)),
                      ("optimize", "true" if self.optimize else "false")],
            "noise": [("q_factors", fmt(self.q_factors))],
            "solver": [("dt_ns", fmt(self.dt)), ("eig_tol", fmt(self.eig_tol))],
            "sweep": [("bus_min_ghz", fmt(self.bus_min)), ("bus_max_ghz", fmt(self.bus_max)),
                      ("points", str(self.points))],
            "output": [("path", self.out_path)],
        }
        for name, pairs in sections.items():
            lines.append(f"# [{name}]")
            lines.extend(f"# {key} = {value}" for key, value in pairs)
        return lines


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(","))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text, reporting all failures at once."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc

    problems: list[str] = []
    for section, keys in _SECTION_KEYS.items():
        if not parser.has_section(section):
            problems.append(f"missing section [{section}]")
            continue
        for key in keys:
            if not parser.has_option(section, key):
                problems.append(f"missing key {section}.{key}")
    if problems:
        raise ConfigError("; ".join(problems))

    def grab(section, key, conv, check=None, message=""):
        raw = parser.get(section, key)
        try:
            value = conv(raw)
        except ValueError:
            problems.append(f"{section}.{key}: cannot parse {raw!r}")
            return None
        if check is not None and not check(value):
            problems.append(f"{section}.{key}: {message} (got {raw!r})")
            return None
        return value

    freqs = grab("device", "freqs_ghz", _floats,
                 lambda v: len(v) == 5 and all(f > 0 for f in v),
                 "needs five positive frequencies")
    anharm = grab("device", "anharm_ghz", float, lambda v: v < 0,
                  "anharmonicity must be negative")
    g_list = grab("device", "g_mhz", _floats,
                  lambda v: len(v) >= 1 and all(g >= 0 for g in v),
                  "needs a nonempty list of couplings >= 0")
    nu_ref = grab("device", "nu_ref_ghz", float, lambda v: v > 0, "must be positive")
    dims = grab("device", "dims", _ints,
                lambda v: len(v) == 5 and all(d >= 3 for d in v),
                "needs five truncation dimensions >= 3")
    scaling = grab("device", "scaling", str,
                   lambda v: v in (SCALING_FIXED, SCALING_SQRT),
                   f"must be {SCALING_FIXED} or {SCALING_SQRT}")

    shape = grab("pulse", "shape", str,
                 lambda v: v in (SHAPE_FLATTOP, SHAPE_FOURIER),
                 f"must be {SHAPE_FLATTOP} or {SHAPE_FOURIER}")
    ramp_frac = grab("pulse", "ramp_frac", float, lambda v: 0.0 <= v <= 0.5,
                     "must lie in [0, 0.5]")
    idle = grab("pulse", "idle_ghz", float, lambda v: v > 0, "must be positive")
    gate_times = grab("pulse", "gate_times_ns", _floats,
                      lambda v: len(v) >= 1 and all(t > 0 for t in v),
                      "needs a nonempty list of positive gate times")

    q_factors = grab("noise", "q_factors", _floats,
                     lambda v: len(v) >= 1 and all(q > 0 for q in v),
                     "needs a nonempty list of positive quality factors")

    dt = grab("solver", "dt_ns", float, lambda v: v > 0, "must be positive")
    eig_tol = grab("solver", "eig_tol", float, lambda v: v > 0, "must be positive")

    bus_min = grab("sweep", "bus_min_ghz", float, lambda v: v > 0, "must be positive")
    bus_max = grab("sweep", "bus_max_ghz", float, lambda v: v > 0, "must be positive")
    points = grab("sweep", "points", int, lambda v: v >= 1, "must be >= 1")
    if bus_min is not None and bus_max is not None and bus_min >= bus_max:
        problems.append("sweep.bus_min_ghz must be below sweep.bus_max_ghz")

    out_path = parser.get("output", "path").strip()
    if not out_path:
        problems.append("output.path: must be nonempty")

    fourier_coeffs = DEFAULT_FOURIER_COEFFS
    if parser.has_option("pulse", "fourier_coeffs"):
        fourier_coeffs = grab("pulse", "fourier_coeffs", _floats,
                              lambda v: len(v) >= 1, "needs at least one coefficient")
    def _bool(raw: str) -> bool:
        low = raw.strip().lower()
        if low not in ("true", "false"):
            raise ValueError(raw)
        return low == "true"

    optimize = False
    if parser.has_option("pulse", "optimize"):
        optimize = grab("pulse", "optimize", _bool)

    if problems:
        raise ConfigError("; ".join(problems))

    return ExperimentConfig(
        freqs=freqs, anharm=anharm, g_list_mhz=g_list, nu_ref=nu_ref, dims=dims,
        scaling=scaling, shape=shape, ramp_frac=ramp_frac, idle=idle,
        gate_times=gate_times, q_factors=q_factors, dt=dt, eig_tol=eig_tol,
        bus_min=bus_min, bus_max=bus_max, points=points, out_path=out_path,
        fourier_coeffs=fourier_coeffs or DEFAULT_FOURIER_COEFFS, optimize=bool(optimize),
    )


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return parse_config(DEFAULT_CONFIG)
    with io.open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
