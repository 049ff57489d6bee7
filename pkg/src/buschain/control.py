"""Bus-frequency control trajectories and CZ calibration.

A CZ gate is driven by excursing the bus frequency from its idle value down
to the avoided crossing between the doubly-excited computational state and
the bus two-photon level, where the conditional phase accumulates.  Two
trajectory families are provided:

* flattop: half-cosine ramps and a hold, directly in bus frequency;
* fourier-adiabatic: a truncated cosine series for the mixing angle of the
  conditional-phase anti-crossing, mapped back to bus frequency.  Sweeping
  the angle rather than the frequency makes the trajectory fast while far
  detuned and slow at the small gap, which is what suppresses leakage on
  sub-100 ns gates.

Calibration fixes the gate time and searches the trajectory extremum nu_op
for a conditional phase of pi.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .circuit import BUS_INDEX, ChainConfig, build_hamiltonian

SHAPE_FLATTOP = "flattop"
SHAPE_FOURIER = "fourier-adiabatic"

TWO_PI = 2.0 * np.pi

# default angle-series coefficients; the second harmonic at its critical
# value 0.25 flattens the dwell at the trajectory extremum
DEFAULT_FOURIER_COEFFS = (1.0, 0.25, 0.0)


class CalibrationInfeasibleError(RuntimeError):
    """The requested conditional phase is unreachable in the search bracket."""

    def __init__(self, message: str, max_phase: float):
        super().__init__(message)
        self.max_phase = max_phase


@dataclass(frozen=True)
class CrossingParams:
    """Two-level reduction of the conditional-phase avoided crossing.

    nu_center is the bus frequency of minimum gap, gap the full splitting
    there (GHz), and slope the rate at which the diabatic detuning opens per
    GHz of bus frequency.
    """

    nu_center: float
    gap: float
    slope: float

    def theta(self, nu) -> np.ndarray:
        """Mixing angle: 0 far above the crossing, pi/2 at it, pi far below."""
        return np.arctan2(self.gap, self.slope * (np.asarray(nu, dtype=float) - self.nu_center))

    def nu(self, theta) -> np.ndarray:
        return self.nu_center + (self.gap / self.slope) / np.tan(theta)


def two_photon_resonance(chain: ChainConfig) -> float:
    """Bare bus frequency where the bus two-photon level meets E(11).

    2*nu_t + anharm_t = nu_Q1 + nu_Q2; the conditional-phase avoided
    crossing sits near this frequency.
    """
    bus = chain.modes[BUS_INDEX]
    return 0.5 * (chain.modes[0].freq + chain.modes[4].freq - bus.anharm)


@lru_cache(maxsize=16)
def crossing_parameters(chain: ChainConfig, points: int = 29) -> CrossingParams:
    """Locate the conditional-phase anti-crossing from static spectra.

    Tracks the doubly-excited computational branch downward from the idle
    side and takes the first local minimum of its gap to the adjacent level;
    the gap and a one-sided detuning probe give the two-level parameters.
    """
    from .spectrum import dressed_spectrum

    label = (1, 0, 0, 0, 1)
    guess = two_photon_resonance(chain)
    window = np.linspace(guess + 0.05, guess - 0.02, points)

    def branch_gap(spec) -> float:
        idx = spec.label_of[label]
        e = spec.energies
        lower = abs(e[idx] - e[idx - 1]) if idx > 0 else np.inf
        upper = abs(e[idx + 1] - e[idx]) if idx + 1 < len(e) else np.inf
        return min(lower, upper)

    gaps = np.empty(points)
    prev = None
    for i, nu in enumerate(window):
        prev = dressed_spectrum(build_hamiltonian(chain, nu), chain.dims, previous=prev)
        gaps[i] = branch_gap(prev)

    interior = [i for i in range(1, points - 1) if gaps[i] <= gaps[i - 1] and gaps[i] <= gaps[i + 1]]
    if not interior:
        raise CalibrationInfeasibleError(
            "no avoided crossing found below the idle point", max_phase=0.0)
    i0 = interior[0]  # first minimum coming down from the idle side

    x0 = window[i0]
    xs = window[i0 - 1:i0 + 2] - x0
    ys = gaps[i0 - 1:i0 + 2] ** 2
    quad = np.polyfit(xs, ys, 2)
    nu_c = x0 - quad[1] / (2.0 * quad[0])
    gap = float(np.sqrt(max(np.polyval(quad, nu_c - x0), 0.0)))

    probe = 0.012
    spec = dressed_spectrum(build_hamiltonian(chain, nu_c + probe), chain.dims)
    wide = branch_gap(spec)
    slope = float(np.sqrt(max(wide ** 2 - gap ** 2, 0.0)) / probe)
    if gap <= 0.0 or slope <= 0.0:
        raise CalibrationInfeasibleError(
            f"degenerate crossing (gap {gap:.2e} GHz, slope {slope:.2e})", max_phase=0.0)
    return CrossingParams(nu_center=float(nu_c), gap=gap, slope=slope)


@dataclass
class CZPulse:
    """One bus-frequency trajectory.

    The excursion is nu_idle -> nu_op -> nu_idle with envelope(0) =
    envelope(1) = 0, so the pulse starts and ends at the idle frequency and
    never leaves the band between nu_idle and nu_op.  Flattop pulses apply
    the envelope to the frequency directly; fourier-adiabatic pulses apply
    it to the crossing mixing angle and carry the CrossingParams used for
    the mapping.
    """

    shape: str
    gate_time: float
    nu_idle: float
    nu_op: float
    ramp_frac: float = 0.3
    fourier_coeffs: tuple[float, ...] | None = None
    crossing: CrossingParams | None = None
    n_samples: int = 256
    samples: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.gate_time <= 0:
            raise ValueError("gate_time must be positive")
        if self.shape == SHAPE_FLATTOP:
            if not 0.0 <= self.ramp_frac <= 0.5:
                raise ValueError("ramp_frac must be in [0, 0.5]")
        elif self.shape == SHAPE_FOURIER:
            if not self.fourier_coeffs:
                raise ValueError("fourier-adiabatic pulse needs fourier_coeffs")
            if self.crossing is None:
                raise ValueError("fourier-adiabatic pulse needs CrossingParams")
            self.fourier_coeffs = tuple(float(c) for c in self.fourier_coeffs)
            probe = _fourier_envelope(np.linspace(0.0, 1.0, 1001), self.fourier_coeffs)
            if probe.min() < -1e-12:
                raise ValueError("fourier coefficients push the trajectory past nu_idle")
        else:
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if self.n_samples < 16:
            raise ValueError("n_samples must be >= 16")
        self.samples = self.frequencies(np.linspace(0.0, self.gate_time, self.n_samples))
        band = sorted((self.nu_idle, self.nu_op))
        if self.samples.min() < band[0] - 1e-9 or self.samples.max() > band[1] + 1e-9:
            raise ValueError("trajectory leaves the band between nu_idle and nu_op")

    def envelope(self, x) -> np.ndarray:
        """Dimensionless excursion e(tau/T) in [0, 1]."""
        x = np.asarray(x, dtype=float)
        if self.shape == SHAPE_FLATTOP:
            return _flattop_envelope(x, self.ramp_frac)
        return _fourier_envelope(x, self.fourier_coeffs)

    def frequencies(self, times) -> np.ndarray:
        """Bus frequency nu(tau) at the given times (ns)."""
        x = np.asarray(times, dtype=float) / self.gate_time
        e = self.envelope(x)
        if self.shape == SHAPE_FLATTOP:
            return self.nu_idle + (self.nu_op - self.nu_idle) * e
        th_i = self.crossing.theta(self.nu_idle)
        th_op = self.crossing.theta(self.nu_op)
        nu = self.crossing.nu(th_i + (th_op - th_i) * e)
        # pin the endpoints exactly to the idle frequency
        return np.where(e <= 0.0, self.nu_idle, nu)


def _flattop_envelope(x: np.ndarray, ramp_frac: float) -> np.ndarray:
    e = np.ones_like(x)
    outside = (x <= 0.0) | (x >= 1.0)
    if ramp_frac > 0:
        rise = (x > 0.0) & (x < ramp_frac)
        e[rise] = 0.5 * (1.0 - np.cos(np.pi * x[rise] / ramp_frac))
        fall = (x > 1.0 - ramp_frac) & (x < 1.0)
        e[fall] = 0.5 * (1.0 - np.cos(np.pi * (1.0 - x[fall]) / ramp_frac))
    e[outside] = 0.0
    return e


def _fourier_series(x: np.ndarray, coeffs: tuple[float, ...]) -> np.ndarray:
    s = np.zeros_like(x)
    for n, c in enumerate(coeffs, start=1):
        s = s + c * (1.0 - np.cos(TWO_PI * n * x))
    return s


def _fourier_envelope(x: np.ndarray, coeffs: tuple[float, ...]) -> np.ndarray:
    peak = _fourier_series(np.linspace(0.0, 1.0, 2001), coeffs).max()
    if peak <= 0:
        raise ValueError("fourier coefficients must give a positive excursion")
    s = _fourier_series(x, coeffs) / peak
    return np.where((x <= 0.0) | (x >= 1.0), 0.0, s)


def flattop_trajectory(gate_time: float, ramp_frac: float, nu_idle: float,
                       nu_op: float, n_samples: int = 256) -> CZPulse:
    """Flat-top pulse: half-cosine rise over ramp_frac*T, hold, mirror fall."""
    return CZPulse(shape=SHAPE_FLATTOP, gate_time=gate_time, nu_idle=nu_idle,
                   nu_op=nu_op, ramp_frac=ramp_frac, n_samples=n_samples)


def fourier_trajectory(gate_time: float, nu_idle: float, nu_op: float, coeffs,
                       crossing: CrossingParams, n_samples: int = 256) -> CZPulse:
    """Fast-adiabatic pulse: cosine-series sweep of the crossing angle."""
    return CZPulse(shape=SHAPE_FOURIER, gate_time=gate_time, nu_idle=nu_idle,
                   nu_op=nu_op, fourier_coeffs=tuple(coeffs), crossing=crossing,
                   n_samples=n_samples)


def _wrap_centered(phi: float) -> float:
    """Map an angle to (-pi, pi]."""
    return float(-((-phi + np.pi) % TWO_PI - np.pi))


def _unwrap_near(phi: float, reference: float) -> float:
    """Shift phi by multiples of 2*pi to land nearest the reference."""
    return phi + TWO_PI * np.round((reference - phi) / TWO_PI)


def _make_pulse(shape, gate_time, nu_idle, nu_op, ramp_frac, coeffs, crossing,
                n_samples) -> CZPulse:
    if shape == SHAPE_FLATTOP:
        return flattop_trajectory(gate_time, ramp_frac, nu_idle, nu_op, n_samples)
    return fourier_trajectory(gate_time, nu_idle, nu_op, coeffs, crossing, n_samples)


def _replace_nu_op(pulse: CZPulse, nu_op: float) -> CZPulse:
    return _make_pulse(pulse.shape, pulse.gate_time, pulse.nu_idle, nu_op,
                       pulse.ramp_frac, pulse.fourier_coeffs, pulse.crossing,
                       pulse.n_samples)


def _refine_at_fine_dt(chain: ChainConfig, pulse: CZPulse, nu_op: float,
                       phi_coarse: float, dt: float, phase_tol: float,
                       slope: float) -> CZPulse:
    """Re-solve |phi| = pi at the requested dt by secant steps from the coarse answer.

    slope is d(phi)/d(nu_op) estimated from the coarse bracket; the fine-dt
    phase offset is small and smooth, so a few Newton-like steps converge.
    """
    from .dynamics import computational_unitary, conditional_phase

    target = np.pi * np.sign(phi_coarse)

    def phi_at(nu: float) -> float:
        block = computational_unitary(chain, _replace_nu_op(pulse, nu), dt=dt)
        return _unwrap_near(conditional_phase(block), target)

    nu_prev, f_prev = nu_op, phi_at(nu_op) - target
    if abs(f_prev) < phase_tol:
        return _replace_nu_op(pulse, nu_prev)
    nu_cur = nu_prev - f_prev / slope
    for _ in range(10):
        f_cur = phi_at(nu_cur) - target
        if abs(f_cur) < phase_tol:
            return _replace_nu_op(pulse, nu_cur)
        denom = f_cur - f_prev
        if denom == 0.0:
            break
        nu_next = nu_cur - f_cur * (nu_cur - nu_prev) / denom
        nu_prev, f_prev, nu_cur = nu_cur, f_cur, nu_next
    raise CalibrationInfeasibleError(
        f"could not refine calibration at dt = {dt}", max_phase=float(abs(phi_coarse)))


def calibrate_cz(
    chain: ChainConfig,
    gate_time: float,
    nu_idle: float,
    shape: str = SHAPE_FLATTOP,
    ramp_frac: float = 0.3,
    fourier_coeffs=DEFAULT_FOURIER_COEFFS,
    nu_op_bracket: tuple[float, float] | None = None,
    dt: float = 0.25,
    phase_tol: float = 1e-3,
    optimize_coeffs: bool = False,
    scan_points: int = 16,
    n_samples: int = 256,
) -> CZPulse:
    """Calibrate the trajectory extremum for a conditional phase of pi.

    Marches nu_op downward from the idle side with adaptive steps (the phase
    steepens sharply approaching the anti-crossing), brackets the first
    crossing of |phi| = pi and bisects it; the conditional phase grows
    monotonically with excursion depth on that branch.  The search runs at a
    coarsened dt and the result is refined at the requested dt.  With
    optimize_coeffs=True (fourier-adiabatic shape only) the second and third
    harmonics of the angle sweep are tuned to minimise leakage plus phase
    error.  Raises CalibrationInfeasibleError when pi is not reached.
    """
    from .dynamics import (NotPhaseLikeError, computational_unitary, conditional_phase,
                           gate_error_from_block, subspace_leakage)

    crossing = crossing_parameters(chain) if shape == SHAPE_FOURIER else None
    if nu_op_bracket is None:
        # below the anti-crossing the phase-depth relation folds back; the
        # march stops at the first pi crossing, so a little margin is safe
        if shape == SHAPE_FLATTOP:
            nu_op_bracket = (two_photon_resonance(chain) - 0.005, nu_idle - 1e-3)
        else:
            nu_op_bracket = (crossing.nu_center - 0.025, nu_idle - 1e-3)
    lo, hi = sorted(nu_op_bracket)

    coeffs = tuple(fourier_coeffs) if shape == SHAPE_FOURIER else None
    coarse_dt = max(dt, 0.5)  # search cheaply, refine at the requested dt below

    def run(nu_op: float, use_coeffs) -> tuple[float, float, float]:
        pulse = _make_pulse(shape, gate_time, nu_idle, nu_op, ramp_frac,
                            use_coeffs, crossing, n_samples)
        block = computational_unitary(chain, pulse, dt=coarse_dt)
        phi = conditional_phase(block)
        return phi, subspace_leakage(block), gate_error_from_block(block)

    max_jump = 0.9  # rad per accepted march step, keeps the unwrap sound
    min_step = 2e-6

    def solve_nu(use_coeffs) -> tuple[float, float, float, float, float, float]:
        nu = hi
        phi, _, _ = run(nu, use_coeffs)
        phi = _wrap_centered(phi)
        max_abs = abs(phi)
        step = (hi - lo) / scan_points
        bracket = None
        while nu > lo + min_step:
            nu_next = max(lo, nu - step)
            try:
                phi_raw, _, _ = run(nu_next, use_coeffs)
            except NotPhaseLikeError:
                step *= 0.5
                if step < min_step:
                    break
                continue
            phi_next = _unwrap_near(phi_raw, phi)
            if abs(phi_next - phi) > max_jump:
                step *= 0.5
                if step < min_step:
                    break
                continue
            max_abs = max(max_abs, abs(phi_next))
            if abs(phi_next) >= np.pi:
                bracket = (nu, phi, nu_next, phi_next)
                break
            nu, phi = nu_next, phi_next
            step = min(step * 1.4, (hi - lo) / scan_points)
        if bracket is None:
            raise CalibrationInfeasibleError(
                f"conditional phase reaches only {max_abs:.4f} rad (target pi) "
                f"for T = {gate_time} ns in bracket [{lo}, {hi}]",
                max_phase=float(max_abs),
            )
        a, phi_a, b, phi_b = bracket
        slope = (phi_b - phi_a) / (b - a)
        target = np.pi * np.sign(phi_b)
        fa = phi_a - target
        ref = phi_a
        nu_m, phi_m, leak_m, err_m = b, phi_b, np.nan, np.nan
        for _ in range(48):
            nu_m = 0.5 * (a + b)
            phi_m, leak_m, err_m = run(nu_m, use_coeffs)
            phi_m = _unwrap_near(phi_m, ref)
            fm = phi_m - target
            if abs(fm) < phase_tol:
                break
            if fa * fm <= 0:
                b = nu_m
            else:
                a, fa, ref = nu_m, fm, phi_m
        return nu_m, phi_m, leak_m, err_m, float(max_abs), slope

    if shape == SHAPE_FOURIER and optimize_coeffs:
        base = list(coeffs) + [0.0] * (3 - len(coeffs))

        def objective(c23):
            c2, c3 = c23
            if not -0.05 <= c2 <= 0.25 or abs(c3) > 0.12:
                return 1.0
            try:
                _, phi, leak, _, _, _ = solve_nu((base[0], c2, c3))
            except (CalibrationInfeasibleError, ValueError):
                return 1.0
            return leak + (abs(phi) - np.pi) ** 2

        res = minimize(objective, x0=[base[1], base[2]], method="Nelder-Mead",
                       options=dict(maxfev=40, xatol=5e-3, fatol=2e-4))
        coeffs = (base[0], float(res.x[0]), float(res.x[1]))

    nu_op, phi, leak, err, _, slope = solve_nu(coeffs)
    if abs(abs(phi) - np.pi) >= phase_tol:
        raise CalibrationInfeasibleError(
            f"bisection stalled at phi = {phi:.5f} rad for T = {gate_time} ns",
            max_phase=float(abs(phi)),
        )
    pulse = _make_pulse(shape, gate_time, nu_idle, nu_op, ramp_frac, coeffs,
                        crossing, n_samples)
    if dt < coarse_dt:
        pulse = _refine_at_fine_dt(chain, pulse, nu_op, phi, dt, phase_tol, slope)
    return pulse
