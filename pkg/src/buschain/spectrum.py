"""Dressed spectrum of the chain, state labelling, and the ZZ landscape.

Dressed eigenstates are labelled by the bare product state they connect to:
either by maximum squared overlap with the bare basis (one-to-one greedy
assignment) or, along a sweep, by overlap with the previous point's labelled
vectors, which implements adiabatic connection numerically.

The ZZ strength is the conditional frequency shift
zeta = (E11 - E10) - (E01 - E00) of the two qubits, with dressed labels
|n1 0 0 0 n2>.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq, minimize_scalar

from .blas import limit_blas_threads
from .circuit import ChainConfig, build_hamiltonian

Label = tuple[int, ...]

# computational labels in |Q1 R1 Qt R2 Q2> notation, ordered |00>,|01>,|10>,|11>
COMPUTATIONAL_LABELS: tuple[Label, ...] = (
    (0, 0, 0, 0, 0),
    (0, 0, 0, 0, 1),
    (1, 0, 0, 0, 0),
    (1, 0, 0, 0, 1),
)

AMBIGUITY_THRESHOLD = 0.5


class NoZeroCrossingError(RuntimeError):
    """The ZZ coupling has no zero (within tolerance) inside the bracket."""


@dataclass(frozen=True)
class DressedSpectrum:
    """Labelled eigendecomposition of one chain Hamiltonian.

    energies are ascending; vectors[:, i] belongs to energies[i].  label_of
    maps each bare occupation label to its eigenindex (injective), and
    overlap_of records the squared overlap achieved against the assignment
    reference (the bare basis, or the previous sweep point when tracking
    continuity).  Labels whose overlap fell below 0.5 are in ambiguous.
    """

    energies: np.ndarray
    vectors: np.ndarray
    dims: tuple[int, ...]
    label_of: dict[Label, int]
    overlap_of: dict[Label, float]
    ambiguous: frozenset[Label]

    def energy(self, label: Label) -> float:
        return float(self.energies[self.label_of[label]])

    def vector(self, label: Label) -> np.ndarray:
        return self.vectors[:, self.label_of[label]]


@dataclass(frozen=True)
class ZZPoint:
    """One point of the ZZ landscape."""

    nu_bus: float
    zeta: float
    g_ref: float
    ambiguous: bool


def _all_labels(dims: tuple[int, ...]) -> list[Label]:
    return [tuple(idx) for idx in np.ndindex(*dims)]


def _assign_labels(overlap: np.ndarray) -> np.ndarray:
    """One-to-one assignment label -> eigenindex, greedy on descending overlap.

    overlap[l, e] is the squared overlap of reference state l with
    eigenvector e; both indices run over the full space.
    """
    n = overlap.shape[0]
    order = np.argsort(overlap, axis=None)[::-1]
    assignment = np.full(n, -1, dtype=int)
    taken = np.zeros(n, dtype=bool)
    remaining = n
    for flat in order:
        lab, eig = divmod(int(flat), n)
        if assignment[lab] >= 0 or taken[eig]:
            continue
        assignment[lab] = eig
        taken[eig] = True
        remaining -= 1
        if remaining == 0:
            break
    return assignment


def dressed_spectrum(
    H: np.ndarray,
    dims: tuple[int, ...],
    previous: DressedSpectrum | None = None,
    hermiticity_tol: float = 1e-9,
) -> DressedSpectrum:
    """Diagonalise H and label every eigenstate by its bare parent.

    With previous supplied the overlap is taken against the previous point's
    labelled vectors instead of the bare basis, so labels follow their
    adiabatic branches along a sweep.
    """
    limit_blas_threads()
    dims = tuple(int(d) for d in dims)
    n = int(np.prod(dims))
    if H.shape != (n, n):
        raise ValueError(f"H has shape {H.shape}, dims imply {n}")
    scale = max(1.0, float(np.abs(H).max()))
    if float(np.abs(H - H.conj().T).max()) > hermiticity_tol * scale:
        raise ValueError("H is not Hermitian within tolerance")

    energies, vectors = sla.eigh(H, driver="evd")

    labels = _all_labels(dims)
    if previous is None:
        overlap = np.abs(vectors) ** 2  # reference = bare basis, row l is bare state l
    else:
        perm = np.array([previous.label_of[lab] for lab in labels])
        ref = previous.vectors[:, perm]
        overlap = np.abs(ref.conj().T @ vectors) ** 2

    assignment = _assign_labels(overlap)
    label_of = {lab: int(assignment[i]) for i, lab in enumerate(labels)}
    overlap_of = {lab: float(overlap[i, assignment[i]]) for i, lab in enumerate(labels)}
    ambiguous = frozenset(lab for lab, ov in overlap_of.items() if ov < AMBIGUITY_THRESHOLD)
    return DressedSpectrum(
        energies=energies,
        vectors=vectors,
        dims=dims,
        label_of=label_of,
        overlap_of=overlap_of,
        ambiguous=ambiguous,
    )


def _zz_from_spectrum(spec: DressedSpectrum) -> tuple[float, bool]:
    e00, e01, e10, e11 = (spec.energy(lab) for lab in COMPUTATIONAL_LABELS)
    zeta = (e11 - e10) - (e01 - e00)
    ambiguous = any(lab in spec.ambiguous for lab in COMPUTATIONAL_LABELS)
    return zeta, ambiguous


def zz_point(
    chain: ChainConfig,
    nu_bus: float,
    previous: DressedSpectrum | None = None,
    hermiticity_tol: float = 1e-9,
) -> tuple[ZZPoint, DressedSpectrum]:
    """ZZ strength at one bus frequency, returning the spectrum for reuse."""
    spec = dressed_spectrum(build_hamiltonian(chain, nu_bus), chain.dims, previous=previous,
                            hermiticity_tol=hermiticity_tol)
    zeta, ambiguous = _zz_from_spectrum(spec)
    return ZZPoint(nu_bus=float(nu_bus), zeta=zeta, g_ref=chain.g_ref, ambiguous=ambiguous), spec


def zz_coupling(chain: ChainConfig, nu_bus: float) -> ZZPoint:
    """Signed ZZ strength (E11 - E10) - (E01 - E00) in GHz at nu_bus."""
    point, _ = zz_point(chain, nu_bus)
    return point


def sweep_zz(chain: ChainConfig, grid, hermiticity_tol: float = 1e-9) -> list[ZZPoint]:
    """ZZ landscape over a bus-frequency grid with continuity tracking.

    The grid must be strictly increasing or strictly decreasing; labelling is
    seeded from the first grid point and tracked point to point, and output
    order matches grid order.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    if grid.size > 1:
        steps = np.diff(grid)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError("grid must be strictly increasing or decreasing")
    points: list[ZZPoint] = []
    spec: DressedSpectrum | None = None
    for nu in grid:
        point, spec = zz_point(chain, nu, previous=spec, hermiticity_tol=hermiticity_tol)
        points.append(point)
    return points


def find_idle_frequency(
    chain: ChainConfig,
    bracket: tuple[float, float],
    tol: float = 1e-5,
    scan_points: int = 33,
) -> float:
    """Bus frequency where the residual ZZ is switched off.

    Locates a sign change of zeta on a coarse scan and bisects it; if zeta
    does not change sign, falls back to a bounded minimisation of |zeta|.
    tol is on |zeta| in GHz (default 10 kHz).  Raises NoZeroCrossingError
    when g_ref is zero or no point with |zeta| <= tol exists in the bracket.
    """
    lo, hi = sorted(float(b) for b in bracket)
    if chain.g_ref == 0:
        raise NoZeroCrossingError("zeta vanishes identically at g_ref = 0")

    def f(nu: float) -> float:
        return zz_coupling(chain, nu).zeta

    grid = np.linspace(lo, hi, scan_points)
    vals = np.array([f(nu) for nu in grid])

    crossings = [i for i in range(len(grid) - 1) if vals[i] * vals[i + 1] < 0]
    if crossings:
        # prefer the crossing with the gentlest values, i.e. not a pole flank
        i = min(crossings, key=lambda k: min(abs(vals[k]), abs(vals[k + 1])))
        root = brentq(f, grid[i], grid[i + 1], xtol=1e-9)
        if abs(f(root)) <= tol:
            return float(root)

    res = minimize_scalar(lambda nu: abs(f(nu)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-7})
    if abs(res.fun) <= tol:
        return float(res.x)
    raise NoZeroCrossingError(
        f"no zeta zero within tolerance {tol} GHz in [{lo}, {hi}]; best |zeta| = {res.fun:.3e}"
    )
