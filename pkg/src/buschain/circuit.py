"""Five-mode chain model: Q1 - R1 - Qt - R2 - Q2.

Two fixed-frequency transmons (Q1, Q2) coupled through a sandwich of
half-wave resonator, frequency-tunable transmon bus, and second resonator.
All energies are in units of h (ordinary frequency, GHz); time is in ns,
so dynamical phases are 2*pi*nu*t.  The full Hamiltonian keeps the
counter-rotating coupling terms: each nearest-neighbour bond contributes
g * (a + a^dag)(b + b^dag).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s

# chain-site roles, in order
ANHARMONIC = "anharmonic"
HARMONIC = "harmonic"

SCALING_FIXED = "fixed"
SCALING_SQRT = "sqrt-frequency"
_SCALINGS = (SCALING_FIXED, SCALING_SQRT)

BUS_INDEX = 2  # position of the tunable bus in the chain
BONDS = ((0, 1), (1, 2), (2, 3), (3, 4))


@dataclass(frozen=True)
class ModeSpec:
    """One chain site: transmon-like (anharmonic) or resonator (harmonic).

    freq and anharm are nu = omega/2pi in GHz; levels is the truncation
    dimension of the local Hilbert space.
    """

    kind: str
    freq: float
    anharm: float
    levels: int

    def __post_init__(self):
        if self.kind not in (ANHARMONIC, HARMONIC):
            raise ValueError(f"unknown mode kind {self.kind!r}")
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if self.kind == ANHARMONIC and not self.anharm < 0:
            raise ValueError("anharmonic modes require anharm < 0 (transmon regime)")
        if self.kind == HARMONIC and self.anharm != 0.0:
            raise ValueError("harmonic modes require anharm == 0 exactly")


@dataclass(frozen=True)
class ChainConfig:
    """The ordered five-mode chain with one shared bond coupling strength.

    g_ref is the nearest-neighbour coupling in GHz, quoted at the reference
    frequency nu_ref; scaling selects how bond couplings depend on the
    instantaneous mode frequencies (see scaled_coupling).
    """

    modes: tuple[ModeSpec, ...]
    g_ref: float
    nu_ref: float = 6.0
    scaling: str = SCALING_SQRT

    def __post_init__(self):
        if len(self.modes) != 5:
            raise ValueError("chain requires exactly five modes")
        kinds = tuple(m.kind for m in self.modes)
        if kinds != (ANHARMONIC, HARMONIC, ANHARMONIC, HARMONIC, ANHARMONIC):
            raise ValueError("chain order must be qubit, resonator, bus, resonator, qubit")
        if self.g_ref < 0:
            raise ValueError("g_ref must be >= 0")
        if self.nu_ref <= 0:
            raise ValueError("nu_ref must be > 0")
        if self.scaling not in _SCALINGS:
            raise ValueError(f"scaling must be one of {_SCALINGS}")
        object.__setattr__(self, "modes", tuple(self.modes))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.levels for m in self.modes)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def frequencies(self, nu_bus: float | None = None) -> tuple[float, ...]:
        """Bare mode frequencies, optionally overriding the bus frequency."""
        freqs = [m.freq for m in self.modes]
        if nu_bus is not None:
            freqs[BUS_INDEX] = nu_bus
        return tuple(freqs)


def make_chain(freqs, anharm, g_ref, nu_ref=6.0, levels=3, scaling=SCALING_SQRT) -> ChainConfig:
    """Build the standard chain from five frequencies and a shared anharmonicity.

    freqs are (Q1, R1, Qt, R2, Q2) in GHz; anharm applies to the three
    anharmonic modes; levels is shared by all sites (int) or per-site
    (sequence of five).
    """
    freqs = tuple(float(f) for f in freqs)
    if len(freqs) != 5:
        raise ValueError("freqs must list five mode frequencies")
    if isinstance(levels, int):
        dims = (levels,) * 5
    else:
        dims = tuple(int(d) for d in levels)
        if len(dims) != 5:
            raise ValueError("levels must be an int or five ints")
    kinds = (ANHARMONIC, HARMONIC, ANHARMONIC, HARMONIC, ANHARMONIC)
    modes = tuple(
        ModeSpec(kind=k, freq=f, anharm=(float(anharm) if k == ANHARMONIC else 0.0), levels=d)
        for k, f, d in zip(kinds, freqs, dims)
    )
    return ChainConfig(modes=modes, g_ref=float(g_ref), nu_ref=float(nu_ref), scaling=scaling)


def lowering_operator(dim: int) -> np.ndarray:
    """Truncated boson lowering operator: (n, n+1) entry is sqrt(n+1)."""
    if dim < 2:
        raise ValueError("lowering operator needs dim >= 2")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def bare_level_energy(mode: ModeSpec, n: int) -> float:
    """Energy of uncoupled level n in GHz: nu*n + (anharm/2)*n*(n-1)."""
    if not 0 <= n < mode.levels:
        raise IndexError(f"level {n} outside 0..{mode.levels - 1}")
    return mode.freq * n + 0.5 * mode.anharm * n * (n - 1)


def scaled_coupling(g_ref: float, nu_a: float, nu_b: float, nu_ref: float, scaling: str) -> float:
    """Bond coupling at mode frequencies (nu_a, nu_b).

    fixed: g_ref regardless of frequency.  sqrt-frequency:
    g_ref * sqrt(nu_a * nu_b) / nu_ref, the standard capacitive-coupling
    frequency dependence, normalised to g_ref at nu_a = nu_b = nu_ref.
    """
    if nu_a <= 0 or nu_b <= 0 or nu_ref <= 0:
        raise ValueError("frequencies must be positive")
    if scaling == SCALING_FIXED:
        return g_ref
    if scaling == SCALING_SQRT:
        return g_ref * np.sqrt(nu_a * nu_b) / nu_ref
    raise ValueError(f"scaling must be one of {_SCALINGS}")


def _embed(op: np.ndarray, which: int, dims: tuple[int, ...]) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == which else np.eye(d))
    return out


@dataclass(frozen=True)
class OperatorSet:
    """Per-mode operators embedded in the full product space."""

    lowering: tuple[np.ndarray, ...]
    number: tuple[np.ndarray, ...]
    dims: tuple[int, ...]
    total_dim: int


@lru_cache(maxsize=8)
def operator_set(dims: tuple[int, ...]) -> OperatorSet:
    """Embedded lowering and number operators for each chain site."""
    lowering = tuple(_embed(lowering_operator(d), k, dims) for k, d in enumerate(dims))
    number = tuple(a.conj().T @ a for a in lowering)
    return OperatorSet(lowering=lowering, number=number, dims=tuple(dims),
                       total_dim=int(np.prod(dims)))


class HamiltonianFactory:
    """Precomputed pieces of H(nu_bus) for fast repeated evaluation.

    H(nu) = H_static + nu * N_bus + (bus-bond coupling terms), where only
    the bus frequency and, under sqrt-frequency scaling, the two bus bonds
    depend on nu.
    """

    def __init__(self, chain: ChainConfig):
        self.chain = chain
        ops = operator_set(chain.dims)
        x = [a + a.conj().T for a in ops.lowering]
        self._n_bus = ops.number[BUS_INDEX]

        h = np.zeros((ops.total_dim, ops.total_dim), dtype=complex)
        for k, mode in enumerate(chain.modes):
            if k == BUS_INDEX:
                # bus bare frequency enters through nu * N_bus; keep its Kerr term
                h += 0.5 * mode.anharm * (ops.number[k] @ ops.number[k] - ops.number[k])
                continue
            h += mode.freq * ops.number[k]
            h += 0.5 * mode.anharm * (ops.number[k] @ ops.number[k] - ops.number[k])

        freqs = chain.frequencies()
        bus_bond = np.zeros_like(h)
        for (i, j) in BONDS:
            xx = x[i] @ x[j]
            if BUS_INDEX in (i, j):
                other = j if i == BUS_INDEX else i
                if chain.scaling == SCALING_SQRT:
                    # g(nu) = sqrt(nu) * g_ref * sqrt(nu_other) / nu_ref
                    bus_bond += (chain.g_ref * np.sqrt(freqs[other]) / chain.nu_ref) * xx
                else:
                    h += chain.g_ref * xx
            else:
                g = scaled_coupling(chain.g_ref, freqs[i], freqs[j], chain.nu_ref, chain.scaling)
                h += g * xx
        self._static = h
        self._bus_bond = bus_bond  # multiplied by sqrt(nu_bus) under sqrt scaling

    def at(self, nu_bus: float) -> np.ndarray:
        if nu_bus <= 0:
            raise ValueError("nu_bus must be positive")
        h = self._static + nu_bus * self._n_bus
        if self.chain.scaling == SCALING_SQRT:
            h = h + np.sqrt(nu_bus) * self._bus_bond
        return h


@lru_cache(maxsize=32)
def _factory(chain: ChainConfig) -> HamiltonianFactory:
    return HamiltonianFactory(chain)


def hamiltonian_factory(chain: ChainConfig) -> HamiltonianFactory:
    """Cached factory; chains are frozen dataclasses so they hash by value."""
    return _factory(chain)


def build_hamiltonian(chain: ChainConfig, nu_bus: float) -> np.ndarray:
    """Full chain Hamiltonian at the given bus frequency, in h*GHz.

    Hermitian by construction; the bus ModeSpec frequency is overridden by
    nu_bus for this evaluation.
    """
    return hamiltonian_factory(chain).at(nu_bus)


def cpw_fundamental(length: float, eps_r: float) -> float:
    """Fundamental mode of a half-wave CPW resonator, in GHz.

    Uses the thin-film coplanar estimate eps_eff = (eps_r + 1)/2, so
    f1 = c / (2 * length * sqrt(eps_eff)).  For length 9 mm on silicon
    (eps_r = 11.45) this gives about 6.68 GHz; quoting such a resonator
    as "7 GHz" rounds the same design up by roughly 5 percent.
    """
    if length <= 0:
        raise ValueError("length must be positive")
    if eps_r < 1:
        raise ValueError("eps_r must be >= 1")
    eps_eff = 0.5 * (eps_r + 1.0)
    return SPEED_OF_LIGHT / (2.0 * length * np.sqrt(eps_eff)) / 1e9
