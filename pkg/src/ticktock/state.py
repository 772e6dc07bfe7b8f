"""
Sparse pure states over lattice sites and internal qubit registers.

A basis label is a tuple of sites (one per particle slot) together with a
tuple of register levels. Amplitudes live in an immutable mapping whose
iteration order is the canonical label order, so everything downstream is
deterministic.

Identical-particle states (Fermi/Bose) store one canonically sorted
representative per Fock configuration. Each particle's register travels with
it, so a representative is the sorted tuple of ``(site, level)`` pairs and the
stored amplitude is the amplitude of the normalized Fock state.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from types import MappingProxyType
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence, Union

import numpy as np

__all__ = [
    "E",
    "G",
    "Region",
    "SiteLabel",
    "BasisLabel",
    "Statistics",
    "PureState",
    "DensityMatrix",
    "Internal",
    "Spatial",
    "Sites",
    "INTERNAL",
    "SPATIAL",
    "TopologyError",
    "LayoutError",
    "SelectorError",
    "NumericError",
    "line",
    "ring",
    "basis_state",
    "from_amplitudes",
    "superpose",
    "inner_product",
    "bipartition",
    "partial_trace",
    "entanglement_entropy",
    "von_neumann_entropy",
    "shannon_entropy",
    "binary_entropy",
]

E = "e"
G = "g"
LEVELS = (E, G)

TOL = 1e-12


class TopologyError(ValueError):
    """A site label does not belong to the topology it is used with."""


class LayoutError(ValueError):
    """Particle counts, register layouts or statistics do not match."""


class SelectorError(ValueError):
    """A partial-trace selector is empty or keeps the whole system."""


class NumericError(ArithmeticError):
    """A matrix fails a numerical invariant (hermiticity, trace, positivity)."""


class Region(IntEnum):
    LINE = 0
    RING = 1


class SiteLabel(NamedTuple):
    region: Region
    index: int

    def __repr__(self) -> str:
        return f"{self.region.name.title()}({self.index})"


def line(x: int) -> SiteLabel:
    return SiteLabel(Region.LINE, int(x))


def ring(j: int) -> SiteLabel:
    return SiteLabel(Region.RING, int(j))


class BasisLabel(NamedTuple):
    sites: tuple[SiteLabel, ...]
    internal: tuple[str, ...]


class Statistics(Enum):
    DISTINGUISHABLE = "distinguishable"
    FERMI = "fermi"
    BOSE = "bose"

    @property
    def identical(self) -> bool:
        return self is not Statistics.DISTINGUISHABLE


@dataclass(frozen=True, eq=False)
class PureState:
    """Immutable sparse state vector.

    Parameters
    ----------
    amplitudes : mapping
        ``BasisLabel -> complex``. Stored sorted by label.
    n_particles : int
        Number of particle slots in every label.
    n_registers : int
        Number of internal qubit registers in every label. Register ``i`` is
        attached to particle slot ``i`` for ``i < n_particles``; any further
        registers are ancillas.
    statistics : Statistics
        Exchange statistics. Identical particles require one register per
        particle (or none) and canonical representatives.
    """

    amplitudes: Mapping[BasisLabel, complex]
    n_particles: int = 1
    n_registers: int = 1
    statistics: Statistics = Statistics.DISTINGUISHABLE
    _norm2: float = field(init=False, repr=False, compare=False, default=0.0)

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise LayoutError("n_particles must be >= 1")
        if self.statistics.identical and self.n_registers not in (0, self.n_particles):
            raise LayoutError("identical particles need one register per particle or none")
        items = sorted((k, complex(v)) for k, v in self.amplitudes.items())
        for k, _ in items:
            if len(k.sites) != self.n_particles or len(k.internal) != self.n_registers:
                raise LayoutError(f"label {k} does not match layout "
                                  f"({self.n_particles} particles, {self.n_registers} registers)")
        object.__setattr__(self, "amplitudes", MappingProxyType(dict(items)))
        object.__setattr__(self, "_norm2", math.fsum(abs(v) ** 2 for _, v in items))

    # mapping-ish conveniences
    def __len__(self) -> int:
        return len(self.amplitudes)

    def __iter__(self) -> Iterator[BasisLabel]:
        return iter(self.amplitudes)

    def items(self):
        return self.amplitudes.items()

    def amplitude(self, label: BasisLabel) -> complex:
        return self.amplitudes.get(label, 0j)

    @property
    def support(self) -> tuple[BasisLabel, ...]:
        return tuple(self.amplitudes)

    def norm_squared(self) -> float:
        return self._norm2

    def norm(self) -> float:
        return math.sqrt(self._norm2)

    def same_layout(self, other: "PureState") -> bool:
        return (self.n_particles == other.n_particles
                and self.n_registers == other.n_registers
                and self.statistics is other.statistics)

    def with_amplitudes(self, amplitudes: Mapping[BasisLabel, complex],
                        prune: float | None = None) -> "PureState":
        """New state with the same layout; exact zeros always dropped, |amp| < prune if given."""
        if prune is not None:
            amplitudes = {k: v for k, v in amplitudes.items() if abs(v) >= prune}
        else:
            amplitudes = {k: v for k, v in amplitudes.items() if v != 0}
        return PureState(amplitudes, self.n_particles, self.n_registers, self.statistics)

    def scaled(self, factor: complex) -> "PureState":
        return self.with_amplitudes({k: factor * v for k, v in self.items()})

    def probability(self, predicate: Callable[[BasisLabel], bool]) -> float:
        return math.fsum(abs(v) ** 2 for k, v in self.items() if predicate(k))

    def __repr__(self) -> str:
        terms = ", ".join(f"{k.sites}{k.internal}: {v:.6g}" for k, v in list(self.items())[:6])
        more = "" if len(self) <= 6 else f", ... (+{len(self) - 6})"
        return f"PureState({{{terms}{more}}})"


def _check_site(site: SiteLabel, ring_length: int | None) -> SiteLabel:
    site = SiteLabel(Region(site[0]), int(site[1]))
    if site.region is Region.RING:
        if ring_length is None:
            raise TopologyError(f"{site!r} used without a ring")
        if not 0 <= site.index < ring_length:
            raise TopologyError(f"ring index {site.index} outside 0..{ring_length - 1}")
    return site


def basis_state(sites: Sequence[SiteLabel], internal: Sequence[str] = (),
                ring_length: int | None = None,
                statistics: Statistics = Statistics.DISTINGUISHABLE) -> PureState:
    """Single basis vector with amplitude 1.

    For identical particles the ``(site, level)`` pairs are sorted into the
    canonical representative; for fermions repeated pairs raise ``LayoutError``.
    """
    sites = tuple(_check_site(s, ring_length) for s in sites)
    internal = tuple(internal)
    for lvl in internal:
        if lvl not in LEVELS:
            raise LayoutError(f"register level must be 'e' or 'g', got {lvl!r}")
    if statistics.identical:
        if internal:
            pairs = sorted(zip(sites, internal))
            if len(internal) != len(sites):
                raise LayoutError("identical particles need one register per particle")
            sites, internal = tuple(p[0] for p in pairs), tuple(p[1] for p in pairs)
            key = pairs
        else:
            sites = tuple(sorted(sites))
            key = list(sites)
        if statistics is Statistics.FERMI and len(set(key)) != len(key):
            raise LayoutError("Pauli exclusion: repeated fermion label")
    label = BasisLabel(sites, internal)
    return PureState({label: 1.0}, len(sites), len(internal), statistics)


def from_amplitudes(amplitudes: Mapping[BasisLabel, complex], like: PureState) -> PureState:
    return like.with_amplitudes(amplitudes)


def superpose(terms: Iterable[tuple[complex, PureState]]) -> PureState:
    """Linear combination ``sum c_i |psi_i>`` of states sharing one layout."""
    terms = list(terms)
    if not terms:
        raise ValueError("empty superposition")
    ref = terms[0][1]
    acc: dict[BasisLabel, complex] = defaultdict(complex)
    for c, psi in terms:
        if not psi.same_layout(ref):
            raise LayoutError("cannot superpose states with different layouts")
        for k, v in psi.items():
            acc[k] += c * v
    return ref.with_amplitudes(acc)


def inner_product(a: PureState, b: PureState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if not a.same_layout(b):
        raise LayoutError("inner product of states with different layouts")
    if len(a) > len(b):
        return sum((a.amplitude(k).conjugate() * v for k, v in b.items()), 0j)
    return sum((v.conjugate() * b.amplitude(k) for k, v in a.items()), 0j)


# --------------------------------------------------------------------------- #
#                              density matrices                               #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Small dense Hermitian matrix with unit trace over ``basis``."""

    basis: tuple
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.complex128)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "basis", tuple(self.basis))
        if m.shape != (len(self.basis), len(self.basis)):
            raise NumericError(f"matrix shape {m.shape} does not match basis of {len(self.basis)}")
        if m.size and np.max(np.abs(m - m.conj().T)) > TOL:
            raise NumericError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > 1e-10:
            raise NumericError(f"density matrix trace {np.trace(m).real!r} != 1")

    @classmethod
    def diagonal(cls, values: Sequence[float], basis: Sequence | None = None) -> "DensityMatrix":
        basis = tuple(basis) if basis is not None else tuple(range(len(values)))
        return cls(basis, np.diag(np.asarray(values, dtype=np.complex128)))

    @property
    def dim(self) -> int:
        return len(self.basis)

    def diag(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def entry(self, row, col) -> complex:
        return complex(self.matrix[self.basis.index(row), self.basis.index(col)])

    def population(self, key) -> float:
        """Diagonal entry for ``key``; 0 if the key is not in the basis."""
        try:
            i = self.basis.index(key)
        except ValueError:
            return 0.0
        return float(self.matrix[i, i].real)

    def eigenvalues(self) -> np.ndarray:
        return _hermitian_eigenvalues(self.matrix)

    def entropy(self) -> float:
        return von_neumann_entropy(self)


def _hermitian_eigenvalues(m: np.ndarray) -> np.ndarray:
    if m.shape == (1, 1):
        return np.array([m[0, 0].real])
    if m.shape == (2, 2):
        a, d = m[0, 0].real, m[1, 1].real
        b = abs(m[0, 1])
        mid, half = 0.5 * (a + d), math.hypot(0.5 * (a - d), b)
        return np.array([mid - half, mid + half])
    return np.linalg.eigvalsh(m)


def shannon_entropy(probabilities: Iterable[float]) -> float:
    """Entropy in bits with 0 log 0 = 0; inputs are clamped to [0, 1]."""
    total = 0.0
    for p in probabilities:
        p = min(max(float(p), 0.0), 1.0)
        if p > 0.0:
            total -= p * math.log2(p)
    return total


def binary_entropy(p: float) -> float:
    return shannon_entropy((p, 1.0 - p))


def von_neumann_entropy(rho: Union[DensityMatrix, np.ndarray]) -> float:
    """S(rho) = -sum lambda log2 lambda over the eigenvalues of rho."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NumericError("entropy needs a square matrix")
    if m.size and np.max(np.abs(m - m.conj().T)) > TOL:
        raise NumericError("entropy of a non-Hermitian matrix")
    lam = _hermitian_eigenvalues(m)
    if lam.size and lam.min() < -1e-10:
        raise NumericError(f"negative eigenvalue {lam.min():.3g}")
    return shannon_entropy(lam)


# --------------------------------------------------------------------------- #
#                          bipartitions and traces                            #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Internal:
    """Keep internal registers (all of them by default)."""

    registers: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Spatial:
    """Keep the spatial factor, trace out every register."""


@dataclass(frozen=True)
class Sites:
    """Keep the occupation of a set of sites (a region or an explicit set).

    With ``registers=True`` all internal registers go to the kept side as
    well. This is a mode bipartition: a particle outside the set contributes
    only to the discarded side.
    """

    members: Union[Region, frozenset]
    registers: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.members, Region):
            object.__setattr__(self, "members", frozenset(self.members))

    def __contains__(self, site: SiteLabel) -> bool:
        if isinstance(self.members, Region):
            return site.region is self.members
        return site in self.members

    def complement_of(self, site: SiteLabel) -> bool:
        return site not in self


INTERNAL = Internal()
SPATIAL = Spatial()

Selector = Union[Internal, Spatial, Sites]


def _splitter(state: PureState, keep: Selector):
    """Return ``(split, kept_basis)``; ``kept_basis`` is None when data-driven."""
    r = state.n_registers
    if isinstance(keep, Internal):
        regs = tuple(range(r)) if keep.registers is None else tuple(keep.registers)
        if not regs:
            raise SelectorError("no registers to keep")
        if any(not 0 <= i < r for i in regs):
            raise LayoutError(f"register index out of range 0..{r - 1}")
        rest = tuple(i for i in range(r) if i not in regs)

        def split(lab: BasisLabel):
            return (tuple(lab.internal[i] for i in regs),
                    (lab.sites, tuple(lab.internal[i] for i in rest)))

        return split, list(itertools.product(LEVELS, repeat=len(regs)))
    if isinstance(keep, Spatial):
        if r == 0:
            raise SelectorError("keeping the spatial factor of a register-free state keeps everything")
        return (lambda lab: (lab.sites, lab.internal)), None
    if isinstance(keep, Sites):
        if not isinstance(keep.members, Region) and not keep.members and not keep.registers:
            raise SelectorError("empty site selector")
        tagged = not state.statistics.identical

        def split(lab: BasisLabel):
            kept, disc = [], []
            for i, s in enumerate(lab.sites):
                entry = (i, s) if tagged else s
                if state.statistics.identical and r:
                    entry = (s, lab.internal[i])
                (kept if s in keep else disc).append(entry)
            regs = lab.internal if (tagged and r) else ()
            if keep.registers:
                return (tuple(kept), regs), tuple(disc)
            return tuple(kept), (tuple(disc), regs)

        return split, None
    raise TypeError(f"unknown selector {keep!r}")


def bipartition(state: PureState, keep: Selector):
    """Coefficient matrix C[kept, discarded] of ``state`` for a bipartition.

    Returns ``(kept_basis, discarded_basis, C)`` with both bases sorted.
    """
    split, kept_basis = _splitter(state, keep)
    pairs = [(split(k), v) for k, v in state.items()]
    if kept_basis is None:
        kept_basis = sorted({p[0][0] for p in pairs}, key=repr)
    disc_basis = sorted({p[0][1] for p in pairs}, key=repr)
    ki = {k: i for i, k in enumerate(kept_basis)}
    di = {d: i for i, d in enumerate(disc_basis)}
    c = np.zeros((len(kept_basis), len(disc_basis)), dtype=np.complex128)
    for (kk, dd), v in pairs:
        c[ki[kk], di[dd]] += v
    return kept_basis, disc_basis, c


def partial_trace(state: PureState, keep: Selector) -> DensityMatrix:
    """Reduced density matrix on the kept side of ``keep``."""
    kept, _, c = bipartition(state, keep)
    rho = c @ c.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(tuple(kept), rho)


def entanglement_entropy(state: PureState, keep: Selector) -> float:
    """Entropy across a bipartition, evaluated on the smaller side."""
    _, _, c = bipartition(state, keep)
    gram = c @ c.conj().T if c.shape[0] <= c.shape[1] else c.conj().T @ c
    return von_neumann_entropy(0.5 * (gram + gram.conj().T))
