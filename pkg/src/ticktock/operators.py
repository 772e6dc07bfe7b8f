"""
Unit-time unitaries as ordered gate lists.

A `StepOperator` is a tuple of gates applied left to right, so the evolver
``U = W V`` is written ``StepOperator((ShiftScatter(p), DetectorFlip(line(1))))``
(V acts first). Every gate acts on each particle slot (``U x U`` for two
particles); symmetry sectors are handled by the slot engine below.
"""

from __future__ import annotations

import cmath
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .state import (
    E,
    G,
    BasisLabel,
    LayoutError,
    PureState,
    Region,
    SiteLabel,
    Statistics,
    TopologyError,
    line,
)

__all__ = [
    "ScatterParams",
    "Gate",
    "ShiftScatter",
    "DetectorFlip",
    "StepOperator",
    "basic_evolver",
    "moved_evolver",
    "apply_shift_scatter",
    "apply_detector_flip",
    "step",
    "window_matrix",
    "check_unitarity",
    "map_slots",
    "map_labels",
]

# (slot, site, attached level or None) -> [(site, level, amplitude), ...]
SlotMap = Callable[[int, SiteLabel, "str | None"], Iterable[tuple[SiteLabel, "str | None", complex]]]


@dataclass(frozen=True)
class ScatterParams:
    """Scattering amplitudes with |alpha|^2 + |beta|^2 = 1."""

    alpha: complex
    beta: complex

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        s = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(s - 1.0) > 1e-12:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {s!r}, expected 1")

    @classmethod
    def from_q(cls, q: float, phase: float = 0.0) -> "ScatterParams":
        """alpha = sqrt(q) e^{i phase}, beta = sqrt(1 - q)."""
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {q!r}")
        return cls(math.sqrt(q) * cmath.exp(1j * phase), math.sqrt(1.0 - q))

    @classmethod
    def unchecked(cls, alpha: complex, beta: complex) -> "ScatterParams":
        """Build without the unitarity check (for exercising violation detection)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "alpha", complex(alpha))
        object.__setattr__(obj, "beta", complex(beta))
        return obj

    @property
    def q(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def matrix(self) -> np.ndarray:
        """Scattering block on sites (-1, 0), before the shift."""
        a, b = self.alpha, self.beta
        return np.array([[-b.conjugate(), a], [a.conjugate(), b]], dtype=np.complex128)


class Gate(Protocol):
    def apply(self, state: PureState) -> PureState: ...


# --------------------------------------------------------------------------- #
#                                slot engine                                  #
# --------------------------------------------------------------------------- #

def _distinct_orderings(parts: tuple, fermi: bool):
    """Distinct orderings of ``parts`` with their permutation signs."""
    n = len(parts)
    if n == 1:
        yield parts, 1
        return
    seen = set()
    for perm in itertools.permutations(range(n)):
        ordered = tuple(parts[i] for i in perm)
        if ordered in seen:
            continue
        seen.add(ordered)
        sign = 1
        if fermi:
            for i in range(n):
                for j in range(i + 1, n):
                    if perm[i] > perm[j]:
                        sign = -sign
        yield ordered, sign


def _multiplicity(parts: tuple) -> int:
    m = math.factorial(len(parts))
    for c in _counts(parts):
        m //= math.factorial(c)
    return m


def _counts(parts: tuple):
    out: dict = defaultdict(int)
    for p in parts:
        out[p] += 1
    return out.values()


def map_slots(state: PureState, fn: SlotMap, slots: Sequence[int] | None = None,
              prune: float | None = None) -> PureState:
    """Apply a single-particle operator to particle slots.

    ``fn(slot, site, level)`` returns the branches of one particle, where
    ``level`` is the register attached to that slot (None if the slot has
    none). Identical-particle states get the operator on every slot, with
    the result re-expressed on canonical representatives.
    """
    n = state.n_particles
    attached = state.n_registers >= n
    if state.statistics.identical:
        if slots is not None:
            raise LayoutError("slot subsets are meaningless for identical particles")
        return _map_identical(state, fn, attached, prune)
    active = set(range(n)) if slots is None else set(slots)
    if any(not 0 <= s < n for s in active):
        raise LayoutError(f"slot index out of range 0..{n - 1}")
    out: dict[BasisLabel, complex] = defaultdict(complex)
    for lab, amp in state.items():
        regs = list(lab.internal)
        branches = []
        for i, site in enumerate(lab.sites):
            lvl = regs[i] if attached else None
            if i in active:
                branches.append(tuple(fn(i, site, lvl)))
            else:
                branches.append(((site, lvl, 1.0),))
        if n == 1:
            for site, lvl, a in branches[0]:
                internal = ((lvl,) + lab.internal[1:]) if attached else lab.internal
                out[BasisLabel((site,), internal)] += amp * a
            continue
        for combo in itertools.product(*branches):
            a = amp
            new_regs = list(regs)
            for i, (_, lvl, c) in enumerate(combo):
                a *= c
                if attached:
                    new_regs[i] = lvl
            out[BasisLabel(tuple(c[0] for c in combo), tuple(new_regs))] += a
    return state.with_amplitudes(out, prune)


def _map_identical(state: PureState, fn: SlotMap, attached: bool,
                   prune: float | None) -> PureState:
    fermi = state.statistics is Statistics.FERMI
    out: dict[tuple, complex] = defaultdict(complex)
    for lab, amp in state.items():
        parts = tuple(zip(lab.sites, lab.internal)) if attached else tuple((s, "") for s in lab.sites)
        f = amp / math.sqrt(_multiplicity(parts))
        for ordered, sign in _distinct_orderings(parts, fermi):
            branches = [tuple(fn(i, s, l or None)) for i, (s, l) in enumerate(ordered)]
            for combo in itertools.product(*branches):
                new = tuple((c[0], c[1] or "") for c in combo)
                # keep only canonical outputs; the rest are fixed by symmetry
                if any(new[i] > new[i + 1] for i in range(len(new) - 1)):
                    continue
                if fermi and any(new[i] == new[i + 1] for i in range(len(new) - 1)):
                    continue
                a = f * sign
                for c in combo:
                    a *= c[2]
                out[new] += a
    amps = {}
    for new, a in out.items():
        sites = tuple(p[0] for p in new)
        internal = tuple(p[1] for p in new) if attached else ()
        amps[BasisLabel(sites, internal)] = a * math.sqrt(_multiplicity(new))
    return state.with_amplitudes(amps, prune)


def map_labels(state: PureState, fn: Callable[[BasisLabel], Iterable[tuple[BasisLabel, complex]]],
               prune: float | None = None) -> PureState:
    """Apply an operator given label-by-label (for gates that read several registers)."""
    out: dict[BasisLabel, complex] = defaultdict(complex)
    for lab, amp in state.items():
        for new, a in fn(lab):
            out[new] += amp * a
    return state.with_amplitudes(out, prune)


# --------------------------------------------------------------------------- #
#                                   gates                                     #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class ShiftScatter:
    """V0: right shift on the line with the scattering block at -1/0.

    ``slots`` restricts the gate to some particle slots of a distinguishable
    state (independent radiators with different parameters).
    """

    params: ScatterParams
    slots: tuple[int, ...] | None = None

    def branches(self, slot: int, site: SiteLabel, lvl):
        if site.region is not Region.LINE:
            raise TopologyError(f"shift-scatter acts on the line only, got {site!r}")
        x = site.index
        if x == 0:
            p = self.params
            return ((line(0), lvl, p.alpha), (line(1), lvl, p.beta))
        if x == -1:
            p = self.params
            return ((line(0), lvl, -p.beta.conjugate()), (line(1), lvl, p.alpha.conjugate()))
        return ((line(x + 1), lvl, 1.0),)

    def apply(self, state: PureState, prune: float | None = None) -> PureState:
        return map_slots(state, self.branches, self.slots, prune)


def _flip(level: str) -> str:
    return G if level == E else E


@dataclass(frozen=True)
class DetectorFlip:
    """Swap e <-> g on a register whenever a particle sits on ``site``.

    With ``register=None`` each particle flips its own attached register.
    With an explicit index, that register is flipped once per particle on
    ``site`` (the single-particle case is the usual controlled-X).
    """

    site: SiteLabel
    register: int | None = None

    def apply(self, state: PureState, prune: float | None = None) -> PureState:
        if self.register is None:
            if state.n_registers < state.n_particles:
                raise LayoutError("slot-attached detector needs one register per particle")
            target = self.site

            def fn(slot, site, lvl):
                return ((site, _flip(lvl) if site == target else lvl, 1.0),)

            return map_slots(state, fn, prune=prune)
        r = self.register
        if not 0 <= r < state.n_registers:
            raise LayoutError(f"register {r} out of range for {state.n_registers} registers")
        if state.statistics.identical:
            raise LayoutError("explicit-register detectors need distinguishable slots")

        def relabel(lab: BasisLabel):
            hits = sum(1 for s in lab.sites if s == self.site)
            if hits % 2 == 0:
                return ((lab, 1.0),)
            regs = list(lab.internal)
            regs[r] = _flip(regs[r])
            return ((BasisLabel(lab.sites, tuple(regs)), 1.0),)

        return map_labels(state, relabel, prune)


@dataclass(frozen=True)
class StepOperator:
    """One unit step: ``gates`` applied in listed order."""

    gates: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))

    def apply(self, state: PureState, prune: float | None = None) -> PureState:
        for g in self.gates:
            state = g.apply(state, prune)
        return state


def basic_evolver(p: ScatterParams) -> StepOperator:
    """U = W V with the detector at site 1."""
    return StepOperator((ShiftScatter(p), DetectorFlip(line(1))))


def moved_evolver(p: ScatterParams) -> StepOperator:
    """U~ = W~ V with the detector moved to site 0."""
    return StepOperator((ShiftScatter(p), DetectorFlip(line(0))))


def apply_shift_scatter(state: PureState, p: ScatterParams) -> PureState:
    return ShiftScatter(p).apply(state)


def apply_detector_flip(state: PureState, site: SiteLabel, register: int | None = None) -> PureState:
    return DetectorFlip(site, register).apply(state)


def step(state: PureState, op: StepOperator, prune: float | None = None) -> PureState:
    return op.apply(state, prune)


# --------------------------------------------------------------------------- #
#                           unitarity diagnostics                             #
# --------------------------------------------------------------------------- #

def _window_basis(window: Iterable[SiteLabel], n_registers: int):
    sites = [s if isinstance(s, SiteLabel) else line(s) for s in window]
    regs = list(itertools.product((E, G), repeat=n_registers))
    return [BasisLabel((s,), r) for s in sites for r in regs]


def window_matrix(op: StepOperator, window: Iterable[SiteLabel], n_registers: int = 0):
    """Dense matrix of ``op`` on one-particle basis states of a site window.

    Returns ``(column_labels, row_labels, M)`` with ``M[i, j] = <row_i| op |col_j>``.
    """
    cols = _window_basis(window, n_registers)
    images = [op.apply(PureState({c: 1.0}, 1, n_registers)) for c in cols]
    rows = sorted({k for img in images for k in img})
    ri = {r: i for i, r in enumerate(rows)}
    m = np.zeros((len(rows), len(cols)), dtype=np.complex128)
    for j, img in enumerate(images):
        for k, v in img.items():
            m[ri[k], j] = v
    return cols, rows, m


def check_unitarity(op: StepOperator, window: Iterable[SiteLabel], n_registers: int = 1) -> float:
    """Worst isometry violation of ``op`` over window basis states.

    Returns the larger of ``max_i | ||U e_i|| - 1 |`` and
    ``max_{i != j} |<U e_i, U e_j>|``.
    """
    _, _, m = window_matrix(op, window, n_registers)
    gram = m.conj().T @ m
    norms = np.sqrt(np.abs(np.diag(gram)))
    off = gram - np.diag(np.diag(gram))
    worst_norm = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
    worst_off = float(np.max(np.abs(off))) if off.size else 0.0
    return max(worst_norm, worst_off)
