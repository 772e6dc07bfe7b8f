"""
Two-particle radiation under Fermi, Bose and distinguishable statistics,
fermionic blocks, and tensor products of independent radiators.

Identical-particle states are canonical representatives (see `ticktock.state`).
Each particle carries its own register. The internal reduced matrix of an
identical pair is reported in the slot basis {ee, eg, ge, gg} where slots are
taken in canonical (position) order: slot 0 is the particle further left.
Because a particle's register is g exactly when it has passed site 1, the
position-ordered "eg" population is the weight of the symmetric combination
(|eg> + |ge>)/sqrt(2) in first-quantized notation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import DetectorFlip, ScatterParams, ShiftScatter, StepOperator, basic_evolver
from .single_particle import ent0_closed, evolve, shadow_entropy_closed
from .state import (
    E,
    INTERNAL,
    BasisLabel,
    DensityMatrix,
    LayoutError,
    PureState,
    Statistics,
    basis_state,
    line,
    partial_trace,
    shannon_entropy,
)

__all__ = [
    "BudgetError",
    "RadiatorSpec",
    "StatisticsCurves",
    "two_particle_initial",
    "to_first_quantized",
    "exchange_residual",
    "evolve_two",
    "reduced_internal_two",
    "bose_populations_closed",
    "sector_populations",
    "fermi_entropy_closed",
    "bose_entropy_closed",
    "distinguishable_entropy_closed",
    "statistics_entropy_curves",
    "fermion_block_state",
    "fermion_block_entropy",
    "radiator_entropy_closed",
    "independent_radiators_entropy",
    "joint_radiators_entropy",
]

MAX_BLOCK = 2
MAX_JOINT_RADIATORS = 3


class BudgetError(ValueError):
    """Requested brute-force problem exceeds the supported size."""


def two_particle_initial(stat: Statistics) -> PureState:
    """(Anti)symmetrized |0,e> (x) |-1,e>; plain ordered product if distinguishable."""
    return basis_state([line(0), line(-1)], [E, E], statistics=stat)


def to_first_quantized(state: PureState) -> PureState:
    """Expand canonical representatives into a slot-labelled state.

    The result is a distinguishable-layout state whose amplitudes are the full
    (anti)symmetric wave function.
    """
    if not state.statistics.identical:
        return state
    fermi = state.statistics is Statistics.FERMI
    attached = state.n_registers == state.n_particles
    out: dict[BasisLabel, complex] = {}
    for lab, amp in state.items():
        parts = list(zip(lab.sites, lab.internal)) if attached else [(s, None) for s in lab.sites]
        orderings = {}
        for perm in itertools.permutations(range(len(parts))):
            ordered = tuple(parts[i] for i in perm)
            sign = _perm_sign(perm) if fermi else 1
            orderings.setdefault(ordered, sign)
        f = amp / math.sqrt(len(orderings))
        for ordered, sign in orderings.items():
            key = BasisLabel(tuple(p[0] for p in ordered),
                             tuple(p[1] for p in ordered) if attached else ())
            out[key] = out.get(key, 0j) + sign * f
    return PureState(out, state.n_particles, state.n_registers)


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def exchange_residual(fq: PureState, stat: Statistics) -> float:
    """max over transpositions of || P psi - s psi || for a slot-labelled state."""
    if stat is Statistics.DISTINGUISHABLE:
        return 0.0
    s = -1.0 if stat is Statistics.FERMI else 1.0
    n = fq.n_particles
    attached = fq.n_registers == n
    worst = 0.0
    for i, j in itertools.combinations(range(n), 2):
        acc = 0.0
        keys = set(fq.amplitudes)
        swapped = {}
        for lab, amp in fq.items():
            sites = list(lab.sites)
            sites[i], sites[j] = sites[j], sites[i]
            internal = list(lab.internal)
            if attached:
                internal[i], internal[j] = internal[j], internal[i]
            swapped[BasisLabel(tuple(sites), tuple(internal))] = amp
        for key in keys | set(swapped):
            acc += abs(swapped.get(key, 0j) - s * fq.amplitude(key)) ** 2
        worst = max(worst, math.sqrt(acc))
    return worst


def evolve_two(state: PureState, p: ScatterParams, n: int) -> PureState:
    """n applications of U (x) U."""
    if state.n_particles != 2:
        raise LayoutError("evolve_two needs a two-particle state")
    return evolve(state, basic_evolver(p), n)


def reduced_internal_two(state: PureState) -> DensityMatrix:
    """4x4 internal reduced matrix over {ee, eg, ge, gg}."""
    if state.n_particles != 2 or state.n_registers != 2:
        raise LayoutError("reduced_internal_two needs two particles with two registers")
    return partial_trace(state, INTERNAL)


def sector_populations(rho: DensityMatrix) -> tuple[float, float, float]:
    """Populations of ee, the single-excitation sector (eg + ge) and gg."""
    ee = rho.population((E, E))
    one = rho.population(("e", "g")) + rho.population(("g", "e"))
    gg = rho.population(("g", "g"))
    return ee, one, gg


def bose_populations_closed(n: int, q: float) -> tuple[float, float, float]:
    """Bosonic three-entry closed form (ee, symmetric eg, gg), valid for n >= 1."""
    if n < 1:
        return 1.0, 0.0, 0.0
    ee = 2 * (1 - q) * q ** (2 * n - 1)
    one = 4 * q ** n * (1 - q ** (n - 1)) * (1 - q) + (2 * q - 1) ** 2 * q ** (n - 1)
    gg = (2 * q * (1 - q) * (1 - q ** (n - 1)) ** 2
          + (2 * q - 1) ** 2 * (1 - q ** (n - 1)) + 2 * q * (1 - q))
    return ee, one, gg


def bose_entropy_closed(n: int, q: float) -> float:
    return shannon_entropy(bose_populations_closed(n, q))


def fermi_entropy_closed(n: int, q: float) -> float:
    """Fermionic pair entropy: the one-particle curve, one step late.

    After the first step the pair is exactly |0,e> ^ |1,g>, so from then on
    only the particle at the origin radiates.
    """
    return 0.0 if n == 0 else ent0_closed(n - 1, q)


def distinguishable_entropy_closed(n: int, q: float) -> float:
    return ent0_closed(n, q) + shadow_entropy_closed(n, q)


@dataclass(frozen=True)
class StatisticsCurves:
    """Brute-force entropies per statistics with their closed-form companions."""

    q: float
    n: np.ndarray
    fermi: np.ndarray
    bose: np.ndarray
    distinguishable: np.ndarray
    fermi_closed: np.ndarray
    bose_closed: np.ndarray
    distinguishable_closed: np.ndarray
    bose_populations: np.ndarray
    bose_populations_closed: np.ndarray

    @property
    def max_discrepancy(self) -> float:
        return float(max(
            np.max(np.abs(self.fermi - self.fermi_closed)),
            np.max(np.abs(self.bose - self.bose_closed)),
            np.max(np.abs(self.distinguishable - self.distinguishable_closed)),
            np.max(np.abs(self.bose_populations - self.bose_populations_closed)),
        ))


def statistics_entropy_curves(q: float, n_max: int, phase: float = 0.0) -> StatisticsCurves:
    p = ScatterParams.from_q(q, phase)
    op = basic_evolver(p)
    curves = {}
    bose_pops = []
    for stat in Statistics:
        state = two_particle_initial(stat)
        values = []
        for n in range(n_max + 1):
            rho = reduced_internal_two(state)
            values.append(rho.entropy())
            if stat is Statistics.BOSE:
                bose_pops.append(sector_populations(rho))
            state = op.apply(state)
        curves[stat] = np.array(values)
    ns = np.arange(n_max + 1)
    return StatisticsCurves(
        q=q,
        n=ns,
        fermi=curves[Statistics.FERMI],
        bose=curves[Statistics.BOSE],
        distinguishable=curves[Statistics.DISTINGUISHABLE],
        fermi_closed=np.array([fermi_entropy_closed(n, q) for n in ns]),
        bose_closed=np.array([bose_entropy_closed(n, q) for n in ns]),
        distinguishable_closed=np.array([distinguishable_entropy_closed(n, q) for n in ns]),
        bose_populations=np.array(bose_pops),
        bose_populations_closed=np.array([bose_populations_closed(n, q) for n in ns]),
    )


# --------------------------------------------------------------------------- #
#                              fermionic blocks                               #
# --------------------------------------------------------------------------- #

def fermion_block_state(k: int, m: int) -> PureState:
    """Antisymmetrized solid block |-k>, |-k-1>, ..., |-k-m>, all excited."""
    if k < 0 or m < 0:
        raise ValueError("k and m must be >= 0")
    if m > MAX_BLOCK:
        raise BudgetError(f"blocks of more than {MAX_BLOCK + 1} fermions are not supported")
    sites = [line(-k - i) for i in range(m + 1)]
    return basis_state(sites, [E] * (m + 1), statistics=Statistics.FERMI)


def fermion_block_entropy(k: int, m: int, n: int, q: float) -> float:
    """Internal entropy of the fermionic block after n steps of U."""
    state = evolve(fermion_block_state(k, m), basic_evolver(ScatterParams.from_q(q)), n)
    return partial_trace(state, INTERNAL).entropy()


# --------------------------------------------------------------------------- #
#                           independent radiators                             #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class RadiatorSpec:
    """One radiator with survival probability ``q`` starting at |start_site, e>."""

    q: float
    start_site: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"radiator q must lie in (0, 1), got {self.q!r}")
        if self.start_site > 0:
            raise ValueError("radiators start at sites <= 0")


def radiator_entropy_closed(spec: RadiatorSpec, n: int) -> float:
    """Source 0 gives the decay curve; source -k the |-1,e> curve delayed by k - 1."""
    k = -spec.start_site
    if k == 0:
        return ent0_closed(n, spec.q)
    shifted = n - (k - 1)
    return shadow_entropy_closed(shifted, spec.q) if shifted >= 1 else 0.0


def independent_radiators_entropy(specs: Sequence[RadiatorSpec], n: int) -> float:
    if not specs:
        raise ValueError("need at least one radiator")
    return math.fsum(radiator_entropy_closed(s, n) for s in specs)


def _radiator_operator(specs: Sequence[RadiatorSpec], phase: float = 0.0) -> StepOperator:
    gates = [ShiftScatter(ScatterParams.from_q(s.q, phase), slots=(i,)) for i, s in enumerate(specs)]
    gates.append(DetectorFlip(line(1)))
    return StepOperator(tuple(gates))


def joint_radiators_entropy(specs: Sequence[RadiatorSpec], n_max: int) -> np.ndarray:
    """Brute-force internal entropies of the joint product state, n = 0..n_max.

    Each radiator is one distinguishable slot with its own line and register.
    """
    if not specs:
        raise ValueError("need at least one radiator")
    if len(specs) > MAX_JOINT_RADIATORS:
        raise BudgetError(f"joint evolution supports at most {MAX_JOINT_RADIATORS} radiators")
    state = basis_state([line(s.start_site) for s in specs], [E] * len(specs))
    op = _radiator_operator(specs)
    out = []
    for _ in range(n_max + 1):
        out.append(partial_trace(state, INTERNAL).entropy())
        state = op.apply(state)
    return np.array(out)
