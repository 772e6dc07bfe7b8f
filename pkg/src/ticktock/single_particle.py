"""
One-particle evolutions and their closed forms.

Brute-force routes (``evolve`` and friends) and analytic routes (``*_closed``)
are kept strictly separate so each can check the other.
"""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from .operators import ScatterParams, StepOperator
from .state import (
    E,
    G,
    INTERNAL,
    SPATIAL,
    BasisLabel,
    DensityMatrix,
    PureState,
    basis_state,
    binary_entropy,
    bipartition,
    line,
    partial_trace,
)

__all__ = [
    "DomainError",
    "WindowError",
    "psi_start",
    "evolve",
    "trajectory",
    "v_level",
    "psi0_closed",
    "psi_tilde_closed",
    "ent0_closed",
    "cent_continuum",
    "rho0_closed",
    "rho_minus1_closed",
    "shadow_entropy_closed",
    "limiting_radiation_state",
    "radiation_part",
    "rho_tilde_closed",
    "rho_tilde_limit",
    "asymptotic_profile",
    "asymptotic_closed",
    "parity_coherence_norm",
    "internal_entropy",
]


class DomainError(ValueError):
    """A closed form is evaluated outside the steps where it holds."""


class WindowError(ValueError):
    pass


def psi_start(k: int = 0) -> PureState:
    """|-k> (x) |e>; ``k = 0`` is the excited source, ``k = 1`` the incoming particle."""
    return basis_state([line(-k)], [E])


def evolve(initial: PureState, op: StepOperator, n: int, prune: float | None = None) -> PureState:
    if n < 0:
        raise ValueError("n must be >= 0")
    state = initial
    for _ in range(n):
        state = op.apply(state, prune)
    return state


def trajectory(initial: PureState, op: StepOperator, n: int,
               prune: float | None = None) -> Iterator[PureState]:
    """Yield the states after 0, 1, ..., n steps."""
    state = initial
    yield state
    for _ in range(n):
        state = op.apply(state, prune)
        yield state


def v_level(n: int) -> str:
    """Register level left by the moved detector: e for even n, g for odd."""
    return E if n % 2 == 0 else G


# --------------------------------------------------------------------------- #
#                               closed forms                                  #
# --------------------------------------------------------------------------- #

def psi0_closed(n: int, p: ScatterParams) -> PureState:
    """alpha^n |0,e> + sum_j beta alpha^(n-j) |j,g>."""
    amps = {BasisLabel((line(0),), (E,)): p.alpha ** n}
    for j in range(1, n + 1):
        amps[BasisLabel((line(j),), (G,))] = p.beta * p.alpha ** (n - j)
    return PureState(amps, 1, 1)


def psi_tilde_closed(n: int, p: ScatterParams) -> PureState:
    """Closed form of the moved-detector state after n steps."""
    amps = {BasisLabel((line(0),), (v_level(n),)): p.alpha ** n}
    for j in range(1, n + 1):
        amps[BasisLabel((line(j),), (v_level(n - j),))] = p.beta * p.alpha ** (n - j)
    return PureState(amps, 1, 1)


def ent0_closed(n: int, q: float) -> float:
    """Binary entropy of q^n."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q!r}")
    return binary_entropy(q ** n)


def cent_continuum(t: float) -> float:
    """Continuum entropy curve with time measured in half-lives."""
    if t < 0:
        raise ValueError("t must be >= 0")
    s = 2.0 ** (-t)
    if s >= 1.0:
        return 0.0
    return t * s - (1.0 - s) * math.log2(1.0 - s)


def rho0_closed(n: int, q: float) -> DensityMatrix:
    return DensityMatrix.diagonal([q ** n, 1.0 - q ** n], [(E,), (G,)])


def rho_minus1_closed(n: int, q: float) -> DensityMatrix:
    """Internal density matrix for the |-1,e> start; valid from n = 1 on."""
    if n < 1:
        raise DomainError("the |-1,e> closed form holds for n >= 1 only")
    pe = q ** (n - 1) - q ** n
    return DensityMatrix.diagonal([pe, 1.0 - pe], [(E,), (G,)])


def shadow_entropy_closed(n: int, q: float) -> float:
    if n == 0:
        return 0.0
    return binary_entropy(q ** (n - 1) - q ** n)


def limiting_radiation_state(M: int, p: ScatterParams) -> PureState:
    """beta (|M> + alpha |M-1> + ... + alpha^(M-1) |1>) (x) |g>, unnormalized."""
    if M < 1:
        raise ValueError("M must be >= 1")
    amps = {BasisLabel((line(M - k),), (G,)): p.beta * p.alpha ** k for k in range(M)}
    return PureState(amps, 1, 1)


def radiation_part(state: PureState) -> PureState:
    """Projection onto sites x >= 1 (the emitted field)."""
    return state.with_amplitudes({k: v for k, v in state.items() if k.sites[0].index >= 1})


def rho_tilde_closed(n: int, q: float) -> DensityMatrix:
    """Source density matrix of the moved-detector model after n steps."""
    if n < 0:
        raise ValueError("n must be >= 0")
    # geometric sum over emissions that left the source register at e;
    # even n gives (1 + q^(n+1))/(1+q), odd n gives (1 - q^(n+1))/(1+q)
    pe = (1.0 - (-q) ** (n + 1)) / (1.0 + q)
    return DensityMatrix.diagonal([pe, 1.0 - pe], [(E,), (G,)])


def rho_tilde_limit(q: float) -> DensityMatrix:
    return DensityMatrix.diagonal([1.0 / (1.0 + q), q / (1.0 + q)], [(E,), (G,)])


# --------------------------------------------------------------------------- #
#                       asymptotics and parity sectors                        #
# --------------------------------------------------------------------------- #

def asymptotic_profile(op: StepOperator, initial: PureState, t: int,
                       xi_max: int) -> dict[int, dict[tuple, complex]]:
    """Co-moving profile phi(t, x = t - xi) for xi = 0..xi_max.

    Returns ``{xi: {internal: amplitude}}`` from brute-force evolution.
    """
    if t <= xi_max:
        raise WindowError(f"need t > xi_max (t={t}, xi_max={xi_max})")
    state = evolve(initial, op, t)
    out: dict[int, dict[tuple, complex]] = {xi: {} for xi in range(xi_max + 1)}
    for lab, amp in state.items():
        xi = t - lab.sites[0].index
        if 0 <= xi <= xi_max:
            out[xi][lab.internal] = out[xi].get(lab.internal, 0j) + amp
    return out


def asymptotic_closed(xi: int, p: ScatterParams, moved: bool = False) -> dict[tuple, complex]:
    """beta alpha^xi on |g> (basic model) or on |v(xi)> (moved detector)."""
    level = v_level(xi) if moved else G
    return {(level,): p.beta * p.alpha ** xi}


def parity_coherence_norm(state: PureState, n: int) -> float:
    """Largest |rho(x, x')| of the spatial density matrix across parity sectors.

    The sector of ``x`` is the parity of ``n - x``.
    """
    sites, _, c = bipartition(state, SPATIAL)
    if len(sites) < 2:
        return 0.0
    rho = c @ c.conj().T
    parity = np.array([(n - s[0].index) % 2 for s in sites])
    cross = parity[:, None] != parity[None, :]
    return float(np.max(np.abs(rho[cross]))) if cross.any() else 0.0


def internal_entropy(state: PureState) -> float:
    """Entropy of the internal reduced matrix of a one-particle state."""
    return partial_trace(state, INTERNAL).entropy()
