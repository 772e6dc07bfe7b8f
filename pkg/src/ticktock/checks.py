"""
Oracle-equivalence and invariant suite behind the ``check`` subcommand.

Each check reports the worst deviation it observed and the tolerance it is
held to. Random inputs come from a fixed seed, so runs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .multi_particle import (
    exchange_residual,
    independent_radiators_entropy,
    joint_radiators_entropy,
    RadiatorSpec,
    statistics_entropy_curves,
    to_first_quantized,
    two_particle_initial,
)
from .operators import ScatterParams, basic_evolver, check_unitarity, moved_evolver
from .pinch import (
    PinchTopology,
    demon_operator,
    embed_port4,
    identity_port,
    leaky_port,
    pinch_operator,
    ring_survival_closed,
    ring_survival_curve,
    swap_port,
)
from .single_particle import (
    asymptotic_closed,
    asymptotic_profile,
    ent0_closed,
    internal_entropy,
    parity_coherence_norm,
    psi_start,
    rho_tilde_closed,
    shadow_entropy_closed,
    trajectory,
)
from .state import (
    E,
    G,
    INTERNAL,
    SPATIAL,
    BasisLabel,
    PureState,
    Statistics,
    entanglement_entropy,
    inner_product,
    line,
    partial_trace,
    ring,
)

__all__ = ["CheckResult", "run_checks", "CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.value) and self.value <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34} max={self.value:.3e}  tol={self.tolerance:.0e}"


def _random_state(rng: np.random.Generator, sites, n_terms: int = 6) -> PureState:
    labels = [BasisLabel((s,), (lvl,)) for s in sites for lvl in (E, G)]
    picks = rng.choice(len(labels), size=min(n_terms, len(labels)), replace=False)
    amps = rng.normal(size=len(picks)) + 1j * rng.normal(size=len(picks))
    amps /= np.linalg.norm(amps)
    return PureState({labels[i]: complex(a) for i, a in zip(picks, amps)}, 1, 1)


def _single_decay() -> float:
    worst = 0.0
    for q in (0.5, 0.8, 0.9, 0.95):
        op = basic_evolver(ScatterParams.from_q(q))
        for n, s in enumerate(trajectory(psi_start(0), op, 200)):
            worst = max(worst, abs(internal_entropy(s) - ent0_closed(n, q)))
    return worst


def _shadow() -> float:
    worst = 0.0
    for q in (0.5, 0.95):
        op = basic_evolver(ScatterParams.from_q(q))
        for n, s in enumerate(trajectory(psi_start(1), op, 150)):
            worst = max(worst, abs(internal_entropy(s) - shadow_entropy_closed(n, q)))
    return worst


def _statistics() -> float:
    return statistics_entropy_curves(0.9, 60).max_discrepancy


def _residual() -> float:
    worst = 0.0
    for q in (0.5, 0.9):
        op = moved_evolver(ScatterParams.from_q(q))
        for n, s in enumerate(trajectory(psi_start(0), op, 300)):
            rho = partial_trace(s, INTERNAL)
            worst = max(worst, abs(rho.population((E,)) - rho_tilde_closed(n, q).population((E,))))
    return worst


def _parity() -> float:
    op = moved_evolver(ScatterParams.from_q(0.9))
    return max(parity_coherence_norm(s, n) for n, s in enumerate(trajectory(psi_start(0), op, 80)))


def _asymptotic() -> float:
    worst = 0.0
    p = ScatterParams.from_q(0.9, 0.3)
    for moved in (False, True):
        op = moved_evolver(p) if moved else basic_evolver(p)
        for t in (40, 50):
            prof = asymptotic_profile(op, psi_start(0), t, 30)
            for xi, amps in prof.items():
                ref = asymptotic_closed(xi, p, moved)
                keys = set(amps) | set(ref)
                worst = max(worst, max(abs(amps.get(k, 0j) - ref.get(k, 0j)) for k in keys))
    return worst


def _pinch_survival() -> float:
    topo = PinchTopology(4)
    k = leaky_port(math.sqrt(0.9))
    curve = ring_survival_curve(topo, k, 84)
    worst = max(abs(curve[n] - ring_survival_closed(topo, k, n)) for n in range(len(curve)))
    return max(worst, max(abs(curve[4 * m] - 0.9 ** m) for m in range(21)))


def _radiators() -> float:
    specs = [RadiatorSpec(0.9, 0), RadiatorSpec(0.7, -1), RadiatorSpec(0.8, -2)]
    brute = joint_radiators_entropy(specs, 12)
    return float(max(abs(b - independent_radiators_entropy(specs, n)) for n, b in enumerate(brute)))


def _unitarity() -> float:
    window_line = [line(x) for x in range(-6, 7)]
    worst = 0.0
    for q, ph in ((0.5, 0.0), (0.9, 1.1), (0.95, -2.0)):
        p = ScatterParams.from_q(q, ph)
        worst = max(worst, check_unitarity(basic_evolver(p), window_line),
                    check_unitarity(moved_evolver(p), window_line))
    for l in (1, 2, 5):
        topo = PinchTopology(l)
        window = [line(x) for x in range(-4, 4)] + [ring(j) for j in range(l)]
        for k in (identity_port(), swap_port(), leaky_port(0.3)):
            worst = max(worst, check_unitarity(pinch_operator(topo, k), window, 0))
        topo4 = PinchTopology(l, port_dim=4)
        worst = max(worst, check_unitarity(pinch_operator(topo4, embed_port4(leaky_port(0.7))),
                                           window, 0))
        if l >= 2:
            worst = max(worst, check_unitarity(demon_operator(topo, (identity_port(), swap_port())),
                                               window, 1))
    return worst


def _norm_and_overlap(seed: int = 7) -> float:
    rng = np.random.default_rng(seed)
    op = basic_evolver(ScatterParams.from_q(0.8, 0.4))
    sites = [line(x) for x in range(-5, 4)]
    worst = 0.0
    for _ in range(100):
        a, b = _random_state(rng, sites), _random_state(rng, sites)
        before = inner_product(a, b)
        for _ in range(5):
            a, b = op.apply(a), op.apply(b)
        worst = max(worst, abs(a.norm_squared() - 1.0), abs(inner_product(a, b) - before))
    return worst


def _complementarity() -> float:
    p = ScatterParams.from_q(0.85, 0.2)
    op = basic_evolver(p)
    worst = 0.0
    for stat in Statistics:
        for n, s in enumerate(trajectory(two_particle_initial(stat), op, 12)):
            worst = max(worst, abs(entanglement_entropy(s, INTERNAL) - partial_trace(s, SPATIAL).entropy()))
    return worst


def _exchange() -> float:
    op = basic_evolver(ScatterParams.from_q(0.7, 0.5))
    worst = 0.0
    for stat in (Statistics.FERMI, Statistics.BOSE):
        for s in trajectory(two_particle_initial(stat), op, 20):
            worst = max(worst, exchange_residual(to_first_quantized(s), stat))
    return worst


CHECKS: tuple[tuple[str, Callable[[], float], float], ...] = (
    ("single decay entropy", _single_decay, 1e-10),
    ("shadow entropy", _shadow, 1e-10),
    ("two-particle statistics", _statistics, 1e-10),
    ("residual source populations", _residual, 1e-10),
    ("parity coherence", _parity, 1e-14),
    ("asymptotic profile", _asymptotic, 1e-12),
    ("ring survival", _pinch_survival, 1e-12),
    ("independent radiators", _radiators, 1e-10),
    ("unitarity windows", _unitarity, 1e-12),
    ("norm and overlap preservation", _norm_and_overlap, 1e-12),
    ("purity complementarity", _complementarity, 1e-10),
    ("exchange symmetry residual", _exchange, 1e-12),
)


def run_checks(names: set[str] | None = None) -> list[CheckResult]:
    return [CheckResult(name, float(fn()), tol) for name, fn, tol in CHECKS
            if names is None or name in names]
