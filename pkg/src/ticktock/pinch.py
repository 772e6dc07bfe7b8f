"""
Line-plus-ring ("pinch") models.

Sites are the integer line plus a ring ``Ring(0..l-1)``. The routing shift
moves ``Line(x) -> Line(x+1)``, ``Ring(j) -> Ring(j+1)``, and threads the
ring into the line: ``Line(-1) -> Ring(0)`` and ``Ring(l-1) -> Line(0)``.
Before each shift a port unitary K mixes the amplitudes on the port sites.

Port ordering, d = 2: ``(Line(-1), Ring(l-1))``. K = identity threads every
incoming particle once around the ring; K = swap decouples the ring from the
line. The ring keeps amplitude ``K[0, 1]`` on each pass through the port.

Port ordering, d = 4: ``(Line(-2), Line(-1), Ring(l-1), Line(0))``, the two
line sites in front of the interior block and the two behind it. The 4x4
decoupling matrix with ones on the corners and a swap in the middle then
reproduces the d = 2 swap exactly, and ``1 (+) K2 (+) 1`` reproduces K2.

A demon step is four unitaries in this order: flip the ancilla when the
particle is on the approach site, apply K_open or K_closed according to the
ancilla, flip the ancilla when the particle is on the interior site, shift.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .operators import DetectorFlip, StepOperator, map_labels, map_slots
from .state import (
    G,
    BasisLabel,
    LayoutError,
    PureState,
    Region,
    SiteLabel,
    Sites,
    TopologyError,
    basis_state,
    entanglement_entropy,
    line,
    ring,
)

__all__ = [
    "ScheduleError",
    "PinchTopology",
    "PortUnitary",
    "identity_port",
    "swap_port",
    "leaky_port",
    "decoupling_port4",
    "embed_port4",
    "PortMix",
    "ControlledPortMix",
    "RouteShift",
    "DemonControl",
    "Schedule",
    "pinch_operator",
    "pinch_step",
    "demon_operator",
    "demon_step",
    "ring_survival_curve",
    "ring_survival_closed",
    "port_passages",
    "schedule_evolve",
    "schedule_trajectory",
    "interior_probability",
    "interior_exterior_entropy",
    "INTERIOR",
]

INTERIOR = Sites(Region.RING, registers=True)


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class PinchTopology:
    ring_length: int
    port_dim: int = 2

    def __post_init__(self) -> None:
        if self.ring_length < 1:
            raise TopologyError("ring length must be >= 1")
        if self.port_dim not in (2, 4):
            raise TopologyError("port dimension must be 2 or 4")

    @property
    def ports(self) -> tuple[SiteLabel, ...]:
        last = ring(self.ring_length - 1)
        if self.port_dim == 2:
            return (line(-1), last)
        return (line(-2), line(-1), last, line(0))

    def check(self, site: SiteLabel) -> None:
        if site.region is Region.RING and not 0 <= site.index < self.ring_length:
            raise TopologyError(f"{site!r} is not on a ring of length {self.ring_length}")

    def route(self, site: SiteLabel) -> SiteLabel:
        if site.region is Region.LINE:
            return ring(0) if site.index == -1 else line(site.index + 1)
        self.check(site)
        if site.index == self.ring_length - 1:
            return line(0)
        return ring(site.index + 1)

    def is_interior(self, site: SiteLabel) -> bool:
        return site.region is Region.RING


@dataclass(frozen=True, eq=False)
class PortUnitary:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("port unitary must be square")
        if np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) > 1e-12:
            raise ValueError("port matrix is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def ring_retention(self) -> complex:
        """Amplitude for staying on the ring during one pass through the port."""
        return complex(self.matrix[0, 1] if self.dim == 2 else self.matrix[1, 2])


def identity_port(d: int = 2) -> PortUnitary:
    return PortUnitary(np.eye(d))


def swap_port() -> PortUnitary:
    return PortUnitary(np.array([[0, 1], [1, 0]]))


def leaky_port(kappa: float) -> PortUnitary:
    """Real 2x2 port keeping amplitude ``kappa`` on the ring; kappa = 1 is the swap."""
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must lie in [0, 1]")
    c = math.sqrt(max(0.0, 1.0 - kappa * kappa))
    return PortUnitary(np.array([[c, kappa], [kappa, -c]]))


def decoupling_port4() -> PortUnitary:
    return PortUnitary(np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]))


def embed_port4(k2: PortUnitary) -> PortUnitary:
    """1 (+) K2 (+) 1, the d = 4 form of a d = 2 port."""
    m = np.eye(4, dtype=np.complex128)
    m[1:3, 1:3] = k2.matrix
    return PortUnitary(m)


def _port_branches(topo: PinchTopology, k: PortUnitary):
    if k.dim != topo.port_dim:
        raise LayoutError(f"port unitary is {k.dim}x{k.dim}, topology has {topo.port_dim} ports")
    ports = topo.ports
    index = {s: i for i, s in enumerate(ports)}
    columns = {s: tuple((ports[r], k.matrix[r, i]) for r in range(k.dim) if k.matrix[r, i] != 0)
               for s, i in index.items()}
    return columns


@dataclass(frozen=True, eq=False)
class PortMix:
    topology: PinchTopology
    port: PortUnitary

    def apply(self, state: PureState, prune: float | None = None) -> PureState:
        columns = _port_branches(self.topology, self.port)

        def fn(slot, site, lvl):
            col = columns.get(site)
            if col is None:
                self.topology.check(site)
                return ((site, lvl, 1.0),)
            return tuple((s, lvl, a) for s, a in col)

        return map_slots(state, fn, prune=prune)


@dataclass(frozen=True, eq=False)
class ControlledPortMix:
    """K_open when the ancilla register holds ``open_level``, K_closed otherwise."""

    topology: PinchTopology
    k_open: PortUnitary
    k_closed: PortUnitary
    register: int
    open_level: str = G

    def apply(self, state: PureState, prune: float | None = None) -> PureState:
        if state.n_particles != 1:
            raise LayoutError("controlled port gates are single-particle")
        if not 0 <= self.register < state.n_registers:
            raise LayoutError(f"ancilla register {self.register} not present")
        open_cols = _port_branches(self.topology, self.k_open)
        closed_cols = _port_branches(self.topology, self.k_closed)
        r = self.register

        def fn(lab: BasisLabel):
            site = lab.sites[0]
            cols = open_cols if lab.internal[r] == self.open_level else closed_cols
            col = cols.get(site)
            if col is None:
                return ((lab, 1.0),)
            return tuple((BasisLabel((s,), lab.internal), a) for s, a in col)

        return map_labels(state, fn, prune)


@dataclass(frozen=True)
class RouteShift:
    topology: PinchTopology

    def apply(self, state: PureState, prune: float | None = None) -> PureState:
        route = self.topology.route
        return map_slots(state, lambda slot, site, lvl: ((route(site), lvl, 1.0),), prune=prune)


def pinch_operator(topo: PinchTopology, k: PortUnitary) -> StepOperator:
    return StepOperator((PortMix(topo, k), RouteShift(topo)))


def pinch_step(state: PureState, topo: PinchTopology, k: PortUnitary,
               prune: float | None = None) -> PureState:
    return pinch_operator(topo, k).apply(state, prune)


@dataclass(frozen=True, eq=False)
class DemonControl:
    k_open: PortUnitary
    k_closed: PortUnitary
    ancilla: int = 0
    approach: SiteLabel = field(default_factory=lambda: line(-1))
    interior: SiteLabel = field(default_factory=lambda: ring(0))


def demon_operator(topo: PinchTopology, pair: tuple[PortUnitary, PortUnitary], ancilla: int = 0,
                   detectors: tuple[SiteLabel, SiteLabel] = (line(-1), ring(0))) -> StepOperator:
    """``pair`` is ``(K_open, K_closed)``; ``detectors`` is ``(approach, interior)``."""
    approach, interior = detectors
    if approach == interior:
        raise TopologyError("demon detector sites must differ")
    topo.check(approach)
    topo.check(interior)
    k_open, k_closed = pair
    return StepOperator((
        DetectorFlip(approach, ancilla),
        ControlledPortMix(topo, k_open, k_closed, ancilla),
        DetectorFlip(interior, ancilla),
        RouteShift(topo),
    ))


def demon_step(state: PureState, topo: PinchTopology, pair: tuple[PortUnitary, PortUnitary],
               ancilla: int = 0, detectors: tuple[SiteLabel, SiteLabel] = (line(-1), ring(0)),
               prune: float | None = None) -> PureState:
    return demon_operator(topo, pair, ancilla, detectors).apply(state, prune)


# --------------------------------------------------------------------------- #
#                                 schedules                                   #
# --------------------------------------------------------------------------- #

ScheduleEntry = Union[PortUnitary, DemonControl]


@dataclass(frozen=True, eq=False)
class Schedule:
    """Piecewise-constant assignment of the port unitary to step numbers.

    ``segments`` are ``(start_step, entry)`` pairs; the first must start at 0.
    ``horizon`` (exclusive) bounds the covered steps when given.
    """

    segments: tuple[tuple[int, ScheduleEntry], ...]
    horizon: int | None = None

    def __post_init__(self) -> None:
        segs = tuple(sorted(self.segments, key=lambda s: s[0]))
        if not segs:
            raise ScheduleError("empty schedule")
        starts = [s for s, _ in segs]
        if len(set(starts)) != len(starts):
            raise ScheduleError("duplicate segment start")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, entry: ScheduleEntry) -> "Schedule":
        return cls(((0, entry),))

    @classmethod
    def baby_universe(cls, coupled: PortUnitary, n_star: int) -> "Schedule":
        """Coupled until ``n_star``, then permanently decoupled."""
        return cls(((0, coupled), (n_star, _decoupler(coupled.dim))))

    @classmethod
    def prodigal_universe(cls, coupled: PortUnitary, n_join: int) -> "Schedule":
        """Decoupled until ``n_join``, then coupled."""
        return cls(((0, _decoupler(coupled.dim)), (n_join, coupled)))

    def at(self, n: int) -> ScheduleEntry:
        starts = [s for s, _ in self.segments]
        if n < starts[0] or (self.horizon is not None and n >= self.horizon):
            raise ScheduleError(f"schedule undefined at step {n}")
        return self.segments[bisect.bisect_right(starts, n) - 1][1]


def _decoupler(d: int) -> PortUnitary:
    return swap_port() if d == 2 else decoupling_port4()


def _operator_for(topo: PinchTopology, entry: ScheduleEntry) -> StepOperator:
    if isinstance(entry, DemonControl):
        return demon_operator(topo, (entry.k_open, entry.k_closed), entry.ancilla,
                              (entry.approach, entry.interior))
    return pinch_operator(topo, entry)


def schedule_trajectory(state: PureState, topo: PinchTopology, sched: Schedule, n: int,
                        prune: float | None = None):
    """Yield the states after 0..n scheduled steps."""
    cache: dict[int, StepOperator] = {}
    yield state
    for k in range(n):
        entry = sched.at(k)
        op = cache.get(id(entry))
        if op is None:
            op = cache[id(entry)] = _operator_for(topo, entry)
        state = op.apply(state, prune)
        yield state


def schedule_evolve(state: PureState, topo: PinchTopology, sched: Schedule, n: int,
                    prune: float | None = None) -> PureState:
    for k in range(n):
        sched.at(k)  # fail before any work on an uncovered step
    for state in schedule_trajectory(state, topo, sched, n, prune):
        pass
    return state


# --------------------------------------------------------------------------- #
#                               observables                                   #
# --------------------------------------------------------------------------- #

def interior_probability(state: PureState) -> float:
    return state.probability(lambda lab: any(s.region is Region.RING for s in lab.sites))


def interior_exterior_entropy(state: PureState, topo: PinchTopology | None = None) -> float:
    """Entanglement entropy between {ring sites + registers} and the line."""
    return entanglement_entropy(state, INTERIOR)


def ring_survival_curve(topo: PinchTopology, k: PortUnitary, n_max: int,
                        start: int = 0) -> np.ndarray:
    """Ring probability after 0..n_max steps for one particle starting on Ring(start)."""
    state = basis_state([ring(start)], (), ring_length=topo.ring_length)
    op = pinch_operator(topo, k)
    out = [interior_probability(state)]
    for _ in range(n_max):
        state = op.apply(state)
        out.append(interior_probability(state))
    return np.array(out)


def port_passages(topo: PinchTopology, n: int, start: int = 0) -> int:
    """Number of times a ring particle from Ring(start) meets the port in n steps."""
    return (n + start) // topo.ring_length


def ring_survival_closed(topo: PinchTopology, sched: Schedule | PortUnitary, n: int,
                         start: int = 0) -> float:
    """Product of |ring retention|^2 over the port passages within n steps.

    Exact for d = 2 ports with an initially empty line: leaked amplitude
    leaves through Line(0) and never returns.
    """
    if isinstance(sched, PortUnitary):
        sched = Schedule.constant(sched)
    surv = 1.0
    l = topo.ring_length
    for k in range(n):
        if (start + k) % l == l - 1:
            entry = sched.at(k)
            port = entry.k_closed if isinstance(entry, DemonControl) else entry
            surv *= abs(port.ring_retention) ** 2
    return surv
