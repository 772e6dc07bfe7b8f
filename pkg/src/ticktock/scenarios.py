"""
Scenario configuration, execution and data emission.

A scenario document is a JSON object. Every closed-form column a scenario
produces is paired with its brute-force column, and the largest gap between
the two is echoed into the output metadata as ``max_discrepancy``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import __version__
from .multi_particle import (
    RadiatorSpec,
    independent_radiators_entropy,
    joint_radiators_entropy,
    radiator_entropy_closed,
    statistics_entropy_curves,
    MAX_JOINT_RADIATORS,
)
from .operators import ScatterParams, basic_evolver, moved_evolver
from .pinch import (
    PinchTopology,
    Schedule,
    demon_operator,
    identity_port,
    interior_exterior_entropy,
    interior_probability,
    leaky_port,
    ring_survival_closed,
    schedule_trajectory,
    swap_port,
)
from .single_particle import (
    asymptotic_closed,
    asymptotic_profile,
    cent_continuum,
    ent0_closed,
    internal_entropy,
    parity_coherence_norm,
    psi_start,
    rho_tilde_closed,
    rho_tilde_limit,
    shadow_entropy_closed,
    trajectory,
)
from .state import E, INTERNAL, basis_state, binary_entropy, line, partial_trace, ring

__all__ = [
    "SCENARIOS",
    "ConfigError",
    "ScenarioConfig",
    "SeriesOutput",
    "parse_scenario",
    "config_from_dict",
    "expand_grid",
    "run_scenario",
    "reproduce_figure",
    "format_output",
    "emit",
    "DISCREPANCY_LIMIT",
]

SCENARIOS = ("single_decay", "shadow", "statistics", "residual", "asymptotic",
             "pinch", "demon", "radiators")
SCHEDULES = ("constant", "baby_universe", "prodigal_universe")
DISCREPANCY_LIMIT = 1e-8


class ConfigError(ValueError):
    """Invalid scenario document; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    q: float = 0.9
    alpha_phase: float = 0.0
    steps: int = 50
    # pinch / demon
    ring_length: int = 4
    retention: float = 0.9
    schedule: str = "constant"
    switch_step: int = 0
    start: int = 0
    # multi-particle
    statistics: str = "all"
    radiators: tuple = ()
    # asymptotic
    model: str = "basic"
    xi_max: int = 30
    # output
    prune_epsilon: Optional[float] = None
    hex_floats: bool = False

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["radiators"] = [dict(r) for r in self.radiators]
        return d


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}


def _as_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(name, f"expected an integer, got {value!r}")
    return int(value)


def _as_float(name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(name, f"expected a finite number, got {value!r}")
    return float(value)


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Validate a decoded document and fill defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("document", "expected a JSON object")
    unknown = sorted(set(doc) - set(_FIELDS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    if "scenario" not in doc:
        raise ConfigError("scenario", "missing")
    scenario = doc["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError("scenario", f"must be one of {', '.join(SCENARIOS)}")
    kw: dict[str, Any] = {"scenario": scenario}
    if "q" in doc:
        kw["q"] = _as_float("q", doc["q"])
    if "alpha_phase" in doc:
        kw["alpha_phase"] = _as_float("alpha_phase", doc["alpha_phase"])
    for name in ("steps", "ring_length", "switch_step", "start", "xi_max"):
        if name in doc:
            kw[name] = _as_int(name, doc[name])
    if "retention" in doc:
        kw["retention"] = _as_float("retention", doc["retention"])
    for name, allowed in (("schedule", SCHEDULES),
                          ("statistics", ("all", "fermi", "bose", "distinguishable")),
                          ("model", ("basic", "moved"))):
        if name in doc:
            if doc[name] not in allowed:
                raise ConfigError(name, f"must be one of {', '.join(allowed)}")
            kw[name] = doc[name]
    if doc.get("prune_epsilon") is not None:
        kw["prune_epsilon"] = _as_float("prune_epsilon", doc["prune_epsilon"])
    if "hex_floats" in doc:
        if not isinstance(doc["hex_floats"], bool):
            raise ConfigError("hex_floats", "expected true or false")
        kw["hex_floats"] = doc["hex_floats"]
    if "radiators" in doc:
        kw["radiators"] = _parse_radiators(doc["radiators"])
    cfg = ScenarioConfig(**kw)
    _validate(cfg)
    return cfg


def _parse_radiators(value) -> tuple:
    if not isinstance(value, list) or not value:
        raise ConfigError("radiators", "expected a non-empty list")
    out = []
    for i, r in enumerate(value):
        name = f"radiators[{i}]"
        if not isinstance(r, dict) or set(r) - {"q", "start_site"} or "q" not in r:
            raise ConfigError(name, "expected {\"q\": ..., \"start_site\": ...}")
        q = _as_float(f"{name}.q", r["q"])
        if not 0.0 < q < 1.0:
            raise ConfigError(f"{name}.q", "must lie in (0, 1)")
        start = _as_int(f"{name}.start_site", r.get("start_site", 0))
        if start > 0:
            raise ConfigError(f"{name}.start_site", "must be <= 0")
        out.append((("q", q), ("start_site", start)))
    return tuple(out)


def _validate(cfg: ScenarioConfig) -> None:
    if not 0.0 < cfg.q < 1.0:
        raise ConfigError("q", f"must lie in (0, 1), got {cfg.q!r}")
    if cfg.steps < 0:
        raise ConfigError("steps", "must be >= 0")
    if cfg.ring_length < 1:
        raise ConfigError("ring_length", "must be >= 1")
    if not 0.0 <= cfg.retention <= 1.0:
        raise ConfigError("retention", "must lie in [0, 1]")
    if not 0 <= cfg.switch_step <= cfg.steps:
        raise ConfigError("switch_step", "must lie in [0, steps]")
    if cfg.xi_max < 0:
        raise ConfigError("xi_max", "must be >= 0")
    if cfg.prune_epsilon is not None and not 0.0 < cfg.prune_epsilon < 1e-6:
        raise ConfigError("prune_epsilon", "must lie in (0, 1e-6)")
    if cfg.scenario == "asymptotic" and cfg.steps <= cfg.xi_max:
        raise ConfigError("steps", "asymptotic scenario needs steps > xi_max")
    if cfg.scenario == "pinch" and not 0 <= cfg.start < cfg.ring_length:
        raise ConfigError("start", "ring start index must lie in [0, ring_length)")
    if cfg.scenario == "demon":
        if cfg.ring_length < 2:
            raise ConfigError("ring_length", "demon scenario needs ring_length >= 2")
        if cfg.start > -1:
            raise ConfigError("start", "demon particle starts on the line, start <= -1")
    if cfg.scenario == "radiators" and not cfg.radiators:
        raise ConfigError("radiators", "radiators scenario needs a radiator list")


def parse_scenario(text: str, overrides: dict | None = None) -> ScenarioConfig:
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError("document", f"malformed JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise ConfigError("document", "expected a JSON object")
    if overrides:
        doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
    return config_from_dict(doc)


def expand_grid(text: str, overrides: dict | None = None) -> list[ScenarioConfig]:
    """Sweep document: a scenario document plus ``"grid": {field: [values]}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("document", f"malformed JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise ConfigError("document", "expected a JSON object")
    grid = doc.pop("grid", {})
    if not isinstance(grid, dict) or any(not isinstance(v, list) or not v for v in grid.values()):
        raise ConfigError("grid", "expected an object of non-empty lists")
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    names = sorted(grid)
    points = [{}]
    for name in names:
        points = [{**p, name: v} for p in points for v in grid[name]]
    return [config_from_dict({**doc, **p}) for p in points]


# --------------------------------------------------------------------------- #
#                                  outputs                                    #
# --------------------------------------------------------------------------- #

@dataclass
class SeriesOutput:
    columns: dict[str, list]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"column lengths differ: {sorted(lengths)}")
        for name, values in self.columns.items():
            for v in values:
                if isinstance(v, float) and not math.isfinite(v):
                    raise ValueError(f"non-finite value in column {name}")

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()), []))

    @property
    def max_discrepancy(self) -> Optional[float]:
        return self.metadata.get("max_discrepancy")


def _series(columns: dict[str, Any], scenario: dict, hex_floats: bool = False,
            discrepancy: Optional[float] = None, **extra) -> SeriesOutput:
    cols: dict[str, list] = {}
    for name, values in columns.items():
        values = list(values.tolist() if isinstance(values, np.ndarray) else values)
        if any(isinstance(v, complex) for v in values):
            cols[f"{name}_re"] = [float(complex(v).real) for v in values]
            cols[f"{name}_im"] = [float(complex(v).imag) for v in values]
        else:
            cols[name] = values
    if hex_floats:
        for name in list(cols):
            if cols[name] and all(isinstance(v, float) for v in cols[name]):
                cols[f"{name}_hex"] = [v.hex() for v in cols[name]]
    meta = {"scenario": scenario, "version": __version__}
    if discrepancy is not None:
        meta["max_discrepancy"] = float(discrepancy)
    meta.update(extra)
    return SeriesOutput(cols, meta)


def _gap(a, b) -> list[float]:
    return [abs(float(x) - float(y)) for x, y in zip(a, b)]


# --------------------------------------------------------------------------- #
#                                 scenarios                                   #
# --------------------------------------------------------------------------- #

def run_scenario(cfg: ScenarioConfig) -> SeriesOutput:
    runner = _RUNNERS[cfg.scenario]
    return runner(cfg)


def _params(cfg: ScenarioConfig) -> ScatterParams:
    return ScatterParams.from_q(cfg.q, cfg.alpha_phase)


def _run_single_decay(cfg: ScenarioConfig) -> SeriesOutput:
    op = basic_evolver(_params(cfg))
    brute = [internal_entropy(s) for s in trajectory(psi_start(0), op, cfg.steps, cfg.prune_epsilon)]
    closed = [ent0_closed(n, cfg.q) for n in range(cfg.steps + 1)]
    gap = _gap(brute, closed)
    return _series({"n": list(range(cfg.steps + 1)), "entropy_bruteforce": brute,
                    "entropy_closed": closed, "discrepancy": gap},
                   cfg.as_dict(), cfg.hex_floats, max(gap))


def _run_shadow(cfg: ScenarioConfig) -> SeriesOutput:
    op = basic_evolver(_params(cfg))
    states = list(trajectory(psi_start(1), op, cfg.steps, cfg.prune_epsilon))[1:]
    ns = list(range(1, cfg.steps + 1))
    brute = [internal_entropy(s) for s in states]
    closed = [shadow_entropy_closed(n, cfg.q) for n in ns]
    gap = _gap(brute, closed)
    return _series({"n": ns, "entropy_bruteforce": brute, "entropy_closed": closed,
                    "discrepancy": gap}, cfg.as_dict(), cfg.hex_floats, max(gap, default=0.0))


def _run_statistics(cfg: ScenarioConfig) -> SeriesOutput:
    c = statistics_entropy_curves(cfg.q, cfg.steps, cfg.alpha_phase)
    cols: dict[str, Any] = {"n": c.n.tolist()}
    picks = ("fermi", "bose", "distinguishable") if cfg.statistics == "all" else (cfg.statistics,)
    gaps = np.zeros(len(c.n))
    for name in picks:
        brute, closed = getattr(c, name), getattr(c, f"{name}_closed")
        cols[f"{name}_bruteforce"] = brute
        cols[f"{name}_closed"] = closed
        gaps = np.maximum(gaps, np.abs(brute - closed))
    if "bose" in picks:
        pops = np.max(np.abs(c.bose_populations - c.bose_populations_closed), axis=1)
        gaps = np.maximum(gaps, pops)
    cols["discrepancy"] = gaps
    return _series(cols, cfg.as_dict(), cfg.hex_floats, float(np.max(gaps)))


def _run_residual(cfg: ScenarioConfig) -> SeriesOutput:
    op = moved_evolver(_params(cfg))
    ns, pe_b, pe_c, s_b, s_c, coh, gap = [], [], [], [], [], [], []
    for n, state in enumerate(trajectory(psi_start(0), op, cfg.steps, cfg.prune_epsilon)):
        rho = partial_trace(state, INTERNAL)
        closed = rho_tilde_closed(n, cfg.q)
        ns.append(n)
        pe_b.append(rho.population((E,)))
        pe_c.append(closed.population((E,)))
        s_b.append(rho.entropy())
        s_c.append(closed.entropy())
        coh.append(parity_coherence_norm(state, n))
        gap.append(max(abs(pe_b[-1] - pe_c[-1]), abs(s_b[-1] - s_c[-1]), coh[-1]))
    return _series({"n": ns, "source_excited_bruteforce": pe_b, "source_excited_closed": pe_c,
                    "entropy_bruteforce": s_b, "entropy_closed": s_c,
                    "parity_coherence": coh, "discrepancy": gap},
                   cfg.as_dict(), cfg.hex_floats, max(gap),
                   limit_entropy=rho_tilde_limit(cfg.q).entropy())


def _run_asymptotic(cfg: ScenarioConfig) -> SeriesOutput:
    p = _params(cfg)
    moved = cfg.model == "moved"
    op = moved_evolver(p) if moved else basic_evolver(p)
    prof = asymptotic_profile(op, psi_start(0), cfg.steps, cfg.xi_max)
    xis, amp_b, amp_c, lvl_b, lvl_c, gap = [], [], [], [], [], []
    for xi in range(cfg.xi_max + 1):
        brute = prof[xi]
        closed = asymptotic_closed(xi, p, moved)
        (lb, ab), = brute.items() if len(brute) == 1 else (("?", sum(brute.values())),)
        (lc, ac), = closed.items()
        xis.append(xi)
        amp_b.append(complex(ab))
        amp_c.append(complex(ac))
        lvl_b.append("".join(lb))
        lvl_c.append("".join(lc))
        keys = set(brute) | set(closed)
        gap.append(max(abs(brute.get(k, 0j) - closed.get(k, 0j)) for k in keys))
    return _series({"xi": xis, "amplitude_bruteforce": amp_b, "amplitude_closed": amp_c,
                    "internal_bruteforce": lvl_b, "internal_closed": lvl_c, "discrepancy": gap},
                   cfg.as_dict(), cfg.hex_floats, max(gap))


def _pinch_schedule(cfg: ScenarioConfig) -> Schedule:
    coupled = leaky_port(math.sqrt(cfg.retention))
    if cfg.schedule == "baby_universe":
        return Schedule.baby_universe(coupled, cfg.switch_step)
    if cfg.schedule == "prodigal_universe":
        return Schedule.prodigal_universe(coupled, cfg.switch_step)
    return Schedule.constant(coupled)


def _run_pinch(cfg: ScenarioConfig) -> SeriesOutput:
    topo = PinchTopology(cfg.ring_length)
    sched = _pinch_schedule(cfg)
    state0 = basis_state([ring(cfg.start)], (), ring_length=cfg.ring_length)
    ns, p_in, p_out, ent, p_closed, ent_closed, gap = [], [], [], [], [], [], []
    for n, state in enumerate(schedule_trajectory(state0, topo, sched, cfg.steps, cfg.prune_epsilon)):
        pin = interior_probability(state)
        ns.append(n)
        p_in.append(pin)
        p_out.append(state.norm_squared() - pin)
        ent.append(interior_exterior_entropy(state, topo))
        surv = ring_survival_closed(topo, sched, n, cfg.start)
        p_closed.append(surv)
        ent_closed.append(binary_entropy(surv))
        gap.append(max(abs(pin - surv), abs(ent[-1] - ent_closed[-1])))
    return _series({"n": ns, "interior_probability": p_in, "exterior_probability": p_out,
                    "interior_probability_closed": p_closed, "entropy": ent,
                    "entropy_closed": ent_closed, "discrepancy": gap},
                   cfg.as_dict(), cfg.hex_floats, max(gap))


def _run_demon(cfg: ScenarioConfig) -> SeriesOutput:
    topo = PinchTopology(cfg.ring_length)
    op = demon_operator(topo, (identity_port(), swap_port()))
    state = basis_state([line(cfg.start)], [E])
    ns, p_in, p_open, ent, drift = [], [], [], [], []
    for n in range(cfg.steps + 1):
        ns.append(n)
        p_in.append(interior_probability(state))
        p_open.append(state.probability(lambda lab: lab.internal[0] != E))
        ent.append(interior_exterior_entropy(state, topo))
        drift.append(abs(state.norm_squared() - 1.0))
        if n < cfg.steps:
            state = op.apply(state, cfg.prune_epsilon)
    return _series({"n": ns, "interior_probability": p_in, "ancilla_open_probability": p_open,
                    "entropy": ent, "norm_drift": drift}, cfg.as_dict(), cfg.hex_floats,
                   None, max_norm_drift=max(drift))


def _run_radiators(cfg: ScenarioConfig) -> SeriesOutput:
    specs = [RadiatorSpec(**dict(r)) for r in cfg.radiators]
    ns = list(range(cfg.steps + 1))
    closed = [independent_radiators_entropy(specs, n) for n in ns]
    cols: dict[str, Any] = {"n": ns}
    for i, s in enumerate(specs):
        cols[f"radiator{i}_closed"] = [radiator_entropy_closed(s, n) for n in ns]
    cols["entropy_closed"] = closed
    disc = None
    if len(specs) <= MAX_JOINT_RADIATORS:
        brute = joint_radiators_entropy(specs, cfg.steps).tolist()
        gap = _gap(brute, closed)
        cols["entropy_bruteforce"] = brute
        cols["discrepancy"] = gap
        disc = max(gap)
    return _series(cols, cfg.as_dict(), cfg.hex_floats, disc)


_RUNNERS = {
    "single_decay": _run_single_decay,
    "shadow": _run_shadow,
    "statistics": _run_statistics,
    "residual": _run_residual,
    "asymptotic": _run_asymptotic,
    "pinch": _run_pinch,
    "demon": _run_demon,
    "radiators": _run_radiators,
}


def reproduce_figure(which: str) -> SeriesOutput:
    if which == "fig1":
        ts = [k / 100 for k in range(1001)]
        cent = [cent_continuum(t) for t in ts]
        ref = [binary_entropy(2.0 ** (-t)) for t in ts]
        gap = _gap(cent, ref)
        return _series({"t": ts, "entropy": cent, "binary_entropy": ref, "discrepancy": gap},
                       {"figure": "fig1"}, discrepancy=max(gap))
    if which == "fig2":
        out = run_scenario(ScenarioConfig("shadow", q=0.95, steps=150))
        out.metadata["scenario"] = {"figure": "fig2", **out.metadata["scenario"]}
        return out
    if which == "fig3":
        out = run_scenario(ScenarioConfig("statistics", q=0.9, steps=60))
        out.metadata["scenario"] = {"figure": "fig3", **out.metadata["scenario"]}
        return out
    raise ValueError(f"unknown figure {which!r}; expected fig1, fig2 or fig3")


# --------------------------------------------------------------------------- #
#                                  emission                                   #
# --------------------------------------------------------------------------- #

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _json_value(v):
    if isinstance(v, float):
        return float(format(v, ".12g"))
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def format_output(output: SeriesOutput, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(output.columns)
        w.writerow(names)
        for row in zip(*(output.columns[n] for n in names)):
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        doc = {"metadata": _json_value(output.metadata),
               "columns": {k: _json_value(v) for k, v in output.columns.items()}}
        return json.dumps(doc, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit(output: SeriesOutput, fmt: str = "csv", destination: Optional[str] = None) -> None:
    """Write to ``destination`` atomically, or to stdout when it is None or '-'."""
    text = format_output(output, fmt)
    if destination in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(destination))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(destination))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, destination)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
