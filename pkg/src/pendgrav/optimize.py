"""Bounded derivative-free search over experiment parameters.

Nelder-Mead on the unit cube (log-scaled axes where requested), restarted
from seeded random points inside the bounds. Constraint violations and
non-finite objectives get a large penalty and are flagged in the trace;
the best point is only ever taken from feasible, finite evaluations.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .config import SystemConfig, apply_overrides
from .errors import OptimizationError, PendgravError
from .gravity import analytic_snr, rms_displacement_closed_form

PENALTY = 1e30


@dataclass(frozen=True)
class Parameter:
    name: str
    lower: float
    upper: float
    scale: str = "linear"

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError(f"{self.name}: bounds must be finite")
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower bound must be below upper bound")
        if self.scale not in ("linear", "logarithmic"):
            raise ValueError(f"{self.name}: scale must be 'linear' or 'logarithmic'")
        if self.scale == "logarithmic" and self.lower <= 0:
            raise ValueError(f"{self.name}: logarithmic bounds must be positive")

    def from_unit(self, u: float) -> float:
        u = min(max(u, 0.0), 1.0)
        if self.scale == "logarithmic":
            lo, hi = math.log(self.lower), math.log(self.upper)
            value = math.exp(lo + u * (hi - lo))
        else:
            value = self.lower + u * (self.upper - self.lower)
        return min(max(value, self.lower), self.upper)


@dataclass(frozen=True)
class SearchSpace:
    parameters: Tuple[Parameter, ...]
    constraints: Tuple[Tuple[str, Callable[[Dict[str, float]], bool]], ...] = ()

    @property
    def dimension(self) -> int:
        return len(self.parameters)

    def point(self, unit) -> Dict[str, float]:
        return {p.name: p.from_unit(float(u)) for p, u in zip(self.parameters, unit)}

    def violations(self, point: Mapping[str, float]) -> List[str]:
        return [name for name, pred in self.constraints if not pred(dict(point))]


@dataclass
class TraceEntry:
    point: Dict[str, float]
    objective: float
    penalized: bool = False
    note: str = ""


@dataclass
class SearchResult:
    best_point: Dict[str, float]
    best_objective: float
    evaluations: int
    trace: List[TraceEntry] = field(default_factory=list)

    def best_so_far(self) -> np.ndarray:
        """Running maximum of the feasible objective over the trace."""
        vals = np.array([-np.inf if e.penalized else e.objective for e in self.trace])
        return np.maximum.accumulate(vals)

    def trace_csv(self) -> str:
        names = list(self.best_point)
        buf = io.StringIO()
        buf.write(",".join(["evaluation"] + names + ["objective", "best_so_far", "penalized"]) + "\n")
        best = self.best_so_far()
        for i, (entry, b) in enumerate(zip(self.trace, best)):
            row = [str(i)] + [f"{entry.point[n]:.9e}" for n in names]
            row += [f"{entry.objective:.9e}", f"{b:.9e}", str(int(entry.penalized))]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def optimize(
    objective: Callable[[Dict[str, float]], float],
    space: SearchSpace,
    budget: int = 400,
    seed: int = 0,
    starts: int = 4,
) -> SearchResult:
    """Maximise ``objective`` over ``space`` with at most ``budget`` evaluations."""
    d = space.dimension
    if d == 0:
        raise ValueError("search space has no parameters")
    if budget < d + 2:
        raise ValueError(f"budget must be at least dimension + 2 = {d + 2}")
    rng = np.random.default_rng(seed)
    trace: List[TraceEntry] = []
    best = {"value": -math.inf, "point": None}

    def evaluate(unit):
        if len(trace) >= budget:
            raise _BudgetExhausted
        point = space.point(unit)
        broken = space.violations(point)
        if broken:
            trace.append(TraceEntry(point, -PENALTY, True, "violates " + ";".join(broken)))
            return PENALTY
        try:
            value = float(objective(point))
        except PendgravError as exc:
            trace.append(TraceEntry(point, -PENALTY, True, f"invalid: {exc}"))
            return PENALTY
        if not math.isfinite(value):
            trace.append(TraceEntry(point, -PENALTY, True, "non-finite objective"))
            return PENALTY
        trace.append(TraceEntry(point, value))
        if value > best["value"]:
            best.update(value=value, point=point)
        return -value

    starts = max(1, min(starts, budget // (d + 2)))
    per_start = budget // starts
    x0s = [_feasible_start(space, rng, np.full(d, 0.5))]
    x0s += [_feasible_start(space, rng, rng.uniform(0.0, 1.0, d)) for _ in range(starts - 1)]
    for x0 in x0s:
        remaining = budget - len(trace)
        if remaining < d + 1:
            break
        try:
            minimize(
                evaluate,
                x0,
                method="Nelder-Mead",
                bounds=[(0.0, 1.0)] * d,
                options={
                    "maxfev": min(per_start, remaining),
                    "xatol": 1e-10,
                    "fatol": 1e-14,
                    "adaptive": d > 2,
                    "initial_simplex": _initial_simplex(x0),
                },
            )
        except _BudgetExhausted:
            break
    if best["point"] is None:
        raise OptimizationError("objective was never finite and feasible at any start")
    return SearchResult(best["point"], best["value"], len(trace), trace)


class _BudgetExhausted(Exception):
    pass


def _feasible_start(space, rng, x0, tries=1000):
    """``x0`` if it meets the constraints, else a random point that does.

    Only the cheap constraint predicates are checked, so this uses none of
    the evaluation budget. Falls back to ``x0`` if nothing feasible is drawn.
    """
    x = x0
    for _ in range(tries):
        if not space.violations(space.point(x)):
            return x
        x = rng.uniform(0.0, 1.0, x0.size)
    return x0


def _initial_simplex(x0, step=0.25):
    d = x0.size
    simplex = np.tile(x0, (d + 1, 1))
    for i in range(d):
        simplex[i + 1, i] = x0[i] + step if x0[i] + step <= 1.0 else x0[i] - step
    return simplex


def snr_objective(config: SystemConfig, overrides: Mapping[str, float], integration_time=1.0) -> float:
    """Analytic gravity SNR for ``config`` with dotted-key ``overrides``.

    Resonant drive (closed-form signal) against the analytic budget at the
    trap frequency. Overrides that break a config invariant return
    ``-inf`` so the optimiser penalises and flags them.
    """
    try:
        cfg = apply_overrides(config, overrides)
        return analytic_snr(cfg, integration_time, signal="closed_form")
    except (PendgravError, ValueError):
        return -math.inf


def closed_form_objective(config: SystemConfig, overrides: Mapping[str, float]) -> float:
    """Resonant signal displacement (m) for ``config`` with ``overrides``."""
    try:
        cfg = apply_overrides(config, overrides)
    except (PendgravError, ValueError):
        return -math.inf
    derived = cfg.derive()
    return rms_displacement_closed_form(cfg.source, derived.effective_quality, derived.trapped_frequency)


OBJECTIVES = {"snr": snr_objective, "closed-form": closed_form_objective}


def default_constraints(config: SystemConfig) -> Sequence[Tuple[str, Callable]]:
    """Geometric and stability constraints for dotted-key points."""

    def no_collision(p):
        d0 = p.get("source.mean_separation_m", config.source.mean_separation)
        ds = p.get("source.drive_amplitude_m", config.source.drive_amplitude)
        return d0 > ds

    def stable(p):
        k = p.get("cavity.optical_stiffness_n_m")
        return k is None or k > -config.pendulum.stiffness

    return (("no_collision", no_collision), ("stable_trap", stable))
