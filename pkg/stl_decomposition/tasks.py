"""
STL TASK FRAGMENT
Always / Eventually tasks over polytopic predicates, robust semantics,
and the interval algebra used by conflict detection.

A task bound to the edge (i, j) constrains the relative state
e_ij = x_j - x_i; a task bound to (i, i) constrains agent i alone.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import INTERVAL_TOL
from .errors import ContractViolation, HorizonError
from .geometry import Polytope, SimilarityParam

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


class Operator(str, Enum):
    ALWAYS = "G"
    EVENTUALLY = "F"


# ============================================================================
# INTERVALS
# ============================================================================


@dataclass(frozen=True)
class TimeInterval:
    """Closed interval [a, b] in hours."""
    a: float
    b: float

    def __post_init__(self):
        if not (0 <= self.a <= self.b):
            raise ContractViolation(f"invalid time interval [{self.a}, {self.b}]")

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.a + self.b)

    def overlaps(self, other: "TimeInterval", tol: float = INTERVAL_TOL) -> bool:
        return self.a <= other.b + tol and other.a <= self.b + tol

    def contains(self, other: "TimeInterval", tol: float = INTERVAL_TOL) -> bool:
        return self.a <= other.a + tol and other.b <= self.b + tol

    def contains_time(self, t: float, tol: float = INTERVAL_TOL) -> bool:
        return self.a - tol <= t <= self.b + tol

    def shifted(self, d: float) -> "TimeInterval":
        return TimeInterval(self.a + d, self.b + d)

    def __str__(self) -> str:
        return f"[{self.a:g},{self.b:g}]"


def interval_intersection(intervals: Sequence[TimeInterval],
                          tol: float = INTERVAL_TOL) -> Optional[TimeInterval]:
    """[max a, min b], or None when empty (touching intervals meet)."""
    if not intervals:
        raise ContractViolation("intersection of an empty interval family")
    lo = max(iv.a for iv in intervals)
    hi = min(iv.b for iv in intervals)
    if lo > hi + tol:
        return None
    return TimeInterval(lo, max(lo, hi))


def union_covers(intervals: Sequence[TimeInterval], target: TimeInterval,
                 tol: float = INTERVAL_TOL) -> bool:
    """
    Every member overlaps the target and the merged union contains it.
    """
    if not intervals:
        return False
    if not all(iv.overlaps(target, tol) for iv in intervals):
        return False
    reach = target.a
    for iv in sorted(intervals, key=lambda iv: (iv.a, iv.b)):
        if iv.a > reach + tol:
            return False
        reach = max(reach, iv.b)
        if reach >= target.b - tol:
            return True
    return reach >= target.b - tol


@dataclass
class IntervalSummary:
    intersection: Optional[TimeInterval]
    covers: Optional[bool]


def interval_ops(intervals: Sequence[TimeInterval],
                 target: Optional[TimeInterval] = None) -> IntervalSummary:
    covers = union_covers(intervals, target) if target is not None else None
    return IntervalSummary(interval_intersection(intervals), covers)


# ============================================================================
# TASKS
# ============================================================================


@dataclass
class TaskSpec:
    """
    One task of the fragment.

    For parametric tasks truth_set holds the base shape P(A, 0, z) and param
    the current [center; scale]; for fixed tasks param is [c; 1].
    """
    operator: Operator
    interval: TimeInterval
    edge: Edge
    truth_set: Polytope
    parametric: bool = False
    param: Optional[SimilarityParam] = None
    origin: Optional[Edge] = None
    sync_time: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        self.operator = Operator(self.operator)
        self.edge = (int(self.edge[0]), int(self.edge[1]))
        if self.parametric and self.param is None:
            raise ContractViolation(f"parametric task {self.label} has no parameter")
        if not self.parametric:
            self.param = self.truth_set.eta

    @property
    def label(self) -> str:
        return self.name or f"{self.operator.value}{self.interval} on {self.edge}"

    @property
    def is_independent(self) -> bool:
        return self.edge[0] == self.edge[1]

    @property
    def is_always(self) -> bool:
        return self.operator is Operator.ALWAYS

    def truth_set_now(self) -> Polytope:
        """Truth set with the current parameter applied."""
        if self.parametric:
            return self.truth_set.similar(self.param)
        return self.truth_set

    def instantiate(self, eta: SimilarityParam) -> "TaskSpec":
        """Fixed copy of a parametric task at eta."""
        if not self.parametric:
            raise ContractViolation(f"task {self.label} is not parametric")
        return replace(self, truth_set=self.truth_set.similar(eta), parametric=False, param=None)

    def reversed(self) -> "TaskSpec":
        """Same task seen along (j, i): e_ji = -e_ij."""
        if self.parametric:
            return replace(self, edge=(self.edge[1], self.edge[0]),
                           truth_set=self.truth_set.reflected(),
                           param=SimilarityParam(-self.param.center, self.param.scale))
        return replace(self, edge=(self.edge[1], self.edge[0]),
                       truth_set=self.truth_set.reflected(), param=None)

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "name": self.name,
            "operator": self.operator.value,
            "interval": [self.interval.a, self.interval.b],
            "edge": list(self.edge),
            "truth_set": self.truth_set_now().to_dict(),
        }
        if self.origin is not None:
            out["origin"] = list(self.origin)
        if self.sync_time is not None:
            out["sync_time"] = self.sync_time
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TaskSpec":
        return cls(
            operator=Operator(data["operator"]),
            interval=TimeInterval(*data["interval"]),
            edge=tuple(data["edge"]),
            truth_set=Polytope.from_dict(data["truth_set"]),
            origin=tuple(data["origin"]) if data.get("origin") else None,
            sync_time=data.get("sync_time"),
            name=data.get("name", ""),
        )


def rewrite_until(left: Polytope, right: Polytope, edge: Edge, a: float, b: float,
                  tau: float, name: str = "") -> List[TaskSpec]:
    """left U[a,b] right with a chosen switching time tau: G[a,tau] left and F[tau,tau] right."""
    window = TimeInterval(a, b)
    if not window.contains_time(tau):
        raise ContractViolation(f"switching time {tau} outside {window}")
    return [
        TaskSpec(Operator.ALWAYS, TimeInterval(a, tau), edge, left, name=f"{name}:hold" if name else ""),
        TaskSpec(Operator.EVENTUALLY, TimeInterval(tau, tau), edge, right,
                 sync_time=tau, name=f"{name}:reach" if name else ""),
    ]


def unroll_recurrence(task: TaskSpec, period: float, horizon: float) -> List[TaskSpec]:
    """Copies of task shifted by k * period that end inside the horizon."""
    if period <= 0:
        raise ContractViolation(f"period must be positive, got {period}")
    out = []
    k = 0
    while task.interval.b + k * period <= horizon + INTERVAL_TOL:
        suffix = f"#{k}" if task.name else ""
        out.append(replace(task, interval=task.interval.shifted(k * period),
                           name=task.name + suffix))
        k += 1
    if not out:
        raise HorizonError(f"task {task.label} does not fit a horizon of {horizon}")
    return out


# ============================================================================
# SIGNALS AND SEMANTICS
# ============================================================================


@dataclass
class Signal:
    """
    Piecewise-linear stacked agent positions.

    Args:
        times: strictly increasing sample times
        states: (T, N * n) stacked states, agent k occupying columns k*n:(k+1)*n
        agents: agent ids in stacking order; the state width must be a multiple of their count
    """
    times: np.ndarray
    states: np.ndarray
    agents: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).ravel()
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.shape[0] != self.times.size:
            raise ContractViolation("one state per time sample required")
        if np.any(np.diff(self.times) <= 0):
            raise ContractViolation("signal times must be strictly increasing")
        if not self.agents:
            raise ContractViolation("signal needs the agent ids of its state blocks")
        if self.states.shape[1] % len(self.agents):
            raise ContractViolation("state width is not a multiple of the agent count")
        self._slot = {a: k for k, a in enumerate(self.agents)}

    @property
    def dim(self) -> int:
        return self.states.shape[1] // len(self.agents)

    @property
    def horizon(self) -> Tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, col) for col in self.states.T])

    def agent(self, i: int, t) -> np.ndarray:
        k = self._slot[i]
        cols = self.states[:, k * self.dim:(k + 1) * self.dim]
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.column_stack([np.interp(t, self.times, col) for col in cols.T])

    def relative(self, i: int, j: int, t) -> np.ndarray:
        """e_ij(t) = x_j(t) - x_i(t); for i == j the state of agent i."""
        if i == j:
            return self.agent(i, t)
        return self.agent(j, t) - self.agent(i, t)

    @classmethod
    def from_waypoints(cls, times: Sequence[float], positions: Dict[int, Sequence]) -> "Signal":
        """positions maps agent id to one point per time."""
        agents = sorted(positions)
        states = np.hstack([np.atleast_2d(np.asarray(positions[a], dtype=float)) for a in agents])
        return cls(np.asarray(times, dtype=float), states, agents)


def _sample_times(sig: Signal, task: TaskSpec, t0: float, refinement: int) -> np.ndarray:
    lo, hi = t0 + task.interval.a, t0 + task.interval.b
    start, end = sig.horizon
    if lo < start - INTERVAL_TOL or hi > end + INTERVAL_TOL:
        raise HorizonError(f"task {task.label} needs [{lo:g},{hi:g}], signal covers [{start:g},{end:g}]")
    inside = sig.times[(sig.times > lo) & (sig.times < hi)]
    grid = np.linspace(lo, hi, max(refinement, 2)) if hi > lo else np.array([lo])
    return np.unique(np.concatenate([[lo, hi], inside, grid]))


def robustness(sig: Signal, task: TaskSpec, t0: float = 0.0, refinement: int = 100) -> float:
    """Robust satisfaction margin of one task at time t0."""
    times = _sample_times(sig, task, t0, refinement)
    P = task.truth_set_now()
    e = sig.relative(task.edge[0], task.edge[1], times)
    values = np.min(P.z[None, :] - (e - P.c[None, :]) @ P.A.T, axis=1)
    return float(np.min(values) if task.is_always else np.max(values))


def robustness_conjunction(sig: Signal, tasks: Sequence[TaskSpec], t0: float = 0.0,
                           refinement: int = 100) -> float:
    if not tasks:
        raise ContractViolation("conjunction of no tasks")
    return min(robustness(sig, task, t0, refinement) for task in tasks)


def satisfied(sig: Signal, task: TaskSpec, t0: float = 0.0, refinement: int = 100) -> bool:
    """Boolean semantics, evaluated point by point."""
    times = _sample_times(sig, task, t0, refinement)
    P = task.truth_set_now()
    inside = [bool(np.all(P.A @ (e - P.c) <= P.z))
              for e in sig.relative(task.edge[0], task.edge[1], times)]
    return all(inside) if task.is_always else any(inside)
