"""
CONFLICTING CONJUNCTIONS
Interval families over the tasks of one edge, their maximal and minimal
representatives, the conflict-constraint index used by the optimizer, and
detectors for conflicts on single edges and on cycles of the task graph.

Tasks are referred to by their position in the edge's task list. All truth
sets passed to the detectors must be expressed in one orientation of the edge.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set

from .config import INTERVAL_TOL, MAX_ALWAYS_TASKS
from .errors import CapacityError, ContractViolation
from .geometry import common_point, origin_in_minkowski_sum
from .graphs import GraphPair, canonical, task_graph_cycles
from .tasks import Operator, TaskSpec, interval_intersection, union_covers

logger = logging.getLogger(__name__)

IndexSet = FrozenSet[int]


def _order(sets: Iterable[IndexSet]) -> List[IndexSet]:
    return sorted(set(sets), key=lambda s: (len(s), tuple(sorted(s))))


def _subsets(indices: Sequence[int]):
    for size in range(1, len(indices) + 1):
        for combo in itertools.combinations(indices, size):
            yield frozenset(combo)


# ============================================================================
# FAMILIES
# ============================================================================


@dataclass
class OperatorPartition:
    always: List[int]
    eventually: List[int]


def partition_operators(tasks: Sequence[TaskSpec]) -> OperatorPartition:
    always = [k for k, t in enumerate(tasks) if t.operator is Operator.ALWAYS]
    eventually = [k for k, t in enumerate(tasks) if t.operator is Operator.EVENTUALLY]
    return OperatorPartition(always, eventually)


@dataclass
class ConflictFamilies:
    """
    L: Always sets with a common time; L_max its maximal members
    C / C_min: per Eventually task d, Always sets whose union covers d's interval
    D / D_max: per Eventually task d, Always sets all active over d's interval
    Q: sets the conflict constraints are imposed on
    y_Q: constrained member of Q -> auxiliary variable index
    """
    partition: OperatorPartition
    L: List[IndexSet] = field(default_factory=list)
    L_max: List[IndexSet] = field(default_factory=list)
    C: Dict[int, List[IndexSet]] = field(default_factory=dict)
    C_min: Dict[int, List[IndexSet]] = field(default_factory=dict)
    D: Dict[int, List[IndexSet]] = field(default_factory=dict)
    D_max: Dict[int, List[IndexSet]] = field(default_factory=dict)
    Q: List[IndexSet] = field(default_factory=list)
    y_Q: Dict[IndexSet, int] = field(default_factory=dict)

    @property
    def constrained(self) -> List[IndexSet]:
        return sorted(self.y_Q, key=self.y_Q.get)

    @property
    def xi_count(self) -> int:
        return len(self.y_Q)


def _maximal(family: List[IndexSet]) -> List[IndexSet]:
    # family is closed under taking subsets
    members = set(family)
    universe = frozenset().union(*members) if members else frozenset()
    return _order(s for s in members if all(s | {k} not in members for k in universe - s))


def _minimal(family: List[IndexSet]) -> List[IndexSet]:
    # family is closed under adding overlapping members
    members = set(family)
    return _order(s for s in members if all(s - {k} not in members for k in s))


def build_families(tasks: Sequence[TaskSpec], parametric: Optional[Iterable[int]] = None,
                   tol: float = INTERVAL_TOL) -> ConflictFamilies:
    """
    Enumerate the interval families of one edge and the constraint index.

    Args:
        tasks: tasks on the edge (intervals already pinned for decomposed
            Eventually tasks)
        parametric: indices whose truth sets are decision variables; sets of Q
            without one of them are dropped (None treats every task as one)

    Raises:
        CapacityError: more Always tasks than the enumeration cap
    """
    part = partition_operators(tasks)
    if len(part.always) > MAX_ALWAYS_TASKS:
        raise CapacityError(f"{len(part.always)} Always tasks on one edge, cap is {MAX_ALWAYS_TASKS}")
    free: Set[int] = set(range(len(tasks))) if parametric is None else set(parametric)
    fam = ConflictFamilies(partition=part)
    iv = [t.interval for t in tasks]

    fam.L = _order(s for s in _subsets(part.always)
                   if interval_intersection([iv[k] for k in s], tol) is not None)
    fam.L_max = _maximal(fam.L)

    for d in part.eventually:
        target = iv[d]
        touching = [k for k in part.always if iv[k].overlaps(target, tol)]
        covers = [s for s in _subsets(touching) if union_covers([iv[k] for k in s], target, tol)]
        fam.C[d] = _order(covers)
        fam.C_min[d] = _minimal(covers)
        holding = [k for k in part.always if iv[k].contains(target, tol)]
        fam.D[d] = _order(_subsets(holding))
        fam.D_max[d] = _maximal(fam.D[d])

    q_sets: List[IndexSet] = []
    for d in part.eventually:
        for C in fam.C_min[d]:
            q_sets.extend(frozenset((d, l)) for l in C)
        q_sets.extend(frozenset({d}) | D for D in fam.D_max[d])
    q_sets.extend(fam.L_max)
    fam.Q = [s for s in _order(q_sets) if s & free]
    fam.y_Q = {s: q for q, s in enumerate(s for s in fam.Q if len(s) > 1)}
    return fam


# ============================================================================
# DETECTORS
# ============================================================================


@dataclass
class Conflict:
    kind: str
    edge: tuple
    tasks: List[str]
    detail: str = ""

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "edge": list(self.edge), "tasks": self.tasks, "detail": self.detail}


@dataclass
class ConflictReport:
    conflicts: List[Conflict] = field(default_factory=list)
    checked_edges: int = 0
    checked_cycles: int = 0

    @property
    def ok(self) -> bool:
        return not self.conflicts

    def extend(self, other: "ConflictReport") -> None:
        self.conflicts.extend(other.conflicts)
        self.checked_edges += other.checked_edges
        self.checked_cycles += other.checked_cycles

    def to_dict(self) -> Dict:
        return {"ok": self.ok, "checked_edges": self.checked_edges,
                "checked_cycles": self.checked_cycles,
                "conflicts": [c.to_dict() for c in self.conflicts]}


def _meet(tasks: Sequence[TaskSpec], indices: Iterable[int]) -> bool:
    return common_point([tasks[k].truth_set_now() for k in indices]).feasible


def detect_conflicts_static(tasks: Sequence[TaskSpec], edge=None) -> ConflictReport:
    """Single-edge conflicts among tasks with concrete truth sets."""
    if not tasks:
        return ConflictReport(checked_edges=1)
    edge = tuple(edge) if edge is not None else tuple(tasks[0].edge)
    fam = build_families(tasks)
    report = ConflictReport(checked_edges=1)

    def names(s):
        return [tasks[k].label for k in sorted(s)]

    for k, task in enumerate(tasks):
        if not _meet(tasks, [k]):
            report.conflicts.append(Conflict("empty_truth_set", edge, [task.label]))
    for L in fam.L_max:
        if len(L) > 1 and not _meet(tasks, L):
            report.conflicts.append(Conflict(
                "always_overlap", edge, names(L),
                "Always tasks active together have disjoint truth sets"))
    for d in fam.partition.eventually:
        for C in fam.C_min[d]:
            if not any(_meet(tasks, [d, l]) for l in C):
                report.conflicts.append(Conflict(
                    "eventually_covered", edge, names(C | {d}),
                    f"{tasks[d].label} meets none of the Always tasks covering its interval"))
        for D in fam.D_max[d]:
            if not _meet(tasks, D | {d}):
                report.conflicts.append(Conflict(
                    "eventually_inside", edge, names(D | {d}),
                    f"{tasks[d].label} misses the common truth set of the Always tasks holding over it"))
    return report


def detect_cycle_conflicts(cycle: Sequence[int], tasks: Sequence[TaskSpec]) -> ConflictReport:
    """
    Conflicts along a cycle of the task graph, one task per cycle edge.

    Args:
        cycle: agents [v0, ..., v_{k-1}]; edge k joins v_k and v_{k+1 mod len}
        tasks: task of each cycle edge, in either orientation

    The chained relative states sum to zero around the cycle, so the tasks
    conflict when they must hold at a common time and 0 is not in the
    Minkowski sum of their truth sets (oriented along the cycle).
    """
    k = len(cycle)
    if k < 3 or len(tasks) != k:
        raise ContractViolation(f"cycle of {k} agents needs {k} tasks, got {len(tasks)}")
    oriented = []
    for pos, task in enumerate(tasks):
        u, v = cycle[pos], cycle[(pos + 1) % k]
        if task.edge == (u, v):
            oriented.append(task)
        elif task.edge == (v, u):
            oriented.append(task.reversed())
        else:
            raise ContractViolation(f"task {task.label} is not on cycle edge {(u, v)}")

    report = ConflictReport(checked_cycles=1)
    eventually = [t for t in oriented if t.operator is Operator.EVENTUALLY]
    always = [t for t in oriented if t.operator is Operator.ALWAYS]
    if len(eventually) > 1:
        raise ContractViolation("cycle check takes at most one Eventually task")
    if eventually:
        window = interval_intersection([t.interval for t in always]) if always else None
        timed = window is not None and window.contains(eventually[0].interval)
        kind = "cycle_eventually"
    else:
        timed = interval_intersection([t.interval for t in always]) is not None
        kind = "cycle_always"
    if not timed:
        return report
    if not origin_in_minkowski_sum([t.truth_set_now().vertices for t in oriented]):
        report.conflicts.append(Conflict(
            kind, tuple(cycle), [t.label for t in tasks],
            "relative states around the cycle cannot sum to zero"))
    return report


def oriented_tasks(tasks: Sequence[TaskSpec], edge) -> List[TaskSpec]:
    """Tasks expressed along the given orientation of their common edge."""
    edge = tuple(edge)
    return [t if t.edge == edge else t.reversed() for t in tasks]


def detect_graph_conflicts(graphs: GraphPair) -> ConflictReport:
    """Run the single-edge detector on every task edge and the cycle detector on every task-graph cycle."""
    report = ConflictReport()
    for edge, tasks in sorted(graphs.task_edges.items()):
        if edge[0] == edge[1]:
            continue
        report.extend(detect_conflicts_static(oriented_tasks(tasks, edge), edge))

    for cycle in task_graph_cycles(graphs):
        per_edge = []
        for pos in range(len(cycle)):
            u, v = cycle[pos], cycle[(pos + 1) % len(cycle)]
            per_edge.append(graphs.task_edges[canonical((u, v))])
        for combo in itertools.product(*per_edge):
            if sum(t.operator is Operator.EVENTUALLY for t in combo) > 1:
                continue
            report.extend(detect_cycle_conflicts(cycle, list(combo)))
    if not report.ok:
        logger.warning("%d conflicting conjunctions found", len(report.conflicts))
    return report
