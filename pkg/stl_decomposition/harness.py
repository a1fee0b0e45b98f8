"""
DECOMPOSITION PIPELINE
graphs -> consistency classification -> input conflict validation ->
decomposition index -> assembly -> solve -> extraction -> verification

Also hosts the soundness oracle (sampled witnesses of the Minkowski-sum
inclusion plus one synthesized piecewise-linear signal) and the lint used by
the check command.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import networkx as nx
import numpy as np

from . import conic, solver
from .assembly import DecompositionProblem, assemble
from .config import ABS_TOL, SolverConfig, VerifyConfig
from .conflicts import ConflictReport, detect_conflicts_static, detect_graph_conflicts, oriented_tasks
from .errors import (InfeasibleDecompositionError, InputConflictError, ScenarioError, SolverError,
                     SoundnessViolationError)
from .geometry import Polytope, common_point, inclusion_check, minkowski_sum_similar
from .graphs import (DecompositionIndex, GraphPair, build_decomposition_index, build_graphs,
                     canonical, communication_consistent, is_acyclic)
from .scenario import Scenario, load_scenario
from .solver import ConicSolution, DecomposedTask, Extraction, extract_tasks
from .tasks import Operator, Signal, TaskSpec, robustness_conjunction

logger = logging.getLogger(__name__)

WITNESS_TOL = 1e-9


# ============================================================================
# REPORTS
# ============================================================================


@dataclass
class TaskVerification:
    key: int
    task: str
    accuracy: float
    inclusion_residual: float
    passed: int
    total: int

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


@dataclass
class VerificationReport:
    tasks: List[TaskVerification] = field(default_factory=list)
    conflict_free: bool = True
    consistent: bool = True
    edges_in_comm: bool = True
    witness_signal: Dict = field(default_factory=dict)
    conflicts: Optional[ConflictReport] = None

    @property
    def samples_ok(self) -> bool:
        return all(t.passed == t.total for t in self.tasks)

    @property
    def ok(self) -> bool:
        return (self.samples_ok and self.conflict_free and self.consistent and self.edges_in_comm
                and self.witness_signal.get("implication", True))

    def to_dict(self) -> Dict:
        return {
            "ok": self.ok,
            "tasks": [t.to_dict() for t in self.tasks],
            "conflict_free": self.conflict_free,
            "consistent": self.consistent,
            "edges_in_comm": self.edges_in_comm,
            "witness_signal": self.witness_signal,
            "conflicts": self.conflicts.to_dict() if self.conflicts else None,
        }


@dataclass
class DecompositionResult:
    scenario: Scenario
    graphs: GraphPair
    index: DecompositionIndex
    config: SolverConfig
    extraction: Extraction
    verification: VerificationReport
    problem: Optional[DecompositionProblem] = None
    solution: Optional[ConicSolution] = None

    @property
    def psi_bar(self) -> List[TaskSpec]:
        return self.extraction.psi_bar


# ============================================================================
# SAMPLING ORACLE
# ============================================================================


def sample_polytope(P: Polytope, rng: np.random.Generator, count: int,
                    max_rejections: int = 10000) -> np.ndarray:
    """
    Points of P: rejection sampling over the vertex bounding box, topped up
    with random convex combinations of the vertices.
    """
    V = P.vertices
    lo, hi = V.min(axis=0), V.max(axis=0)
    if np.all(hi - lo <= 1e-12):
        return np.repeat(lo[None, :], count, axis=0)
    kept: List[np.ndarray] = []
    have = 0
    rejected = 0
    while have < count and rejected < max_rejections:
        batch = rng.uniform(lo, hi, size=(count, P.n))
        inside = np.all(batch @ P.A.T <= P.b, axis=1)
        take = batch[inside][:count - have]
        kept.append(take)
        have += len(take)
        rejected += int(np.count_nonzero(~inside))
    if have < count:
        weights = rng.dirichlet(np.ones(len(V)), size=count - have)
        kept.append(weights @ V)
    return np.vstack(kept)


def _pinned_time(task: TaskSpec) -> float:
    """Time at which the witness signal meets an Eventually task."""
    return task.sync_time if task.sync_time is not None else task.interval.midpoint


def _witness_signal(psi_bar: List[TaskSpec], graphs: GraphPair) -> Optional[Signal]:
    """
    Piecewise-linear signal meeting every collaborative task of psi_bar on the
    communication tree: one deepest common point per edge and breakpoint.
    """
    collab = [t for t in psi_bar if not t.is_independent]
    times = {0.0}
    for t in collab:
        times.update((t.interval.a, t.interval.b))
    times.update(_pinned_time(t) for t in collab if t.operator is Operator.EVENTUALLY)
    times = np.array(sorted(times))
    if times.size < 2:
        times = np.array([0.0, 1.0])

    by_edge: Dict = {}
    for t in collab:
        by_edge.setdefault(canonical(t.edge), []).append(t)
    n = graphs.selection.shape[1]
    rel: Dict = {}
    for e in (canonical(x) for x in graphs.comm.edges):
        tasks = oriented_tasks(by_edge.get(e, []), e)
        points = []
        last = np.zeros(n)
        for tau in times:
            active = [t.truth_set_now() for t in tasks
                      if (t.operator is Operator.ALWAYS and t.interval.contains_time(tau))
                      or (t.operator is Operator.EVENTUALLY and abs(_pinned_time(t) - tau) <= 1e-9)]
            if active:
                res = common_point(active)
                if not res.feasible:
                    return None
                last = res.witness
            points.append(last)
        rel[e] = np.array(points)

    root = min(graphs.agents)
    positions = {root: np.zeros((times.size, n))}
    for u, v in nx.bfs_edges(graphs.comm, root, sort_neighbors=sorted):
        e = rel[canonical((u, v))]
        positions[v] = positions[u] + (e if u < v else -e)
    return Signal.from_waypoints(times, positions)


def verify_implication(decomposed: List[DecomposedTask], samples: int = 10000, seed: int = 0,
                       max_rejections: int = 10000, graphs: Optional[GraphPair] = None,
                       psi: Optional[List[TaskSpec]] = None,
                       psi_bar: Optional[List[TaskSpec]] = None,
                       strict: bool = True) -> VerificationReport:
    """
    Sample one point per part, chain them along the path and require the sum
    inside the original truth set; optionally check one synthesized signal.

    Raises:
        SoundnessViolationError: (strict) any sample or the signal check failed
    """
    rng = np.random.default_rng(seed)
    report = VerificationReport()
    for d in decomposed:
        original = d.task.truth_set
        total = np.zeros((samples, original.n))
        for part in d.parts:
            total += sample_polytope(part.truth_set_now(), rng, samples, max_rejections)
        h = np.min(original.z[None, :] - (total - original.c[None, :]) @ original.A.T, axis=1)
        base = original.base()
        summed = minkowski_sum_similar(base, [p.param for p in d.parts])
        residual = float(np.max(inclusion_check(summed, original).residual))
        report.tasks.append(TaskVerification(
            key=d.key, task=d.task.label, accuracy=d.accuracy, inclusion_residual=residual,
            passed=int(np.count_nonzero(h >= -WITNESS_TOL)), total=samples))

    if graphs is not None and psi is not None and psi_bar is not None:
        sig = _witness_signal(psi_bar, graphs)
        if sig is None:
            report.witness_signal = {"built": False}
        else:
            collab_bar = [t for t in psi_bar if not t.is_independent]
            collab = [t for t in psi if not t.is_independent]
            r_bar = robustness_conjunction(sig, collab_bar) if collab_bar else 0.0
            r = robustness_conjunction(sig, collab) if collab else 0.0
            report.witness_signal = {
                "built": True,
                "robustness_psi_bar": r_bar,
                "robustness_psi": r,
                "implication": not (r_bar >= -WITNESS_TOL and r < -WITNESS_TOL),
            }

    failed = [t for t in report.tasks if t.passed < t.total]
    if strict and (failed or not report.witness_signal.get("implication", True)):
        raise SoundnessViolationError(
            f"{len(failed)} decomposed tasks failed the witness test",
            {"tasks": [t.to_dict() for t in failed], "witness_signal": report.witness_signal})
    return report


def check_rewritten(psi_bar: List[TaskSpec], graphs: GraphPair, report: VerificationReport,
                    settings=None) -> VerificationReport:
    """Communication edges, consistency and conflict freedom of the rewritten task set."""
    by_edge: Dict = {}
    for t in psi_bar:
        if t.is_independent:
            continue
        if not graphs.has_comm_edge(*t.edge):
            report.edges_in_comm = False
        elif not communication_consistent(t, graphs, settings):
            report.consistent = False
        by_edge.setdefault(canonical(t.edge), []).append(t)
    conflicts = ConflictReport()
    for e, tasks in sorted(by_edge.items()):
        conflicts.extend(detect_conflicts_static(oriented_tasks(tasks, e), e))
    report.conflicts = conflicts
    report.conflict_free = conflicts.ok
    return report


# ============================================================================
# PIPELINE
# ============================================================================


def _isolated_status(graphs: GraphPair, index: DecompositionIndex, key: int,
                     config: SolverConfig) -> Dict:
    item = index.items[key]
    single = DecompositionIndex(K=dict(index.K))
    single.items = [item.__class__(key=0, task=item.task, path=item.path, edges=item.edges)]
    for rs in item.edges:
        single.Pi[canonical(rs)] = [0]
    single.E_pi = sorted(single.Pi)
    single.y_Pi = {rs: {0: single.K.get(rs, 0)} for rs in single.E_pi}
    sol = solver.solve_centralized(assemble(graphs, single, config), config)
    out = {"task": item.task.label, "path": item.path, "status": sol.status}
    if sol.status == conic.OPTIMAL:
        out["accuracy"] = -sol.objective
    return out


def infeasibility_diagnostic(graphs: GraphPair, index: DecompositionIndex,
                             config: SolverConfig) -> Dict:
    """Solve each decomposed task alone to locate the ones that cannot fit."""
    per_task = [_isolated_status(graphs, index, item.key, config) for item in index.items]
    return {"tasks": per_task,
            "infeasible_alone": [t["task"] for t in per_task if t["status"] == conic.INFEASIBLE]}


def _raise_infeasible(graphs, index, config):
    diag = infeasibility_diagnostic(graphs, index, config)
    culprits = ", ".join(diag["infeasible_alone"]) or "only jointly"
    raise InfeasibleDecompositionError(f"decomposition program is infeasible ({culprits})", diag)


def decompose(scenario: Scenario, config: Optional[SolverConfig] = None,
              verify: Optional[VerifyConfig] = None) -> DecompositionResult:
    """
    Full pipeline on one scenario.

    Raises:
        InputConflictError: the input task graph has conflicting conjunctions
        InfeasibleDecompositionError: no valid decomposition exists
        SolverError: numerical failure or no valid decentralized iterate
    """
    config = config or scenario.solver
    verify = verify or scenario.verify
    graphs = build_graphs(scenario.agents, scenario.tasks, scenario.radius, scenario.tokens)
    input_report = detect_graph_conflicts(graphs)
    if not input_report.ok:
        raise InputConflictError(f"input task graph has {len(input_report.conflicts)} conflicting conjunctions",
                                 {"report": input_report.to_dict()})
    index = build_decomposition_index(graphs, config.conic)

    problem = solution = None
    if index.empty:
        logger.info("every collaborative task is communication consistent; nothing to decompose")
        extraction = Extraction(psi_bar=list(scenario.tasks), decomposed=[])
    else:
        problem = assemble(graphs, index, config)
        solution = solver.solve(problem, config)
        if solution.status == conic.INFEASIBLE:
            _raise_infeasible(graphs, index, config)
        if config.mode == "centralized" and solution.status != conic.OPTIMAL:
            raise SolverError(f"centralized solve ended with status {solution.status}", solution.summary())
        if config.mode == "decentralized" and solution.max_rho > config.rho_tol:
            prog, _, _ = solver.centralized_program(problem)
            x, _ = conic.find_interior_point(prog, config.conic)
            if x is None:
                _raise_infeasible(graphs, index, config)
            raise SolverError("decentralized run ended without a valid decomposition", solution.summary())
        extraction = extract_tasks(solution, problem, config.rho_tol)

    report = verify_implication(extraction.decomposed, verify.samples, scenario.seed,
                                verify.max_rejections, graphs, scenario.tasks, extraction.psi_bar)
    check_rewritten(extraction.psi_bar, graphs, report, config.conic)
    if not report.ok:
        raise SoundnessViolationError("rewritten task set failed verification", report.to_dict())
    return DecompositionResult(scenario=scenario, graphs=graphs, index=index, config=config,
                               extraction=extraction, verification=report,
                               problem=problem, solution=solution)


@dataclass
class LintReport:
    acyclic: bool
    comm_edges: List
    inconsistent: List[str]
    conflicts: ConflictReport

    @property
    def ok(self) -> bool:
        return self.acyclic and self.conflicts.ok

    def to_dict(self) -> Dict:
        return {"ok": self.ok, "acyclic": self.acyclic, "comm_edges": [list(e) for e in self.comm_edges],
                "inconsistent": self.inconsistent, "conflicts": self.conflicts.to_dict()}


def lint(scenario: Scenario) -> LintReport:
    """Consistency, acyclicity and conflicts of the input, without solving."""
    graphs = build_graphs(scenario.agents, scenario.tasks, scenario.radius, scenario.tokens)
    inconsistent = [t.label for t in scenario.tasks
                    if not communication_consistent(t, graphs, scenario.solver.conic)]
    return LintReport(acyclic=is_acyclic(graphs.comm.edges), comm_edges=graphs.comm_edges,
                      inconsistent=inconsistent, conflicts=detect_graph_conflicts(graphs))


def verify_directory(out_dir, samples: Optional[int] = None,
                     seed: Optional[int] = None) -> VerificationReport:
    """Re-run the soundness oracle on a result directory written by emit_reports."""
    out_dir = Path(out_dir)
    data = json.loads((out_dir / "decomposition.json").read_text())
    if not data.get("scenario"):
        raise ScenarioError(f"{out_dir} was written from an in-memory scenario",
                            [f"{out_dir / 'decomposition.json'}: scenario path is missing"])
    scenario = load_scenario(data["scenario"])
    graphs = build_graphs(scenario.agents, scenario.tasks, scenario.radius, scenario.tokens)
    decomposed = [DecomposedTask.from_dict(d) for d in data["decomposed"]]
    psi_bar = [TaskSpec.from_dict(t) for t in data["psi_bar"]]
    report = verify_implication(
        decomposed,
        samples if samples is not None else scenario.verify.samples,
        seed if seed is not None else scenario.seed,
        scenario.verify.max_rejections, graphs, scenario.tasks, psi_bar)
    return check_rewritten(psi_bar, graphs, report, scenario.solver.conic)
