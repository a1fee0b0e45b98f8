"""
DECOMPOSITION SOLVERS
Centralized conic solve of the coupled program, the penalty-relaxed local
problem of one edge, the decentralized loop over the edge-computing graph,
and extraction of the rewritten tasks.

Decentralized rounds are bulk-synchronous: every node reads its neighbors'
consensus vectors, solves its local problem, and exchanges multipliers; local
solves of one round can run in a process pool without changing results.
"""

import logging
import multiprocessing as mp
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import conic
from .assembly import DecompositionProblem, EdgeProblem
from .config import ConicSettings, SolverConfig
from .conflicts import detect_conflicts_static, oriented_tasks
from .errors import ContractViolation, DivergenceError, SolverError
from .geometry import SimilarityParam
from .graphs import canonical
from .tasks import Edge, TaskSpec

logger = logging.getLogger(__name__)


# ============================================================================
# RESULTS
# ============================================================================


@dataclass
class TraceRecord:
    iteration: int
    edge: Edge
    rho: float
    sum_alpha: float
    max_shared_residual: float


@dataclass
class RoundSummary:
    iteration: int
    max_rho: float
    objective: float
    consensus_residual: float
    max_lambda_step: float
    global_residual: float


@dataclass
class ConicSolution:
    status: str
    chi: Dict[Edge, np.ndarray]
    rho: Dict[Edge, float]
    mu: Dict[Edge, np.ndarray]
    objective: float
    mode: str = "centralized"
    iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    traces: List[TraceRecord] = field(default_factory=list)
    rounds: List[RoundSummary] = field(default_factory=list)
    diagnostics: Dict = field(default_factory=dict)

    @property
    def max_rho(self) -> float:
        return max(self.rho.values(), default=0.0)

    def summary(self) -> Dict:
        return {
            "status": self.status,
            "mode": self.mode,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "max_rho": self.max_rho,
            "wall_time": self.wall_time,
        }


# ============================================================================
# PROGRAM BUILDERS
# ============================================================================


def _pad_cone(cone, width: int, offset: int):
    F, g, d, e = cone
    Fp = np.zeros((F.shape[0], width))
    Fp[:, offset:offset + F.shape[1]] = F
    dp = np.zeros(width)
    dp[offset:offset + d.size] = d
    return Fp, g, dp, e


def local_set_program(prob: EdgeProblem, cost: Optional[np.ndarray] = None) -> conic.ConicProgram:
    """The local set C_rs alone."""
    prog = conic.ConicProgram(prob.objective if cost is None else cost)
    prog.add_linear(prob.G, prob.h)
    for cone in prob.cones:
        prog.add_cone(*cone)
    return prog


def relaxed_local_program(prob: EdgeProblem, offset: np.ndarray, c_rho: float):
    """
    Variables (chi, rho): minimize f^T chi + c_rho rho over chi in C_rs,
    rho >= 0, T chi - rho 1 <= t - offset.

    Returns:
        (program, row slice of the relaxed coupling block)
    """
    dim = prob.chi_dim
    prog = conic.ConicProgram(np.concatenate([prob.objective, [c_rho]]))
    prog.add_linear(np.hstack([prob.G, np.zeros((prob.G.shape[0], 1))]), prob.h)
    rho_row = np.zeros((1, dim + 1))
    rho_row[0, -1] = -1.0
    prog.add_linear(rho_row, np.zeros(1))
    R = prob.T.shape[0]
    shared = prog.add_linear(np.hstack([prob.T, -np.ones((R, 1))]), prob.t - offset)
    for cone in prob.cones:
        prog.add_cone(*_pad_cone(cone, dim + 1, 0))
    return prog, shared


def centralized_program(problem: DecompositionProblem):
    """Stack every edge problem and the exact coupling constraint."""
    edges = problem.edges
    dims = [problem.edge_problems[rs].chi_dim for rs in edges]
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    width = int(offsets[-1])
    prog = conic.ConicProgram(np.concatenate([problem.edge_problems[rs].objective for rs in edges]))
    for k, rs in enumerate(edges):
        prob = problem.edge_problems[rs]
        G = np.zeros((prob.G.shape[0], width))
        G[:, offsets[k]:offsets[k + 1]] = prob.G
        prog.add_linear(G, prob.h)
        for cone in prob.cones:
            prog.add_cone(*_pad_cone(cone, width, offsets[k]))
    T = np.hstack([problem.edge_problems[rs].T for rs in edges])
    t = np.sum([problem.edge_problems[rs].t for rs in edges], axis=0)
    shared = prog.add_linear(T, t)
    return prog, shared, offsets


# ============================================================================
# CENTRALIZED
# ============================================================================


def solve_centralized(problem: DecompositionProblem,
                      config: Optional[SolverConfig] = None) -> ConicSolution:
    """Single conic solve of the whole program (exact coupling, no penalties)."""
    config = config or SolverConfig()
    start = time.perf_counter()
    prog, shared, offsets = centralized_program(problem)
    logger.info("centralized program: %d variables, %d linear rows, %d cones",
                prog.n, prog.num_linear, prog.num_cones)
    result = conic.solve(prog, config.conic)
    elapsed = time.perf_counter() - start
    edges = problem.edges
    if result.status == conic.INFEASIBLE:
        logger.info("centralized program is infeasible (phase I minimum %.3e)", result.violation)
        return ConicSolution(status=result.status, chi={}, rho={}, mu={}, objective=np.inf,
                             wall_time=elapsed, diagnostics=result.diagnostics)
    chi = {rs: result.x[offsets[k]:offsets[k + 1]].copy() for k, rs in enumerate(edges)}
    mu_shared = result.lin_duals[shared]
    solution = ConicSolution(
        status=result.status,
        chi=chi,
        rho={rs: 0.0 for rs in edges},
        mu={rs: mu_shared.copy() for rs in edges},
        objective=result.objective,
        iterations=result.newton_steps,
        converged=result.optimal,
        wall_time=elapsed,
        diagnostics={"gap": result.gap, "violation": result.violation, **result.diagnostics},
    )
    logger.info("centralized solve %s: objective %.6f in %.2fs", result.status, result.objective, elapsed)
    return solution


# ============================================================================
# DECENTRALIZED
# ============================================================================


class EdgeNode:
    """
    State of one computing edge.

    Args:
        problem: local data
        neighbors: adjacent computing edges
        settings: conic solver knobs
    """

    def __init__(self, problem: EdgeProblem, neighbors: List[Edge],
                 settings: Optional[ConicSettings] = None):
        self.problem = problem
        self.edge = problem.edge
        self.neighbors = sorted(neighbors)
        R = problem.T.shape[0]
        self.lambda_out = {b: np.zeros(R) for b in self.neighbors}
        self.lambda_in = {b: np.zeros(R) for b in self.neighbors}
        self.chi: Optional[np.ndarray] = None
        self.rho = np.inf
        self.mu = np.zeros(R)
        self.history: Dict[str, List[float]] = {"rho": [], "sum_alpha": []}
        self.interior = self._interior_point(settings or ConicSettings())

    def _interior_point(self, settings: ConicSettings) -> np.ndarray:
        prog = local_set_program(self.problem)
        x, relax = conic.find_interior_point(prog, settings)
        if x is None:
            raise SolverError(f"local set of edge {self.edge} is empty",
                              {"phase1_min_violation": relax})
        if relax > 0:
            raise SolverError(f"local set of edge {self.edge} has no interior",
                              {"relax": relax})
        return x

    def offset(self) -> np.ndarray:
        total = np.zeros(self.problem.T.shape[0])
        for b in self.neighbors:
            total += self.lambda_out[b] - self.lambda_in[b]
        return total

    def gather(self, nodes: Dict[Edge, "EdgeNode"]) -> None:
        for b in self.neighbors:
            self.lambda_in[b] = nodes[b].lambda_out[self.edge].copy()


def _solve_local(job):
    """Process-pool entry: job = (problem, offset, c_rho, interior, settings)."""
    prob, offset, c_rho, interior, settings = job
    prog, shared = relaxed_local_program(prob, offset, c_rho)
    violation = np.max(prob.T @ interior - prob.t + offset) if prob.T.shape[0] else 0.0
    rho0 = max(1.0, float(violation) + 1.0)
    result = conic.solve(prog, settings, x0=np.concatenate([interior, [rho0]]), interior=True)
    if result.x is None:
        raise SolverError(f"local solve on {prob.edge} failed", result.diagnostics)
    chi = result.x[:-1]
    rho = max(0.0, float(result.x[-1]))
    return chi, rho, result.lin_duals[shared].copy(), result.status


def local_solve(node: EdgeNode, c_rho: float, settings: Optional[ConicSettings] = None):
    """
    Primal-dual solution of the relaxed local problem with the node's current
    consensus vectors; stores and returns (chi, rho, mu).
    """
    chi, rho, mu, _ = _solve_local((node.problem, node.offset(), c_rho, node.interior,
                                    settings or ConicSettings()))
    node.chi, node.rho, node.mu = chi, rho, mu
    return chi, rho, mu


def run_decentralized(problem: DecompositionProblem,
                      config: Optional[SolverConfig] = None) -> ConicSolution:
    """
    Synchronous rounds over the edge-computing graph until every penalty is
    below rho_tol and the objective settled over a window, or max_iter.

    Raises:
        DivergenceError: max penalty grew monotonically over divergence_window rounds
    """
    config = config or SolverConfig()
    start = time.perf_counter()
    theta = problem.theta
    nodes = {rs: EdgeNode(problem.edge_problems[rs], list(theta.neighbors(rs)), config.conic)
             for rs in problem.edges}
    traces: List[TraceRecord] = []
    rounds: List[RoundSummary] = []
    converged = False
    pool = mp.Pool(config.workers) if config.workers > 1 else None
    logger.info("decentralized run: %d nodes, %d links, gamma0=%g, c_rho=%g",
                len(nodes), theta.number_of_edges(), config.gamma0, config.c_rho)
    try:
        for it in range(config.max_iter):
            for node in nodes.values():
                node.gather(nodes)
            offsets = {rs: node.offset() for rs, node in nodes.items()}
            jobs = [(node.problem, offsets[rs], config.c_rho, node.interior, config.conic)
                    for rs, node in nodes.items()]
            results = pool.map(_solve_local, jobs) if pool is not None else list(map(_solve_local, jobs))
            for (rs, node), (chi, rho, mu, _) in zip(nodes.items(), results):
                node.chi, node.rho, node.mu = chi, rho, mu

            gamma = config.gamma(it)
            step = 0.0
            updates = {}
            for rs, node in nodes.items():
                for b in node.neighbors:
                    delta = gamma * (node.mu - nodes[b].mu)
                    updates[(rs, b)] = node.lambda_out[b] - delta
                    step = max(step, float(np.max(np.abs(delta))) if delta.size else 0.0)
            for (rs, b), value in updates.items():
                nodes[rs].lambda_out[b] = value

            objective = 0.0
            total = np.zeros(problem.shared_row_count)
            consensus = np.zeros(problem.shared_row_count)
            for rs, node in nodes.items():
                prob = node.problem
                local = prob.T @ node.chi - prob.t
                total += local
                consensus += offsets[rs]
                sum_alpha = prob.sum_alpha(node.chi)
                objective += float(prob.objective @ node.chi)
                node.history["rho"].append(node.rho)
                node.history["sum_alpha"].append(sum_alpha)
                traces.append(TraceRecord(
                    iteration=it, edge=rs, rho=node.rho, sum_alpha=sum_alpha,
                    max_shared_residual=float(np.max(local + offsets[rs])) if local.size else 0.0))
            max_rho = max(node.rho for node in nodes.values())
            rounds.append(RoundSummary(
                iteration=it, max_rho=max_rho, objective=objective,
                consensus_residual=float(np.max(np.abs(consensus))) if consensus.size else 0.0,
                max_lambda_step=step,
                global_residual=float(np.max(total)) if total.size else 0.0))
            logger.debug("round %d: max rho %.3e objective %.6f step %.3e", it, max_rho, objective, step)

            if max_rho <= config.rho_tol:
                settled = step <= 1e-12
                if not settled and it >= config.window:
                    past = rounds[it - config.window].objective
                    settled = abs(objective - past) <= config.obj_tol * max(1.0, abs(objective))
                if settled:
                    converged = True
                    break
            _check_divergence(rounds, config, traces)
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    elapsed = time.perf_counter() - start
    if not converged:
        logger.warning("decentralized run stopped after %d rounds without convergence (max rho %.3e)",
                       len(rounds), rounds[-1].max_rho if rounds else np.inf)
    status = conic.OPTIMAL if converged else conic.ITER_LIMIT
    return ConicSolution(
        status=status,
        chi={rs: node.chi for rs, node in nodes.items()},
        rho={rs: node.rho for rs, node in nodes.items()},
        mu={rs: node.mu for rs, node in nodes.items()},
        objective=rounds[-1].objective if rounds else 0.0,
        mode="decentralized",
        iterations=len(rounds),
        converged=converged,
        wall_time=elapsed,
        traces=traces,
        rounds=rounds,
        diagnostics={"validity_onset": validity_onset(rounds, config.rho_tol)},
    )


def _check_divergence(rounds: List[RoundSummary], config: SolverConfig, traces) -> None:
    W = config.divergence_window
    if len(rounds) < W:
        return
    window = np.array([r.max_rho for r in rounds[-W:]])
    if np.all(np.diff(window) >= 0) and window[-1] > 2.0 * window[0] + config.rho_tol:
        raise DivergenceError(
            f"penalties grew from {window[0]:.3e} to {window[-1]:.3e} over {W} rounds",
            {"rounds": rounds, "traces": traces})


def validity_onset(rounds: List[RoundSummary], threshold: float) -> Optional[int]:
    """First round at which every penalty is below threshold."""
    for r in rounds:
        if r.max_rho < threshold:
            return r.iteration
    return None


def solve(problem: DecompositionProblem, config: Optional[SolverConfig] = None) -> ConicSolution:
    config = config or SolverConfig()
    if config.mode == "decentralized":
        return run_decentralized(problem, config)
    return solve_centralized(problem, config)


# ============================================================================
# EXTRACTION
# ============================================================================


@dataclass
class DecomposedTask:
    """An inconsistent task and the concrete tasks replacing it along its path."""
    key: int
    task: TaskSpec
    path: List[int]
    parts: List[TaskSpec]

    @property
    def accuracy(self) -> float:
        return float(sum(p.param.scale for p in self.parts))

    def to_dict(self) -> Dict:
        return {
            "key": self.key,
            "task": self.task.to_dict(),
            "path": list(self.path),
            "parts": [p.to_dict() for p in self.parts],
            "etas": [p.param.to_dict() for p in self.parts],
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "DecomposedTask":
        parts = [TaskSpec.from_dict(p) for p in data["parts"]]
        for part, eta in zip(parts, data["etas"]):
            part.param = SimilarityParam(eta["center"], eta["scale"])
        return cls(key=int(data["key"]), task=TaskSpec.from_dict(data["task"]),
                   path=[int(v) for v in data["path"]], parts=parts)


@dataclass
class Extraction:
    psi_bar: List[TaskSpec]
    decomposed: List[DecomposedTask]

    @property
    def accuracy(self) -> Dict[int, float]:
        return {d.key: d.accuracy for d in self.decomposed}


def _shrink_to_fit(task: TaskSpec, etas: List[np.ndarray], limit: float = 1e-3) -> List[np.ndarray]:
    """
    Scale every alpha of one path by a common factor so that the Minkowski sum
    lies inside the task's truth set; only small violations are repaired.
    """
    P = task.truth_set
    V = P.base().vertices
    s_alpha = sum(eta[-1] for eta in etas)
    C = np.sum([eta[:-1] for eta in etas], axis=0)
    stretch = s_alpha * (V @ P.A.T)
    fixed = P.A @ C - P.b
    worst = float(np.max(stretch + fixed))
    if worst <= 0 or worst > limit or np.any(fixed >= 0):
        return etas
    ratios = np.where(stretch > 0, -fixed / np.where(stretch > 0, stretch, 1.0), np.inf)
    theta = min(1.0, float(np.min(ratios))) * (1.0 - 1e-12)
    logger.debug("shrinking scales of %s by %.9f to close a residual of %.3e", task.label, theta, worst)
    return [np.concatenate([eta[:-1], [theta * eta[-1]]]) for eta in etas]


def _instantiate(entries, etas: List[np.ndarray]) -> List[TaskSpec]:
    parts = []
    for (_, task, _), eta in zip(entries, etas):
        param = SimilarityParam.from_vector(eta)
        part = task.instantiate(param)
        # keep the solved scale for accuracy bookkeeping
        part.param = param
        parts.append(part)
    return parts


def _edges_conflict_free(parts: List[TaskSpec], others: List[TaskSpec]) -> bool:
    """Single-edge conflict check on every edge of parts, together with the tasks already placed there."""
    for part in parts:
        e = canonical(part.edge)
        on_edge = [t for t in others if canonical(t.edge) == e and not t.parametric]
        on_edge += [p for p in parts if canonical(p.edge) == e]
        if not detect_conflicts_static(oriented_tasks(on_edge, e), e).ok:
            return False
    return True


def extract_tasks(solution: ConicSolution, problem: DecompositionProblem,
                  rho_tol: float = 1e-6) -> Extraction:
    """
    Instantiate every parametric task at its solved parameter and assemble
    the rewritten task set: untouched tasks plus the new path tasks.
    """
    valid = solution.status == conic.OPTIMAL or (
        solution.mode == "decentralized" and solution.chi and solution.max_rho <= rho_tol)
    if not valid:
        raise ContractViolation(f"cannot extract tasks from a {solution.status} solution")

    per_item: Dict[int, List[Tuple[int, TaskSpec, np.ndarray]]] = {}
    for rs, prob in problem.edge_problems.items():
        chi = solution.chi[rs]
        for p, key in enumerate(prob.param_keys):
            per_item.setdefault(key, []).append((p, prob.param_tasks[p], chi[prob.eta_slice(p)]))

    routed = {id(item.task) for item in problem.index.items}
    psi_bar = [t for t in problem.graphs.tasks if id(t) not in routed]
    decomposed = []
    for item in problem.index.items:
        entries = per_item[item.key]
        order = {canonical(e): pos for pos, e in enumerate(item.edges)}
        entries.sort(key=lambda entry: order[canonical(entry[1].edge)])
        raw = [eta for _, _, eta in entries]
        etas = _shrink_to_fit(item.task, raw)
        parts = _instantiate(entries, etas)
        if etas is not raw and not _edges_conflict_free(parts, psi_bar):
            logger.warning("shrinking %s breaks a certified intersection; keeping the solved scales",
                           item.task.label)
            parts = _instantiate(entries, raw)
        decomposed.append(DecomposedTask(key=item.key, task=item.task, path=item.path, parts=parts))
        psi_bar.extend(parts)
    for d in decomposed:
        logger.info("task %s decomposed over %s with accuracy %.6f", d.task.label, d.path, d.accuracy)
    return Extraction(psi_bar=psi_bar, decomposed=decomposed)
