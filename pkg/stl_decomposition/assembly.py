"""
DECOMPOSITION PROGRAM ASSEMBLY
Parametric tasks along decomposition paths and the per-edge blocks of the
constraint-coupled program

    minimize    sum_rs  f_rs^T chi_rs
    subject to  chi_rs in C_rs                      for every decomposition edge
                sum_rs (T_rs chi_rs - t_rs) <= 0

chi_rs = [eta_1 .. eta_P, xi_1 .. xi_Q]: one similarity parameter per
parametric task on the edge (expressed along its path) followed by one
witness point per constrained conflict set (expressed along the canonical
edge orientation).
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from .config import SolverConfig
from .conflicts import ConflictFamilies, build_families, oriented_tasks
from .errors import ContractViolation, InternalInvariantError
from .geometry import GeneratorMatrix, SimilarityParam, inclusion_blocks
from .graphs import DecompositionIndex, GraphPair, RoutedTask, canonical, edge_computing_graph
from .tasks import Edge, Operator, TaskSpec, TimeInterval

logger = logging.getLogger(__name__)

Cone = Tuple[np.ndarray, np.ndarray, np.ndarray, float]


# ============================================================================
# PARAMETRIC TASKS
# ============================================================================


def sync_time(task: TaskSpec) -> float:
    """Time an Eventually task is pinned to once decomposed (midpoint by default)."""
    t_bar = task.interval.midpoint if task.sync_time is None else float(task.sync_time)
    if not task.interval.contains_time(t_bar):
        raise ContractViolation(f"sync time {t_bar} outside {task.interval} for {task.label}")
    return t_bar


def attach_parametric_tasks(index: DecompositionIndex) -> Dict[Edge, List[Tuple[int, TaskSpec]]]:
    """
    One parametric task per (inconsistent task, path edge).

    Returns:
        canonical edge -> [(item key, task in path orientation)] in routing order
    """
    out: Dict[Edge, List[Tuple[int, TaskSpec]]] = OrderedDict((rs, []) for rs in index.E_pi)
    for item in index.items:
        task = item.task
        L = item.length
        if task.operator is Operator.ALWAYS:
            interval, t_bar = task.interval, None
        else:
            t_bar = sync_time(task)
            interval = TimeInterval(t_bar, t_bar)
        base = task.truth_set.base()
        guess = SimilarityParam(task.truth_set.c / L, 1.0 / L)
        for u, v in item.edges:
            part = TaskSpec(
                operator=task.operator,
                interval=interval,
                edge=(u, v),
                truth_set=base,
                parametric=True,
                param=guess,
                origin=task.edge,
                sync_time=t_bar,
                name=f"{task.name or 'task'}@{u}-{v}",
            )
            out[canonical((u, v))].append((item.key, part))
    return out


def build_inclusion_blocks(item: RoutedTask) -> Tuple[np.ndarray, np.ndarray]:
    """(M_ij, Z_ij) of the task's own truth set, in the task's orientation."""
    P = item.task.truth_set
    return inclusion_blocks(P.A, P.z, P.A, P.z, P.base().vertices)


# ============================================================================
# EDGE PROBLEMS
# ============================================================================


@dataclass
class EdgeProblem:
    """
    Local data of one decomposition edge.

    Linear rows G chi <= h and cones ||F chi + g|| <= d^T chi + e describe
    the local set; T, t the edge's share of the coupling constraint.
    """
    edge: Edge
    n: int
    tasks: List[TaskSpec]                 # canonical orientation, fixed first
    num_fixed: int
    param_keys: List[int]                 # item key of each parametric task
    param_tasks: List[TaskSpec]           # path orientation
    sigma: List[int]                      # +1 when the path runs along the canonical edge
    families: ConflictFamilies
    objective: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cones: List[Cone] = field(default_factory=list)
    T: Optional[np.ndarray] = None
    t: Optional[np.ndarray] = None
    eta_max: float = 0.0
    xi_max: float = 0.0

    @property
    def num_params(self) -> int:
        return len(self.param_keys)

    @property
    def xi_count(self) -> int:
        return self.families.xi_count

    @property
    def chi_dim(self) -> int:
        return (self.n + 1) * self.num_params + self.n * self.xi_count

    def eta_slice(self, p: int) -> slice:
        return slice((self.n + 1) * p, (self.n + 1) * (p + 1))

    def xi_slice(self, q: int) -> slice:
        start = (self.n + 1) * self.num_params + self.n * q
        return slice(start, start + self.n)

    def alpha_index(self, p: int) -> int:
        return (self.n + 1) * (p + 1) - 1

    def etas(self, chi: np.ndarray) -> List[np.ndarray]:
        return [chi[self.eta_slice(p)] for p in range(self.num_params)]

    def sum_alpha(self, chi: np.ndarray) -> float:
        return float(sum(chi[self.alpha_index(p)] for p in range(self.num_params)))

    def shared_rows(self) -> int:
        """Rows of T with a nonzero entry."""
        if self.T is None:
            return 0
        return int(np.count_nonzero(np.any(self.T != 0, axis=1)))


def _fixed_tasks(graphs: GraphPair, index: DecompositionIndex, rs: Edge) -> List[TaskSpec]:
    routed = {id(item.task) for item in index.items}
    tasks = [t for t in graphs.task_edges.get(rs, []) if id(t) not in routed]
    return oriented_tasks(tasks, rs)


def default_bound(graphs: GraphPair) -> float:
    """10 x (largest center coordinate + largest truth-set extent)."""
    centers, extents = [0.0], [0.0]
    for task in graphs.tasks:
        P = task.truth_set_now()
        centers.append(float(np.max(np.abs(P.c))))
        extents.append(float(np.max(np.linalg.norm(P.vertices - P.c, axis=1))))
    return 10.0 * (max(centers) + max(extents))


def build_edge_problem(rs: Edge, fixed: List[TaskSpec], params: List[Tuple[int, TaskSpec]],
                       radius: float, selection: np.ndarray,
                       eta_max: float, xi_max: float) -> EdgeProblem:
    """
    Local set of one decomposition edge: communication cones on every vertex
    of every parametric task, conflict rows for each constrained set, alpha >= 0
    and the norm bounds on eta and xi.
    """
    n = fixed[0].truth_set.n if fixed else params[0][1].truth_set.n
    sigma = [1 if task.edge == rs else -1 for _, task in params]
    canon = [task if s > 0 else task.reversed() for s, (_, task) in zip(sigma, params)]
    tasks = list(fixed) + canon
    K = len(fixed)
    families = build_families(tasks, parametric=range(K, len(tasks)))

    prob = EdgeProblem(
        edge=rs, n=n, tasks=tasks, num_fixed=K,
        param_keys=[key for key, _ in params],
        param_tasks=[task for _, task in params],
        sigma=sigma, families=families,
        objective=np.zeros(0), G=np.zeros((0, 0)), h=np.zeros(0),
        eta_max=eta_max, xi_max=xi_max,
    )
    dim = prob.chi_dim
    objective = np.zeros(dim)
    rows, rhs = [], []
    for p in range(prob.num_params):
        objective[prob.alpha_index(p)] = -1.0
        row = np.zeros(dim)
        row[prob.alpha_index(p)] = -1.0
        rows.append(row)
        rhs.append(0.0)

    for Q, q in families.y_Q.items():
        xs = prob.xi_slice(q)
        for l in sorted(Q):
            P = tasks[l].truth_set
            block = np.zeros((P.m, dim))
            if l < K:
                block[:, xs] = P.A
                rows.extend(block)
                rhs.extend(P.b)
            else:
                p = l - K
                base = prob.param_tasks[p].truth_set
                block[:, xs] = sigma[p] * base.A
                block[:, prob.eta_slice(p)] = -np.hstack([base.A, base.z[:, None]])
                rows.extend(block)
                rhs.extend(np.zeros(P.m))
    prob.G = np.array(rows).reshape(-1, dim)
    prob.h = np.array(rhs, dtype=float)
    prob.objective = objective

    for p, task in enumerate(prob.param_tasks):
        gen = GeneratorMatrix.from_polytope(task.truth_set)
        for Gk in gen.blocks:
            F = np.zeros((selection.shape[0], dim))
            F[:, prob.eta_slice(p)] = selection @ Gk
            prob.cones.append((F, np.zeros(selection.shape[0]), np.zeros(dim), float(radius)))
        F = np.zeros((n + 1, dim))
        F[:, prob.eta_slice(p)] = np.eye(n + 1)
        prob.cones.append((F, np.zeros(n + 1), np.zeros(dim), float(eta_max)))
    for q in range(prob.xi_count):
        F = np.zeros((n, dim))
        F[:, prob.xi_slice(q)] = np.eye(n)
        prob.cones.append((F, np.zeros(n), np.zeros(dim), float(xi_max)))
    return prob


# ============================================================================
# SHARED BLOCKS
# ============================================================================


@dataclass
class DecompositionProblem:
    graphs: GraphPair
    index: DecompositionIndex
    edge_problems: "OrderedDict[Edge, EdgeProblem]"
    theta: nx.Graph
    row_blocks: Dict[int, slice]
    shared_row_count: int

    @property
    def edges(self) -> List[Edge]:
        return list(self.edge_problems)

    def shared_residual(self, chis: Dict[Edge, np.ndarray]) -> np.ndarray:
        """sum_rs (T_rs chi_rs - t_rs)."""
        total = np.zeros(self.shared_row_count)
        for rs, prob in self.edge_problems.items():
            total += prob.T @ chis[rs] - prob.t
        return total

    def item_accuracy(self, chis: Dict[Edge, np.ndarray]) -> Dict[int, float]:
        """Sum of scales per decomposed task."""
        acc = {item.key: 0.0 for item in self.index.items}
        for rs, prob in self.edge_problems.items():
            for p, key in enumerate(prob.param_keys):
                acc[key] += float(chis[rs][prob.alpha_index(p)])
        return acc


def build_shared_blocks(index: DecompositionIndex, edge_problems: "OrderedDict[Edge, EdgeProblem]"):
    """
    Fill T_rs and t_rs on every edge problem.

    Returns:
        (item key -> row slice, total shared rows)
    """
    row_blocks: Dict[int, slice] = {}
    blocks = {}
    start = 0
    for item in index.items:
        M, Z = build_inclusion_blocks(item)
        row_blocks[item.key] = slice(start, start + M.shape[0])
        blocks[item.key] = (M, Z @ np.concatenate([item.task.truth_set.c, [1.0]]) / item.length)
        start += M.shape[0]
    total = start

    for rs, prob in edge_problems.items():
        prob.T = np.zeros((total, prob.chi_dim))
        prob.t = np.zeros(total)
        for p, key in enumerate(prob.param_keys):
            M, share = blocks[key]
            rows = row_blocks[key]
            if rows.stop - rows.start != M.shape[0] or M.shape[1] != prob.n + 1:
                raise InternalInvariantError(
                    f"row block of task {key} does not match its inclusion matrix on {rs}")
            prob.T[rows, prob.eta_slice(p)] = M
            prob.t[rows] += share
    return row_blocks, total


def assemble(graphs: GraphPair, index: DecompositionIndex,
             config: Optional[SolverConfig] = None) -> DecompositionProblem:
    """Build every edge problem and the coupling blocks."""
    config = config or SolverConfig()
    bound = default_bound(graphs)
    eta_max = config.eta_max if config.eta_max is not None else bound
    xi_max = config.xi_max if config.xi_max is not None else bound
    attached = attach_parametric_tasks(index)

    problems: "OrderedDict[Edge, EdgeProblem]" = OrderedDict()
    for rs in index.E_pi:
        problems[rs] = build_edge_problem(
            rs, _fixed_tasks(graphs, index, rs), attached[rs],
            graphs.radius, graphs.selection, eta_max, xi_max)
    row_blocks, total = build_shared_blocks(index, problems)

    for rs, prob in problems.items():
        if prob.T.shape[0] != total:
            raise InternalInvariantError(f"edge {rs} has {prob.T.shape[0]} shared rows, expected {total}")
        logger.debug("edge %s: |Pi|=%d dim=%d rows=%d |Q|=%d", rs, prob.num_params,
                     prob.chi_dim, prob.shared_rows(), prob.xi_count)
    logger.info("assembled %d edge problems, %d shared rows", len(problems), total)
    return DecompositionProblem(graphs=graphs, index=index, edge_problems=problems,
                                theta=edge_computing_graph(index), row_blocks=row_blocks,
                                shared_row_count=total)
