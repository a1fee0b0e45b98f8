"""
COMMUNICATION AND TASK GRAPHS
Agents, radius/token communication graph, task graph, unique paths over the
communication tree, the decomposition index and the edge-computing graph.

Undirected edges are stored canonically as (min, max); a task keeps the
orientation it was given, (i, j) meaning it constrains x_j - x_i.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .config import ABS_TOL, ConicSettings
from .errors import ConnectivityError, ContractViolation
from .geometry import min_norm_in_polytope
from .tasks import Edge, TaskSpec

logger = logging.getLogger(__name__)


def canonical(edge: Sequence[int]) -> Edge:
    i, j = int(edge[0]), int(edge[1])
    return (i, j) if i <= j else (j, i)


@dataclass
class AgentState:
    """
    One agent at t = 0.

    Args:
        id: agent index
        state: state vector x_i
        selection: S with p_i = S x_i (identity when the state is the position)
    """
    id: int
    state: np.ndarray
    selection: Optional[np.ndarray] = None

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=float).ravel()
        if self.selection is None:
            self.selection = np.eye(self.state.size)
        self.selection = np.atleast_2d(np.asarray(self.selection, dtype=float))
        S = self.selection
        if S.shape[1] != self.state.size or not np.all(np.isin(S, (0.0, 1.0))) \
                or np.any(S.sum(axis=1) != 1) or np.any(S.sum(axis=0) > 1):
            raise ContractViolation(f"agent {self.id}: invalid selection matrix")

    @property
    def position(self) -> np.ndarray:
        return self.selection @ self.state


@dataclass
class GraphPair:
    agents: Dict[int, AgentState]
    radius: float
    comm: nx.Graph
    tokens: Dict[Edge, bool]
    tasks: List[TaskSpec]
    task_edges: Dict[Edge, List[TaskSpec]] = field(default_factory=dict)

    @property
    def comm_edges(self) -> List[Edge]:
        return sorted(canonical(e) for e in self.comm.edges)

    @property
    def selection(self) -> np.ndarray:
        return next(iter(self.agents.values())).selection

    def has_comm_edge(self, i: int, j: int) -> bool:
        return self.comm.has_edge(i, j)

    def task_graph(self) -> nx.Graph:
        """Collaborative task graph (self-loops of independent tasks left out)."""
        G = nx.Graph()
        G.add_nodes_from(self.agents)
        for (i, j), tasks in self.task_edges.items():
            if i != j:
                G.add_edge(i, j, tasks=tasks)
        return G


# ============================================================================
# CONSTRUCTION
# ============================================================================


def _proximity_graph(agents: Dict[int, AgentState], radius: float) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(sorted(agents))
    for i, j in itertools.combinations(sorted(agents), 2):
        if np.linalg.norm(agents[i].position - agents[j].position) <= radius:
            G.add_edge(i, j)
    return G


def spanning_tree_tokens(agents: Dict[int, AgentState], radius: float) -> Dict[Edge, bool]:
    """
    Token per proximity edge: true on a BFS spanning tree rooted at the lowest
    agent id, neighbors expanded in ascending order.
    """
    G = _proximity_graph(agents, radius)
    if len(G) == 0:
        return {}
    if not nx.is_connected(G):
        parts = [sorted(c) for c in nx.connected_components(G)]
        raise ConnectivityError("proximity graph is disconnected", {"components": parts})
    root = min(G.nodes)
    tree = {canonical(e) for e in nx.bfs_edges(G, root, sort_neighbors=sorted)}
    return {canonical(e): canonical(e) in tree for e in G.edges}


def is_acyclic(edges: Iterable[Sequence[int]]) -> bool:
    uf = nx.utils.UnionFind()
    for i, j in edges:
        if uf[i] == uf[j]:
            return False
        uf.union(i, j)
    return True


def build_graphs(agents: Sequence[AgentState], tasks: Sequence[TaskSpec], radius: float,
                 tokens: Optional[Dict[Edge, bool]] = None) -> GraphPair:
    """
    Communication graph from radius and tokens, task graph from the task list.

    Raises:
        ConnectivityError: the communication graph is disconnected or has a cycle
    """
    by_id = {a.id: a for a in agents}
    if len(by_id) != len(agents):
        raise ContractViolation("agent ids must be unique")
    if tokens is None:
        tokens = spanning_tree_tokens(by_id, radius)
    else:
        tokens = {canonical(e): bool(v) for e, v in tokens.items()}

    proximity = _proximity_graph(by_id, radius)
    comm = nx.Graph()
    comm.add_nodes_from(sorted(by_id))
    for e, on in sorted(tokens.items()):
        if not on:
            continue
        if not proximity.has_edge(*e):
            logger.warning("token on %s ignored: agents are farther apart than r_c=%g", e, radius)
            continue
        comm.add_edge(*e)
    if len(comm) and not nx.is_connected(comm):
        parts = [sorted(c) for c in nx.connected_components(comm)]
        raise ConnectivityError("communication graph is disconnected", {"components": parts})
    if not is_acyclic(comm.edges):
        raise ConnectivityError("communication graph has a cycle",
                                {"cycles": nx.cycle_basis(comm)})

    task_edges: Dict[Edge, List[TaskSpec]] = {}
    for task in tasks:
        for k in task.edge:
            if k not in by_id:
                raise ContractViolation(f"task {task.label} references unknown agent {k}")
        task_edges.setdefault(canonical(task.edge), []).append(task)

    logger.info("communication graph: %d agents, %d edges; task graph: %d edges",
                len(by_id), comm.number_of_edges(), len(task_edges))
    return GraphPair(agents=by_id, radius=float(radius), comm=comm, tokens=tokens,
                     tasks=list(tasks), task_edges=task_edges)


# ============================================================================
# PATHS AND CONSISTENCY
# ============================================================================


def find_path(graphs: GraphPair, i: int, j: int) -> Tuple[List[int], List[Edge]]:
    """
    Unique path from i to j over the communication tree.

    Returns:
        (vertices, oriented consecutive edges)
    """
    if i == j:
        raise ContractViolation(f"path query from agent {i} to itself")
    try:
        path = nx.shortest_path(graphs.comm, i, j)
    except (nx.NetworkXNoPath, nx.NodeNotFound) as err:
        raise ConnectivityError(f"no communication path from {i} to {j}") from err
    return path, list(zip(path[:-1], path[1:]))


def ball_consistent(task: TaskSpec, radius: float, selection: Optional[np.ndarray] = None,
                    settings: Optional[ConicSettings] = None) -> bool:
    """Whether the truth set meets the relative-position ball of radius r_c."""
    return min_norm_in_polytope(task.truth_set_now(), selection, settings) <= radius + ABS_TOL


def communication_consistent(task: TaskSpec, graphs: GraphPair,
                             settings: Optional[ConicSettings] = None) -> bool:
    """Independent tasks always are; collaborative ones need a comm edge and the ball test."""
    if task.is_independent:
        return True
    if not graphs.has_comm_edge(*task.edge):
        return False
    return ball_consistent(task, graphs.radius, graphs.selection, settings)


def task_graph_cycles(graphs: GraphPair) -> List[List[int]]:
    """Every simple cycle of length three or more in the collaborative task graph."""
    cycles = [c for c in nx.simple_cycles(graphs.task_graph()) if len(c) >= 3]
    return sorted(cycles, key=lambda c: (len(c), sorted(c)))


# ============================================================================
# DECOMPOSITION INDEX
# ============================================================================


@dataclass
class RoutedTask:
    """One inconsistent task and the path it is decomposed over."""
    key: int
    task: TaskSpec
    path: List[int]
    edges: List[Edge]

    @property
    def length(self) -> int:
        return len(self.edges)


@dataclass
class DecompositionIndex:
    """
    Args:
        items: inconsistent tasks in input order
        E_pi: canonical edges used by any path
        Pi: edge -> keys of the items routed through it
        y_Pi: edge -> item key -> local task index (after the K pre-existing ones)
        K: edge -> number of pre-existing collaborative tasks
    """
    items: List[RoutedTask] = field(default_factory=list)
    E_pi: List[Edge] = field(default_factory=list)
    Pi: Dict[Edge, List[int]] = field(default_factory=dict)
    y_Pi: Dict[Edge, Dict[int, int]] = field(default_factory=dict)
    K: Dict[Edge, int] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.items


def build_decomposition_index(graphs: GraphPair,
                              settings: Optional[ConicSettings] = None) -> DecompositionIndex:
    """Route every communication-inconsistent task over its unique tree path."""
    index = DecompositionIndex()
    for task in graphs.tasks:
        if task.is_independent:
            continue
        e = canonical(task.edge)
        if communication_consistent(task, graphs, settings):
            index.K[e] = index.K.get(e, 0) + 1
            continue
        if graphs.has_comm_edge(*task.edge):
            logger.warning("task %s sits on a communication edge but misses the r_c ball; "
                           "routing it over that single edge", task.label)
        path, edges = find_path(graphs, task.edge[0], task.edge[1])
        item = RoutedTask(key=len(index.items), task=task, path=path, edges=edges)
        index.items.append(item)
        for rs in edges:
            index.Pi.setdefault(canonical(rs), []).append(item.key)

    index.E_pi = sorted(index.Pi)
    for rs in index.E_pi:
        index.K.setdefault(rs, 0)
        base = index.K[rs]
        index.y_Pi[rs] = {key: base + pos for pos, key in enumerate(index.Pi[rs])}
    logger.info("%d inconsistent tasks routed over %d edges", len(index.items), len(index.E_pi))
    return index


def edge_computing_graph(index: DecompositionIndex) -> nx.Graph:
    """Nodes are the decomposition edges; two are adjacent when they share an agent."""
    theta = nx.Graph()
    theta.add_nodes_from(index.E_pi)
    for a, b in itertools.combinations(index.E_pi, 2):
        if set(a) & set(b):
            theta.add_edge(a, b)
    return theta
