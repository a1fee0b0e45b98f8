"""Tests for communication graphs, task graphs and the decomposition index."""

import networkx as nx
import numpy as np
import pytest

from stl_decomposition.errors import ConnectivityError, ContractViolation
from stl_decomposition.geometry import regular_polytope
from stl_decomposition.graphs import (AgentState, build_decomposition_index, build_graphs, canonical,
                                      communication_consistent, edge_computing_graph, find_path,
                                      is_acyclic, spanning_tree_tokens, task_graph_cycles)
from stl_decomposition.scenario import load_scenario
from stl_decomposition.tasks import Operator, TaskSpec, TimeInterval


def _agents(points):
    return [AgentState(k + 1, p) for k, p in enumerate(points)]


def _g(edge, center, beta=1.0, a=0.0, b=10.0):
    return TaskSpec(Operator.ALWAYS, TimeInterval(a, b), edge, regular_polytope(4, beta, center))


CHAIN = [[0.0, 0.0], [5.0, 0.0], [10.0, 0.0]]


# ============================================================================
# Agents
# ============================================================================


class TestAgentState:
    """Tests for agent states and selection matrices."""

    def test_default_selection_is_identity(self):
        agent = AgentState(1, [1.0, 2.0])
        assert np.allclose(agent.position, [1.0, 2.0])

    def test_position_from_selection(self):
        agent = AgentState(1, [1.0, 2.0, 0.3, 0.1], [[1, 0, 0, 0], [0, 1, 0, 0]])
        assert np.allclose(agent.position, [1.0, 2.0])

    def test_invalid_selection(self):
        with pytest.raises(ContractViolation):
            AgentState(1, [1.0, 2.0], [[0.5, 0.5]])


# ============================================================================
# Communication graph
# ============================================================================


class TestCommunication:
    """Tests for radius, tokens and acyclicity."""

    def test_chain_tree_from_radius(self):
        graphs = build_graphs(_agents(CHAIN), [], 8.5)
        assert graphs.comm_edges == [(1, 2), (2, 3)]

    def test_bfs_tokens_break_triangle(self):
        tokens = spanning_tree_tokens({a.id: a for a in _agents([[0, 0], [1, 0], [0, 1]])}, 8.5)
        assert sum(tokens.values()) == 2
        assert tokens[(1, 2)] and tokens[(1, 3)] and not tokens[(2, 3)]

    def test_disconnected_proximity(self):
        with pytest.raises(ConnectivityError):
            build_graphs(_agents([[0, 0], [100, 0]]), [], 8.5)

    def test_explicit_cycle_rejected(self):
        tokens = {(1, 2): True, (2, 3): True, (1, 3): True}
        with pytest.raises(ConnectivityError):
            build_graphs(_agents([[0, 0], [1, 0], [0, 1]]), [], 8.5, tokens)

    def test_token_out_of_range_ignored(self):
        tokens = {(1, 2): True, (2, 3): True, (1, 3): True}
        graphs = build_graphs(_agents(CHAIN), [], 8.5, tokens)
        assert graphs.comm_edges == [(1, 2), (2, 3)]

    def test_union_find_acyclicity(self):
        assert is_acyclic([(1, 2), (2, 3), (3, 4)])
        assert not is_acyclic([(1, 2), (2, 3), (3, 1)])

    def test_mars_tree(self, mars_path):
        scenario = load_scenario(mars_path)
        graphs = build_graphs(scenario.agents, scenario.tasks, scenario.radius, scenario.tokens)
        assert len(graphs.comm_edges) == 14
        assert nx.is_tree(graphs.comm)

    def test_canonical(self):
        assert canonical((6, 1)) == (1, 6)
        assert canonical([2, 2]) == (2, 2)


# ============================================================================
# Paths and consistency
# ============================================================================


class TestPaths:
    """Tests for unique tree paths and communication consistency."""

    def test_path_over_chain(self):
        graphs = build_graphs(_agents(CHAIN), [], 8.5)
        vertices, edges = find_path(graphs, 3, 1)
        assert vertices == [3, 2, 1]
        assert edges == [(3, 2), (2, 1)]

    def test_self_path_rejected(self):
        graphs = build_graphs(_agents(CHAIN), [], 8.5)
        with pytest.raises(ContractViolation):
            find_path(graphs, 2, 2)

    def test_consistency_rules(self):
        near = _g((1, 2), (5.0, 0.0))
        far_edge = _g((1, 3), (10.0, 0.0))
        outside_ball = _g((1, 2), (20.0, 0.0))
        independent = _g((1, 1), (50.0, 0.0))
        graphs = build_graphs(_agents(CHAIN), [near, far_edge, outside_ball, independent], 8.5)
        assert communication_consistent(near, graphs)
        assert not communication_consistent(far_edge, graphs)
        assert not communication_consistent(outside_ball, graphs)
        assert communication_consistent(independent, graphs)

    def test_ball_near_boundary(self):
        inside = _g((1, 2), (9.4, 0.0))
        outside = _g((1, 2), (9.6, 0.0))
        graphs = build_graphs(_agents(CHAIN), [inside, outside], 8.5)
        assert communication_consistent(inside, graphs)
        assert not communication_consistent(outside, graphs)

    def test_task_edges_are_canonical(self):
        graphs = build_graphs(_agents(CHAIN), [_g((3, 1), (-9, 0)), _g((1, 3), (9, 0))], 8.5)
        assert list(graphs.task_edges) == [(1, 3)]
        assert len(graphs.task_edges[(1, 3)]) == 2

    def test_unknown_agent(self):
        with pytest.raises(ContractViolation):
            build_graphs(_agents(CHAIN), [_g((1, 9), (0, 0))], 8.5)

    def test_task_graph_cycle_basis(self):
        tasks = [_g((1, 2), (5, 0)), _g((2, 3), (5, 0)), _g((1, 3), (9, 0))]
        graphs = build_graphs(_agents(CHAIN), tasks, 8.5)
        cycles = task_graph_cycles(graphs)
        assert len(cycles) == 1
        assert sorted(cycles[0]) == [1, 2, 3]

    def test_every_simple_cycle_is_listed(self):
        square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
        tasks = [_g(e, (0, 0)) for e in [(1, 2), (2, 3), (3, 4), (4, 1), (1, 3)]]
        graphs = build_graphs(_agents(square), tasks, 8.5)
        assert len(nx.cycle_basis(graphs.task_graph())) == 2
        cycles = task_graph_cycles(graphs)
        assert [len(c) for c in cycles] == [3, 3, 4]
        assert sorted(cycles[-1]) == [1, 2, 3, 4]


# ============================================================================
# Decomposition index and edge-computing graph
# ============================================================================


class TestDecompositionIndex:
    """Tests for routing inconsistent tasks."""

    def test_toy_chain_routes_one_task(self, toy_chain):
        graphs = build_graphs(toy_chain.agents, toy_chain.tasks, toy_chain.radius, toy_chain.tokens)
        index = build_decomposition_index(graphs)
        assert len(index.items) == 1
        assert index.items[0].path == [1, 2, 3]
        assert index.E_pi == [(1, 2), (2, 3)]
        assert index.y_Pi[(1, 2)] == {0: 0}

    def test_local_positions_follow_existing_tasks(self):
        tasks = [_g((1, 2), (5, 0)), _g((1, 3), (9, 0)), _g((1, 3), (9, 1))]
        graphs = build_graphs(_agents(CHAIN), tasks, 8.5)
        index = build_decomposition_index(graphs)
        assert index.K[(1, 2)] == 1
        assert index.K[(2, 3)] == 0
        assert index.y_Pi[(1, 2)] == {0: 1, 1: 2}
        assert index.y_Pi[(2, 3)] == {0: 0, 1: 1}

    def test_consistent_scenario_is_empty(self):
        graphs = build_graphs(_agents(CHAIN), [_g((1, 2), (5, 0))], 8.5)
        assert build_decomposition_index(graphs).empty

    def test_mars_edge_loads(self, mars_path):
        scenario = load_scenario(mars_path)
        graphs = build_graphs(scenario.agents, scenario.tasks, scenario.radius, scenario.tokens)
        index = build_decomposition_index(graphs)
        expected = {(9, 10): 4, (10, 15): 1, (1, 2): 5, (3, 4): 2, (10, 14): 2, (1, 11): 3,
                    (12, 13): 2, (11, 12): 3, (1, 6): 8, (2, 5): 2, (6, 9): 5, (7, 8): 2,
                    (2, 3): 3, (6, 7): 3}
        assert {rs: len(keys) for rs, keys in index.Pi.items()} == expected

    def test_edge_computing_graph_adjacency(self, mars_path):
        scenario = load_scenario(mars_path)
        graphs = build_graphs(scenario.agents, scenario.tasks, scenario.radius, scenario.tokens)
        theta = edge_computing_graph(build_decomposition_index(graphs))
        assert theta.number_of_nodes() == 14
        assert theta.has_edge((1, 2), (1, 6))
        assert not theta.has_edge((3, 4), (12, 13))
        assert nx.is_connected(theta)
