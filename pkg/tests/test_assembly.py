"""Tests for parametric-task attachment and program assembly."""

from pathlib import Path

import numpy as np
import pytest

from stl_decomposition.assembly import assemble, attach_parametric_tasks, default_bound, sync_time
from stl_decomposition.config import SolverConfig
from stl_decomposition.errors import ContractViolation
from stl_decomposition.geometry import regular_polytope
from stl_decomposition.graphs import AgentState, build_decomposition_index, build_graphs
from stl_decomposition.reports import structure_table
from stl_decomposition.scenario import load_scenario
from stl_decomposition.tasks import Operator, TaskSpec, TimeInterval

# |Pi|, chi dimension, shared rows, |Q| per computing edge of the exploration scenario
MARS_STRUCTURE = {
    (9, 10): (4, 14, 208, 1),
    (10, 15): (1, 3, 64, 0),
    (1, 2): (5, 21, 253, 3),
    (3, 4): (2, 6, 100, 0),
    (10, 14): (2, 6, 80, 0),
    (1, 11): (3, 13, 153, 2),
    (12, 13): (2, 6, 89, 0),
    (11, 12): (3, 11, 153, 1),
    (1, 6): (8, 30, 436, 3),
    (2, 5): (2, 6, 89, 0),
    (6, 9): (5, 17, 272, 1),
    (7, 8): (2, 6, 100, 0),
    (2, 3): (3, 11, 164, 1),
    (6, 7): (3, 11, 164, 1),
}


def _pipeline(scenario, config=None):
    graphs = build_graphs(scenario.agents, scenario.tasks, scenario.radius, scenario.tokens)
    index = build_decomposition_index(graphs)
    return assemble(graphs, index, config)


@pytest.fixture
def toy_problem(toy_chain):
    return _pipeline(toy_chain)


@pytest.fixture(scope="module")
def mars_problem():
    path = Path(__file__).resolve().parent.parent / "scenarios" / "mars_exploration.json"
    return _pipeline(load_scenario(path))


# ============================================================================
# Parametric tasks
# ============================================================================


class TestSyncTime:
    """Tests for pinning decomposed Eventually tasks."""

    def test_midpoint_default(self):
        task = TaskSpec(Operator.EVENTUALLY, TimeInterval(10, 15), (1, 3), regular_polytope(4, 1.0))
        assert sync_time(task) == 12.5

    def test_explicit_time(self):
        task = TaskSpec(Operator.EVENTUALLY, TimeInterval(10, 15), (1, 3), regular_polytope(4, 1.0),
                        sync_time=11.0)
        assert sync_time(task) == 11.0

    def test_outside_interval(self):
        task = TaskSpec(Operator.EVENTUALLY, TimeInterval(10, 15), (1, 3), regular_polytope(4, 1.0),
                        sync_time=20.0)
        with pytest.raises(ContractViolation):
            sync_time(task)


class TestAttach:
    """Tests for parametric tasks along decomposition paths."""

    def test_one_part_per_path_edge(self, toy_chain):
        graphs = build_graphs(toy_chain.agents, toy_chain.tasks, toy_chain.radius)
        attached = attach_parametric_tasks(build_decomposition_index(graphs))
        assert list(attached) == [(1, 2), (2, 3)]
        [(_, first)] = attached[(1, 2)]
        assert first.parametric and first.origin == (1, 3)
        assert first.edge == (1, 2)
        assert np.allclose(first.param.center, [6.0, 0.0])
        assert abs(first.param.scale - 0.5) < 1e-12
        assert np.allclose(first.truth_set.c, 0.0)

    def test_eventually_parts_are_pinned(self):
        agents = [AgentState(1, [0, 0]), AgentState(2, [5, 0]), AgentState(3, [10, 0])]
        task = TaskSpec(Operator.EVENTUALLY, TimeInterval(10, 15), (3, 1),
                        regular_polytope(6, 1.0, (-12, 0)), name="reach")
        graphs = build_graphs(agents, [task], 8.5)
        attached = attach_parametric_tasks(build_decomposition_index(graphs))
        parts = [t for tasks in attached.values() for _, t in tasks]
        assert {p.edge for p in parts} == {(3, 2), (2, 1)}
        assert all((p.interval.a, p.interval.b) == (12.5, 12.5) for p in parts)
        assert all(p.sync_time == 12.5 for p in parts)


# ============================================================================
# Edge problems
# ============================================================================


class TestEdgeProblem:
    """Tests for the local blocks of one decomposition edge."""

    def test_toy_dimensions(self, toy_problem):
        prob = toy_problem.edge_problems[(1, 2)]
        assert prob.num_params == 1
        assert prob.xi_count == 0
        assert prob.chi_dim == 3
        assert prob.sigma == [1]

    def test_objective_maximizes_scales(self, toy_problem):
        prob = toy_problem.edge_problems[(1, 2)]
        assert np.allclose(prob.objective, [0.0, 0.0, -1.0])

    def test_cones_cover_every_vertex_and_the_bound(self, toy_problem):
        prob = toy_problem.edge_problems[(1, 2)]
        assert len(prob.cones) == 4 + 1
        F, g, d, e = prob.cones[0]
        assert F.shape == (2, 3)
        assert e == 8.5

    def test_reversed_path_flips_sigma(self):
        agents = [AgentState(1, [0, 0]), AgentState(2, [5, 0]), AgentState(3, [10, 0])]
        task = TaskSpec(Operator.ALWAYS, TimeInterval(0, 5), (3, 1), regular_polytope(4, 1.0, (-12, 0)))
        graphs = build_graphs(agents, [task], 8.5)
        problem = assemble(graphs, build_decomposition_index(graphs))
        assert problem.edge_problems[(1, 2)].sigma == [-1]
        assert problem.edge_problems[(2, 3)].sigma == [-1]

    def test_conflict_rows_for_fixed_and_parametric(self, five_agents):
        problem = _pipeline(five_agents)
        prob = problem.edge_problems[(1, 2)]
        assert prob.num_fixed == 1
        assert prob.xi_count == 1
        assert prob.chi_dim == 3 + 2
        # alpha >= 0 plus the pentagon and square rows of the witness point
        assert prob.G.shape == (1 + 5 + 4, 5)

    def test_default_bound(self, toy_chain):
        graphs = build_graphs(toy_chain.agents, toy_chain.tasks, toy_chain.radius)
        assert abs(default_bound(graphs) - 10.0 * (12.0 + np.sqrt(2.0))) < 1e-9

    def test_explicit_bounds(self, toy_chain):
        problem = _pipeline(toy_chain, SolverConfig(eta_max=50.0, xi_max=40.0))
        prob = problem.edge_problems[(1, 2)]
        assert prob.eta_max == 50.0
        assert prob.cones[-1][3] == 50.0


# ============================================================================
# Shared blocks
# ============================================================================


class TestSharedBlocks:
    """Tests for the coupling constraint."""

    def test_row_count(self, toy_problem):
        assert toy_problem.shared_row_count == 16
        assert toy_problem.row_blocks[0] == slice(0, 16)

    def test_even_split_is_tight(self, toy_problem):
        chis = {(1, 2): np.array([6.0, 0.0, 0.5]), (2, 3): np.array([6.0, 0.0, 0.5])}
        residual = toy_problem.shared_residual(chis)
        assert np.max(residual) <= 1e-9
        assert abs(np.max(residual)) < 1e-9

    def test_oversized_parts_violate(self, toy_problem):
        chis = {(1, 2): np.array([6.0, 0.0, 0.6]), (2, 3): np.array([6.0, 0.0, 0.6])}
        assert np.max(toy_problem.shared_residual(chis)) > 0

    def test_uneven_centers_still_fit(self, toy_problem):
        chis = {(1, 2): np.array([4.0, 0.5, 0.2]), (2, 3): np.array([8.0, -0.5, 0.3])}
        assert np.max(toy_problem.shared_residual(chis)) <= 1e-9

    def test_item_accuracy(self, toy_problem):
        chis = {(1, 2): np.array([4.0, 0.5, 0.2]), (2, 3): np.array([8.0, -0.5, 0.3])}
        assert abs(toy_problem.item_accuracy(chis)[0] - 0.5) < 1e-12


# ============================================================================
# Exploration scenario bookkeeping
# ============================================================================


class TestMarsStructure:
    """Tests for the per-edge bookkeeping of the exploration scenario."""

    def test_edges(self, mars_problem):
        assert set(mars_problem.edges) == set(MARS_STRUCTURE)

    @pytest.mark.parametrize("edge", sorted(MARS_STRUCTURE))
    def test_edge_structure(self, mars_problem, edge):
        prob = mars_problem.edge_problems[edge]
        expected = MARS_STRUCTURE[edge]
        assert (prob.num_params, prob.chi_dim, prob.shared_rows(), prob.xi_count) == expected

    def test_dimension_formula(self, mars_problem):
        for prob in mars_problem.edge_problems.values():
            assert prob.chi_dim == 3 * prob.num_params + 2 * prob.xi_count

    def test_structure_table_rows(self, mars_problem):
        rows = {row["edge"]: row for row in structure_table(mars_problem)}
        assert rows["1-6"]["pi"] == 8
        assert rows["1-6"]["shared_rows"] == 436
        assert len(rows) == 14

    def test_shared_rows_cover_every_item(self, mars_problem):
        total = sum(s.stop - s.start for s in mars_problem.row_blocks.values())
        assert total == mars_problem.shared_row_count
