"""Tests for the STL task fragment and its robust semantics."""

import numpy as np
import pytest

from stl_decomposition.errors import ContractViolation, HorizonError
from stl_decomposition.geometry import SimilarityParam, regular_polytope
from stl_decomposition.tasks import (Operator, Signal, TaskSpec, TimeInterval, interval_intersection,
                                     interval_ops, robustness, robustness_conjunction, rewrite_until,
                                     satisfied, union_covers, unroll_recurrence)


def _task(op, a, b, edge, center, beta=1.0, sides=4):
    return TaskSpec(Operator(op), TimeInterval(a, b), edge, regular_polytope(sides, beta, center))


def _two_agent_signal(positions_2):
    """Agent 1 parked at the origin, agent 2 following the given waypoints at t = 0..len-1."""
    times = np.arange(len(positions_2), dtype=float)
    return Signal.from_waypoints(times, {1: [[0.0, 0.0]] * len(times), 2: positions_2})


# ============================================================================
# Interval algebra
# ============================================================================


class TestTimeInterval:
    """Tests for closed time intervals."""

    def test_invalid_bounds(self):
        with pytest.raises(ContractViolation):
            TimeInterval(5.0, 2.0)
        with pytest.raises(ContractViolation):
            TimeInterval(-1.0, 2.0)

    def test_degenerate_interval_is_valid(self):
        iv = TimeInterval(3.0, 3.0)
        assert iv.length == 0.0
        assert iv.contains_time(3.0)

    def test_touching_intervals_overlap(self):
        assert TimeInterval(0, 5).overlaps(TimeInterval(5, 8))
        assert not TimeInterval(0, 5).overlaps(TimeInterval(5.1, 8))

    def test_containment(self):
        assert TimeInterval(10, 15).contains(TimeInterval(13, 15))
        assert not TimeInterval(13, 15).contains(TimeInterval(10, 15))


class TestIntervalOps:
    """Tests for intersection and union coverage."""

    def test_intersection(self):
        got = interval_intersection([TimeInterval(10, 15), TimeInterval(13, 15)])
        assert (got.a, got.b) == (13, 15)

    def test_disjoint_intersection_is_none(self):
        assert interval_intersection([TimeInterval(0, 1), TimeInterval(2, 3)]) is None

    def test_touching_intersection_is_a_point(self):
        got = interval_intersection([TimeInterval(0, 5), TimeInterval(5, 8)])
        assert got.length == 0.0 and got.a == 5.0

    def test_empty_family(self):
        with pytest.raises(ContractViolation):
            interval_intersection([])

    def test_union_covers_with_gapless_chain(self):
        ivs = [TimeInterval(0, 4), TimeInterval(3, 7), TimeInterval(6, 10)]
        assert union_covers(ivs, TimeInterval(1, 9))

    def test_union_with_gap_does_not_cover(self):
        ivs = [TimeInterval(0, 4), TimeInterval(5, 10)]
        assert not union_covers(ivs, TimeInterval(1, 9))

    def test_member_outside_target_fails(self):
        ivs = [TimeInterval(0, 10), TimeInterval(20, 30)]
        assert not union_covers(ivs, TimeInterval(0, 10))

    def test_summary(self):
        summary = interval_ops([TimeInterval(0, 6), TimeInterval(4, 10)], TimeInterval(2, 8))
        assert (summary.intersection.a, summary.intersection.b) == (4, 6)
        assert summary.covers is True


# ============================================================================
# Task records
# ============================================================================


class TestTaskSpec:
    """Tests for task construction and transformations."""

    def test_fixed_task_param_is_center(self):
        task = _task("G", 0, 5, (1, 2), (3.0, 1.0))
        assert np.allclose(task.param.center, [3.0, 1.0])
        assert task.param.scale == 1.0

    def test_independent_flag(self):
        assert _task("F", 0, 5, (2, 2), (0, 0)).is_independent
        assert not _task("F", 0, 5, (1, 2), (0, 0)).is_independent

    def test_parametric_needs_param(self):
        with pytest.raises(ContractViolation):
            TaskSpec(Operator.ALWAYS, TimeInterval(0, 1), (1, 2), regular_polytope(4, 1.0), parametric=True)

    def test_instantiate(self):
        base = regular_polytope(4, 1.0)
        task = TaskSpec(Operator.ALWAYS, TimeInterval(0, 1), (1, 2), base, parametric=True,
                        param=SimilarityParam([0, 0], 1.0))
        fixed = task.instantiate(SimilarityParam([2.0, 0.0], 0.5))
        assert not fixed.parametric
        assert np.allclose(fixed.truth_set.c, [2.0, 0.0])
        assert np.allclose(fixed.truth_set.z, 0.5)

    def test_instantiate_fixed_raises(self):
        with pytest.raises(ContractViolation):
            _task("G", 0, 1, (1, 2), (0, 0)).instantiate(SimilarityParam([0, 0], 1.0))

    def test_reversed_negates_relative_state(self):
        task = _task("G", 0, 5, (1, 2), (3.0, 1.0))
        back = task.reversed()
        assert back.edge == (2, 1)
        assert back.truth_set.contains([-3.0, -1.0])
        assert not back.truth_set.contains([3.0, 1.0])

    def test_dict_round_trip(self):
        task = _task("F", 2, 7, (1, 4), (1.0, -1.0), sides=6)
        task.name = "reach"
        back = TaskSpec.from_dict(task.to_dict())
        assert back.name == "reach"
        assert back.operator is Operator.EVENTUALLY
        assert back.edge == (1, 4)
        assert np.allclose(back.truth_set.c, [1.0, -1.0])


class TestRewriting:
    """Tests for Until and recurrence rewriting."""

    def test_until_splits_at_tau(self):
        left, right = regular_polytope(4, 2.0), regular_polytope(4, 0.5, (1, 0))
        hold, reach = rewrite_until(left, right, (1, 2), 0.0, 10.0, 4.0, "u")
        assert hold.operator is Operator.ALWAYS and (hold.interval.a, hold.interval.b) == (0, 4)
        assert reach.operator is Operator.EVENTUALLY and (reach.interval.a, reach.interval.b) == (4, 4)
        assert reach.sync_time == 4.0
        assert hold.name == "u:hold"

    def test_until_tau_outside(self):
        with pytest.raises(ContractViolation):
            rewrite_until(regular_polytope(4, 1.0), regular_polytope(4, 1.0), (1, 2), 0, 5, 6)

    def test_recurrence_unrolls_inside_horizon(self):
        task = _task("G", 0, 2, (1, 2), (0, 0))
        task.name = "patrol"
        copies = unroll_recurrence(task, 10.0, 40.0)
        assert [c.interval.a for c in copies] == [0, 10, 20, 30]
        assert copies[-1].name == "patrol#3"

    def test_recurrence_needs_positive_period(self):
        with pytest.raises(ContractViolation):
            unroll_recurrence(_task("G", 0, 2, (1, 2), (0, 0)), 0.0, 10.0)

    def test_recurrence_outside_horizon(self):
        with pytest.raises(HorizonError):
            unroll_recurrence(_task("G", 0, 20, (1, 2), (0, 0)), 5.0, 10.0)


# ============================================================================
# Signals and semantics
# ============================================================================


class TestSignal:
    """Tests for piecewise-linear signals."""

    def test_interpolation(self):
        sig = _two_agent_signal([[0, 0], [2, 0]])
        assert np.allclose(sig.at(0.5), [0, 0, 1, 0])

    def test_relative_is_second_minus_first(self):
        sig = _two_agent_signal([[3, 1], [3, 1]])
        assert np.allclose(sig.relative(1, 2, 0.0), [[3, 1]])
        assert np.allclose(sig.relative(2, 1, 0.0), [[-3, -1]])

    def test_times_must_increase(self):
        with pytest.raises(ContractViolation):
            Signal([0.0, 0.0], np.zeros((2, 2)), [1])

    def test_agents_are_required(self):
        with pytest.raises(ContractViolation):
            Signal([0.0, 1.0], np.zeros((2, 4)))

    def test_dimension_follows_the_agent_count(self):
        sig = Signal([0.0, 1.0], np.zeros((2, 6)), [4, 7])
        assert sig.dim == 3
        assert sig.agent(7, 0.5).shape == (1, 3)

    def test_width_must_split_evenly(self):
        with pytest.raises(ContractViolation):
            Signal([0.0, 1.0], np.zeros((2, 5)), [1, 2])


class TestRobustness:
    """Tests for robust and boolean semantics."""

    def test_always_takes_the_worst_sample(self):
        sig = _two_agent_signal([[5, 0], [5.5, 0], [5, 0]])
        task = _task("G", 0, 2, (1, 2), (5, 0))
        assert abs(robustness(sig, task) - 0.5) < 1e-12

    def test_eventually_takes_the_best_sample(self):
        sig = _two_agent_signal([[0, 0], [5, 0], [0, 0]])
        task = _task("F", 0, 2, (1, 2), (5, 0))
        assert abs(robustness(sig, task) - 1.0) < 1e-12

    def test_independent_task_reads_the_agent(self):
        sig = _two_agent_signal([[0, 0], [0, 0]])
        task = _task("G", 0, 1, (2, 2), (0, 0))
        assert abs(robustness(sig, task) - 1.0) < 1e-12

    def test_conjunction_is_minimum(self):
        sig = _two_agent_signal([[5, 0], [5, 0], [5, 0]])
        near = _task("G", 0, 2, (1, 2), (5, 0))
        off = _task("G", 0, 2, (1, 2), (5.5, 0))
        assert abs(robustness_conjunction(sig, [near, off]) - 0.5) < 1e-12

    def test_empty_conjunction(self):
        with pytest.raises(ContractViolation):
            robustness_conjunction(_two_agent_signal([[0, 0], [0, 0]]), [])

    def test_short_signal(self):
        sig = _two_agent_signal([[0, 0], [0, 0]])
        with pytest.raises(HorizonError):
            robustness(sig, _task("G", 0, 5, (1, 2), (0, 0)))

    def test_offset_start_time(self):
        sig = _two_agent_signal([[9, 9], [9, 9], [0, 0], [0, 0]])
        task = _task("G", 0, 1, (1, 2), (0, 0))
        assert robustness(sig, task, t0=2.0) > 0
        assert robustness(sig, task, t0=0.0) < 0

    def test_boolean_agrees_with_sign(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            waypoints = rng.uniform(-3, 3, size=(6, 2))
            sig = _two_agent_signal(waypoints)
            for op in ("G", "F"):
                task = _task(op, 1, 4, (1, 2), (0.5, 0), beta=1.5, sides=5)
                rho = robustness(sig, task, refinement=50)
                if abs(rho) > 1e-9:
                    assert satisfied(sig, task, refinement=50) == (rho > 0)
