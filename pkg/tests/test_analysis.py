import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from odtalloc.analysis import (
    check_nestedness_1d,
    cross_difference,
    indifference_set_distance,
    monotone_map_1d,
    verify_nondegeneracy,
    verify_twist,
)
from odtalloc.cost import reduced_cost, reduced_cost_matrix, trip_cost
from odtalloc.errors import DimensionMismatch
from odtalloc.measures import DiscreteMeasure, TaskSet, index_pushforward
from odtalloc.rng import rng_stream
from odtalloc.scenarios import ScenarioSpec, generate
from odtalloc.solver import solve_exact

ROOT8 = 2.0 * math.sqrt(2.0)


class TestTwist:
    def test_known_pair_ratio(self):
        # gradient difference is [2(y'-y); 2(y'-y)], norm 2*sqrt(2)*|y'-y|
        from odtalloc.cost import grad_x

        delta = grad_x([3.0], [7.0], [0.0]) - grad_x([3.0], [7.0], [1.0])
        assert_allclose(delta, [2.0, 2.0])
        assert_allclose(np.linalg.norm(delta) / 1.0, ROOT8)

    def test_ratio_is_constant(self):
        for dim in (1, 2, 3):
            report = verify_twist(dim, 1000, seed=7)
            assert report.passed
            assert abs(report.worst_case - ROOT8) <= 1e-9
            assert report.samples_checked == 1000

    def test_seeded_reproducibility(self):
        a = verify_twist(2, 50, seed=3)
        b = verify_twist(2, 50, seed=3)
        assert a.worst_case == b.worst_case

    def test_requires_samples(self):
        with pytest.raises(DimensionMismatch):
            verify_twist(2, 0)

    def test_json_shape(self):
        payload = verify_twist(1, 5, seed=1).to_json()
        assert set(payload) == {"condition", "passed", "samples", "worst_case", "witness"}
        assert payload["condition"] == "twist"


class TestNondegeneracy:
    def test_scalar_singular_value(self):
        # column [-2; -2] has norm 2*sqrt(2)
        report = verify_nondegeneracy(1, 10, seed=2)
        assert report.passed
        assert abs(report.worst_case - ROOT8) <= 1e-9

    def test_all_dims(self):
        for dim in (1, 2, 3):
            for seed in (0, 99):
                report = verify_nondegeneracy(dim, 25, seed=seed)
                assert report.passed
                assert abs(report.worst_case - ROOT8) <= 1e-9


class TestCrossDifference:
    def test_correlation_cost_ordered_pair(self):
        # -(s - s')(y - y') with s=0, s'=1, y=0, y'=1 gives -1
        value = cross_difference(lambda s, y: -s * y, 0.0, 1.0, 0.0, 1.0)
        assert value == -1.0

    def test_equal_first_argument_cancels(self):
        value = cross_difference(
            lambda x, y: trip_cost([x], [2 * x], [y]), 1.5, 1.5, 0.0, 3.0
        )
        assert value == 0.0

    def test_ordered_draws_nonpositive(self):
        rng = rng_stream(17)
        for _ in range(1000):
            s_lo, s_hi = sorted(rng.normals(2))
            y_lo, y_hi = sorted(rng.normals(2))
            value = cross_difference(lambda s, y: -s * y, s_lo, s_hi, y_lo, y_hi)
            assert value <= 0.0

    def test_zero_iff_tied(self):
        assert cross_difference(lambda s, y: -s * y, 1.0, 1.0, 0.0, 2.0) == 0.0
        assert cross_difference(lambda s, y: -s * y, 0.0, 2.0, 1.0, 1.0) == 0.0
        assert cross_difference(lambda s, y: -s * y, 0.0, 2.0, 0.0, 2.0) < 0.0


class TestNestedness:
    def test_random_instances_pass(self):
        for seed in range(5):
            spec = ScenarioSpec("gaussian_mixture", 1, 15, 12, seed=seed)
            tasks, agents = generate(spec)
            report = check_nestedness_1d(tasks, agents, grid=48)
            assert report.passed

    def test_constant_index_passes(self):
        tasks = TaskSet([[0.0], [1.0], [2.0]], [[2.0], [1.0], [0.0]])
        agents = DiscreteMeasure([[0.0], [0.5], [1.0]])
        report = check_nestedness_1d(tasks, agents, grid=16)
        assert report.passed
        # all index points coincide at 2, so thresholds are flat
        assert abs(report.worst_case) <= 1e-12

    def test_degenerate_grid_levels(self):
        # coincident agent atoms make consecutive quantiles equal
        tasks = TaskSet([[0.0], [1.0]], [[0.0], [1.0]])
        agents = DiscreteMeasure([[0.5], [0.5]])
        report = check_nestedness_1d(tasks, agents, grid=8)
        assert report.passed

    def test_rejects_multidimensional(self):
        tasks = TaskSet([[0.0, 0.0]], [[1.0, 1.0]])
        agents = DiscreteMeasure([[0.0, 0.0]])
        with pytest.raises(DimensionMismatch):
            check_nestedness_1d(tasks, agents)


class TestMonotoneMap:
    def test_two_atom_pairing(self):
        idx = DiscreteMeasure([[0.0], [2.0]])
        agents = DiscreteMeasure([[0.0], [1.0]])
        plan = monotone_map_1d(idx, agents)
        assert plan.entries == ((0, 0, 0.5), (1, 1, 0.5))
        # objective: 0.5*(-0*0) + 0.5*(-2*1)
        assert plan.objective == -1.0

    def test_forced_single(self):
        plan = monotone_map_1d(DiscreteMeasure([[3.0]]), DiscreteMeasure([[2.0]]))
        assert plan.entries == ((0, 0, 1.0),)
        assert plan.objective == -6.0

    def test_unsorted_inputs_pair_by_rank(self):
        idx = DiscreteMeasure([[2.0], [0.0]])
        agents = DiscreteMeasure([[1.0], [0.0]])
        plan = monotone_map_1d(idx, agents)
        assert plan.support() == {(1, 1), (0, 0)}

    def test_oracle_sweep_matches_exact_reduced(self):
        rng = rng_stream(404)
        for trial in range(50):
            size = 2 + trial % 7
            tasks = TaskSet(
                np.array(rng.normals(size)).reshape(size, 1),
                np.array(rng.normals(size)).reshape(size, 1),
            )
            agents = DiscreteMeasure(np.array(rng.normals(size)).reshape(size, 1))
            idx = index_pushforward(tasks)
            mono = monotone_map_1d(idx, agents)
            exact, _ = solve_exact(
                reduced_cost_matrix(idx, agents), tasks.weights, agents.weights
            )
            assert abs(mono.objective - exact.objective) <= 1e-9

    def test_rejects_multidimensional(self):
        with pytest.raises(DimensionMismatch):
            monotone_map_1d(DiscreteMeasure([[0.0, 1.0]]), DiscreteMeasure([[0.0]]))


class TestIndifferenceSet:
    def test_membership_by_construction(self):
        o, d, y = np.array([0.3]), np.array([0.9]), np.array([0.2])
        k = 4.0 * y - 2.0 * (o + d)
        assert indifference_set_distance(o, d, y, k) == 0.0

    def test_scalar_distance(self):
        # |4*1 - 2*(1+0) - 0| = 2
        assert indifference_set_distance([1.0], [0.0], [1.0], [0.0]) == 2.0

    def test_lipschitz_in_midpoint(self):
        rng = rng_stream(18)
        for _ in range(100):
            o, d, y = (np.array(rng.normals(2)) for _ in range(3))
            k = np.array(rng.normals(2))
            delta = np.array(rng.normals(2)) * 0.1
            base = indifference_set_distance(o, d, y, k)
            moved = indifference_set_distance(o + delta, d, y, k)
            assert abs(moved - base) <= 2.0 * np.linalg.norm(delta) + 1e-12

    def test_k_dimension_checked(self):
        with pytest.raises(DimensionMismatch):
            indifference_set_distance([1.0], [0.0], [1.0], [0.0, 0.0])
