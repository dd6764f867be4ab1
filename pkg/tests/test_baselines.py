import numpy as np
import pytest

from beliefddp.classes.Baselines import (PlannerKind, make_plan, mlddp_plan, most_likely_latent, pwddp_plan,
                                         stacked_model)
from beliefddp.classes.CustomExceptions import ConfigurationError, InvalidArgumentError
from beliefddp.classes.Solvers import SolverConfig


class TestPlannerKind:

    def test_parse(self):
        assert PlannerKind.parse("PODDP") is PlannerKind.PODDP
        assert PlannerKind.parse("pwddp") is PlannerKind.PWDDP

    def test_unknown_planner(self):
        with pytest.raises(ConfigurationError):
            PlannerKind.parse("qmdp")


class TestMostLikelyLatent:

    def test_argmax(self):
        assert most_likely_latent([0.2, 0.8]) == 1
        assert most_likely_latent([0.1, 0.3, 0.6]) == 2

    def test_tie_goes_to_lowest_index(self):
        assert most_likely_latent([0.5, 0.5]) == 0
        assert most_likely_latent([0.2, 0.4, 0.4]) == 1


class TestStackedModel:

    def test_cost_is_linear_in_weights(self, two_goal_model):
        X = np.array([0.3, -0.2, -0.5, 0.4])
        u = np.array([0.1, 0.2])
        left = stacked_model(two_goal_model, [1.0, 0.0])
        right = stacked_model(two_goal_model, [0.0, 1.0])
        middle = stacked_model(two_goal_model, [0.5, 0.5])
        assert middle.running_cost(X, u, 0) == pytest.approx(
            0.5 * left.running_cost(X, u, 0) + 0.5 * right.running_cost(X, u, 0), rel=1e-12)
        assert middle.final_cost(X, 0) == pytest.approx(
            0.5 * left.final_cost(X, 0) + 0.5 * right.final_cost(X, 0), rel=1e-12)

    def test_copies_move_with_their_own_dynamics(self, two_goal_model):
        stacked = stacked_model(two_goal_model, [0.4, 0.6])
        X = np.array([0.0, 0.0, 1.0, 1.0])
        np.testing.assert_allclose(stacked.dynamics_mean(X, np.array([1.0, 0.0]), 0), [0.1, 0.0, 1.1, 1.0])
        assert stacked.num_latents == 1
        assert stacked.state_dim == 4

    def test_weight_count(self, two_goal_model):
        with pytest.raises(InvalidArgumentError):
            stacked_model(two_goal_model, [0.2, 0.3, 0.5])


class TestPlans:

    def test_certain_weights_match_most_likely_plan(self, two_goal_model):
        config = SolverConfig(horizon=8, segments=2)
        x0 = np.array([0.0, 0.5])
        weighted = pwddp_plan(two_goal_model, x0, np.array([1.0, 0.0]), config)
        likely = mlddp_plan(two_goal_model, x0, np.array([0.6, 0.4]), config)
        assert likely.latent == 0
        assert weighted.result.cost == pytest.approx(likely.result.cost, rel=1e-5)
        np.testing.assert_allclose(weighted.result.tree.controls[()], likely.result.tree.controls[()], atol=1e-4)

    def test_baselines_solve_a_single_segment(self, two_goal_model):
        config = SolverConfig(horizon=6, segments=3)
        plan = make_plan(PlannerKind.MLDDP, two_goal_model, np.zeros(2), np.array([0.5, 0.5]), config)
        assert plan.kind is PlannerKind.MLDDP
        assert plan.result.tree.histories() == [()]
        assert plan.result.tree.controls[()].shape == (6, 2)

    @pytest.mark.parametrize("kind, size", [(PlannerKind.PODDP, 6), (PlannerKind.MLDDP, 3), (PlannerKind.PWDDP, 5)])
    def test_deviation_matches_nominal_layout(self, two_goal_model, kind, size):
        config = SolverConfig(horizon=4, segments=2, max_iterations=3)
        plan = make_plan(kind, two_goal_model, np.array([0.1, 0.2]), np.array([0.3, 0.7]), config)
        nominal = plan.result.tree.states[()][0]
        deviation = plan.deviation(np.array([0.1, 0.2]), nominal)
        assert deviation.shape == (size,)
        np.testing.assert_array_equal(deviation, 0.0)


class TestDeviation:

    def _plan(self, two_goal_model):
        return make_plan(PlannerKind.PODDP, two_goal_model, np.zeros(2), np.array([0.5, 0.5]),
                         SolverConfig(horizon=4, segments=1, max_iterations=2))

    def test_on_a_copy_is_zero(self, two_goal_model):
        plan = self._plan(two_goal_model)
        nominal = np.array([1.0, 0.0, -1.0, 0.0, 0.3, -0.3])
        np.testing.assert_array_equal(plan.deviation(np.array([-1.0, 0.0]), nominal), 0.0)
        np.testing.assert_array_equal(plan.deviation(np.array([1.0, 0.0]), nominal), 0.0)

    def test_offset_of_nearest_copy_moves_every_copy(self, two_goal_model):
        plan = self._plan(two_goal_model)
        nominal = np.array([1.0, 0.0, -1.0, 0.0, 0.3, -0.3])
        np.testing.assert_allclose(plan.deviation(np.array([-0.9, 0.1]), nominal),
                                   [0.1, 0.1, 0.1, 0.1, 0.0, 0.0], atol=1e-12)
