import os

import numpy as np
import pytest

from beliefddp.classes.Baselines import PlannerKind, make_plan
from beliefddp.classes.CustomExceptions import ConfigurationError
from beliefddp.classes.Executions import ExecutionConfig, execute_episode, run_batch, welch_t
from beliefddp.classes.ProblemModels import final_cost_gradient, numerical_gradient, numerical_jacobian
from beliefddp.classes.Scenarios import (OTHER_LON, SCENARIOS, LaneChangeConfig, TerrainConfig, TMazeConfig,
                                         build_scenario, lane_change_model, resistance, terrain_coefficient,
                                         terrain_model, tmaze_model)
from beliefddp.classes.Solvers import SolverConfig, backward_pass, forward_pass, initial_controls, solve
from beliefddp.classes.Vehicles import PX, PY, BicycleParams


def _mirror(x):
    return np.array([-x[0], x[1], np.pi - x[2], x[3]])


def _random_vehicle_state(rng):
    return np.array([rng.uniform(-3.0, 3.0), rng.uniform(0.0, 12.0), rng.uniform(0.5, 2.5), rng.uniform(0.5, 5.0)])


def _random_lane_state(rng):
    return np.array([rng.uniform(-5.0, 5.0), rng.uniform(-0.5, 4.0), rng.uniform(-0.3, 0.3),
                     rng.uniform(5.0, 12.0), rng.uniform(-10.0, 5.0), rng.uniform(6.0, 14.0)])


class TestBuildScenario:

    @pytest.mark.parametrize("experiment, state_dim", [("tmaze", 4), ("terrain", 4), ("lanechange", 6)])
    def test_defaults(self, experiment, state_dim):
        cfg, model, x0, prior = build_scenario(experiment)
        assert model.state_dim == state_dim
        assert model.num_latents == 2
        assert x0.shape == (state_dim,)
        np.testing.assert_allclose(prior, [0.49, 0.51])
        assert getattr(cfg, SCENARIOS[experiment][0].PRIOR_KEY) == 0.49

    def test_unknown_experiment(self):
        with pytest.raises(ConfigurationError):
            build_scenario("parking")

    def test_nested_parameters(self):
        cfg, model, _, _ = build_scenario("tmaze", {"bicycle": {"dt": 0.05}, "initial_state": [0.0, 1.0, 1.5, 1.0]})
        assert cfg.bicycle == BicycleParams(dt=0.05)
        assert model.dt == 0.05
        assert cfg.initial_state == (0.0, 1.0, 1.5, 1.0)
        cfg, _, _, _ = build_scenario("lanechange", {"nice": {"desired_speed": 8.0, "yields": True}})
        assert cfg.nice.desired_speed == 8.0

    @pytest.mark.parametrize("experiment, params", [
        ("tmaze", {"goal_x": 1.0}),
        ("tmaze", {"prior_left": 1.5}),
        ("tmaze", {"sigma_level": -1.0}),
        ("tmaze", {"mass": 1.0}),
        ("terrain", {"rho_rough": 0.0}),
        ("terrain", {"process_noise": [0.1, 0.1]}),
        ("lanechange", {"aggressive": {"desired_speed": 5.0, "yields": False}}),
        ("lanechange", {"nice": {"politeness": 0.2}}),
    ])
    def test_invalid_parameters(self, experiment, params):
        with pytest.raises(ConfigurationError):
            build_scenario(experiment, params)


class TestTMaze:

    def test_goals_mirror_each_other(self):
        goals = TMazeConfig().goals
        np.testing.assert_allclose(goals[0], [-goals[1][0], goals[1][1]])

    def test_variance_shrinks_along_corridor(self):
        cfg = TMazeConfig(sigma_level=9.1)
        assert cfg.observation_variance(cfg.maze_end) <= 0.01 * cfg.sigma_level ** 2
        assert cfg.observation_variance(0.0) > cfg.observation_variance(6.0) > cfg.observation_variance(10.0)

    def test_cost_is_mirror_symmetric(self):
        model = tmaze_model(TMazeConfig())
        rng = np.random.default_rng(8)
        for _ in range(50):
            x = _random_vehicle_state(rng)
            u = rng.uniform(-0.5, 0.5, size=2)
            mirrored_u = np.array([-u[0], u[1]])
            for z in range(2):
                assert model.running_cost(_mirror(x), mirrored_u, 1 - z) == pytest.approx(
                    model.running_cost(x, u, z), rel=1e-10)
                assert model.final_cost(_mirror(x), 1 - z) == pytest.approx(model.final_cost(x, z), rel=1e-10)
            np.testing.assert_allclose(model.dynamics_mean(_mirror(x), mirrored_u, 0),
                                       _mirror(model.dynamics_mean(x, u, 0)), atol=1e-12)

    def test_centerline_has_no_lateral_gradient(self):
        model = tmaze_model(TMazeConfig())
        x = np.array([0.0, 3.0, np.pi / 2, 1.0])
        l_x = model.cost_gradient(x, np.zeros(2), 0)[0] + model.cost_gradient(x, np.zeros(2), 1)[0]
        assert l_x[0] == pytest.approx(0.0, abs=1e-12)

    def test_observation_means(self):
        model = tmaze_model(TMazeConfig())
        x = np.zeros(4)
        assert model.observation_mean(x, 0)[0] == -1.0
        assert model.observation_mean(x, 1)[0] == 1.0

    def test_no_preferred_turn_under_even_belief(self):
        model = tmaze_model(TMazeConfig())
        schedule = SolverConfig(horizon=6, segments=2).schedule()
        tree = forward_pass(model, np.array([0.0, 0.0, np.pi / 2, 1.0]), np.array([0.5, 0.5]), schedule,
                            initial_controls(schedule, 2, 2))
        gains = backward_pass(model, tree)
        for t in range(3):
            assert gains.open_loop[((), t)][0] == pytest.approx(0.0, abs=1e-7)


class TestTerrain:

    def test_resistance_example(self):
        cfg = TerrainConfig(rho_rough=2.0)
        assert resistance(0.0, 1.0, 1, cfg) == pytest.approx(2.0 * np.tanh(1.0), rel=1e-12)
        assert resistance(0.0, 1.0, 1, cfg) == pytest.approx(1.5232, abs=1e-4)

    def test_rough_coefficient_is_constant(self):
        cfg = TerrainConfig()
        for px in np.linspace(-10.0, 10.0, 21):
            assert terrain_coefficient(px, 1, cfg) == (cfg.rho_rough, 0.0)

    def test_smooth_never_resists_more(self):
        cfg = TerrainConfig()
        for px in np.linspace(-10.0, 10.0, 41):
            for v in (0.0, 0.5, 2.0, 10.0):
                assert resistance(px, v, 0, cfg) <= resistance(px, v, 1, cfg)

    def test_smooth_coefficient_slope(self):
        cfg = TerrainConfig()
        for px in (-1.0, 1.5, 3.0):
            slope = numerical_gradient(lambda p: terrain_coefficient(p[0], 0, cfg)[0], np.array([px]))[0]
            assert terrain_coefficient(px, 0, cfg)[1] == pytest.approx(slope, rel=1e-6)

    def test_observation_is_uninformative(self):
        model = terrain_model(TerrainConfig())
        x = np.array([0.0, 0.0, np.pi / 2, 2.0])
        np.testing.assert_allclose(model.observation_mean(x, 0), model.observation_mean(x, 1))


class TestAnalyticDerivatives:

    @pytest.mark.parametrize("builder, config_class", [(tmaze_model, TMazeConfig), (terrain_model, TerrainConfig)])
    def test_dynamics_jacobian(self, builder, config_class):
        model = builder(config_class())
        rng = np.random.default_rng(21)
        for _ in range(100):
            x = _random_vehicle_state(rng)
            u = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-1.0, 1.0)])
            for z in range(2):
                f_x, f_u = model.dynamics_jacobian(x, u, z)
                numeric = numerical_jacobian(lambda xu: model.dynamics_mean(xu[:4], xu[4:], z),
                                             np.concatenate([x, u]))
                np.testing.assert_allclose(f_x, numeric[:, :4], rtol=1e-6, atol=1e-8)
                np.testing.assert_allclose(f_u, numeric[:, 4:], rtol=1e-6, atol=1e-8)

    @pytest.mark.parametrize("builder, config_class, sampler", [
        (tmaze_model, TMazeConfig, _random_vehicle_state),
        (terrain_model, TerrainConfig, _random_vehicle_state),
        (lane_change_model, LaneChangeConfig, _random_lane_state),
    ])
    def test_cost_gradients(self, builder, config_class, sampler):
        model = builder(config_class())
        n = model.state_dim
        rng = np.random.default_rng(4)
        for _ in range(30):
            x = sampler(rng)
            u = rng.uniform(-0.5, 0.5, size=2)
            for z in range(2):
                l_x, l_u = model.cost_gradient(x, u, z)
                numeric = numerical_gradient(lambda xu: model.running_cost(xu[:n], xu[n:], z),
                                             np.concatenate([x, u]))
                np.testing.assert_allclose(l_x, numeric[:n], rtol=1e-4, atol=1e-5)
                np.testing.assert_allclose(l_u, numeric[n:], rtol=1e-4, atol=1e-5)
                numeric_final = numerical_gradient(lambda xx: model.final_cost(xx, z), x)
                np.testing.assert_allclose(final_cost_gradient(model, x, z), numeric_final, rtol=1e-4, atol=1e-5)


class TestLaneChange:

    def test_driver_types_differ_only_in_the_other_vehicle(self):
        model = lane_change_model(LaneChangeConfig())
        x = np.array([0.0, 3.0, 0.0, 10.0, -6.0, 10.0])
        u = np.array([0.0, 0.5])
        nice = model.dynamics_mean(x, u, 0)
        aggressive = model.dynamics_mean(x, u, 1)
        np.testing.assert_allclose(nice[:5], aggressive[:5])
        assert nice[5] < aggressive[5]

    def test_other_vehicle_speed_stays_non_negative(self):
        model = lane_change_model(LaneChangeConfig())
        x = np.array([1.0, 3.5, 0.0, 0.0, 0.5, 0.05])
        assert model.dynamics_mean(x, np.zeros(2), 0)[5] >= 0.0

    def test_absent_other_vehicle_reduces_to_plain_ddp(self):
        cfg = LaneChangeConfig(initial_state=(0.0, 0.0, 0.0, 10.0, 1000.0, 10.0))
        model = lane_change_model(cfg)
        x0 = np.array(cfg.initial_state)
        config = SolverConfig(horizon=8, segments=2, max_iterations=100, cost_tolerance=1e-12)
        tree = solve(model, x0, cfg.prior(), config).tree
        plain = solve(model.conditioned_on(1), x0, np.ones(1), config.single_segment()).tree.controls[()]
        assert len(tree.histories()) == 3
        for history in tree.histories():
            start = tree.schedule[len(history)]
            np.testing.assert_allclose(tree.controls[history], plain[start:start + tree.segment_length(history)],
                                       atol=1e-4)

    def test_values_stay_finite(self):
        model = lane_change_model(LaneChangeConfig())
        rng = np.random.default_rng(2)
        for _ in range(100):
            x = _random_lane_state(rng)
            u = rng.uniform(-0.6, 0.6, size=2)
            for z in range(2):
                assert np.all(np.isfinite(model.dynamics_mean(x, u, z)))
                assert np.isfinite(model.running_cost(x, u, z))
                assert np.isfinite(model.final_cost(x, z))


@pytest.mark.slow
class TestBehaviour:

    def test_even_belief_keeps_to_the_corridor(self):
        _, model, x0, _ = build_scenario("tmaze")
        result = solve(model, x0, np.array([0.5, 0.5]), SolverConfig(horizon=30, segments=3, max_iterations=40))
        root_lateral = result.tree.branch_states((), 0)[:, 0]
        assert np.max(np.abs(root_lateral)) < 1e-3

    def test_branches_head_to_their_goals(self):
        _, model, x0, _ = build_scenario("tmaze")
        result = solve(model, x0, np.array([0.51, 0.49]), SolverConfig(horizon=30, segments=3, max_iterations=40))
        tree = result.tree
        assert tree.terminal_state((0, 0), 0)[0] < 0.0
        assert tree.terminal_state((1, 1), 1)[0] > 0.0

    def test_terrain_root_segment_explores_the_smooth_side(self):
        _, model, x0, prior = build_scenario("terrain")
        tree = solve(model, x0, prior, SolverConfig(horizon=30, segments=3, max_iterations=60)).tree
        root = tree.branch_states((), 0)
        assert np.mean(root[:, 0]) > 0.0
        assert root[-1, 0] > 0.5
        assert tree.belief((0,))[0] > 0.8
        assert tree.belief((1,))[1] > 0.8
        smooth_end = tree.terminal_state((0, 0), 0)[0]
        rough_end = tree.terminal_state((1, 1), 1)[0]
        assert np.max(tree.branch_states((0, 0), 0)[:, 0]) > TerrainConfig().transition_x
        assert rough_end < smooth_end

    def test_terrain_most_likely_plan_never_leaves_the_rough_line(self):
        _, model, x0, prior = build_scenario("terrain")
        config = SolverConfig(horizon=30, segments=3, max_iterations=60)
        likely = make_plan(PlannerKind.MLDDP, model, x0, prior, config)
        assert likely.latent == 1
        tree = solve(model, x0, prior, config).tree
        assert np.max(likely.result.tree.states[()][:10, 0]) < tree.branch_states((), 0)[-1, 0]

    def test_lane_change_tree_merges_ahead_of_nice_and_behind_aggressive(self):
        cfg, model, x0, prior = build_scenario("lanechange")
        tree = solve(model, x0, prior, SolverConfig(horizon=30, segments=3, max_iterations=60)).tree
        nice = tree.terminal_state((0, 0), 0)
        aggressive = tree.terminal_state((1, 1), 1)
        assert nice[PX] > nice[OTHER_LON]
        assert nice[PY] > 0.5 * cfg.lane_width
        assert aggressive[PX] < aggressive[OTHER_LON]

    @pytest.mark.parametrize("true_z", [0, 1])
    def test_lane_change_executed_merge(self, true_z):
        cfg, model, x0, prior = build_scenario("lanechange", {"process_noise": [0.002] * 6})
        config = SolverConfig(horizon=30, segments=3, max_iterations=60)
        for seed in range(3):
            trace = execute_episode(PlannerKind.PODDP, model, x0, prior, true_z, seed, config)
            last = np.array(trace.steps[-1].x)
            x_final = model.dynamics_mean(last, np.array(trace.steps[-1].u), true_z)
            if true_z == 0:
                assert x_final[PX] > x_final[OTHER_LON]
                assert x_final[PY] > 0.5 * cfg.lane_width
            else:
                assert x_final[PX] < x_final[OTHER_LON]

    def test_tmaze_poddp_beats_both_baselines(self):
        _, model, x0, prior = build_scenario("tmaze", {"sigma_level": 9.1})
        config = SolverConfig(horizon=30, segments=3, max_iterations=60, cost_tolerance=1e-4)
        execution = ExecutionConfig(episodes=60, base_seed=0, workers=max(1, os.cpu_count() or 1))
        stats = {kind: run_batch(kind, model, x0, prior, config, execution)[0] for kind in PlannerKind}
        poddp = stats[PlannerKind.PODDP]
        for baseline in (PlannerKind.MLDDP, PlannerKind.PWDDP):
            assert poddp.mean < stats[baseline].mean
            t_stat, _ = welch_t(poddp.costs, stats[baseline].costs)
            assert t_stat < 0.0
