import numpy as np
import pytest

from beliefddp.classes.CustomExceptions import ConfigurationError
from beliefddp.classes.ProblemModels import numerical_jacobian
from beliefddp.classes.Vehicles import (BicycleParams, IDMParams, bicycle_jacobian, bicycle_step, idm_accel,
                                        smooth_relu)


class TestBicycle:

    def test_heading_update(self):
        x_next = bicycle_step(np.array([0.0, 0.0, 0.0, 10.0]), np.array([0.1, 0.0]), BicycleParams())
        assert x_next[2] == pytest.approx(0.1 * (10.0 / 2.5) * np.tan(0.1), rel=1e-12)
        assert x_next[2] == pytest.approx(0.04013, abs=1e-5)
        assert x_next[0] == pytest.approx(1.0)

    def test_standing_vehicle_stays(self):
        x = np.array([1.0, 2.0, 0.3, 0.0])
        np.testing.assert_allclose(bicycle_step(x, np.array([0.5, 0.0]), BicycleParams()), x)

    def test_speed_is_clamped(self):
        params = BicycleParams(v_max=5.0)
        assert bicycle_step(np.array([0.0, 0.0, 0.0, 0.1]), np.array([0.0, -3.0]), params)[3] == 0.0
        assert bicycle_step(np.array([0.0, 0.0, 0.0, 4.9]), np.array([0.0, 3.0]), params)[3] == 5.0

    def test_jacobian_matches_differences(self):
        params = BicycleParams()
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = np.array([rng.normal(), rng.normal(), rng.uniform(-np.pi, np.pi), rng.uniform(0.5, 20.0)])
            u = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-2.0, 2.0)])
            f_x, f_u = bicycle_jacobian(x, u, params)
            numeric = numerical_jacobian(lambda xu: bicycle_step(xu[:4], xu[4:], params), np.concatenate([x, u]))
            np.testing.assert_allclose(f_x, numeric[:, :4], rtol=1e-6, atol=1e-8)
            np.testing.assert_allclose(f_u, numeric[:, 4:], rtol=1e-6, atol=1e-8)

    def test_invalid_parameters(self):
        with pytest.raises(ConfigurationError):
            BicycleParams(wheelbase=0.0)


class TestIDM:

    def test_following_example(self):
        # s* = 2 + 10 * 1.5 = 17, gap 20
        accel = idm_accel(20.0, 10.0, 0.0, 10.0, 1.0, IDMParams(desired_speed=15.0))
        expected = 1.5 * (1.0 - (10.0 / 15.0) ** 4 - (17.0 / 20.0) ** 2)
        assert accel == pytest.approx(expected, abs=1e-6)
        assert accel == pytest.approx(0.12, abs=1e-3)

    def test_free_road_when_out_of_lane(self):
        params = IDMParams(desired_speed=15.0)
        accel = idm_accel(20.0, 10.0, 0.0, 10.0, 0.0, params)
        assert accel == pytest.approx(1.5 * (1.0 - (10.0 / 15.0) ** 4), rel=1e-12)

    def test_free_road_when_leader_is_far(self):
        params = IDMParams(desired_speed=15.0)
        accel = idm_accel(1000.0, 10.0, 0.0, 10.0, 1.0, params)
        assert accel == pytest.approx(1.5 * (1.0 - (10.0 / 15.0) ** 4), abs=1e-3)

    def test_leader_behind_is_ignored(self):
        params = IDMParams(desired_speed=15.0)
        accel = idm_accel(-30.0, 10.0, 0.0, 10.0, 1.0, params)
        assert accel == pytest.approx(1.5 * (1.0 - (10.0 / 15.0) ** 4), abs=1e-6)

    def test_brakes_harder_when_closing_faster(self):
        params = IDMParams(desired_speed=15.0)
        accels = [idm_accel(15.0, ego_v, 0.0, 10.0, 1.0, params) for ego_v in (12.0, 10.0, 8.0, 6.0)]
        assert all(later < earlier for earlier, later in zip(accels, accels[1:]))

    def test_non_yielding_driver_ignores_leader(self):
        params = IDMParams(desired_speed=14.0, yields=False)
        near = idm_accel(3.0, 5.0, 0.0, 10.0, 1.0, params)
        assert near == pytest.approx(1.5 * (1.0 - (10.0 / 14.0) ** 4), rel=1e-12)

    def test_smooth_relu(self):
        assert smooth_relu(10.0, 5.0) == pytest.approx(10.0, abs=1e-12)
        assert smooth_relu(-10.0, 5.0) == pytest.approx(0.0, abs=1e-12)
        assert smooth_relu(0.0, 5.0) == pytest.approx(np.log(2.0) / 5.0)

    def test_from_dict(self):
        assert IDMParams.from_dict({"desired_speed": 12.0}).desired_speed == 12.0
        with pytest.raises(ConfigurationError):
            IDMParams.from_dict({"politeness": 0.5})
