"""
Benchmark problems: T-maze goal uncertainty, rough-terrain mode uncertainty
and latent-intent lane change.

Each scenario has a frozen config dataclass (validated from the ``scenario``
section of its YAML file) and a builder returning a ProblemModel. The
builders register analytic cost gradients and, where available, analytic
dynamics Jacobians.
"""
import logging
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit

from .Beliefs import LatentSet
from .CustomExceptions import ConfigurationError
from .ProblemModels import ProblemModel
from .Vehicles import (ACCEL, PX, PY, STEER, THETA, V, BicycleParams, IDMParams, bicycle_jacobian,
                       bicycle_step, idm_accel)

logger = logging.getLogger(__name__)


def _sigmoid_slope(value):
    s = expit(value)
    return s * (1.0 - s)


class ScenarioConfig:
    """Shared parsing for the scenario dataclasses."""

    @classmethod
    def from_dict(cls, params):
        names = {f.name for f in fields(cls)}
        unknown = set(params) - names
        if unknown:
            raise ConfigurationError(f"unknown {cls.__name__} parameters: {sorted(unknown)}")
        parsed = {}
        for key, value in params.items():
            if key == "bicycle":
                value = BicycleParams(**value) if isinstance(value, dict) else value
            elif isinstance(value, dict):
                value = IDMParams.from_dict(value)
            elif isinstance(value, list):
                value = tuple(value)
            parsed[key] = value
        try:
            return cls(**parsed)
        except TypeError as err:
            raise ConfigurationError(f"invalid {cls.__name__}: {err}")

    def _require_positive(self, *names):
        for name in names:
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"{type(self).__name__}.{name} must be positive, got {getattr(self, name)}")

    def _require_length(self, name, length):
        if len(getattr(self, name)) != length:
            raise ConfigurationError(f"{type(self).__name__}.{name} needs {length} entries")

    def _require_probability(self, name):
        if not 0.0 < getattr(self, name) < 1.0:
            raise ConfigurationError(f"{type(self).__name__}.{name} must lie in (0, 1)")


####################################################################################################
# T-maze
####################################################################################################

@dataclass(frozen=True)
class TMazeConfig(ScenarioConfig):
    """
    A corridor along +y that splits into a left and a right arm at junction_y.
    Goals sit at (-goal_x, goal_y) for Left and (goal_x, goal_y) for Right.
    """

    PRIOR_KEY = "prior_left"

    goal_x: float = 2.5
    goal_y: float = 9.0
    junction_y: float = 6.0
    corridor_half_width: float = 1.5
    maze_end: float = 10.5
    maze_half_width: float = 4.0
    goal_weight: float = 0.01
    final_goal_weight: float = 20.0
    wall_weight: float = 50.0
    wall_sharpness: float = 4.0
    steer_weight: float = 1.0
    accel_weight: float = 0.02
    sigma_level: float = 9.1
    variance_decay: float = 3.0
    variance_midpoint: float = 2.5
    variance_floor: float = 1e-6
    prior_left: float = 0.49
    initial_state: tuple = (0.0, 0.0, np.pi / 2, 3.0)
    bicycle: BicycleParams = BicycleParams()

    def __post_init__(self):
        self._require_positive("goal_x", "goal_y", "corridor_half_width", "maze_end", "maze_half_width",
                               "final_goal_weight", "wall_sharpness", "sigma_level", "variance_decay",
                               "variance_floor")
        self._require_probability("prior_left")
        self._require_length("initial_state", 4)
        if not self.corridor_half_width < self.goal_x < self.maze_half_width:
            raise ConfigurationError("goals must lie between the corridor and the outer maze walls")
        if not 0.0 < self.junction_y < self.maze_end:
            raise ConfigurationError("junction must lie inside the maze")

    @property
    def goals(self):
        return np.array([[-self.goal_x, self.goal_y], [self.goal_x, self.goal_y]])

    def prior(self):
        return np.array([self.prior_left, 1.0 - self.prior_left])

    def observation_variance(self, py):
        """sigma_level^2 / (1 + exp(decay (py - midpoint))), plus a small floor."""
        return (self.sigma_level ** 2 * expit(-self.variance_decay * (py - self.variance_midpoint))
                + self.variance_floor)


def tmaze_wall_cost(position, cfg):
    """Smooth wall penalty and its gradient over (px, py)."""
    px, py = position
    a = cfg.wall_sharpness
    side = a * (px ** 2 - cfg.corridor_half_width ** 2)
    below_junction = a * (cfg.junction_y - py)
    top = a * (py - cfg.maze_end)
    outer = a * (px ** 2 - cfg.maze_half_width ** 2)
    cost = cfg.wall_weight * (expit(side) * expit(below_junction) + expit(top) + expit(outer))
    grad = cfg.wall_weight * np.array([
        _sigmoid_slope(side) * 2.0 * a * px * expit(below_junction) + _sigmoid_slope(outer) * 2.0 * a * px,
        -a * expit(side) * _sigmoid_slope(below_junction) + a * _sigmoid_slope(top),
    ])
    return cost, grad


def tmaze_model(cfg):
    """
    Two-latent T-maze. Dynamics are deterministic and independent of the goal;
    the scalar observation has mean -1 (Left) or +1 (Right) and a variance that
    shrinks as the vehicle moves up the corridor.
    :type cfg: TMazeConfig
    :rtype: ProblemModel
    """
    goals = cfg.goals
    bike = cfg.bicycle
    control_weights = np.array([cfg.steer_weight, cfg.accel_weight])

    def dynamics(x, u, z):
        return bicycle_step(x, u, bike)

    def dynamics_jacobian(x, u, z):
        return bicycle_jacobian(x, u, bike)

    def observation_mean(x, z):
        return np.array([-1.0 if z == 0 else 1.0])

    def observation_noise(x, z):
        return np.array([[cfg.observation_variance(x[PY])]])

    def running_cost(x, u, z):
        offset = x[:2] - goals[z]
        wall, _ = tmaze_wall_cost(x[:2], cfg)
        return cfg.goal_weight * offset @ offset + wall + control_weights @ (u * u)

    def cost_gradient(x, u, z):
        _, wall_grad = tmaze_wall_cost(x[:2], cfg)
        l_x = np.zeros(4)
        l_x[:2] = 2.0 * cfg.goal_weight * (x[:2] - goals[z]) + wall_grad
        return l_x, 2.0 * control_weights * u

    def final_cost(x, z):
        offset = x[:2] - goals[z]
        wall, _ = tmaze_wall_cost(x[:2], cfg)
        return cfg.final_goal_weight * offset @ offset + wall

    def final_cost_gradient(x, z):
        _, wall_grad = tmaze_wall_cost(x[:2], cfg)
        l_fx = np.zeros(4)
        l_fx[:2] = 2.0 * cfg.final_goal_weight * (x[:2] - goals[z]) + wall_grad
        return l_fx

    return ProblemModel(
        state_dim=4, control_dim=2, obs_dim=1,
        latents=LatentSet(("Left", "Right")),
        dynamics_mean=dynamics,
        dynamics_noise=np.zeros((4, 4)),
        observation_mean=observation_mean,
        observation_noise=observation_noise,
        running_cost=running_cost,
        final_cost=final_cost,
        dt=bike.dt,
        dynamics_jacobian=dynamics_jacobian,
        cost_gradient=cost_gradient,
        final_cost_gradient=final_cost_gradient,
        control_bounds=bike.control_bounds,
        name="tmaze",
    )


####################################################################################################
# Rough terrain
####################################################################################################

@dataclass(frozen=True)
class TerrainConfig(ScenarioConfig):
    """
    Under Rough the resistive coefficient is rho_rough everywhere; under Smooth it
    falls from rho_rough (left) to rho_smooth (right) around transition_x. The
    final cost weighs the lateral and the longitudinal goal offsets separately.
    """

    PRIOR_KEY = "prior_smooth"

    rho_rough: float = 2.0
    rho_smooth: float = 0.0
    transition_x: float = 0.75
    transition_sharpness: float = 4.0
    goal: tuple = (0.0, 9.0)
    goal_weight: float = 0.01
    final_goal_weight: float = 20.0
    final_lateral_weight: float = 2.0
    steer_weight: float = 1.0
    accel_weight: float = 0.5
    process_noise: tuple = (0.02, 0.02, 0.01, 0.05)
    prior_smooth: float = 0.49
    initial_state: tuple = (0.0, 0.0, np.pi / 2, 3.0)
    bicycle: BicycleParams = BicycleParams()

    def __post_init__(self):
        if not self.rho_rough > self.rho_smooth >= 0.0:
            raise ConfigurationError(f"need rho_rough > rho_smooth >= 0, got {self.rho_rough}, {self.rho_smooth}")
        self._require_positive("transition_sharpness", "final_goal_weight", "final_lateral_weight")
        self._require_probability("prior_smooth")
        self._require_length("goal", 2)
        self._require_length("process_noise", 4)
        self._require_length("initial_state", 4)
        if any(s < 0.0 for s in self.process_noise):
            raise ConfigurationError("process noise standard deviations must be non-negative")

    def prior(self):
        return np.array([self.prior_smooth, 1.0 - self.prior_smooth])


def terrain_coefficient(px, z, cfg):
    """Resistive coefficient rho(px, z) and its slope in px (z: 0 Smooth, 1 Rough)."""
    if z == 1:
        return cfg.rho_rough, 0.0
    arg = -cfg.transition_sharpness * (px - cfg.transition_x)
    span = cfg.rho_rough - cfg.rho_smooth
    return cfg.rho_smooth + span * expit(arg), -cfg.transition_sharpness * span * _sigmoid_slope(arg)


def resistance(px, v, z, cfg):
    """r = rho(px, z) tanh(v), the deceleration the vehicle must overcome."""
    rho, _ = terrain_coefficient(px, z, cfg)
    return rho * np.tanh(v)


def terrain_model(cfg):
    """
    Two-latent terrain (Smooth, Rough). Evidence about the terrain comes only
    from the state transitions: the observation channel is constant.
    :type cfg: TerrainConfig
    :rtype: ProblemModel
    """
    bike = cfg.bicycle
    goal = np.asarray(cfg.goal, dtype=float)
    control_weights = np.array([cfg.steer_weight, cfg.accel_weight])
    final_weights = np.array([cfg.final_lateral_weight, cfg.final_goal_weight])

    def effective_control(x, u, z):
        return np.array([u[STEER], u[ACCEL] - resistance(x[PX], x[V], z, cfg)])

    def dynamics(x, u, z):
        return bicycle_step(x, effective_control(x, u, z), bike)

    def dynamics_jacobian(x, u, z):
        f_x, f_u = bicycle_jacobian(x, effective_control(x, u, z), bike)
        rho, slope = terrain_coefficient(x[PX], z, cfg)
        f_x[:, PX] -= f_u[:, ACCEL] * slope * np.tanh(x[V])
        f_x[:, V] -= f_u[:, ACCEL] * rho / np.cosh(x[V]) ** 2
        return f_x, f_u

    def observation_mean(x, z):
        return np.zeros(1)

    def observation_noise(x, z):
        return np.eye(1)

    def running_cost(x, u, z):
        offset = x[:2] - goal
        return cfg.goal_weight * offset @ offset + control_weights @ (u * u)

    def cost_gradient(x, u, z):
        l_x = np.zeros(4)
        l_x[:2] = 2.0 * cfg.goal_weight * (x[:2] - goal)
        return l_x, 2.0 * control_weights * u

    def final_cost(x, z):
        offset = x[:2] - goal
        return final_weights @ (offset * offset)

    def final_cost_gradient(x, z):
        l_fx = np.zeros(4)
        l_fx[:2] = 2.0 * final_weights * (x[:2] - goal)
        return l_fx

    return ProblemModel(
        state_dim=4, control_dim=2, obs_dim=1,
        latents=LatentSet(("Smooth", "Rough")),
        dynamics_mean=dynamics,
        dynamics_noise=np.diag(np.square(cfg.process_noise)),
        observation_mean=observation_mean,
        observation_noise=observation_noise,
        running_cost=running_cost,
        final_cost=final_cost,
        dt=bike.dt,
        dynamics_jacobian=dynamics_jacobian,
        cost_gradient=cost_gradient,
        final_cost_gradient=final_cost_gradient,
        control_bounds=bike.control_bounds,
        name="terrain",
    )


####################################################################################################
# Lane change
####################################################################################################

OTHER_LON, OTHER_V = 4, 5


@dataclass(frozen=True)
class LaneChangeConfig(ScenarioConfig):
    """
    The planner's vehicle drives along +x in the lane at y = 0 and should move to
    the target lane at y = lane_width, where the other vehicle drives.
    """

    PRIOR_KEY = "prior_nice"

    lane_width: float = 3.5
    desired_speed: float = 11.0
    lane_weight: float = 1.0
    speed_weight: float = 0.2
    heading_weight: float = 5.0
    collision_weight: float = 60.0
    collision_length: float = 2.5
    final_lane_weight: float = 10.0
    final_speed_weight: float = 1.0
    steer_weight: float = 5.0
    accel_weight: float = 0.5
    lane_sharpness: float = 2.0
    process_noise: tuple = (0.02, 0.02, 0.005, 0.05, 0.02, 0.05)
    prior_nice: float = 0.49
    initial_state: tuple = (0.0, 0.0, 0.0, 10.0, -3.0, 10.0)
    nice: IDMParams = IDMParams(desired_speed=8.0, yields=True)
    aggressive: IDMParams = IDMParams(desired_speed=16.0, max_accel=2.0, yields=False)
    bicycle: BicycleParams = BicycleParams()

    def __post_init__(self):
        self._require_positive("lane_width", "desired_speed", "collision_length", "lane_sharpness")
        self._require_probability("prior_nice")
        self._require_length("process_noise", 6)
        self._require_length("initial_state", 6)
        if any(s < 0.0 for s in self.process_noise):
            raise ConfigurationError("process noise standard deviations must be non-negative")
        if self.aggressive.desired_speed <= self.nice.desired_speed:
            raise ConfigurationError("the Aggressive driver needs the higher desired speed")

    def prior(self):
        return np.array([self.prior_nice, 1.0 - self.prior_nice])

    def lane_overlap(self, py):
        """Soft indicator that the planner's vehicle occupies the target lane."""
        return expit(self.lane_sharpness * (py - 0.5 * self.lane_width))


def lane_change_model(cfg):
    """
    Two-latent lane change (Nice, Aggressive). The state appends the other
    vehicle's longitude and speed to the bicycle state; the driver type only
    shows through the other vehicle's motion.
    :type cfg: LaneChangeConfig
    :rtype: ProblemModel
    """
    bike = cfg.bicycle
    drivers = (cfg.nice, cfg.aggressive)
    control_weights = np.array([cfg.steer_weight, cfg.accel_weight])
    dt = bike.dt

    def dynamics(x, u, z):
        ego = bicycle_step(x[:4], u, bike)
        accel = idm_accel(x[PX], x[V], x[OTHER_LON], x[OTHER_V], cfg.lane_overlap(x[PY]), drivers[z])
        other_v = max(x[OTHER_V] + accel * dt, 0.0)
        return np.concatenate([ego, [x[OTHER_LON] + x[OTHER_V] * dt, other_v]])

    def observation_mean(x, z):
        return np.zeros(1)

    def observation_noise(x, z):
        return np.eye(1)

    def proximity(x):
        d_lon = x[PX] - x[OTHER_LON]
        d_lat = x[PY] - cfg.lane_width
        penalty = cfg.collision_weight * np.exp(-(d_lon ** 2 + d_lat ** 2) / cfg.collision_length ** 2)
        scale = -2.0 * penalty / cfg.collision_length ** 2
        return penalty, scale * d_lon, scale * d_lat

    def running_cost(x, u, z):
        penalty, _, _ = proximity(x)
        return (cfg.lane_weight * (x[PY] - cfg.lane_width) ** 2
                + cfg.speed_weight * (x[V] - cfg.desired_speed) ** 2
                + cfg.heading_weight * x[THETA] ** 2
                + penalty
                + control_weights @ (u * u))

    def cost_gradient(x, u, z):
        _, d_lon, d_lat = proximity(x)
        l_x = np.zeros(6)
        l_x[PX] = d_lon
        l_x[OTHER_LON] = -d_lon
        l_x[PY] = 2.0 * cfg.lane_weight * (x[PY] - cfg.lane_width) + d_lat
        l_x[THETA] = 2.0 * cfg.heading_weight * x[THETA]
        l_x[V] = 2.0 * cfg.speed_weight * (x[V] - cfg.desired_speed)
        return l_x, 2.0 * control_weights * u

    def final_cost(x, z):
        penalty, _, _ = proximity(x)
        return (cfg.final_lane_weight * (x[PY] - cfg.lane_width) ** 2
                + cfg.final_speed_weight * (x[V] - cfg.desired_speed) ** 2
                + cfg.heading_weight * x[THETA] ** 2
                + penalty)

    def final_cost_gradient(x, z):
        _, d_lon, d_lat = proximity(x)
        l_fx = np.zeros(6)
        l_fx[PX] = d_lon
        l_fx[OTHER_LON] = -d_lon
        l_fx[PY] = 2.0 * cfg.final_lane_weight * (x[PY] - cfg.lane_width) + d_lat
        l_fx[THETA] = 2.0 * cfg.heading_weight * x[THETA]
        l_fx[V] = 2.0 * cfg.final_speed_weight * (x[V] - cfg.desired_speed)
        return l_fx

    return ProblemModel(
        state_dim=6, control_dim=2, obs_dim=1,
        latents=LatentSet(("Nice", "Aggressive")),
        dynamics_mean=dynamics,
        dynamics_noise=np.diag(np.square(cfg.process_noise)),
        observation_mean=observation_mean,
        observation_noise=observation_noise,
        running_cost=running_cost,
        final_cost=final_cost,
        dt=dt,
        cost_gradient=cost_gradient,
        final_cost_gradient=final_cost_gradient,
        control_bounds=bike.control_bounds,
        name="lanechange",
    )


####################################################################################################
# Registry
####################################################################################################

SCENARIOS = {
    "tmaze": (TMazeConfig, tmaze_model),
    "terrain": (TerrainConfig, terrain_model),
    "lanechange": (LaneChangeConfig, lane_change_model),
}


def build_scenario(experiment, params=None):
    """
    Validate a scenario parameter dict and build the model.
    :raises ConfigurationError: for an unknown experiment or invalid parameters
    :return: (config, model, initial state, prior belief)
    """
    if experiment not in SCENARIOS:
        raise ConfigurationError(f"unknown experiment '{experiment}', valid names: {', '.join(SCENARIOS)}")
    config_class, builder = SCENARIOS[experiment]
    cfg = config_class.from_dict(params or {})
    model = builder(cfg)
    logger.debug("built scenario %s", experiment)
    return cfg, model, np.array(cfg.initial_state, dtype=float), cfg.prior()
