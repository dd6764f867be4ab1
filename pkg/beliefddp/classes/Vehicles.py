"""
Kinematic bicycle and the smoothed Intelligent Driver Model shared by the scenarios.

Vehicle states are numpy arrays laid out (px, py, theta, v); controls are
(steer, accel). Indices below name the layout.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .CustomExceptions import ConfigurationError

PX, PY, THETA, V = range(4)
STEER, ACCEL = range(2)


@dataclass(frozen=True)
class BicycleParams:
    wheelbase: float = 2.5
    dt: float = 0.1
    v_max: float = 30.0
    steer_max: float = 0.6
    accel_max: float = 3.0

    def __post_init__(self):
        for name in ("wheelbase", "dt", "v_max", "steer_max", "accel_max"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"bicycle parameter {name} must be positive, got {getattr(self, name)}")

    @property
    def control_bounds(self):
        limit = np.array([self.steer_max, self.accel_max])
        return -limit, limit


def bicycle_step(x, u, params):
    """
    Explicit Euler step of the kinematic bicycle; speed is clamped to [0, v_max].
    :param x: (px, py, theta, v)
    :param u: (steer, accel)
    :type params: BicycleParams
    :rtype: numpy.ndarray
    """
    px, py, theta, v = x[PX], x[PY], x[THETA], x[V]
    steer, accel = u[STEER], u[ACCEL]
    dt = params.dt
    return np.array([
        px + v * np.cos(theta) * dt,
        py + v * np.sin(theta) * dt,
        theta + (v / params.wheelbase) * np.tan(steer) * dt,
        np.clip(v + accel * dt, 0.0, params.v_max),
    ])


def bicycle_jacobian(x, u, params):
    """
    Analytic (f_x, f_u) of bicycle_step. The clamp has unit slope on the closed
    interval [0, v_max] and zero slope outside it.
    """
    theta, v = x[THETA], x[V]
    steer, accel = u[STEER], u[ACCEL]
    dt, wheelbase = params.dt, params.wheelbase
    unclamped = v + accel * dt
    inside = 1.0 if 0.0 <= unclamped <= params.v_max else 0.0

    f_x = np.eye(4)
    f_x[PX, THETA] = -v * np.sin(theta) * dt
    f_x[PX, V] = np.cos(theta) * dt
    f_x[PY, THETA] = v * np.cos(theta) * dt
    f_x[PY, V] = np.sin(theta) * dt
    f_x[THETA, V] = np.tan(steer) * dt / wheelbase
    f_x[V, V] = inside

    f_u = np.zeros((4, 2))
    f_u[THETA, STEER] = (v / wheelbase) * dt / np.cos(steer) ** 2
    f_u[V, ACCEL] = inside * dt
    return f_x, f_u


def smooth_relu(y, sharpness):
    """log(1 + exp(k y)) / k; approaches max(y, 0) as k grows."""
    return np.logaddexp(0.0, sharpness * y) / sharpness


@dataclass(frozen=True)
class IDMParams:
    """
    Car-following parameters of one driver type. A driver that does not yield
    ignores the planner's vehicle as a leader.
    """

    desired_speed: float = 10.0
    time_headway: float = 1.5
    max_accel: float = 1.5
    comfortable_decel: float = 2.0
    min_gap: float = 2.0
    exponent: float = 4.0
    yields: bool = True
    leader_sharpness: float = 2.0
    gap_floor: float = 0.5
    smoothing: float = 5.0

    def __post_init__(self):
        for name in ("desired_speed", "time_headway", "max_accel", "comfortable_decel", "min_gap",
                     "exponent", "leader_sharpness", "gap_floor", "smoothing"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"IDM parameter {name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_dict(cls, params):
        unknown = set(params) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown IDM parameters: {sorted(unknown)}")
        return cls(**params)


def idm_accel(ego_lon, ego_v, other_lon, other_v, other_lane_overlap, params):
    """
    Acceleration of the other driver, with the planner's vehicle as its potential leader.

    The interaction term is weighted by sigmoid(k * gap) * overlap, so it fades as
    the planner's vehicle falls behind or leaves the driver's lane. Desired gap and
    actual gap are smoothed so the law stays differentiable everywhere.
    :type params: IDMParams
    :return: acceleration in m/s^2
    """
    gap = ego_lon - other_lon
    closing_speed = other_v - ego_v
    free_road = (other_v / params.desired_speed) ** params.exponent
    if not params.yields:
        return params.max_accel * (1.0 - free_road)
    dynamic_gap = (other_v * params.time_headway
                   + other_v * closing_speed / (2.0 * np.sqrt(params.max_accel * params.comfortable_decel)))
    desired_gap = params.min_gap + smooth_relu(dynamic_gap, params.smoothing)
    effective_gap = params.gap_floor + smooth_relu(gap - params.gap_floor, params.smoothing)
    weight = expit(params.leader_sharpness * gap) * other_lane_overlap
    return params.max_accel * (1.0 - free_road - weight * (desired_gap / effective_gap) ** 2)
