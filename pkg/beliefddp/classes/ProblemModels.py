"""
POMDP-lite problem definitions and the derivative plumbing the solver uses.

Every latent-dependent callable takes the latent index z as its last
argument. Dynamics are discrete-time; scenarios do their own integration.
"""
import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

from .Beliefs import LatentSet
from .CustomExceptions import DifferentiationError, InvalidArgumentError

logger = logging.getLogger(__name__)

RELATIVE_STEP = 1e-5


@dataclass(frozen=True, eq=False)
class ProblemModel:
    """
    Immutable POMDP-lite definition.

    dynamics_noise holds one state covariance per latent value (zeros allowed).
    The optional analytic providers replace finite differences when present:
    dynamics_jacobian(x, u, z) -> (f_x, f_u), cost_gradient(x, u, z) -> (l_x, l_u),
    final_cost_gradient(x, z) -> l_fx.
    """

    state_dim: int
    control_dim: int
    obs_dim: int
    latents: LatentSet
    dynamics_mean: Callable
    dynamics_noise: Tuple[np.ndarray, ...]
    observation_mean: Callable
    observation_noise: Callable
    running_cost: Callable
    final_cost: Callable
    dt: float
    dynamics_jacobian: Optional[Callable] = None
    cost_gradient: Optional[Callable] = None
    final_cost_gradient: Optional[Callable] = None
    control_bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None
    name: str = "model"

    def __post_init__(self):
        for field_name in ("state_dim", "control_dim", "obs_dim"):
            if int(getattr(self, field_name)) < 1:
                raise InvalidArgumentError(f"{field_name} must be a positive integer")
        if not self.dt > 0.0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        noise = self.dynamics_noise
        if isinstance(noise, np.ndarray) and noise.ndim == 2:
            noise = (noise,) * len(self.latents)
        noise = tuple(np.atleast_2d(np.asarray(cov, dtype=float)) for cov in noise)
        if len(noise) != len(self.latents):
            raise InvalidArgumentError(f"need one dynamics covariance per latent, got {len(noise)}")
        for cov in noise:
            if cov.shape != (self.state_dim, self.state_dim):
                raise InvalidArgumentError(f"dynamics covariance has shape {cov.shape}")
        object.__setattr__(self, 'dynamics_noise', noise)
        if self.control_bounds is not None:
            low, high = (np.asarray(bound, dtype=float) for bound in self.control_bounds)
            object.__setattr__(self, 'control_bounds', (low, high))

    @property
    def num_latents(self):
        return len(self.latents)

    @property
    def belief_state_dim(self):
        return self.state_dim + self.num_latents

    def clip_control(self, u):
        if self.control_bounds is None:
            return np.asarray(u, dtype=float)
        return np.clip(u, self.control_bounds[0], self.control_bounds[1])

    def conditioned_on(self, z):
        """Single-latent model that always uses latent index z."""
        return self._remap((z,), LatentSet((self.latents.labels[z],)), f"{self.name}|{self.latents.labels[z]}")

    def permuted(self, order):
        """Model whose latent j is this model's latent order[j]."""
        order = tuple(int(i) for i in order)
        if sorted(order) != list(range(self.num_latents)):
            raise InvalidArgumentError(f"{order} is not a permutation of the latent indices")
        return self._remap(order, self.latents.permuted(order), self.name)

    def _remap(self, mapping, latents, name):
        return replace(
            self,
            latents=latents,
            name=name,
            dynamics_mean=_remapped(self.dynamics_mean, mapping),
            dynamics_noise=tuple(self.dynamics_noise[i] for i in mapping),
            observation_mean=_remapped(self.observation_mean, mapping),
            observation_noise=_remapped(self.observation_noise, mapping),
            running_cost=_remapped(self.running_cost, mapping),
            final_cost=_remapped(self.final_cost, mapping),
            dynamics_jacobian=_remapped(self.dynamics_jacobian, mapping),
            cost_gradient=_remapped(self.cost_gradient, mapping),
            final_cost_gradient=_remapped(self.final_cost_gradient, mapping),
        )


def _remapped(fn, mapping):
    if fn is None:
        return None

    def wrapped(*args):
        return fn(*args[:-1], mapping[args[-1]])
    return wrapped


@dataclass(frozen=True, eq=False)
class DerivativeBundle:
    """All model derivatives at one (x, u, z)."""

    f_x: np.ndarray
    f_u: np.ndarray
    g_x: Optional[np.ndarray]
    l_x: np.ndarray
    l_u: np.ndarray
    l_xx: np.ndarray
    l_xu: np.ndarray
    l_uu: np.ndarray


def numerical_jacobian(f, point, rel_step=RELATIVE_STEP):
    """
    Central-difference Jacobian with step rel_step * max(1, |point_i|) per coordinate.
    :param f: vector (or scalar) function of a 1-d array
    :param point: where to differentiate
    :raises DifferentiationError: when f is non-finite at a sample point; carries the coordinate
    :return: matrix of shape (len(f(point)), len(point))
    :rtype: numpy.ndarray
    """
    point = np.asarray(point, dtype=float)
    center = np.atleast_1d(np.asarray(f(point), dtype=float))
    if not np.all(np.isfinite(center)):
        raise DifferentiationError(f"function is non-finite at {point}", coordinate=None)
    jac = np.empty((center.size, point.size))
    for i in range(point.size):
        step = rel_step * max(1.0, abs(point[i]))
        plus = point.copy()
        minus = point.copy()
        plus[i] += step
        minus[i] -= step
        f_plus = np.atleast_1d(np.asarray(f(plus), dtype=float))
        f_minus = np.atleast_1d(np.asarray(f(minus), dtype=float))
        if not (np.all(np.isfinite(f_plus)) and np.all(np.isfinite(f_minus))):
            raise DifferentiationError(f"non-finite evaluation while differentiating coordinate {i}", coordinate=i)
        jac[:, i] = (f_plus - f_minus) / (plus[i] - minus[i])
    return jac


def numerical_gradient(f, point, rel_step=RELATIVE_STEP):
    return numerical_jacobian(f, point, rel_step)[0]


def symmetrized(matrix):
    return 0.5 * (matrix + matrix.T)


def running_cost_gradient(model, x, u, z):
    """(l_x, l_u), analytic when the model registers a provider."""
    if model.cost_gradient is not None:
        l_x, l_u = model.cost_gradient(x, u, z)
        return np.asarray(l_x, dtype=float), np.asarray(l_u, dtype=float)
    n = model.state_dim
    grad = numerical_gradient(lambda xu: model.running_cost(xu[:n], xu[n:], z), np.concatenate([x, u]))
    return grad[:n], grad[n:]


def final_cost_gradient(model, x, z):
    if model.final_cost_gradient is not None:
        return np.asarray(model.final_cost_gradient(x, z), dtype=float)
    return numerical_gradient(lambda xx: model.final_cost(xx, z), x)


def dynamics_derivatives(model, x, u, z):
    if model.dynamics_jacobian is not None:
        f_x, f_u = model.dynamics_jacobian(x, u, z)
        return np.asarray(f_x, dtype=float), np.asarray(f_u, dtype=float)
    n = model.state_dim
    jac = numerical_jacobian(lambda xu: model.dynamics_mean(xu[:n], xu[n:], z), np.concatenate([x, u]))
    return jac[:, :n], jac[:, n:]


def derivative_bundle(model, x, u, z, observation=True):
    """
    Assemble every derivative the Q-expansion needs at (x, u, z).

    Cost Hessians are differences of the (analytic or numeric) gradients,
    symmetrized as (H + H^T) / 2. With observation=False the observation
    Jacobian g_x is left as None.
    :type model: ProblemModel
    :rtype: DerivativeBundle
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    n = model.state_dim
    f_x, f_u = dynamics_derivatives(model, x, u, z)
    g_x = numerical_jacobian(lambda xx: model.observation_mean(xx, z), x) if observation else None
    l_x, l_u = running_cost_gradient(model, x, u, z)
    hessian = symmetrized(numerical_jacobian(
        lambda xu: np.concatenate(running_cost_gradient(model, xu[:n], xu[n:], z)),
        np.concatenate([x, u])))
    return DerivativeBundle(
        f_x=f_x, f_u=f_u, g_x=g_x,
        l_x=l_x, l_u=l_u,
        l_xx=hessian[:n, :n], l_xu=hessian[:n, n:], l_uu=hessian[n:, n:],
    )


def final_cost_derivatives(model, x, z):
    """
    :return: (l_f, l_fx, l_fxx) at the terminal state for latent z
    """
    x = np.asarray(x, dtype=float)
    value = float(model.final_cost(x, z))
    gradient = final_cost_gradient(model, x, z)
    hessian = symmetrized(numerical_jacobian(lambda xx: final_cost_gradient(model, xx, z), x))
    return value, gradient, hessian
