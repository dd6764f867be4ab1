"""
Comparison planners and the dispatcher shared by the execution harness.

MLDDP plans against the most likely latent value only; PWDDP optimizes one
control sequence against the belief-weighted cost of per-latent rollouts,
without branching. Both reuse the tree solver on a single-latent model.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.linalg import block_diag

from .Beliefs import LatentSet, validate_belief
from .CustomExceptions import ConfigurationError, InvalidArgumentError
from .ProblemModels import ProblemModel
from .Solvers import SolveResult, solve

logger = logging.getLogger(__name__)


class PlannerKind(Enum):
    PODDP = "poddp"
    MLDDP = "mlddp"
    PWDDP = "pwddp"

    @classmethod
    def parse(cls, name):
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ConfigurationError(f"unknown planner '{name}', valid names: {', '.join(k.value for k in cls)}")


@dataclass(eq=False)
class Plan:
    """A solve together with the model it ran on and how real states map into its state space."""

    kind: PlannerKind
    model: ProblemModel
    result: SolveResult
    latent: Optional[int] = None
    weights: Optional[np.ndarray] = None

    def deviation(self, x, nominal):
        """
        Stacked-state deviation of the real state x from a nominal stacked state.

        The state copy nearest to x is the one being tracked; its offset moves
        every copy alike. The belief part is zero: within a segment the belief
        is the one the plan was made from.
        """
        x = np.asarray(x, dtype=float)
        nominal = np.asarray(nominal, dtype=float)
        tail = self.model.num_latents
        copies = nominal[:-tail].reshape(-1, len(x))
        tracked = copies[np.argmin(np.linalg.norm(copies - x, axis=1))]
        return np.concatenate([np.tile(x - tracked, len(copies)), np.zeros(tail)])


def most_likely_latent(belief):
    """argmax of the belief; ties go to the lowest index."""
    return int(np.argmax(validate_belief(belief)))


def mlddp_plan(model, x0, belief, config):
    """
    Plain DDP on the model conditioned on the most likely latent value.
    :type model: ProblemModel
    :rtype: Plan
    """
    z_star = most_likely_latent(belief)
    conditioned = model.conditioned_on(z_star)
    logger.debug("mlddp plans against %s", model.latents.labels[z_star])
    result = solve(conditioned, x0, np.ones(1), config.single_segment())
    return Plan(PlannerKind.MLDDP, conditioned, result, latent=z_star)


def stacked_model(model, weights):
    """
    Single-latent model over one state copy per latent value, sharing the control.
    Costs are the fixed weighted sums sum_z w_z l(x_z, u, z); weights never update.
    :type model: ProblemModel
    :rtype: ProblemModel
    """
    weights = validate_belief(weights)
    if len(weights) != model.num_latents:
        raise InvalidArgumentError(f"need {model.num_latents} weights, got {len(weights)}")
    m, n = model.num_latents, model.state_dim

    def copies(X):
        return np.asarray(X, dtype=float).reshape(m, n)

    def dynamics(X, u, _z):
        return np.concatenate([model.dynamics_mean(x, u, z) for z, x in enumerate(copies(X))])

    def running_cost(X, u, _z):
        return sum(weights[z] * model.running_cost(x, u, z) for z, x in enumerate(copies(X)))

    def final_cost(X, _z):
        return sum(weights[z] * model.final_cost(x, z) for z, x in enumerate(copies(X)))

    def dynamics_jacobian(X, u, _z):
        parts = [model.dynamics_jacobian(x, u, z) for z, x in enumerate(copies(X))]
        return block_diag(*[p[0] for p in parts]), np.vstack([p[1] for p in parts])

    def cost_gradient(X, u, _z):
        parts = [model.cost_gradient(x, u, z) for z, x in enumerate(copies(X))]
        l_x = np.concatenate([weights[z] * np.asarray(p[0]) for z, p in enumerate(parts)])
        return l_x, sum(weights[z] * np.asarray(p[1]) for z, p in enumerate(parts))

    def final_cost_gradient(X, _z):
        return np.concatenate([weights[z] * np.asarray(model.final_cost_gradient(x, z))
                               for z, x in enumerate(copies(X))])

    return ProblemModel(
        state_dim=m * n, control_dim=model.control_dim, obs_dim=1,
        latents=LatentSet(("expected",)),
        dynamics_mean=dynamics,
        dynamics_noise=np.zeros((m * n, m * n)),
        observation_mean=lambda X, _z: np.zeros(1),
        observation_noise=lambda X, _z: np.eye(1),
        running_cost=running_cost,
        final_cost=final_cost,
        dt=model.dt,
        dynamics_jacobian=dynamics_jacobian if model.dynamics_jacobian is not None else None,
        cost_gradient=cost_gradient if model.cost_gradient is not None else None,
        final_cost_gradient=final_cost_gradient if model.final_cost_gradient is not None else None,
        control_bounds=model.control_bounds,
        name=f"{model.name}|weighted",
    )


def pwddp_plan(model, x0, belief, config):
    """
    One control sequence minimizing the belief-weighted cost of per-latent rollouts.
    :rtype: Plan
    """
    weights = validate_belief(belief)
    stacked = stacked_model(model, weights)
    result = solve(stacked, np.tile(np.asarray(x0, dtype=float), model.num_latents), np.ones(1),
                   config.single_segment())
    return Plan(PlannerKind.PWDDP, stacked, result, weights=weights)


def poddp_plan(model, x0, belief, config):
    return Plan(PlannerKind.PODDP, model, solve(model, x0, belief, config))


PLANNERS = {
    PlannerKind.PODDP: poddp_plan,
    PlannerKind.MLDDP: mlddp_plan,
    PlannerKind.PWDDP: pwddp_plan,
}


def make_plan(kind, model, x0, belief, config):
    """
    :type kind: PlannerKind
    :type config: SolverConfig
    :rtype: Plan
    """
    return PLANNERS[kind](model, x0, belief, config)
