"""
Beliefs over the discrete latent set.

A belief is a plain numpy probability vector indexed like the problem's
LatentSet. For differentiation the planner works with unconstrained logits
beta, b = softmax(beta); the belief state s = (x, beta) pairs the fully
observed continuous state with those logits.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax
from scipy.stats import multivariate_normal, norm

from .CustomExceptions import DegenerateEvidenceError, InvalidArgumentError

logger = logging.getLogger(__name__)

# floor applied before taking logs and after every Bayes update
PROBABILITY_FLOOR = 1e-9
MIN_EVIDENCE_MASS = 1e-300


@dataclass(frozen=True)
class LatentSet:
    """Ordered labels of the latent values; indices stay fixed for the lifetime of a problem."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, 'labels', labels)
        if len(labels) < 1:
            raise InvalidArgumentError("a latent set needs at least one label")
        if len(set(labels)) != len(labels):
            raise InvalidArgumentError(f"latent labels must be distinct: {labels}")

    def __len__(self):
        return len(self.labels)

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidArgumentError(f"unknown latent label {label!r}, valid labels: {self.labels}")

    def permuted(self, order):
        return LatentSet(tuple(self.labels[i] for i in order))


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Continuous state x paired with latent-belief logits beta."""

    x: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'x', _as_finite_vector(self.x, "x"))
        object.__setattr__(self, 'beta', _as_finite_vector(self.beta, "beta"))

    @classmethod
    def from_belief(cls, x, belief, floor=PROBABILITY_FLOOR):
        return cls(x, logits_from_belief(belief, floor))

    @classmethod
    def from_vector(cls, vector, state_dim):
        vector = np.asarray(vector, dtype=float)
        return cls(vector[:state_dim], vector[state_dim:])

    @property
    def belief(self):
        return belief_from_logits(self.beta)

    def vector(self):
        """Concatenation (x, beta), the layout every belief-state derivative uses."""
        return np.concatenate([self.x, self.beta])


def _as_finite_vector(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries: {arr}")
    return arr


def validate_belief(belief, tol=1e-9):
    """
    Check that a vector is a probability distribution.
    :raises InvalidArgumentError: for negative, non-finite or non-normalized entries
    :return: the belief as a float array
    :rtype: numpy.ndarray
    """
    b = _as_finite_vector(belief, "belief")
    if np.any(b < 0.0):
        raise InvalidArgumentError(f"belief has negative entries: {b}")
    if abs(b.sum() - 1.0) > tol:
        raise InvalidArgumentError(f"belief does not sum to one: {b} (sum {b.sum()})")
    return b


def belief_from_logits(beta):
    """
    Softmax of the logits, computed with max-subtraction.
    :raises InvalidArgumentError: if beta has non-finite entries
    """
    return softmax(_as_finite_vector(beta, "beta"))


def logits_from_belief(belief, floor=PROBABILITY_FLOOR):
    """
    Inverse of belief_from_logits: clamp at the floor, renormalize, take logs.
    """
    p = np.maximum(_as_finite_vector(belief, "belief"), floor)
    p = p / p.sum()
    return np.log(p)


def softmax_jacobian(beta):
    """d b / d beta = diag(b) - b b^T (symmetric)."""
    b = belief_from_logits(beta)
    return np.diag(b) - np.outer(b, b)


def softmax_hessians(beta):
    """
    Second derivatives of every belief entry.
    :return: array H of shape (m, m, m) with H[z] = d^2 b_z / d beta^2
    :rtype: numpy.ndarray
    """
    b = belief_from_logits(beta)
    m = len(b)
    eye = np.eye(m)
    centered = eye - b[np.newaxis, :]           # row z holds delta_zi - b_i
    jac = np.diag(b) - np.outer(b, b)
    return b[:, None, None] * (centered[:, :, None] * centered[:, None, :] - jac[None, :, :])


def gaussian_log_likelihood(value, mean, cov):
    """
    Log density of value under N(mean, cov).

    Zero-variance dimensions carry no evidence and are skipped, so a fully
    deterministic channel contributes 0 for every latent value.
    """
    value = np.atleast_1d(np.asarray(value, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    diagonal = np.diagonal(cov)
    if np.count_nonzero(cov - np.diag(diagonal)) == 0:
        informative = diagonal > 0.0
        if not np.any(informative):
            return 0.0
        return float(np.sum(norm.logpdf(value[informative], loc=mean[informative],
                                        scale=np.sqrt(diagonal[informative]))))
    return float(multivariate_normal.logpdf(value, mean=mean, cov=cov))


def update_from_log_likelihoods(log_likelihoods, belief, floor=PROBABILITY_FLOOR):
    """
    Posterior proportional to exp(log_likelihoods) * belief, normalized in log space.
    :raises DegenerateEvidenceError: if the unnormalized mass falls below 1e-300
    """
    prior = np.asarray(belief, dtype=float)
    with np.errstate(divide='ignore'):
        log_terms = np.asarray(log_likelihoods, dtype=float) + np.log(prior)
    log_mass = logsumexp(log_terms)
    if not np.isfinite(log_mass) or log_mass < np.log(MIN_EVIDENCE_MASS):
        raise DegenerateEvidenceError(
            f"evidence mass exp({log_mass}) is below {MIN_EVIDENCE_MASS}, log-likelihoods {log_likelihoods}")
    posterior = np.maximum(np.exp(log_terms - log_mass), floor)
    return posterior / posterior.sum()


def bayes_update(o, x_next, u, x, belief, model, floor=PROBABILITY_FLOOR):
    """
    Deterministic belief update h(o, x_next, u, x, b).

    posterior(z) is proportional to p(o | x_next, z) p(x_next | x, u, z) b(z), with Gaussian
    likelihoods built from the model's observation and dynamics noise.
    :param o: observation vector
    :param x_next: state reached after applying u in x
    :param belief: prior belief over model.latents
    :type model: ProblemModel
    :rtype: numpy.ndarray
    """
    prior = validate_belief(belief)
    if len(prior) != model.num_latents:
        raise InvalidArgumentError(f"belief has {len(prior)} entries, model has {model.num_latents} latents")
    log_likelihoods = np.empty(model.num_latents)
    for z in range(model.num_latents):
        log_likelihoods[z] = (
            gaussian_log_likelihood(o, model.observation_mean(x_next, z), model.observation_noise(x_next, z))
            + gaussian_log_likelihood(x_next, model.dynamics_mean(x, u, z), model.dynamics_noise[z])
        )
    return update_from_log_likelihoods(log_likelihoods, prior, floor)
