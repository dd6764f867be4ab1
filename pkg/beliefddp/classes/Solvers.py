"""
Partially observable DDP over hierarchical trajectory trees.

Segment state layout
--------------------
Inside a segment the node's controls are shared by one state copy per latent
value, each rolled with that latent's dynamics mean, while the logits stay
fixed. The segment state is the stacked vector

    S = (x_z1, ..., x_zm, beta),    dim m * n + m

and the running cost is sum_z b_z(beta) l(x_z, u, z). The last step of a
segment is the branch point: copy z moves to x'_z = f(x_z, u, z), observes
o'_z = g(x'_z, z) and updates the belief, which gives the child's belief
state s'_z = (x'_z, beta'_z). Child value models live on (x, beta); at the
first step of a segment all copies coincide, so node value models are mapped
back through the replication map.

Second derivatives of dynamics, observation and belief update are dropped
(iLQR convention); the softmax second derivatives of the branch weights are
kept.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .Beliefs import (BeliefState, bayes_update, belief_from_logits, logits_from_belief,
                      softmax_hessians, softmax_jacobian, validate_belief)
from .CustomExceptions import (BackwardFailureError, ConfigurationError, DegenerateEvidenceError,
                               InvalidArgumentError, RolloutDivergenceError)
from .ProblemModels import derivative_bundle, final_cost_derivatives, numerical_jacobian
from .TrajectoryTrees import (QuadraticValueModel, TrajectoryTree, all_histories, history_key,
                              iterate_depth_first, lift, replication_matrix)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """
    Iteration and segmentation settings.

    boundaries optionally fixes the interior branch times tau_1 < ... < tau_{k-1};
    by default the horizon is split into segments of (near) equal length.
    """

    horizon: int = 30
    segments: int = 3
    max_iterations: int = 100
    cost_tolerance: float = 1e-6
    gradient_tolerance: float = 1e-9
    alpha_schedule: tuple = tuple(0.5 ** i for i in range(11))
    regularization_init: float = 1e-6
    regularization_min: float = 1e-9
    regularization_factor: float = 10.0
    regularization_decrease: float = 2.0
    regularization_max: float = 1e10
    control_fill: float = 0.0
    boundaries: Optional[tuple] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if self.segments < 1 or self.segments > self.horizon:
            raise ConfigurationError(f"segments must lie in [1, horizon={self.horizon}], got {self.segments}")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be at least 1")
        alphas = tuple(float(a) for a in self.alpha_schedule)
        if not alphas or any(a <= 0.0 or a > 1.0 for a in alphas) or list(alphas) != sorted(alphas, reverse=True):
            raise ConfigurationError(f"alpha_schedule must descend within (0, 1], got {alphas}")
        object.__setattr__(self, 'alpha_schedule', alphas)
        if self.regularization_factor <= 1.0 or self.regularization_decrease <= 1.0:
            raise ConfigurationError("regularization factors must exceed 1")
        if self.boundaries is not None:
            object.__setattr__(self, 'boundaries', tuple(int(t) for t in self.boundaries))
            if len(self.boundaries) != self.segments - 1:
                raise ConfigurationError(f"{self.segments} segments need {self.segments - 1} interior boundaries")
        schedule = self.schedule()
        if any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise ConfigurationError(f"segment schedule must be strictly increasing, got {schedule}")

    @classmethod
    def from_dict(cls, params):
        known = set(cls.__dataclass_fields__)
        unknown = set(params) - known
        if unknown:
            raise ConfigurationError(f"unknown solver parameters: {sorted(unknown)}")
        params = dict(params)
        if params.get('alpha_schedule') is not None:
            params['alpha_schedule'] = tuple(params['alpha_schedule'])
        return cls(**params)

    def schedule(self):
        """Branch times tau_0 = 0 < tau_1 < ... < tau_k = horizon."""
        if self.boundaries is not None:
            return (0,) + self.boundaries + (self.horizon,)
        return tuple((i * self.horizon) // self.segments for i in range(self.segments + 1))

    def remaining(self, segment_index):
        """Config for replanning at the start of segment segment_index, keeping the original boundaries."""
        schedule = self.schedule()
        start = schedule[segment_index]
        inner = tuple(t - start for t in schedule[segment_index + 1:-1])
        return replace(self, horizon=self.horizon - start, segments=self.segments - segment_index,
                       boundaries=inner)

    def single_segment(self):
        return replace(self, segments=1, boundaries=None)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cost: float
    alpha: float
    regularization: float
    gradient_norm: float
    accepted: bool

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "cost": self.cost,
            "alpha": self.alpha,
            "lambda": self.regularization,
            "gradient_norm": self.gradient_norm,
        }


@dataclass(eq=False)
class GainSchedule:
    """Open-loop k and feedback K per (history, step), plus the node value models."""

    open_loop: dict = field(default_factory=dict)
    feedback: dict = field(default_factory=dict)
    value_models: dict = field(default_factory=dict)
    regularization: float = 0.0

    def gradient_norm(self):
        if not self.open_loop:
            return 0.0
        return float(max(np.linalg.norm(k) for k in self.open_loop.values()))

    @property
    def expected_reduction(self):
        """Predicted cost change of a full step (non-positive near a descent direction)."""
        return self.value_models[()].dV


@dataclass(eq=False)
class SolveResult:
    tree: TrajectoryTree
    gains: GainSchedule
    log: list
    converged: bool
    cost: float
    initial_cost: float


@dataclass(frozen=True, eq=False)
class QExpansion:
    """Second-order expansion of Q over stacked segment-state and control perturbations."""

    value: float
    Q_S: np.ndarray
    Q_u: np.ndarray
    Q_SS: np.ndarray
    Q_Su: np.ndarray
    Q_uu: np.ndarray
    dV_next: float


####################################################################################################
# Segment state helpers
####################################################################################################

def _split(model, S):
    n, m = model.state_dim, model.num_latents
    return S[:m * n].reshape(m, n), S[m * n:]


def segment_step(model, S, u):
    """Advance every state copy with its latent's dynamics mean; logits are unchanged."""
    xs, beta = _split(model, S)
    moved = [np.asarray(model.dynamics_mean(xs[z], u, z), dtype=float) for z in range(model.num_latents)]
    return np.concatenate(moved + [beta])


def branch_successor(model, x, beta, u, z):
    """
    Maximum-likelihood outcome of branch z: mean next state, mean observation,
    Bayes update. Returns the child belief state vector (x', beta').
    """
    x_next = np.asarray(model.dynamics_mean(x, u, z), dtype=float)
    o_next = model.observation_mean(x_next, z)
    b_next = bayes_update(o_next, x_next, u, x, belief_from_logits(beta), model)
    return np.concatenate([x_next, logits_from_belief(b_next)])


def terminal_value(model, s):
    """Expected final cost E_{z ~ b}[l_f(x, z)] at belief state s = (x, beta)."""
    x, beta = s[:model.state_dim], s[model.state_dim:]
    b = belief_from_logits(beta)
    return float(sum(b[z] * model.final_cost(x, z) for z in range(model.num_latents)))


def terminal_value_model(model, s):
    """Quadratic model of terminal_value around s; used where a branch has no child."""
    n, m = model.state_dim, model.num_latents
    x, beta = s[:n], s[n:]
    b = belief_from_logits(beta)
    jac_b = softmax_jacobian(beta)
    derivatives = [final_cost_derivatives(model, x, z) for z in range(m)]
    values = np.array([d[0] for d in derivatives])
    gradients = np.column_stack([d[1] for d in derivatives])
    V_s = np.concatenate([gradients @ b, jac_b @ values])
    V_ss = np.zeros((n + m, n + m))
    V_ss[:n, :n] = sum(b[z] * derivatives[z][2] for z in range(m))
    V_ss[:n, n:] = gradients @ jac_b
    V_ss[n:, :n] = V_ss[:n, n:].T
    V_ss[n:, n:] = np.tensordot(values, softmax_hessians(beta), axes=1)
    return QuadraticValueModel(value=float(b @ values), dV=0.0, V_s=V_s, V_ss=V_ss, nominal=np.array(s, dtype=float))


def _running_expansion(model, S, u):
    """
    Expansion of sum_z b_z(beta) l(x_z, u, z) and of the in-segment dynamics.
    :return: (cost, C_S, C_u, C_SS, C_Su, C_uu, F_S, F_u, bundles)
    """
    n, m, mu = model.state_dim, model.num_latents, model.control_dim
    xs, beta = _split(model, S)
    dim = m * n + m
    beta_block = slice(m * n, dim)
    b = belief_from_logits(beta)
    jac_b = softmax_jacobian(beta)
    bundles = [derivative_bundle(model, xs[z], u, z, observation=False) for z in range(m)]
    costs = np.array([float(model.running_cost(xs[z], u, z)) for z in range(m)])

    C_S = np.zeros(dim)
    C_u = np.zeros(mu)
    C_SS = np.zeros((dim, dim))
    C_Su = np.zeros((dim, mu))
    C_uu = np.zeros((mu, mu))
    F_S = np.zeros((dim, dim))
    F_u = np.zeros((dim, mu))
    F_S[beta_block, beta_block] = np.eye(m)
    for z, bundle in enumerate(bundles):
        block = slice(z * n, (z + 1) * n)
        C_S[block] = b[z] * bundle.l_x
        C_u += b[z] * bundle.l_u
        C_SS[block, block] = b[z] * bundle.l_xx
        C_SS[block, beta_block] = np.outer(bundle.l_x, jac_b[z])
        C_SS[beta_block, block] = C_SS[block, beta_block].T
        C_Su[block] = b[z] * bundle.l_xu
        C_Su[beta_block] += np.outer(jac_b[z], bundle.l_u)
        C_uu += b[z] * bundle.l_uu
        F_S[block, block] = bundle.f_x
        F_u[block] = bundle.f_u
    C_S[beta_block] = jac_b @ costs
    C_SS[beta_block, beta_block] = np.tensordot(costs, softmax_hessians(beta), axes=1)
    return float(b @ costs), C_S, C_u, C_SS, C_Su, C_uu, F_S, F_u, bundles


def _successor_jacobians(model, x, beta, u, z, bundle):
    """
    Jacobians of s'_z = (x'_z, beta'_z) with respect to (x_z, beta) and u.
    The dynamics rows come from the derivative bundle; the logit rows are
    central differences through dynamics, observation, update and log.
    """
    n, m = model.state_dim, model.num_latents

    def updated_logits(v):
        return branch_successor(model, v[:n], v[n:n + m], v[n + m:], z)[n:]

    chain = numerical_jacobian(updated_logits, np.concatenate([x, beta, u]))
    J_x = np.vstack([bundle.f_x, chain[:, :n]])
    J_beta = np.vstack([np.zeros((n, m)), chain[:, n:n + m]])
    J_u = np.vstack([bundle.f_u, chain[:, n + m:]])
    return J_x, J_beta, J_u


def q_expansion(model, u, S, child_models=None):
    """
    Belief-weighted expansion of Q at the branching step of a segment:

        Q(dS, du) = sum_z b_z(beta + dbeta) [l(x_z + dx_z, u + du, z) + V'_z(s'_z)]

    child_models holds one QuadraticValueModel per latent value, or None at the
    last segment, where V'_z is the expected final cost at the successor.
    :rtype: QExpansion
    """
    n, m, mu = model.state_dim, model.num_latents, model.control_dim
    S = np.asarray(S, dtype=float)
    u = np.asarray(u, dtype=float)
    if child_models is not None and len(child_models) != m:
        raise InvalidArgumentError(f"need {m} child value models, got {len(child_models)}")
    cost, Q_S, Q_u, Q_SS, Q_Su, Q_uu, _, _, bundles = _running_expansion(model, S, u)
    xs, beta = _split(model, S)
    dim = m * n + m
    beta_block = slice(m * n, dim)
    b = belief_from_logits(beta)
    jac_b = softmax_jacobian(beta)
    hess_b = softmax_hessians(beta)

    value = cost
    dV_next = 0.0
    for z in range(m):
        s_next = branch_successor(model, xs[z], beta, u, z)
        child = child_models[z] if child_models is not None else terminal_value_model(model, s_next)
        delta = s_next - child.nominal
        v_z = child.evaluate(s_next)
        grad_z = child.V_s + child.V_ss @ delta
        J_x, J_beta, J_u = _successor_jacobians(model, xs[z], beta, u, z, bundles[z])
        J_S = np.zeros((n + m, dim))
        J_S[:, z * n:(z + 1) * n] = J_x
        J_S[:, beta_block] = J_beta
        through_S = J_S.T @ grad_z
        through_u = J_u.T @ grad_z
        d_b = np.zeros(dim)
        d_b[beta_block] = jac_b[z]

        value += b[z] * v_z
        dV_next += b[z] * child.dV
        Q_S += b[z] * through_S + d_b * v_z
        Q_u += b[z] * through_u
        Q_SS += b[z] * J_S.T @ child.V_ss @ J_S + np.outer(d_b, through_S) + np.outer(through_S, d_b)
        Q_SS[beta_block, beta_block] += hess_b[z] * v_z
        Q_Su += b[z] * J_S.T @ child.V_ss @ J_u + np.outer(d_b, through_u)
        Q_uu += b[z] * J_u.T @ child.V_ss @ J_u
    return QExpansion(value=value, Q_S=Q_S, Q_u=Q_u, Q_SS=0.5 * (Q_SS + Q_SS.T), Q_Su=Q_Su,
                      Q_uu=0.5 * (Q_uu + Q_uu.T), dV_next=dV_next)


def q_value(model, u, S, child_models=None):
    """Q evaluated by rolling out costs, branch successors and child value models."""
    xs, beta = _split(model, np.asarray(S, dtype=float))
    b = belief_from_logits(beta)
    total = 0.0
    for z in range(model.num_latents):
        s_next = branch_successor(model, xs[z], beta, u, z)
        v_z = child_models[z].evaluate(s_next) if child_models is not None else terminal_value(model, s_next)
        total += b[z] * (float(model.running_cost(xs[z], u, z)) + v_z)
    return total


def _segment_q_expansion(model, u, S, next_model):
    """Standard DDP expansion for a non-branching step inside a segment."""
    cost, C_S, C_u, C_SS, C_Su, C_uu, F_S, F_u, _ = _running_expansion(model, S, u)
    V_s, V_ss = next_model.V_s, next_model.V_ss
    return QExpansion(
        value=cost + next_model.value,
        Q_S=C_S + F_S.T @ V_s,
        Q_u=C_u + F_u.T @ V_s,
        Q_SS=C_SS + F_S.T @ V_ss @ F_S,
        Q_Su=C_Su + F_S.T @ V_ss @ F_u,
        Q_uu=C_uu + F_u.T @ V_ss @ F_u,
        dV_next=next_model.dV,
    )


def _factor(matrix, regularization):
    try:
        return cho_factor(matrix)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise BackwardFailureError(f"Q_uu not positive definite at regularization {regularization:g}: {err}")


def _clamped(q, H, u, k, K, bounds, regularization):
    """
    Keep u + k inside the control box. Clamped dimensions move to their bound
    and lose feedback; the free dimensions are re-solved with the clamped part
    of k held fixed.
    """
    low, high = bounds
    target = u + k
    clamped = (target < low) | (target > high)
    if not np.any(clamped):
        return k, K
    k = np.clip(target, low, high) - u
    K = np.zeros_like(K)
    free = ~clamped
    if np.any(free):
        factor = _factor(H[np.ix_(free, free)], regularization)
        k_free = -cho_solve(factor, q.Q_u[free] + H[np.ix_(free, clamped)] @ k[clamped])
        k[free] = np.clip(u[free] + k_free, low[free], high[free]) - u[free]
        K[free] = -cho_solve(factor, q.Q_Su.T[free])
    return k, K


def _control_update(q, S, regularization, u=None, bounds=None):
    """
    Minimize the quadratic Q model: k = -Q_uu^-1 Q_u, K = -Q_uu^-1 Q_us, with
    regularization added to the Q_uu diagonal. With bounds, the step is
    clamped so that u + k stays inside (low, high).
    :raises BackwardFailureError: if the regularized Q_uu is not positive definite
    """
    Q_uu = q.Q_uu
    H = Q_uu + regularization * np.eye(len(q.Q_u))
    factor = _factor(H, regularization)
    k = -cho_solve(factor, q.Q_u)
    K = -cho_solve(factor, q.Q_Su.T)
    if bounds is not None and u is not None:
        k, K = _clamped(q, H, np.asarray(u, dtype=float), k, K, bounds, regularization)
    V_s = q.Q_S + K.T @ Q_uu @ k + K.T @ q.Q_u + q.Q_Su @ k
    V_ss = q.Q_SS + K.T @ Q_uu @ K + K.T @ q.Q_Su.T + q.Q_Su @ K
    dV = q.dV_next + float(k @ q.Q_u + 0.5 * k @ Q_uu @ k)
    return k, K, QuadraticValueModel(value=q.value, dV=dV, V_s=V_s, V_ss=V_ss, nominal=np.array(S, dtype=float))


def optimize_control(model, u, S, child_models=None, regularization=1e-6):
    """
    Control update at a branching step, clamped to the model's control bounds.
    :param S: stacked segment state at the last step of the segment
    :param child_models: per-latent QuadraticValueModel of the children, or None at the leaves
    :return: (k, K, value model over the stacked segment state)
    """
    return _control_update(q_expansion(model, u, S, child_models), S, regularization, u, model.control_bounds)


####################################################################################################
# Forward pass and cost
####################################################################################################

def initial_controls(schedule, num_latents, control_dim, fill=0.0):
    """Constant-filled controls for every node of the schedule's tree."""
    fill = np.broadcast_to(np.asarray(fill, dtype=float), (control_dim,))
    controls = {}
    for history in all_histories(num_latents, len(schedule) - 2):
        length = schedule[len(history) + 1] - schedule[len(history)]
        controls[history] = np.tile(fill, (length, 1))
    return controls


def forward_pass(model, x0, b0, schedule, controls, states=None, gains=None, alpha=1.0):
    """
    Roll out the trajectory tree under maximum-likelihood outcomes.

    Within a segment u = u_nom + alpha k + K (S - S_nom), clipped to the
    model's control bounds; without gains the nominal controls are only clipped.
    :raises RolloutDivergenceError: if a state becomes non-finite
    :rtype: TrajectoryTree
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgumentError(f"alpha must lie in [0, 1], got {alpha}")
    n, m = model.state_dim, model.num_latents
    tree = TrajectoryTree(state_dim=n, control_dim=model.control_dim, num_latents=m, schedule=tuple(schedule))
    root = BeliefState.from_belief(x0, validate_belief(b0))
    if len(root.x) != n or len(root.beta) != m:
        raise InvalidArgumentError("initial state or belief does not match the model dimensions")

    pending = [((), root.x, root.beta)]
    while pending:
        history, x, beta = pending.pop()
        length = tree.segment_length(history)
        nominal = controls[history]
        if nominal.shape != (length, model.control_dim):
            raise InvalidArgumentError(
                f"controls for node '{history_key(history)}' have shape {nominal.shape}, expected {(length, model.control_dim)}")
        S_seq = np.empty((length, m * n + m))
        U_seq = np.empty((length, model.control_dim))
        S = lift(x, beta, m)
        for t in range(length):
            S_seq[t] = S
            u = nominal[t]
            if gains is not None and (history, t) in gains.open_loop:
                u = u + alpha * gains.open_loop[(history, t)] + gains.feedback[(history, t)] @ (S - states[history][t])
            u = model.clip_control(u)
            U_seq[t] = u
            if t < length - 1:
                S = segment_step(model, S, u)
                if not np.all(np.isfinite(S)):
                    raise RolloutDivergenceError(f"non-finite state in node '{history_key(history)}' at step {t + 1}")
        xs, _ = _split(model, S)
        successors = np.array([branch_successor(model, xs[z], beta, U_seq[-1], z) for z in range(m)])
        if not np.all(np.isfinite(successors)):
            raise RolloutDivergenceError(f"non-finite branch successor below node '{history_key(history)}'")
        tree.controls[history] = U_seq
        tree.states[history] = S_seq
        tree.successors[history] = successors
        if not tree.is_leaf(history):
            for z in reversed(range(m)):
                pending.append((history + (z,), successors[z][:n], successors[z][n:]))
    return tree


def evaluate_tree_cost(model, tree):
    """
    Expected tree cost: at each node sum_z b(z) [running cost along the z copy + child cost],
    where leaf children contribute the expected final cost at the branch successor.
    """

    def node_cost(history):
        b = tree.belief(history)
        controls = tree.controls[history]
        total = 0.0
        for z in range(tree.num_latents):
            states = tree.branch_states(history, z)
            segment = sum(float(model.running_cost(states[t], controls[t], z)) for t in range(len(controls)))
            if tree.is_leaf(history):
                child = terminal_value(model, tree.successors[history][z])
            else:
                child = node_cost(history + (z,))
            total += b[z] * (segment + child)
        return total

    return node_cost(())


####################################################################################################
# Backward pass
####################################################################################################

def _backward_sweep(model, tree, regularization):
    gains = GainSchedule(regularization=regularization)
    n, m = model.state_dim, model.num_latents
    replicate = replication_matrix(n, m)
    for history in iterate_depth_first(tree):
        children = tree.children(history)
        child_models = [gains.value_models[c] for c in children] if children else None
        S_seq = tree.states[history]
        U_seq = tree.controls[history]
        last = len(U_seq) - 1
        k, K, step_model = optimize_control(model, U_seq[last], S_seq[last], child_models, regularization)
        gains.open_loop[(history, last)] = k
        gains.feedback[(history, last)] = K
        for t in reversed(range(last)):
            q = _segment_q_expansion(model, U_seq[t], S_seq[t], step_model)
            k, K, step_model = _control_update(q, S_seq[t], regularization, U_seq[t], model.control_bounds)
            gains.open_loop[(history, t)] = k
            gains.feedback[(history, t)] = K
        gains.value_models[history] = QuadraticValueModel(
            value=step_model.value,
            dV=step_model.dV,
            V_s=replicate.T @ step_model.V_s,
            V_ss=replicate.T @ step_model.V_ss @ replicate,
            nominal=tree.belief_state(history).vector(),
        )
    return gains


def backward_pass(model, tree, regularization=1e-6, factor=10.0, max_regularization=1e10):
    """
    Post-order dynamic programming over the tree. On an indefinite Q_uu the
    whole sweep is retried with regularization multiplied by factor.
    :raises BackwardFailureError: once regularization exceeds max_regularization
    :rtype: GainSchedule
    """
    while True:
        try:
            return _backward_sweep(model, tree, regularization)
        except BackwardFailureError as err:
            regularization *= factor
            logger.debug("backward pass failed (%s), raising regularization to %g", err.message, regularization)
            if regularization > max_regularization:
                raise BackwardFailureError(
                    f"backward pass failed with regularization above {max_regularization:g}")


def _store_gains(tree, gains):
    tree.gains_open = dict(gains.open_loop)
    tree.gains_feedback = dict(gains.feedback)
    tree.value_models = dict(gains.value_models)


def solve(model, x0, b0, config, initial=None):
    """
    Alternate forward and backward passes until the expected tree cost stops improving.

    Line search accepts the first alpha of config.alpha_schedule that strictly lowers
    the cost. Non-convergence is reported through SolveResult.converged, never raised.
    :param initial: control map from a previous tree, or None for constant fill
    :rtype: SolveResult
    """
    schedule = config.schedule()
    controls = initial if initial is not None else initial_controls(
        schedule, model.num_latents, model.control_dim, config.control_fill)
    tree = forward_pass(model, x0, b0, schedule, controls)
    cost = evaluate_tree_cost(model, tree)
    initial_cost = cost
    regularization = config.regularization_init
    log = []
    converged = False
    gains = None

    for iteration in range(1, config.max_iterations + 1):
        try:
            gains = backward_pass(model, tree, regularization, config.regularization_factor,
                                  config.regularization_max)
        except BackwardFailureError as err:
            logger.warning("%s: %s", model.name, err.message)
            gains = None
            break
        regularization = gains.regularization
        gradient_norm = gains.gradient_norm()
        if gradient_norm < config.gradient_tolerance:
            log.append(IterationRecord(iteration, cost, 0.0, regularization, gradient_norm, False))
            converged = True
            break

        accepted = None
        for alpha in config.alpha_schedule:
            try:
                candidate = forward_pass(model, x0, b0, schedule, tree.controls, tree.states, gains, alpha)
            except (RolloutDivergenceError, DegenerateEvidenceError, InvalidArgumentError) as err:
                logger.debug("alpha %g rejected: %s", alpha, err.message)
                continue
            candidate_cost = evaluate_tree_cost(model, candidate)
            if np.isfinite(candidate_cost) and candidate_cost < cost:
                accepted = (alpha, candidate, candidate_cost)
                break

        if accepted is None:
            log.append(IterationRecord(iteration, cost, 0.0, regularization, gradient_norm, False))
            logger.debug("iteration %d: line search failed at regularization %g", iteration, regularization)
            if -gains.expected_reduction <= config.cost_tolerance * max(1.0, abs(cost)):
                converged = True
                break
            regularization *= config.regularization_factor
            if regularization > config.regularization_max:
                break
            continue

        alpha, candidate, candidate_cost = accepted
        improvement = (cost - candidate_cost) / max(abs(cost), 1e-12)
        tree, cost = candidate, candidate_cost
        regularization = max(regularization / config.regularization_decrease, config.regularization_min)
        log.append(IterationRecord(iteration, cost, alpha, regularization, gradient_norm, True))
        logger.debug("iteration %d: cost %.10g alpha %g lambda %g |k| %.3g",
                     iteration, cost, alpha, regularization, gradient_norm)
        gains = None
        if improvement < config.cost_tolerance:
            converged = True
            break

    if gains is None:
        try:
            gains = backward_pass(model, tree, regularization, config.regularization_factor,
                                  config.regularization_max)
        except BackwardFailureError as err:
            logger.warning("%s: no gains around the final tree: %s", model.name, err.message)
            gains = GainSchedule(regularization=regularization)
    _store_gains(tree, gains)
    if not converged:
        logger.warning("%s: solve stopped without converging after %d iterations (cost %.6g)",
                       model.name, len(log), cost)
    return SolveResult(tree=tree, gains=gains, log=log, converged=converged, cost=cost, initial_cost=initial_cost)
