"""
History-indexed trajectory trees.

Nodes are keyed by the tuple of latent indices taken at successive branch
points, () being the root. Every node owns one segment of the schedule: the
controls applied during that segment, the stacked segment states (one state
copy per latent value followed by the logits), and the belief states its
branches reach at the segment end.
"""
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .Beliefs import BeliefState
from .CustomExceptions import InvalidArgumentError, StructuralCorruptionError

logger = logging.getLogger(__name__)


def history_key(history):
    """Serialized form of a history: '' for the root, '0', '01', ..."""
    return "".join(str(z) for z in history)


def history_from_key(key):
    return tuple(int(c) for c in key)


def node_count(num_latents, num_branch_levels):
    """
    Number of nodes of a tree branching num_latents ways at num_branch_levels points.
    :rtype: int
    """
    if num_latents < 1:
        raise InvalidArgumentError(f"num_latents must be at least 1, got {num_latents}")
    if num_branch_levels < 0:
        raise InvalidArgumentError(f"num_branch_levels must be non-negative, got {num_branch_levels}")
    if num_latents == 1:
        return num_branch_levels + 1
    return (num_latents ** (num_branch_levels + 1) - 1) // (num_latents - 1)


def all_histories(num_latents, num_branch_levels):
    """Every history of length <= num_branch_levels, ordered by history string."""
    histories = []
    for depth in range(num_branch_levels + 1):
        histories.extend(itertools.product(range(num_latents), repeat=depth))
    return sorted(histories, key=history_key)


def replication_matrix(state_dim, num_latents):
    """
    Linear map from a belief state (x, beta) to the stacked segment state
    (x, ..., x, beta) with one copy of x per latent value.
    """
    n, m = state_dim, num_latents
    matrix = np.zeros((m * n + m, n + m))
    for z in range(m):
        matrix[z * n:(z + 1) * n, :n] = np.eye(n)
    matrix[m * n:, n:] = np.eye(m)
    return matrix


def lift(x, beta, num_latents):
    return np.concatenate([np.tile(np.asarray(x, dtype=float), num_latents), np.asarray(beta, dtype=float)])


@dataclass(frozen=True, eq=False)
class QuadraticValueModel:
    """
    Local quadratic model of the cost-to-go around a nominal belief state.

    value is the nominal expected cost-to-go, dV the predicted change for a
    full step, V_s and V_ss the derivatives over the belief-state perturbation.
    """

    value: float
    dV: float
    V_s: np.ndarray
    V_ss: np.ndarray
    nominal: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, 'V_ss', 0.5 * (self.V_ss + self.V_ss.T))

    def evaluate(self, s):
        delta = np.asarray(s, dtype=float) - self.nominal
        return float(self.value + self.V_s @ delta + 0.5 * delta @ self.V_ss @ delta)


@dataclass(eq=False)
class TrajectoryTree:
    """Controls, states, gains and value models of one solve, keyed by history."""

    state_dim: int
    control_dim: int
    num_latents: int
    schedule: tuple
    controls: dict = field(default_factory=dict)
    states: dict = field(default_factory=dict)
    successors: dict = field(default_factory=dict)
    gains_open: dict = field(default_factory=dict)
    gains_feedback: dict = field(default_factory=dict)
    value_models: dict = field(default_factory=dict)

    @property
    def segments(self):
        return len(self.schedule) - 1

    @property
    def branch_levels(self):
        return self.segments - 1

    @property
    def stacked_dim(self):
        return self.num_latents * (self.state_dim + 1)

    def segment_length(self, history):
        depth = len(history)
        return self.schedule[depth + 1] - self.schedule[depth]

    def is_leaf(self, history):
        return len(history) == self.branch_levels

    def children(self, history):
        if self.is_leaf(history):
            return []
        return [tuple(history) + (z,) for z in range(self.num_latents)]

    def histories(self):
        return sorted(self.states, key=history_key)

    def belief_state(self, history):
        """Belief state at the start of the node's segment."""
        first = self.states[history][0]
        return BeliefState(first[:self.state_dim], first[self.num_latents * self.state_dim:])

    def belief(self, history):
        return self.belief_state(history).belief

    def branch_states(self, history, z):
        """(L, state_dim) states of the copy rolled with latent z, excluding the segment end."""
        n = self.state_dim
        return self.states[history][:, z * n:(z + 1) * n]

    def terminal_state(self, history, z):
        return self.successors[history][z][:self.state_dim]

    def to_dict(self):
        nodes = {}
        for history in self.histories():
            length = self.segment_length(history)
            node = {
                "controls": self.controls[history].tolist(),
                "states": self.states[history].tolist(),
                "successors": self.successors[history].tolist(),
                "belief": self.belief(history).tolist(),
            }
            if (history, 0) in self.gains_open:
                node["gains_open"] = [self.gains_open[(history, t)].tolist() for t in range(length)]
                node["gains_feedback"] = [self.gains_feedback[(history, t)].tolist() for t in range(length)]
            nodes[history_key(history)] = node
        return {
            "num_latents": self.num_latents,
            "state_dim": self.state_dim,
            "control_dim": self.control_dim,
            "schedule": list(self.schedule),
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, data):
        tree = cls(
            state_dim=int(data["state_dim"]),
            control_dim=int(data["control_dim"]),
            num_latents=int(data["num_latents"]),
            schedule=tuple(int(t) for t in data["schedule"]),
        )
        for key, node in data["nodes"].items():
            history = history_from_key(key)
            tree.controls[history] = np.array(node["controls"], dtype=float).reshape(-1, tree.control_dim)
            tree.states[history] = np.array(node["states"], dtype=float).reshape(-1, tree.stacked_dim)
            tree.successors[history] = np.array(node["successors"], dtype=float)
            for t, (k_vec, k_mat) in enumerate(zip(node.get("gains_open", []), node.get("gains_feedback", []))):
                tree.gains_open[(history, t)] = np.array(k_vec, dtype=float)
                tree.gains_feedback[(history, t)] = np.array(k_mat, dtype=float)
        return tree


def iterate_depth_first(tree):
    """
    Post-order visitation: children (in latent-index order) before their parent.
    :raises StructuralCorruptionError: if a node the schedule requires is missing
    :return: list of histories
    """
    order = []

    def visit(history):
        if history not in tree.states or history not in tree.controls:
            raise StructuralCorruptionError(f"trajectory tree is missing node '{history_key(history)}'")
        for child in tree.children(history):
            visit(child)
        order.append(history)

    visit(())
    return order
