import numpy as np
import pytest

from beliefddp.classes.Beliefs import LatentSet
from beliefddp.classes.ProblemModels import ProblemModel


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the long acceptance reproductions")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance reproduction, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def double_integrator(dt=0.1):
    """Planar double integrator: state (px, py, vx, vy), control (ax, ay)."""
    A = np.eye(4)
    A[0, 2] = A[1, 3] = dt
    B = np.zeros((4, 2))
    B[0, 0] = B[1, 1] = 0.5 * dt ** 2
    B[2, 0] = B[3, 1] = dt
    return A, B


def linear_quadratic_model(A, B, Q, R, Qf, num_latents=1, name="lqr"):
    """Model with x' = A x + B u, l = x'Qx + u'Ru, l_f = x'Qf x for every latent value."""
    n, mu = B.shape
    latents = LatentSet(tuple(f"z{i}" for i in range(num_latents)))
    return ProblemModel(
        state_dim=n, control_dim=mu, obs_dim=1,
        latents=latents,
        dynamics_mean=lambda x, u, z: A @ x + B @ u,
        dynamics_noise=np.zeros((n, n)),
        observation_mean=lambda x, z: np.zeros(1),
        observation_noise=lambda x, z: np.eye(1),
        running_cost=lambda x, u, z: float(x @ Q @ x + u @ R @ u),
        final_cost=lambda x, z: float(x @ Qf @ x),
        dt=0.1,
        dynamics_jacobian=lambda x, u, z: (A, B),
        cost_gradient=lambda x, u, z: (2.0 * Q @ x, 2.0 * R @ u),
        final_cost_gradient=lambda x, z: 2.0 * Qf @ x,
        name=name,
    )


def riccati_cost(A, B, Q, R, Qf, x0, horizon):
    """Optimal finite-horizon cost x0' P_0 x0 from the discrete Riccati recursion."""
    P = Qf
    for _ in range(horizon):
        gain = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        P = Q + A.T @ P @ A - A.T @ P @ B @ gain
    return float(x0 @ P @ x0)


@pytest.fixture
def lqr_problem():
    A, B = double_integrator()
    Q = 0.1 * np.eye(4)
    R = np.eye(2)
    Qf = 10.0 * np.eye(4)
    x0 = np.array([1.0, -2.0, 0.5, 0.0])
    return A, B, Q, R, Qf, x0


@pytest.fixture
def two_goal_model():
    """
    Two latent goals at (+-1, 0) for a 2-d single integrator, with a noisy
    observation of the goal side whose mean is -1 or +1.
    """
    goals = np.array([[-1.0, 0.0], [1.0, 0.0]])

    def running_cost(x, u, z):
        offset = x - goals[z]
        return float(0.1 * offset @ offset + 0.5 * u @ u)

    def final_cost(x, z):
        offset = x - goals[z]
        return float(5.0 * offset @ offset)

    return ProblemModel(
        state_dim=2, control_dim=2, obs_dim=1,
        latents=LatentSet(("Left", "Right")),
        dynamics_mean=lambda x, u, z: x + 0.1 * u,
        dynamics_noise=np.zeros((2, 2)),
        observation_mean=lambda x, z: np.array([-1.0 if z == 0 else 1.0]),
        observation_noise=lambda x, z: np.array([[1.0 + x[1] ** 2]]),
        running_cost=running_cost,
        final_cost=final_cost,
        dt=0.1,
        name="two_goal",
    )
