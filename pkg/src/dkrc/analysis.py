"""Post-hoc analysis: eigenfunction surfaces, pendulum energy, success metrics."""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import linalg, net
from .envs import PendulumParams, Trajectory, wrap_angle
from .errors import DegenerateDataError
from .koopman import LiftedModel


@dataclass
class EigGrid:
    """Eigenfunction values over a (theta, theta_dot) grid.

    values[k] is complex with shape (len(theta), len(theta_dot)); the
    eigenfunction is phi_k(x) = w_k' psi(obs(x)) for the k-th left
    eigenpair of A, sorted by descending eigenvalue magnitude.
    """

    theta: np.ndarray
    theta_dot: np.ndarray
    eigenvalues: list
    values: list = field(default_factory=list)


def eigenfunction_grid(model: LiftedModel, theta=None, theta_dot=None, top_k: int = 4) -> EigGrid:
    """Evaluate the dominant left eigenfunctions over the pendulum state grid."""
    if theta is None:
        theta = np.linspace(-np.pi, np.pi, 61)
    if theta_dot is None:
        theta_dot = np.linspace(-8.0, 8.0, 61)
    theta = np.asarray(theta, dtype=float)
    theta_dot = np.asarray(theta_dot, dtype=float)
    top_k = min(top_k, model.lift_dim)

    pairs = linalg.eig_left(model.a)[:top_k]
    tt, dd = np.meshgrid(theta, theta_dot, indexing="ij")
    obs = np.column_stack([np.cos(tt).ravel(), np.sin(tt).ravel(), dd.ravel()])
    lifted = net.forward(model.psi, obs)  # (G, N)
    grid = EigGrid(theta=theta, theta_dot=theta_dot,
                   eigenvalues=[p.value for p in pairs])
    for p in pairs:
        phi = lifted @ p.vector
        grid.values.append(phi.reshape(tt.shape))
    return grid


def save_eigenfunction_csv(grid: EigGrid, k: int, path) -> None:
    """One eigenfunction as rows of theta,theta_dot,re,im."""
    vals = grid.values[k]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "theta_dot", "re", "im"])
        for i, th in enumerate(grid.theta):
            for j, td in enumerate(grid.theta_dot):
                w.writerow([repr(float(th)), repr(float(td)),
                            repr(float(vals[i, j].real)), repr(float(vals[i, j].imag))])


def hamiltonian(theta, theta_dot, params: PendulumParams = PendulumParams()):
    """Total pendulum energy, with the upright pose at maximum potential.

    H = 1/2 m l^2 theta_dot^2 + m g l cos(theta); upright rest gives
    +m g l, hanging rest gives -m g l.
    """
    return 0.5 * params.m * params.l**2 * np.square(theta_dot) \
        + params.m * params.g * params.l * np.cos(theta)


def energy_trace(traj: Trajectory, params: PendulumParams = PendulumParams()) -> np.ndarray:
    return hamiltonian(traj.states[:, 0], traj.states[:, 1], params)


@dataclass(frozen=True)
class SuccessThresholds:
    pend_angle: float = 0.2      # rad
    pend_speed: float = 0.5      # rad/s
    pend_window: int = 20        # final steps that must stay in tolerance
    lander_x: float = 1.0        # m
    lander_y: float = 0.5        # m
    lander_theta: float = 0.2    # rad
    lander_speed: float = 1.0    # m/s


@dataclass
class MetricsReport:
    success: bool
    steps_to_success: int  # -1 on failure
    effort: float          # sum of ||u||^2
    final_state: np.ndarray


def _stays_within(ok: np.ndarray) -> int:
    """First index from which the mask holds through the end, -1 if never."""
    if not ok[-1]:
        return -1
    idx = len(ok) - 1
    while idx > 0 and ok[idx - 1]:
        idx -= 1
    return idx


def success_metrics(traj: Trajectory, env_spec,
                    thresholds: SuccessThresholds = SuccessThresholds()) -> MetricsReport:
    """Geometric success criteria replacing the upstream game score.

    Pendulum: the final ``pend_window`` recorded states must all satisfy
    |wrap(theta)| < pend_angle and |theta_dot| < pend_speed. Lander: the
    final state must sit inside the landing box around the goal with
    translational speed below lander_speed.
    """
    if traj.states.shape[0] == 0:
        raise DegenerateDataError("trajectory has no states")
    effort = float(np.sum(np.square(traj.controls))) if traj.controls.size else 0.0
    final = traj.states[-1]
    if env_spec.name == "pendulum":
        theta = np.array([wrap_angle(t) for t in traj.states[:, 0]])
        ok = (np.abs(theta) < thresholds.pend_angle) & \
             (np.abs(traj.states[:, 1]) < thresholds.pend_speed)
        window = min(thresholds.pend_window, len(ok))
        success = bool(np.all(ok[-window:]))
        steps = _stays_within(ok) if success else -1
        return MetricsReport(success, steps, effort, final)
    if env_spec.name == "lander":
        gx, gy = env_spec.goal_state[0], env_spec.goal_state[1]
        within = (
            (np.abs(traj.states[:, 0] - gx) < thresholds.lander_x)
            & (np.abs(traj.states[:, 1] - gy) < thresholds.lander_y)
            & (np.abs(traj.states[:, 2]) < thresholds.lander_theta)
            & (np.hypot(traj.states[:, 3], traj.states[:, 4]) < thresholds.lander_speed)
        )
        success = bool(within[-1])
        steps = _stays_within(within) if success else -1
        return MetricsReport(success, steps, effort, final)
    raise ValueError(f"unknown environment {env_spec.name!r}; valid options: pendulum, lander")
