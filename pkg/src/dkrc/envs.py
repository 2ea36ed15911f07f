"""Deterministic, seedable simulators: torque-limited pendulum and planar lander.

Both environments are value types: ``step`` is a pure function of
(state, control, params), and ``reset`` is a pure function of the seed.
Integration is semi-implicit Euler (velocity first, then position),
which keeps the unforced pendulum's energy drift bounded.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, DegenerateDataError, NonFiniteError


def wrap_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (theta + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    obs_dim: int
    control_dim: int
    control_lo: np.ndarray
    control_hi: np.ndarray
    dt: float
    goal_state: np.ndarray
    goal_obs: np.ndarray


@dataclass(frozen=True)
class PendulumParams:
    m: float = 1.0
    l: float = 1.0
    g: float = 10.0
    gamma: float = 0.05
    dt: float = 0.05
    max_speed: float = 8.0
    max_torque: float = 2.0


class Pendulum:
    """Rigid pendulum with torque input; theta = 0 is the unstable upright pose.

    State is (theta, theta_dot); the observation is [cos(theta),
    sin(theta), theta_dot] so it stays continuous across +-pi.
    """

    def __init__(self, params: PendulumParams = PendulumParams()):
        self.params = params
        self.spec = EnvSpec(
            name="pendulum",
            state_dim=2,
            obs_dim=3,
            control_dim=1,
            control_lo=np.array([-params.max_torque]),
            control_hi=np.array([params.max_torque]),
            dt=params.dt,
            goal_state=np.zeros(2),
            goal_obs=np.array([1.0, 0.0, 0.0]),
        )

    def reset(self, seed) -> np.ndarray:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        theta = rng.uniform(-np.pi, np.pi)
        theta_dot = rng.uniform(-1.0, 1.0)
        return np.array([theta, theta_dot])

    def step(self, state, u) -> np.ndarray:
        p = self.params
        theta, theta_dot = state
        torque = float(np.clip(np.asarray(u).reshape(-1)[0], -p.max_torque, p.max_torque))
        # m l^2 theta_dd = -gamma theta_dot + m g l sin(theta) + u
        theta_dd = (-p.gamma * theta_dot + p.m * p.g * p.l * np.sin(theta) + torque) / (p.m * p.l**2)
        theta_dot = float(np.clip(theta_dot + p.dt * theta_dd, -p.max_speed, p.max_speed))
        theta = wrap_angle(theta + p.dt * theta_dot)
        return np.array([theta, theta_dot])

    def observe(self, state) -> np.ndarray:
        theta, theta_dot = state
        return np.array([np.cos(theta), np.sin(theta), theta_dot])

    def terminated(self, state) -> bool:
        return False


@dataclass(frozen=True)
class LanderParams:
    main_accel: float = 30.0   # acceleration of the main engine at u1 = 1
    side_accel: float = 3.0    # lateral acceleration of the side engine at |u2| = 1
    side_torque: float = 3.0   # angular acceleration magnitude at |u2| = 1
    gravity: float = 10.0
    dt: float = 0.02
    ground: float = 4.0


class Lander:
    """Planar rigid-body lander: main engine u1 in [0, 1], side engine u2 in [-1, 1].

    State is (x, y, theta, x_dot, y_dot, theta_dot) with theta measured
    clockwise from upright; the observation equals the state. An episode
    ends on ground contact (y <= ground).
    """

    def __init__(self, params: LanderParams = LanderParams()):
        self.params = params
        goal = np.array([10.0, params.ground, 0.0, 0.0, 0.0, 0.0])
        self.spec = EnvSpec(
            name="lander",
            state_dim=6,
            obs_dim=6,
            control_dim=2,
            control_lo=np.array([0.0, -1.0]),
            control_hi=np.array([1.0, 1.0]),
            dt=params.dt,
            goal_state=goal,
            goal_obs=goal.copy(),
        )

    def reset(self, seed) -> np.ndarray:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        x = 10.0 + rng.uniform(-0.5, 0.5)
        y = 13.0 + rng.uniform(-0.5, 0.5)
        theta = rng.uniform(-0.1, 0.1)
        x_dot = rng.uniform(-1.0, 1.0)
        y_dot = rng.uniform(-1.0, 1.0)
        theta_dot = rng.uniform(-1.0, 1.0)
        return np.array([x, y, theta, x_dot, y_dot, theta_dot])

    def step(self, state, u) -> np.ndarray:
        p = self.params
        x, y, theta, x_dot, y_dot, theta_dot = state
        u = np.asarray(u, dtype=float).reshape(-1)
        u1 = float(np.clip(u[0], 0.0, 1.0))
        u2 = float(np.clip(u[1], -1.0, 1.0))
        x_dd = -p.main_accel * u1 * np.sin(theta) + p.side_accel * u2 * np.cos(theta)
        y_dd = p.main_accel * u1 * np.cos(theta) + p.side_accel * u2 * np.sin(theta) - p.gravity
        theta_dd = -p.side_torque * u2
        x_dot += p.dt * x_dd
        y_dot += p.dt * y_dd
        theta_dot += p.dt * theta_dd
        return np.array([
            x + p.dt * x_dot,
            y + p.dt * y_dot,
            theta + p.dt * theta_dot,
            x_dot,
            y_dot,
            theta_dot,
        ])

    def observe(self, state) -> np.ndarray:
        return np.asarray(state, dtype=float).copy()

    def terminated(self, state) -> bool:
        return state[1] <= self.params.ground


def make_env(name: str, pendulum_params=None, lander_params=None):
    if name == "pendulum":
        return Pendulum(pendulum_params or PendulumParams())
    if name == "lander":
        return Lander(lander_params or LanderParams())
    raise ValueError(f"unknown environment {name!r}; valid options: pendulum, lander")


@dataclass
class Trajectory:
    """Time-indexed rollout record: T transitions, T+1 states/observations."""

    states: np.ndarray    # (T+1, state_dim)
    obs: np.ndarray       # (T+1, obs_dim)
    controls: np.ndarray  # (T, control_dim)
    env_name: str = ""
    scalars: dict = field(default_factory=dict)  # derived per-run scalars (energy, cost)

    @property
    def steps(self) -> int:
        return self.controls.shape[0]


def rollout(env, policy, horizon: int, seed, state0=None) -> Trajectory:
    """Roll ``policy`` out for up to ``horizon`` steps.

    The policy maps an observation vector to a control vector; controls
    are recorded as returned (the env clamps internally). Stops early if
    the environment reports termination.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    state = env.reset(seed) if state0 is None else np.asarray(state0, dtype=float).copy()
    states = [state]
    obs = [env.observe(state)]
    controls = []
    for _ in range(horizon):
        u = np.asarray(policy(obs[-1]), dtype=float).reshape(-1)
        if not np.all(np.isfinite(u)):
            raise NonFiniteError(f"policy returned non-finite control {u} at step {len(controls)}")
        state = env.step(state, u)
        controls.append(u)
        states.append(state)
        obs.append(env.observe(state))
        if env.terminated(state):
            break
    return Trajectory(
        states=np.asarray(states),
        obs=np.asarray(obs),
        controls=np.asarray(controls).reshape(len(controls), -1),
        env_name=env.spec.name,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def save_trajectory(traj: Trajectory, path) -> None:
    """CSV with header t,state...,obs...,control...; the final row has no control."""
    ns = traj.states.shape[1]
    no = traj.obs.shape[1]
    m = traj.controls.shape[1]
    header = (
        ["t"]
        + [f"state{i}" for i in range(ns)]
        + [f"obs{i}" for i in range(no)]
        + [f"control{i}" for i in range(m)]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(traj.states.shape[0]):
            row = [str(t)]
            row += [_fmt(v) for v in traj.states[t]]
            row += [_fmt(v) for v in traj.obs[t]]
            if t < traj.steps:
                row += [_fmt(v) for v in traj.controls[t]]
            else:
                row += [""] * m
            w.writerow(row)


def load_trajectory(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty trajectory file")
    header = rows[0]
    ns = sum(1 for h in header if h.startswith("state"))
    no = sum(1 for h in header if h.startswith("obs"))
    m = sum(1 for h in header if h.startswith("control"))
    if ns == 0 or header[0] != "t":
        raise DataFormatError(f"{path}: line 1: unrecognized trajectory header")
    states, obs, controls = [], [], []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 1 + ns + no + m:
            raise DataFormatError(f"{path}: line {k}: expected {1 + ns + no + m} fields, got {len(row)}")
        try:
            states.append([float(v) for v in row[1 : 1 + ns]])
            obs.append([float(v) for v in row[1 + ns : 1 + ns + no]])
            tail = row[1 + ns + no :]
            if any(v != "" for v in tail):
                controls.append([float(v) for v in tail])
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {k}: {exc}") from exc
    if not states:
        raise DegenerateDataError(f"{path}: trajectory has no states")
    return Trajectory(
        states=np.asarray(states),
        obs=np.asarray(obs),
        controls=np.asarray(controls).reshape(len(controls), m),
    )
