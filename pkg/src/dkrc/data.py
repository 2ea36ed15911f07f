"""Exploration-driven data collection, (X, Y, U) pairing, splitting, persistence.

A dataset holds aligned triples (x_t, x_{t+1}, u_t) of *observation*
vectors, the quantity the lifting network consumes, together with the
episode each triple came from and a train/val/test split tag.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .errors import DataFormatError, DimensionError

SPLIT_NAMES = ("train", "val", "test")


@dataclass
class Dataset:
    x: np.ndarray        # (T, obs_dim)  observations at time t
    y: np.ndarray        # (T, obs_dim)  observations at time t+1
    u: np.ndarray        # (T, control_dim)
    episode: np.ndarray  # (T,) int
    step: np.ndarray     # (T,) int, position within the episode
    split: list = field(default_factory=list)  # per-triple tag, "" if untagged

    def __post_init__(self):
        if not self.split:
            self.split = [""] * self.x.shape[0]

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.x.shape[1]

    @property
    def control_dim(self) -> int:
        return self.u.shape[1]

    def subset(self, tag: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The (x, y, u) arrays of one split tag."""
        idx = [i for i, s in enumerate(self.split) if s == tag]
        return self.x[idx], self.y[idx], self.u[idx]

    def counts(self) -> dict:
        out = {}
        for s in self.split:
            out[s] = out.get(s, 0) + 1
        return out


@dataclass
class OuNoise:
    """Ornstein-Uhlenbeck state: mean-reverting exploration noise."""

    mu: np.ndarray
    theta_rate: float = 0.15
    sigma: float = 0.2
    dt: float = 1.0
    state: np.ndarray = None

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if self.state is None:
            self.state = self.mu.copy()
        self.state = np.asarray(self.state, dtype=float)
        if self.state.shape != self.mu.shape:
            raise DimensionError(f"state shape {self.state.shape} != mu shape {self.mu.shape}")

    def reset(self) -> None:
        self.state = self.mu.copy()


def ou_step(noise: OuNoise, rng: np.random.Generator) -> np.ndarray:
    """Advance the noise one step and return a copy of the new state."""
    drift = noise.theta_rate * (noise.mu - noise.state) * noise.dt
    diffusion = noise.sigma * np.sqrt(noise.dt) * rng.standard_normal(noise.mu.shape)
    noise.state = noise.state + drift + diffusion
    return noise.state.copy()


def collect(env, episodes: int, steps: int, noise: OuNoise, seed: int) -> Dataset:
    """Collect transitions by driving the env with uniform-random controls plus OU noise.

    Controls are clamped to the env bounds before being applied and
    recorded. Episodes are rolled independently from per-episode child
    seeds; a lander episode ends early on ground contact.
    """
    if episodes < 1 or steps < 1:
        raise ValueError("episodes and steps must both be >= 1")
    lo, hi = env.spec.control_lo, env.spec.control_hi
    xs, ys, us, eps, ts = [], [], [], [], []
    for ep in range(episodes):
        rng = seeding.spawn(seed, seeding.NS_COLLECT, ep)
        state = env.reset(rng)
        noise.reset()
        for t in range(steps):
            u = np.clip(rng.uniform(lo, hi) + ou_step(noise, rng), lo, hi)
            nxt = env.step(state, u)
            xs.append(env.observe(state))
            ys.append(env.observe(nxt))
            us.append(u)
            eps.append(ep)
            ts.append(t)
            state = nxt
            if env.terminated(state):
                break
    return Dataset(
        x=np.asarray(xs),
        y=np.asarray(ys),
        u=np.asarray(us),
        episode=np.asarray(eps, dtype=int),
        step=np.asarray(ts, dtype=int),
    )


def split(d: Dataset, fractions=(0.7, 0.15, 0.15), seed: int = 0) -> Dataset:
    """Tag triples train/val/test by a seeded permutation.

    Val and test counts are floor-rounded; the remainder goes to train.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError(f"need three non-negative fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got sum {sum(fractions)!r}")
    t = len(d)
    n_val = int(np.floor(fractions[1] * t))
    n_test = int(np.floor(fractions[2] * t))
    n_train = t - n_val - n_test
    perm = seeding.spawn(seed, seeding.NS_SPLIT).permutation(t)
    tags = [""] * t
    for k, i in enumerate(perm):
        if k < n_train:
            tags[i] = "train"
        elif k < n_train + n_val:
            tags[i] = "val"
        else:
            tags[i] = "test"
    return Dataset(x=d.x.copy(), y=d.y.copy(), u=d.u.copy(),
                   episode=d.episode.copy(), step=d.step.copy(), split=tags)


def _fmt(v: float) -> str:
    return repr(float(v))


def save(d: Dataset, path) -> None:
    """CSV schema: episode,t,split,x0..x{n-1},y0..y{n-1},u0..u{m-1}."""
    n, m = d.obs_dim, d.control_dim
    header = (
        ["episode", "t", "split"]
        + [f"x{i}" for i in range(n)]
        + [f"y{i}" for i in range(n)]
        + [f"u{i}" for i in range(m)]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(d)):
            row = [str(int(d.episode[i])), str(int(d.step[i])), d.split[i]]
            row += [_fmt(v) for v in d.x[i]]
            row += [_fmt(v) for v in d.y[i]]
            row += [_fmt(v) for v in d.u[i]]
            w.writerow(row)


def load(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty dataset file")
    header = rows[0]
    n = sum(1 for h in header if h.startswith("x"))
    ny = sum(1 for h in header if h.startswith("y"))
    m = sum(1 for h in header if h.startswith("u"))
    if header[:3] != ["episode", "t", "split"] or n == 0 or n != ny:
        raise DataFormatError(f"{path}: line 1: unrecognized dataset header")
    width = 3 + 2 * n + m
    xs, ys, us, eps, ts, tags = [], [], [], [], [], []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise DataFormatError(f"{path}: line {k}: expected {width} fields, got {len(row)}")
        tag = row[2]
        if tag not in ("",) + SPLIT_NAMES:
            raise DataFormatError(f"{path}: line {k}: unknown split tag {tag!r}")
        try:
            eps.append(int(row[0]))
            ts.append(int(row[1]))
            xs.append([float(v) for v in row[3 : 3 + n]])
            ys.append([float(v) for v in row[3 + n : 3 + 2 * n]])
            us.append([float(v) for v in row[3 + 2 * n :]])
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {k}: {exc}") from exc
        tags.append(tag)
    return Dataset(
        x=np.asarray(xs, dtype=float).reshape(len(xs), n),
        y=np.asarray(ys, dtype=float).reshape(len(ys), n),
        u=np.asarray(us, dtype=float).reshape(len(us), m),
        episode=np.asarray(eps, dtype=int),
        step=np.asarray(ts, dtype=int),
        split=tags,
    )
