"""Identification of a lifted linear model from transition data.

The loop alternates gradient steps on the lifting network with an
analytic refresh of the lifted system matrices:

* per minibatch, the network minimizes the batch-local linear-consistency
  loss (a least-squares operator K is fit to the batch and treated as a
  constant, so only the lifting moves);
* the control offset u0 follows the gradient of the one-step model
  residual, the only objective it appears in;
* at the end of each epoch, (A, B) are refit in closed form on the whole
  training split and blended 50/50 with their previous values;
* after the last epoch, the state-recovery map C is solved as a
  (optionally constrained) least-squares problem.

Throughout, z = psi(x) - psi(goal) so the goal is the origin of the
lifted coordinates, and v = u - u0 is the shifted control.
"""

from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg

from . import linalg, net, seeding
from .data import Dataset
from .errors import (
    DataFormatError,
    DegenerateDataError,
    DimensionError,
    NonFiniteError,
)

MODEL_FORMAT_VERSION = "dkrc-model v1"


@dataclass
class LiftedModel:
    """The deployable identification result."""

    psi: net.MlpParams
    u0: np.ndarray    # (m,)
    a: np.ndarray     # (N, N)
    b: np.ndarray     # (N, m)
    c: np.ndarray     # (n, N)
    goal: np.ndarray  # (n,) goal observation
    psi0: np.ndarray  # (N,) lift of the goal

    @property
    def n(self) -> int:
        return self.goal.shape[0]

    @property
    def m(self) -> int:
        return self.u0.shape[0]

    @property
    def lift_dim(self) -> int:
        return self.psi0.shape[0]


def make_model(psi, u0, a, b, c, goal) -> LiftedModel:
    goal = np.asarray(goal, dtype=float)
    psi0 = net.forward(psi, goal)
    return LiftedModel(
        psi=psi,
        u0=np.asarray(u0, dtype=float),
        a=np.asarray(a, dtype=float),
        b=np.asarray(b, dtype=float),
        c=np.asarray(c, dtype=float),
        goal=goal,
        psi0=psi0,
    )


def lift(model: LiftedModel, x) -> np.ndarray:
    """Goal-shifted lifted coordinates z = psi(x) - psi(goal); zero at the goal."""
    return net.forward(model.psi, x) - model.psi0


def _lift_pairs(model, x, y):
    z = np.atleast_2d(lift(model, x))
    zp = np.atleast_2d(lift(model, y))
    if z.shape != zp.shape:
        raise DimensionError(f"x and y batches disagree: {z.shape} vs {zp.shape}")
    return z, zp


def _l1_from_lifted(z, zp, tol):
    """Batch-local consistency loss and its gradients w.r.t. the lifted batches.

    z, zp are (B, N) row batches. The operator K = Z' Z^+ (columns are
    samples) is fit to the batch and held constant for the gradient.
    """
    big_z = z.T
    big_zp = zp.T
    if not np.any(big_z):
        raise DegenerateDataError("all lifted states in the batch are zero")
    k = big_zp @ linalg.pseudo_inverse(big_z, tol)
    resid = big_zp - k @ big_z
    norms = np.linalg.norm(resid, axis=0)
    batch = z.shape[0]
    value = float(norms.sum()) / batch
    ghat = resid / np.maximum(norms, 1e-300) / batch
    dzp = ghat.T
    dz = -(k.T @ ghat).T
    return value, dz, dzp, k


def loss_l1(model: LiftedModel, x, y, tol: float = linalg.RANK_TOL) -> float:
    """Mean residual of the best batch-local linear operator on lifted pairs."""
    z, zp = _lift_pairs(model, x, y)
    value, _, _, _ = _l1_from_lifted(z, zp, tol)
    return value


def loss_l2(model: LiftedModel, rank_tol: float = linalg.RANK_TOL,
            smooth: bool = False, smooth_eps: float = 1e-6) -> float:
    """Controllability penalty: lifted-dim minus ctrb rank, plus entrywise L1 of A and B.

    With ``smooth`` the rank term is replaced by N - sum(s / (s + eps))
    over the controllability matrix's singular values. Either way the
    term is gradient-free: A and B are frozen during an epoch.
    """
    ctrb = linalg.controllability_matrix(model.a, model.b)
    n_lift = model.a.shape[0]
    if smooth:
        s = np.linalg.svd(ctrb, compute_uv=False)
        rank_term = n_lift - float(np.sum(s / (s + smooth_eps)))
    else:
        rank_term = float(n_lift - linalg.matrix_rank(ctrb, rank_tol))
    return rank_term + float(np.abs(model.a).sum()) + float(np.abs(model.b).sum())


def one_step_error(model: LiftedModel, x, y, u) -> float:
    """Mean one-step model residual ||z' - A z - B (u - u0)|| over the batch."""
    z, zp = _lift_pairs(model, x, y)
    v = np.atleast_2d(np.asarray(u, dtype=float)) - model.u0
    resid = zp - z @ model.a.T - v @ model.b.T
    return float(np.linalg.norm(resid, axis=1).mean())


def update_ab(model: LiftedModel, x, y, u, blend: float = 0.5,
              tol: float = linalg.RANK_TOL):
    """Closed-form refit of (A, B) on lifted data, blended with the old values.

    The new estimate is the minimum-norm least-squares solution of
    Z' = [A, B] [Z; V]; with blend = 1 it replaces (A, B) outright, with
    blend = 0 the model is untouched.
    """
    if blend != 0.0:
        z, zp = _lift_pairs(model, x, y)
        v = np.atleast_2d(np.asarray(u, dtype=float)) - model.u0
        if v.shape[0] != z.shape[0]:
            raise DimensionError(f"controls batch {v.shape[0]} != state batch {z.shape[0]}")
        g = np.hstack([z, v]).T  # (N+m, T)
        ab = zp.T @ linalg.pseudo_inverse(g, tol)
        n_lift = model.lift_dim
        model.a = (1.0 - blend) * model.a + blend * ab[:, :n_lift]
        model.b = (1.0 - blend) * model.b + blend * ab[:, n_lift:]
    return model.a, model.b


def solve_c(model: LiftedModel, x, constrained: bool = True,
            tol: float = linalg.RANK_TOL) -> np.ndarray:
    """State-recovery map: x_hat = C z + goal.

    Constrained mode forces C psi0 = 0 by parametrizing the rows of C in
    an orthonormal basis of the complement of psi0, then solving the
    reduced least squares. Unconstrained mode is the plain pseudo-inverse
    fit of raw states against raw lifted vectors.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    psi_x = np.atleast_2d(net.forward(model.psi, x))
    if linalg.matrix_rank(psi_x, tol) == 0:
        raise DegenerateDataError("lifted data has rank 0; cannot recover states")
    if constrained:
        psi0 = model.psi0
        if np.linalg.norm(psi0) < 1e-12:
            q = np.eye(model.lift_dim)
        else:
            q = scipy.linalg.null_space(psi0[None, :])
        targets = x - model.goal
        reduced = psi_x @ q  # equals z @ q since q' psi0 = 0
        m_fit = linalg.lstsq(reduced, targets, tol)
        c = (q @ m_fit).T
    else:
        c = linalg.lstsq(psi_x, x, tol).T
    model.c = c
    return c


def predict(model: LiftedModel, x, controls) -> np.ndarray:
    """Iterate the lifted dynamics from x under shifted controls v_0..v_{L-1}.

    Returns the recovered states x_hat_1..x_hat_L, shape (L, n).
    """
    controls = np.asarray(controls, dtype=float).reshape(-1, model.m)
    z = lift(model, x)
    out = np.empty((controls.shape[0], model.n))
    for t, v in enumerate(controls):
        z = model.a @ z + model.b @ v
        out[t] = model.c @ z + model.goal
    return out


@dataclass
class TrainSettings:
    lift_dim: int
    hidden: int = 32
    n_hidden: int = 4
    epochs: int = 300
    batch: int = 64
    blend: float = 0.5
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rank_tol: float = 1e-9
    smooth_rank: bool = False
    constrained_c: bool = True
    seed: int = 0


@dataclass
class TrainReport:
    """One row per epoch: losses, controllability rank, validation error."""

    epoch: list = field(default_factory=list)
    l1: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    total: list = field(default_factory=list)
    rank: list = field(default_factory=list)
    val_err: list = field(default_factory=list)

    def append(self, epoch, l1, l2, rank, val_err):
        self.epoch.append(int(epoch))
        self.l1.append(float(l1))
        self.l2.append(float(l2))
        self.total.append(float(l1) + float(l2))
        self.rank.append(int(rank))
        self.val_err.append(float(val_err))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,l1,l2,total,rank,val_err\n")
            for i in range(len(self.epoch)):
                fh.write(
                    f"{self.epoch[i]},{self.l1[i]!r},{self.l2[i]!r},"
                    f"{self.total[i]!r},{self.rank[i]},{self.val_err[i]!r}\n"
                )


def _epoch_update(model, x, y, u, settings):
    update_ab(model, x, y, u, blend=settings.blend, tol=settings.rank_tol)
    l2 = loss_l2(model, settings.rank_tol, settings.smooth_rank)
    rank = linalg.matrix_rank(
        linalg.controllability_matrix(model.a, model.b), settings.rank_tol
    )
    return l2, rank


def train(dataset: Dataset, goal, settings: TrainSettings):
    """Run the full identification loop on a tagged dataset.

    Returns (model, report). The validation column of the report is the
    mean one-step residual on the val split, evaluated with the (A, B)
    in force after each epoch's analytic update.
    """
    goal = np.asarray(goal, dtype=float)
    n = dataset.obs_dim
    m = dataset.control_dim
    xt, yt, ut = dataset.subset("train")
    xv, yv, uv = dataset.subset("val")
    if xt.shape[0] == 0:
        raise DegenerateDataError("dataset has no triples tagged 'train'")

    psi = net.init_mlp(n, settings.lift_dim, settings.hidden, settings.n_hidden,
                       seed=settings.seed)
    n_lift = settings.lift_dim
    rng = seeding.spawn(settings.seed, seeding.NS_TRAIN, 0)
    scale = 1.0 / np.sqrt(n_lift)
    u0 = np.zeros(m)
    model = LiftedModel(
        psi=psi,
        u0=u0,
        a=rng.uniform(-scale, scale, size=(n_lift, n_lift)),
        b=rng.uniform(-scale, scale, size=(n_lift, m)),
        c=np.zeros((n, n_lift)),
        goal=goal,
        psi0=net.forward(psi, goal),
    )
    tensors = psi.tensors() + [u0]
    opt = net.adam_init(tensors, lr=settings.lr, beta1=settings.beta1,
                        beta2=settings.beta2, eps=settings.eps)

    report = TrainReport()
    n_train = xt.shape[0]
    for epoch in range(settings.epochs):
        order = seeding.spawn(settings.seed, seeding.NS_TRAIN, 1, epoch).permutation(n_train)
        l1_sum = 0.0
        n_batches = 0
        for start in range(0, n_train, settings.batch):
            idx = order[start : start + settings.batch]
            l1 = _train_step(model, opt, tensors, xt[idx], yt[idx], ut[idx], settings)
            if not np.isfinite(l1):
                raise NonFiniteError(f"non-finite training loss at epoch {epoch}")
            l1_sum += l1
            n_batches += 1
            model.psi0 = net.forward(model.psi, goal)
        l2, rank = _epoch_update(model, xt, yt, ut, settings)
        val = one_step_error(model, xv, yv, uv) if xv.shape[0] else float("nan")
        report.append(epoch, l1_sum / max(n_batches, 1), l2, rank, val)

    model.psi0 = net.forward(model.psi, goal)
    if settings.epochs == 0:
        # keep (A, B) consistent with the initialized lifting
        _epoch_update(model, xt, yt, ut, settings)
    solve_c(model, xt, constrained=settings.constrained_c, tol=settings.rank_tol)
    return model, report


def _train_step(model, opt, tensors, xb, yb, ub, settings):
    """One minibatch: network follows the batch-local loss, u0 the model residual."""
    goal = model.goal
    batch = xb.shape[0]
    stacked = np.vstack([xb, yb, goal[None, :]])
    out, acts = net.forward_cached(model.psi, stacked)
    psi_g = out[-1]
    z = out[:batch] - psi_g
    zp = out[batch : 2 * batch] - psi_g

    l1, dz, dzp, _ = _l1_from_lifted(z, zp, settings.rank_tol)

    gout = np.empty_like(out)
    gout[:batch] = dz
    gout[batch : 2 * batch] = dzp
    gout[-1] = -(dz.sum(axis=0) + dzp.sum(axis=0))
    dws, dbs, _ = net.backward(model.psi, stacked, acts, gout)

    # u0 appears only in the one-step residual; A and B stay frozen here.
    v = ub - model.u0
    resid = zp - z @ model.a.T - v @ model.b.T
    norms = np.linalg.norm(resid, axis=1)
    rhat = resid / np.maximum(norms, 1e-300)[:, None]
    du0 = (rhat @ model.b).mean(axis=0)

    net.adam_step(opt, tensors, dws + dbs + [du0])
    return l1


def _fmt_vec(v) -> str:
    return " ".join(repr(float(x)) for x in np.asarray(v).ravel())


def save_model(model: LiftedModel, path, config: dict | None = None) -> None:
    """Single structured-text document with the network, matrices, and config."""
    lines = [MODEL_FORMAT_VERSION, "[net]"]
    lines += net.params_to_lines(model.psi)
    lines.append("[matrices]")
    for name in ("a", "b", "c"):
        mat = getattr(model, name)
        lines.append(f"{name}.shape = {mat.shape[0]} {mat.shape[1]}")
        lines.append(f"{name} = {_fmt_vec(mat)}")
    lines.append("[vectors]")
    for name in ("u0", "psi0", "goal"):
        lines.append(f"{name} = {_fmt_vec(getattr(model, name))}")
    lines.append("[config]")
    for key, val in (config or {}).items():
        lines.append(f"{key} = {val}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    """Inverse of save_model; returns (model, config_dict)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].strip() != MODEL_FORMAT_VERSION:
        head = lines[0].strip() if lines else "<empty>"
        raise DataFormatError(f"{path}: expected header {MODEL_FORMAT_VERSION!r}, found {head!r}")
    sections: dict[str, list[str]] = {}
    current = None
    for ln in lines[1:]:
        if ln.startswith("[") and ln.endswith("]"):
            current = ln[1:-1]
            sections[current] = []
        elif current is not None and ln.strip():
            sections[current].append(ln)
    for required in ("net", "matrices", "vectors"):
        if required not in sections:
            raise DataFormatError(f"{path}: missing [{required}] section")

    psi = net.params_from_lines(sections["net"])

    def parse_kv(lines_):
        out = {}
        for ln in lines_:
            key, _, val = ln.partition("=")
            out[key.strip()] = val.strip()
        return out

    mats = parse_kv(sections["matrices"])
    vecs = parse_kv(sections["vectors"])
    try:
        def mat(name):
            r, c = (int(s) for s in mats[f"{name}.shape"].split())
            return np.array([float(s) for s in mats[name].split()]).reshape(r, c)

        def vec(name):
            return np.array([float(s) for s in vecs[name].split()])

        model = LiftedModel(
            psi=psi, u0=vec("u0"), a=mat("a"), b=mat("b"), c=mat("c"),
            goal=vec("goal"), psi0=vec("psi0"),
        )
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"{path}: bad model block: {exc}") from exc
    config = parse_kv(sections.get("config", []))
    return model, config


def settings_to_config(settings: TrainSettings) -> dict:
    return {f"train.{k}": v for k, v in asdict(settings).items()}
