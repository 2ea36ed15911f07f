"""The lifting network: a tanh MLP with hand-written reverse-mode gradients.

The standard architecture is four tanh hidden layers and a linear output
layer mapping an observation in R^n to the lifted vector in R^N. The
forward/backward passes run on whichever kernel backend is active; ADAM
is implemented here directly.
"""

from dataclasses import dataclass

import numpy as np

from . import backend, seeding
from .errors import DataFormatError, DimensionError

FORMAT_VERSION = "dkrc-net v1"


@dataclass
class MlpParams:
    """Weights (fan_in, fan_out) and biases of each layer, input to output."""

    weights: list
    biases: list

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def tensors(self) -> list:
        """Flat list of parameter arrays (views, so in-place updates stick)."""
        return list(self.weights) + list(self.biases)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_mlp(n_in: int, n_out: int, hidden: int = 32, n_hidden: int = 4, seed: int = 0) -> MlpParams:
    """Glorot-uniform weights, zero biases; requires the lifted dim to exceed the input dim."""
    if n_out <= n_in:
        raise DimensionError(f"lifted dimension must exceed input dimension, got {n_out} <= {n_in}")
    dims = [n_in] + [hidden] * n_hidden + [n_out]
    rng = seeding.spawn(seed, seeding.NS_NET)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _as_batch(x) -> tuple[np.ndarray, bool]:
    x = np.ascontiguousarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise DimensionError(f"input must be a vector or a batch, got shape {x.shape}")
    return x, False


def forward(params: MlpParams, x) -> np.ndarray:
    """Lift one observation (n,) or a batch (B, n)."""
    xb, single = _as_batch(x)
    if xb.shape[1] != params.in_dim:
        raise DimensionError(f"input dim {xb.shape[1]} != network input dim {params.in_dim}")
    out, _ = backend.mlp_forward(params.weights, params.biases, xb)
    return out[0] if single else out


def forward_cached(params: MlpParams, x):
    """Batched forward that also returns the activation cache for backward()."""
    xb, _ = _as_batch(x)
    if xb.shape[1] != params.in_dim:
        raise DimensionError(f"input dim {xb.shape[1]} != network input dim {params.in_dim}")
    return backend.mlp_forward(params.weights, params.biases, xb)


def backward(params: MlpParams, x, acts, gout):
    """Exact gradients of sum(gout * forward(x)) from a cached forward pass.

    Returns (dweights, dbiases, dx) with parameter gradients summed over
    the batch.
    """
    xb, _ = _as_batch(x)
    gout = np.ascontiguousarray(gout, dtype=float)
    if gout.shape != (xb.shape[0], params.out_dim):
        raise DimensionError(
            f"upstream gradient shape {gout.shape} != {(xb.shape[0], params.out_dim)}"
        )
    return backend.mlp_backward(params.weights, xb, acts, gout)


@dataclass
class AdamState:
    """First/second moment accumulators for one flat list of parameter arrays."""

    m: list
    v: list
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(tensors: list, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        m=[np.zeros_like(t) for t in tensors],
        v=[np.zeros_like(t) for t in tensors],
        lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_step(state: AdamState, tensors: list, grads: list) -> None:
    """One bias-corrected ADAM update, applied to the tensors in place."""
    if len(tensors) != len(state.m) or len(grads) != len(state.m):
        raise DimensionError("parameter/gradient list lengths do not match the optimizer state")
    state.step += 1
    t = state.step
    corr1 = 1.0 - state.beta1**t
    corr2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(tensors, grads, state.m, state.v):
        if p.shape != g.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)


def params_to_lines(params: MlpParams) -> list[str]:
    """Serialize to the versioned structured-text block used in model files."""
    lines = [FORMAT_VERSION, f"layers = {params.n_layers}"]
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        lines.append(f"layer{i}.shape = {w.shape[0]} {w.shape[1]}")
        lines.append(f"layer{i}.w = " + " ".join(repr(v) for v in w.ravel()))
        lines.append(f"layer{i}.b = " + " ".join(repr(v) for v in b))
    return lines


def params_from_lines(lines: list[str]) -> MlpParams:
    if not lines or lines[0].strip() != FORMAT_VERSION:
        head = lines[0].strip() if lines else "<empty>"
        raise DataFormatError(f"expected header {FORMAT_VERSION!r}, found {head!r}")
    fields = {}
    for ln in lines[1:]:
        if not ln.strip():
            continue
        key, _, val = ln.partition("=")
        fields[key.strip()] = val.strip()
    try:
        n_layers = int(fields["layers"])
        weights, biases = [], []
        for i in range(n_layers):
            r, c = (int(v) for v in fields[f"layer{i}.shape"].split())
            w = np.array([float(v) for v in fields[f"layer{i}.w"].split()]).reshape(r, c)
            b = np.array([float(v) for v in fields[f"layer{i}.b"].split()])
            if b.shape != (c,):
                raise DataFormatError(f"layer{i} bias length {b.shape[0]} != {c}")
            weights.append(w)
            biases.append(b)
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"bad network block: {exc}") from exc
    return MlpParams(weights, biases)
