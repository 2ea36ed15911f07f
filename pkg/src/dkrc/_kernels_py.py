"""Pure numpy implementations of the hot kernels.

These are the reference semantics; ``dkrc._kernels`` (Cython) implements
the same signatures and is preferred at import time when available.
"""

import numpy as np


def mlp_forward(weights, biases, x):
    """Forward pass of a tanh MLP with a linear output layer.

    x is (B, n_in). Returns (out, acts) where ``acts`` holds the
    post-tanh activations of each hidden layer, as needed for backward.
    """
    a = x
    acts = []
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.tanh(a @ w + b)
        acts.append(a)
    out = a @ weights[-1] + biases[-1]
    return out, acts


def mlp_backward(weights, x, acts, gout):
    """Reverse-mode gradients of sum(gout * out) from a cached forward pass.

    Returns (dweights, dbiases, dx); parameter gradients are summed over
    the batch.
    """
    n_layers = len(weights)
    dws = [None] * n_layers
    dbs = [None] * n_layers
    prev = acts[-1] if acts else x
    g = gout
    dws[-1] = prev.T @ g
    dbs[-1] = g.sum(axis=0)
    g = g @ weights[-1].T
    for i in range(len(acts) - 1, -1, -1):
        g = g * (1.0 - acts[i] * acts[i])
        prev = acts[i - 1] if i > 0 else x
        dws[i] = prev.T @ g
        dbs[i] = g.sum(axis=0)
        g = g @ weights[i].T
    return dws, dbs, g


def pgd_box_qp(h, g, lo, hi, v0, step, tol, max_iter):
    """Projected gradient descent on 0.5 v'Hv + g'v over the box [lo, hi].

    Fixed step (1/Lipschitz, supplied by the caller). Stops when the
    gradient-map norm ||v - proj(v - step*grad)|| / step drops below
    ``tol``. Returns (v, kkt_residual, iterations, converged).
    """
    v = np.clip(v0, lo, hi)
    kkt = np.inf
    for it in range(max_iter + 1):
        grad = h @ v + g
        vn = np.clip(v - step * grad, lo, hi)
        kkt = float(np.linalg.norm(v - vn)) / step
        if kkt < tol:
            return v, kkt, it, True
        if it < max_iter:
            v = vn
    return v, kkt, max_iter, False
