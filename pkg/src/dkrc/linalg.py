"""Dense real linear-algebra kernels used throughout the package.

Matrices are plain float64 ``numpy.ndarray`` objects. Everything here is
pure and reentrant; LAPACK (through numpy) does the heavy lifting, while
this module pins down the rank-tolerance convention, left-eigenpair
ordering, and error behavior the rest of the package relies on.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, NonFiniteError

# Relative singular-value cutoff: s <= RANK_TOL * s_max counts as zero.
RANK_TOL = 1e-9


def _as_matrix(m, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return m


def pseudo_inverse(m, tol: float = RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values at or below ``tol * s_max`` are treated as exactly zero.
    """
    m = _as_matrix(m)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]))
    inv = np.where(s > tol * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return (vt.T * inv) @ u.T


def matrix_rank(m, tol: float = RANK_TOL) -> int:
    """Number of singular values above ``tol * s_max``; zero matrix has rank 0."""
    m = _as_matrix(m)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def controllability_matrix(a, b) -> np.ndarray:
    """Column-block concatenation [B, AB, A^2 B, ..., A^(N-1) B]."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionError(f"a must be square, got {a.shape}")
    if b.shape[0] != n:
        raise DimensionError(f"b has {b.shape[0]} rows, expected {n}")
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def lstsq(a, y, tol: float = RANK_TOL) -> np.ndarray:
    """Minimum-Frobenius-norm X solving A X ~= Y, via the pseudo-inverse."""
    a = _as_matrix(a, "a")
    y = _as_matrix(y, "y")
    if a.shape[0] != y.shape[0]:
        raise DimensionError(f"row counts differ: a has {a.shape[0]}, y has {y.shape[0]}")
    return pseudo_inverse(a, tol) @ y


@dataclass(frozen=True)
class EigPair:
    """One left eigenpair of a real square matrix.

    ``vector`` satisfies vector^T A = value * vector^T (plain transpose,
    no conjugation) and has unit 2-norm.
    """

    value: complex
    vector: np.ndarray

    @property
    def is_real(self) -> bool:
        return self.value.imag == 0.0


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # Rotate so the largest-magnitude entry is real and positive; makes the
    # returned pairs deterministic across LAPACK builds.
    k = int(np.argmax(np.abs(v)))
    pivot = v[k]
    if pivot != 0:
        v = v * (abs(pivot) / pivot)
    return v / np.linalg.norm(v)


def eig_left(a) -> list[EigPair]:
    """Left eigenpairs of ``a``, sorted by descending |value|.

    Complex eigenvalues come in conjugate-adjacent pairs (positive
    imaginary part first) with exactly conjugate vectors; eigenvalues
    with negligible imaginary part are returned as real pairs with real
    vectors.
    """
    a = _as_matrix(a)
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionError(f"matrix must be square, got {a.shape}")
    try:
        # w^T A = lam w^T  <=>  A^T w = lam w
        values, vectors = np.linalg.eig(a.T)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition did not converge: {exc}") from exc

    scale = float(np.max(np.abs(values))) if n else 0.0
    real_cut = 1e-12 * max(scale, 1.0)

    order = sorted(
        range(n),
        key=lambda i: (-abs(values[i]), -values[i].imag, -values[i].real),
    )
    used = [False] * n
    pairs: list[EigPair] = []
    for idx in order:
        if used[idx]:
            continue
        used[idx] = True
        lam = values[idx]
        vec = vectors[:, idx]
        if abs(lam.imag) <= real_cut:
            v = np.real(_fix_phase(vec))
            pairs.append(EigPair(complex(lam.real, 0.0), v / np.linalg.norm(v)))
            continue
        # Mark the numerically-closest conjugate partner as consumed; a real
        # input matrix always has one.
        partner, dist = -1, np.inf
        for j in order:
            if not used[j]:
                d = abs(values[j] - lam.conjugate())
                if d < dist:
                    partner, dist = j, d
        if partner >= 0:
            used[partner] = True
        v = _fix_phase(vec)
        if lam.imag < 0:
            lam, v = lam.conjugate(), np.conj(v)
        # Partner emitted by conjugation so the pair is exact.
        pairs.append(EigPair(complex(lam), v))
        pairs.append(EigPair(complex(lam.conjugate()), np.conj(v)))
    return pairs
