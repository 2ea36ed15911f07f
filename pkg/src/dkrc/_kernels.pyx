#cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in dkrc._kernels_py.

Matrix products go through BLAS (via scipy's cython bindings); the
projected-gradient loop runs entirely in C, which is where the speedup
over numpy comes from at the small sizes this package uses.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, tanh
from scipy.linalg.cython_blas cimport dgemm, dgemv

cnp.import_array()


cdef void _mm_nn(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept:
    # c (m,n) = a (m,k) @ b (k,n), all row-major
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "N", &n, &m, &k, &one, &b[0, 0], &n, &a[0, 0], &k, &zero, &c[0, 0], &n)


cdef void _mm_nt(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept:
    # c (m,n) = a (m,k) @ b(n,k)^T
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[0]
    cdef double one = 1.0, zero = 0.0
    dgemm("T", "N", &n, &m, &k, &one, &b[0, 0], &k, &a[0, 0], &k, &zero, &c[0, 0], &n)


cdef void _mm_tn(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept:
    # c (m,n) = a(k,m)^T @ b (k,n)
    cdef int k = a.shape[0], m = a.shape[1], n = b.shape[1]
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "T", &n, &m, &k, &one, &b[0, 0], &n, &a[0, 0], &m, &zero, &c[0, 0], &n)


def mlp_forward(list weights, list biases, x):
    """Same contract as dkrc._kernels_py.mlp_forward."""
    cdef cnp.ndarray a = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray w, z
    cdef double[:, ::1] zv
    cdef double[::1] bv
    cdef Py_ssize_t i, j, rows, cols
    acts = []
    n_layers = len(weights)
    for li in range(n_layers):
        w = <cnp.ndarray> weights[li]
        z = np.empty((a.shape[0], w.shape[1]))
        _mm_nn(a, w, z)
        zv = z
        bv = <cnp.ndarray> biases[li]
        rows = zv.shape[0]
        cols = zv.shape[1]
        if li < n_layers - 1:
            for i in range(rows):
                for j in range(cols):
                    zv[i, j] = tanh(zv[i, j] + bv[j])
            acts.append(z)
        else:
            for i in range(rows):
                for j in range(cols):
                    zv[i, j] = zv[i, j] + bv[j]
        a = z
    return a, acts


def mlp_backward(list weights, x, list acts, gout):
    """Same contract as dkrc._kernels_py.mlp_backward."""
    cdef cnp.ndarray xc = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray g = np.ascontiguousarray(gout, dtype=np.float64)
    cdef cnp.ndarray prev, w, dw, gn, act
    cdef double[:, ::1] gv, av
    cdef Py_ssize_t i, j, rows, cols
    n_layers = len(weights)
    dws = [None] * n_layers
    dbs = [None] * n_layers

    prev = acts[len(acts) - 1] if acts else xc
    w = <cnp.ndarray> weights[n_layers - 1]
    dw = np.empty((prev.shape[1], g.shape[1]))
    _mm_tn(prev, g, dw)
    dws[n_layers - 1] = dw
    dbs[n_layers - 1] = np.asarray(g).sum(axis=0)
    gn = np.empty((g.shape[0], w.shape[0]))
    _mm_nt(g, w, gn)
    g = gn

    for li in range(len(acts) - 1, -1, -1):
        act = <cnp.ndarray> acts[li]
        gv = g
        av = act
        rows = gv.shape[0]
        cols = gv.shape[1]
        for i in range(rows):
            for j in range(cols):
                gv[i, j] = gv[i, j] * (1.0 - av[i, j] * av[i, j])
        prev = acts[li - 1] if li > 0 else xc
        w = <cnp.ndarray> weights[li]
        dw = np.empty((prev.shape[1], g.shape[1]))
        _mm_tn(prev, g, dw)
        dws[li] = dw
        dbs[li] = np.asarray(g).sum(axis=0)
        gn = np.empty((g.shape[0], w.shape[0]))
        _mm_nt(g, w, gn)
        g = gn
    return dws, dbs, g


def pgd_box_qp(h, g, lo, hi, v0, double step, double tol, int max_iter):
    """Same contract as dkrc._kernels_py.pgd_box_qp."""
    cdef double[:, ::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef double[::1] lov = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] hiv = np.ascontiguousarray(hi, dtype=np.float64)
    cdef cnp.ndarray v_arr = np.clip(np.asarray(v0, dtype=np.float64), lo, hi)
    cdef double[::1] v = np.ascontiguousarray(v_arr)
    cdef int d = v.shape[0]
    cdef double[::1] grad = np.empty(d)
    cdef double one = 1.0, zero = 0.0
    cdef int inc = 1, it, i
    cdef double kkt = 0.0, vn, diff, acc
    cdef bint converged = False

    for it in range(max_iter + 1):
        # grad = h @ v + g
        dgemv("T", &d, &d, &one, &hv[0, 0], &d, &v[0], &inc, &zero, &grad[0], &inc)
        acc = 0.0
        for i in range(d):
            grad[i] = grad[i] + gv[i]
            vn = v[i] - step * grad[i]
            if vn < lov[i]:
                vn = lov[i]
            elif vn > hiv[i]:
                vn = hiv[i]
            diff = v[i] - vn
            acc += diff * diff
            grad[i] = vn  # reuse as the projected candidate
        kkt = sqrt(acc) / step
        if kkt < tol:
            converged = True
            break
        if it < max_iter:
            for i in range(d):
                v[i] = grad[i]
    return np.asarray(v), kkt, (it if converged else max_iter), converged
