"""Symmetric eigendecomposition by cyclic Jacobi rotations."""

import numba
import numpy as np

from .errors import DimensionError

REL_TOL = 1e-14
MAX_SWEEPS = 100


@numba.njit(cache=True)
def _jacobi_sweeps(a, vt, tol, max_sweeps):
    # a: symmetric working copy, diagonalised in place.
    # vt: rows accumulate the eigenvectors.
    n = a.shape[0]
    skip = tol / n
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if np.sqrt(2.0 * off) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                # entries this small cannot keep the off-diagonal norm above tol
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    if k == p or k == q:
                        continue
                    akp = a[p, k]
                    akq = a[q, k]
                    x = c * akp - s * akq
                    y = s * akp + c * akq
                    a[p, k] = x
                    a[k, p] = x
                    a[q, k] = y
                    a[k, q] = y
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vp = vt[p, k]
                    vq = vt[q, k]
                    vt[p, k] = c * vp - s * vq
                    vt[q, k] = s * vp + c * vq
    return -1


def jacobi_eigh(A, tol=REL_TOL, max_sweeps=MAX_SWEEPS):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol * ||A||_F``. Only the upper triangle of ``A`` is read.

    Returns
    -------
    w : (n,) ndarray
    V : (n, n) ndarray
        Column ``V[:, i]`` is the eigenvector for ``w[i]``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError("matrix must be square")
    n = A.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    a = np.triu(A) + np.triu(A, 1).T
    a = np.ascontiguousarray(a)
    vt = np.eye(n)
    norm = np.sqrt(np.sum(a * a))
    if n > 1 and norm > 0:
        sweeps = _jacobi_sweeps(a, vt, tol * norm, max_sweeps)
        if sweeps < 0:
            raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], vt[order].T.copy()


def canonical_signs(V, rel=1e-10):
    """Flip columns so the first entry of non-negligible magnitude is positive."""
    V = np.array(V, dtype=float, copy=True)
    for c in range(V.shape[1]):
        col = V[:, c]
        scale = np.max(np.abs(col), initial=0.0)
        if scale == 0:
            continue
        nz = np.flatnonzero(np.abs(col) > rel * scale)
        if col[nz[0]] < 0:
            V[:, c] = -col
    return V
