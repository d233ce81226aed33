"""Batch kernels with a numba fast path and a pure-numpy fallback.

Backend selection: env var TRIPLETDIST_BACKEND in {"numba", "numpy", "auto"}
(default "auto" = numba when importable).  Both backends implement identical
tie-breaking (first minimum wins) so results agree on non-degenerate inputs.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


_ENV_VAR = "TRIPLETDIST_BACKEND"
_CHUNK = 8192


def active_backend() -> str:
    """Resolve the backend name from the environment ("numba" or "numpy")."""
    choice = os.environ.get(_ENV_VAR, "auto").lower()
    if choice not in ("numba", "numpy", "auto"):
        raise ValueError(f"{_ENV_VAR} must be 'numba', 'numpy' or 'auto', got {choice!r}")
    if choice == "numba" and not HAS_NUMBA:
        raise RuntimeError("TRIPLETDIST_BACKEND=numba but numba is not importable")
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    return choice


# ---------------------------------------------------------------------------
# nearest-center assignment


def _assign_centers_numpy(X: np.ndarray, centers: np.ndarray):
    n = X.shape[0]
    idx = np.empty(n, dtype=np.int64)
    d2 = np.empty(n, dtype=np.float64)
    # chunked so the (chunk, k, p) intermediate stays small
    for s in range(0, n, _CHUNK):
        block = X[s : s + _CHUNK]
        diff = block[:, None, :] - centers[None, :, :]
        dist2 = np.einsum("nkp,nkp->nk", diff, diff)
        idx[s : s + _CHUNK] = np.argmin(dist2, axis=1)
        d2[s : s + _CHUNK] = dist2[np.arange(block.shape[0]), idx[s : s + _CHUNK]]
    return idx, d2


@njit(cache=True)
def _assign_centers_numba(X, centers):  # pragma: no cover - measured via dispatch tests
    n, p = X.shape
    k = centers.shape[0]
    idx = np.empty(n, dtype=np.int64)
    d2 = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        best_j = 0
        for j in range(k):
            s = 0.0
            for a in range(p):
                t = X[i, a] - centers[j, a]
                s += t * t
            if s < best:
                best = s
                best_j = j
        idx[i] = best_j
        d2[i] = best
    return idx, d2


def assign_centers(X, centers):
    """Index of the nearest center for each row of X, plus squared distances.

    Ties go to the smallest center index in both backends.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    if X.ndim != 2 or centers.ndim != 2 or X.shape[1] != centers.shape[1]:
        raise ValueError("X and centers must be 2-D with matching dimension")
    if active_backend() == "numba":
        return _assign_centers_numba(X, centers)
    return _assign_centers_numpy(X, centers)


# ---------------------------------------------------------------------------
# quadratic forms under per-row Hessians


def _quad_forms_numpy(V: np.ndarray, H_stack: np.ndarray, idx: np.ndarray):
    n = V.shape[0]
    out = np.empty(n, dtype=np.float64)
    for s in range(0, n, _CHUNK):
        v = V[s : s + _CHUNK]
        H = H_stack[idx[s : s + _CHUNK]]
        out[s : s + _CHUNK] = np.einsum("ni,nij,nj->n", v, H, v)
    return out


@njit(cache=True)
def _quad_forms_numba(V, H_stack, idx):  # pragma: no cover - measured via dispatch tests
    n, p = V.shape
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        H = H_stack[idx[i]]
        s = 0.0
        for a in range(p):
            row = 0.0
            for b in range(p):
                row += H[a, b] * V[i, b]
            s += V[i, a] * row
        out[i] = s
    return out


def quad_forms_by_index(V, H_stack, idx):
    """v_i^T H_{idx_i} v_i for each row v_i of V."""
    V = np.ascontiguousarray(V, dtype=np.float64)
    H_stack = np.ascontiguousarray(H_stack, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if V.ndim != 2 or H_stack.ndim != 3 or V.shape[1] != H_stack.shape[1]:
        raise ValueError("shape mismatch between V and H_stack")
    if idx.shape[0] != V.shape[0]:
        raise ValueError("idx must have one entry per row of V")
    if idx.size and (idx.min() < 0 or idx.max() >= H_stack.shape[0]):
        raise ValueError("idx out of range for H_stack")
    if active_backend() == "numba":
        return _quad_forms_numba(V, H_stack, idx)
    return _quad_forms_numpy(V, H_stack, idx)
