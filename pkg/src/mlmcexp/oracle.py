"""Deterministic reference values for verification at desk scale.

``dense_expmv`` computes ``e^{beta A} u`` by scaling the matrix down until its
1-norm is at most one and applying a truncated Taylor series that many times
(the vector form of scaling and squaring).  ``strang_reference`` evaluates the
exact Strang product that the path functionals are unbiased for.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError
from .sparse import ChainDecomposition, SparseMatrix

MAX_DENSE_N = 5000
MAX_STRANG_N = 2000
_MAX_TERMS = 80


def _as_operator(a):
    if isinstance(a, SparseMatrix):
        return a.n, a.matvec, a.norm1()
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    return arr.shape[0], arr.__matmul__, float(np.abs(arr).sum(axis=0).max()) if arr.size else 0.0


def _expmv_steps(matvec, norm, u, beta):
    v = np.array(u, dtype=np.float64, copy=True)
    scaled = abs(beta) * norm
    if scaled == 0.0:
        return v
    steps = max(1, math.ceil(scaled))
    h = beta / steps
    tol = 2.0 ** -60
    for _ in range(steps):
        term = v
        acc = v.copy()
        small = 0
        for k in range(1, _MAX_TERMS + 1):
            term = matvec(term) * (h / k)
            acc += term
            # two consecutive negligible terms; with ||hA|| <= 1 the tail is bounded by them
            if np.max(np.abs(term)) <= tol * np.max(np.abs(acc)):
                small += 1
                if small == 2:
                    break
            else:
                small = 0
            if not np.any(term):
                break
        v = acc
    return v


def dense_expmv(a, u, beta: float = 1.0) -> np.ndarray:
    """``e^{beta a} u`` for a dense array or :class:`SparseMatrix` with n <= 5000."""
    n, matvec, norm = _as_operator(a)
    if n > MAX_DENSE_N:
        raise DimensionError(f"dense oracle limited to n <= {MAX_DENSE_N}, got {n}")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (n,):
        raise DimensionError(f"vector shape {u.shape} does not match n = {n}")
    return _expmv_steps(matvec, norm, u, float(beta))


def splitting_parts(dec: ChainDecomposition):
    """Return ``(d, minus_t)`` with ``A = diag(d) + minus_t`` (``minus_t`` is ``-T``)."""
    n = dec.n
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(dec.jump_ptr))
    off = np.where(dec.sign == 1, -dec.weight, dec.weight)
    idx = np.arange(n, dtype=np.int64)
    minus_t = SparseMatrix.from_coo(
        n, np.concatenate((rows, idx)), np.concatenate((dec.jump_target, idx)),
        np.concatenate((off, -dec.rate)),
    )
    return np.asarray(dec.d), minus_t


def strang_reference(dec: ChainDecomposition, u, beta: float, n_steps: int) -> np.ndarray:
    """``(e^{dt D/2} e^{-dt T} e^{dt D/2})^N u`` with ``dt = beta / N``."""
    n = dec.n
    if n > MAX_STRANG_N:
        raise DimensionError(f"Strang reference limited to n <= {MAX_STRANG_N}, got {n}")
    n_steps = int(n_steps)
    if n_steps < 1:
        raise DimensionError("need at least one step")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (n,):
        raise DimensionError(f"vector shape {u.shape} does not match n = {n}")
    d, minus_t = splitting_parts(dec)
    dt = beta / n_steps
    half = np.exp(0.5 * dt * d)
    norm = minus_t.norm1()
    v = u.copy()
    for _ in range(n_steps):
        v = half * v
        v = _expmv_steps(minus_t.matvec, norm, v, dt)
        v = half * v
    return v


def strang_local_error(dec: ChainDecomposition, u, dt: float) -> np.ndarray:
    """Leading term of the one-step Strang error, ``dt^3 ([T,[T,D]]/12 + [D,[D,T]]/24) u``.

    ``T`` enters with a minus sign in the splitting, which is why both
    commutators carry positive coefficients here.
    """
    d, minus_t = splitting_parts(dec)
    D = np.diag(d)
    T = -minus_t.to_dense()

    def comm(x, y):
        return x @ y - y @ x

    lead = comm(T, comm(T, D)) / 12.0 + comm(D, comm(D, T)) / 24.0
    return dt ** 3 * (lead @ np.asarray(u, dtype=np.float64))
