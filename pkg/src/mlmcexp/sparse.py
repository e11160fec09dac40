"""CSR storage and the splitting A = D - T into a sampling-ready Markov chain.

For a square matrix ``A`` the chain has holding rate ``rate[i] = sum_{j!=i} |a_ij|``,
jumps to ``j`` with probability ``|a_ij| / rate[i]`` and flips the path sign when
``a_ij < 0``.  The diagonal shift ``d[i] = a_ii + rate[i]`` is what the path
functionals exponentiate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import DegenerateScaleError, DimensionError, InvalidValueError


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Square matrix in compressed sparse row form.

    Column indices are strictly increasing inside each row and no explicit
    zeros are stored.  Use :meth:`from_coo` or :meth:`from_dense` rather than
    the raw constructor unless the arrays are already normalized.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for name in ("row_ptr", "col_idx", "values"):
            getattr(self, name).setflags(write=False)

    @classmethod
    def from_coo(cls, n, rows, cols, vals) -> "SparseMatrix":
        """Build from coordinate triplets; duplicates are summed, zeros dropped."""
        n = int(n)
        if n < 0:
            raise DimensionError(f"negative dimension {n}")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == vals.shape):
            raise DimensionError("row, column and value arrays differ in length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n:
                raise DimensionError(f"index out of range for a {n}x{n} matrix")
        if not np.all(np.isfinite(vals)):
            raise InvalidValueError("matrix entries must be finite")

        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            key = rows * n + cols
            first = np.concatenate(([True], key[1:] != key[:-1]))
            starts = np.flatnonzero(first)
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
        keep = vals != 0.0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]

        row_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=row_ptr[1:])
        return cls(n, row_ptr, cols.copy(), vals.copy())

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        rows, cols = np.nonzero(a)
        return cls.from_coo(a.shape[0], rows, cols, a[rows, cols])

    @classmethod
    def identity(cls, n) -> "SparseMatrix":
        idx = np.arange(n)
        return cls.from_coo(n, idx, idx, np.ones(n))

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    def row_indices(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.row_ptr))

    def to_coo(self):
        return self.row_indices(), self.col_idx.copy(), self.values.copy()

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[self.row_indices(), self.col_idx] = self.values
        return out

    def diagonal(self) -> np.ndarray:
        rows = self.row_indices()
        diag = np.zeros(self.n)
        on = rows == self.col_idx
        diag[rows[on]] = self.values[on]
        return diag

    def matvec(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionError(f"vector shape {x.shape} does not match n = {self.n}")
        out = np.empty(self.n)
        _csr_matvec(self.row_ptr, self.col_idx, self.values, x, out)
        return out

    def norm1(self) -> float:
        """Maximum absolute column sum."""
        if self.nnz == 0:
            return 0.0
        return float(np.bincount(self.col_idx, weights=np.abs(self.values), minlength=self.n).max())

    def scale_rows(self, s) -> "SparseMatrix":
        s = np.asarray(s, dtype=np.float64)
        rows, cols, vals = self.to_coo()
        return SparseMatrix.from_coo(self.n, rows, cols, vals * s[rows])

    def is_symmetric(self) -> bool:
        return self == transpose(self)

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"SparseMatrix(n={self.n}, nnz={self.nnz})"


@nb.njit(cache=True)
def _csr_matvec(ptr, col, val, x, out):
    for i in range(ptr.shape[0] - 1):
        acc = 0.0
        for k in range(ptr[i], ptr[i + 1]):
            acc += val[k] * x[col[k]]
        out[i] = acc


def transpose(a: SparseMatrix) -> SparseMatrix:
    rows, cols, vals = a.to_coo()
    return SparseMatrix.from_coo(a.n, cols, rows, vals)


@dataclass(frozen=True, eq=False)
class ChainDecomposition:
    """Sampling-ready form of ``A = D - T``.

    Row ``i``'s off-diagonal neighbours occupy ``jump_ptr[i]:jump_ptr[i+1]`` in
    the aligned arrays ``jump_target``, ``jump_cdf``, ``weight`` (= |a_ij|) and
    ``sign`` (1 iff a_ij < 0).  ``diag`` keeps a_ii so that reconstruction is
    bit-exact instead of going through ``d - rate``.
    """

    n: int
    d: np.ndarray
    rate: np.ndarray
    diag: np.ndarray
    jump_ptr: np.ndarray
    jump_target: np.ndarray
    jump_cdf: np.ndarray
    weight: np.ndarray
    sign: np.ndarray

    def __post_init__(self):
        for name in ("d", "rate", "diag", "jump_ptr", "jump_target", "jump_cdf", "weight", "sign"):
            getattr(self, name).setflags(write=False)

    @property
    def d_max(self) -> float:
        return float(self.d.max()) if self.n else 0.0

    @property
    def d_bar(self) -> float:
        return float(self.d.mean()) if self.n else 0.0

    @property
    def d_absmax(self) -> float:
        return float(np.abs(self.d).max()) if self.n else 0.0

    def jump_probabilities(self, i) -> np.ndarray:
        lo, hi = self.jump_ptr[i], self.jump_ptr[i + 1]
        if hi == lo:
            return np.zeros(0)
        return self.weight[lo:hi] / self.rate[i]

    def __eq__(self, other):
        if not isinstance(other, ChainDecomposition):
            return NotImplemented
        return self.n == other.n and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("d", "rate", "diag", "jump_ptr", "jump_target", "jump_cdf", "weight", "sign")
        )


def decompose(a: SparseMatrix) -> ChainDecomposition:
    """Split ``a`` into diagonal shifts and a signed jump chain."""
    if not isinstance(a, SparseMatrix):
        arr = np.asarray(a, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidValueError("matrix entries must be finite")
        a = SparseMatrix.from_dense(arr)
    if not np.all(np.isfinite(a.values)):
        raise InvalidValueError("matrix entries must be finite")

    n = a.n
    rows = a.row_indices()
    off = rows != a.col_idx
    diag = a.diagonal()

    off_rows = rows[off]
    target = a.col_idx[off].astype(np.int64)
    vals = a.values[off]
    weight = np.abs(vals)
    sign = (vals < 0).astype(np.int8)

    jump_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(off_rows, minlength=n), out=jump_ptr[1:])

    rate = np.zeros(n)
    np.add.at(rate, off_rows, weight)
    d = diag + rate

    cdf = np.empty_like(weight)
    for i in np.flatnonzero(np.diff(jump_ptr)):
        lo, hi = jump_ptr[i], jump_ptr[i + 1]
        c = np.cumsum(weight[lo:hi]) / rate[i]
        c[-1] = 1.0
        cdf[lo:hi] = c
    return ChainDecomposition(n, d, rate, diag, jump_ptr, target, cdf, weight, sign)


def reconstruct(dec: ChainDecomposition) -> SparseMatrix:
    """Inverse of :func:`decompose`."""
    n = dec.n
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(dec.jump_ptr))
    off_vals = np.where(dec.sign == 1, -dec.weight, dec.weight)
    idx = np.arange(n, dtype=np.int64)
    return SparseMatrix.from_coo(
        n,
        np.concatenate((rows, idx)),
        np.concatenate((dec.jump_target, idx)),
        np.concatenate((off_vals, dec.diag)),
    )


def spectral_scale(dec: ChainDecomposition) -> float:
    """Default inverse temperature ``1/d_max`` (d_max bounds the spectral radius for adjacency matrices)."""
    dmax = dec.d_max
    if not dmax > 0.0:
        raise DegenerateScaleError(
            f"d_max = {dmax} gives no usable default scale; pass beta explicitly"
        )
    return 1.0 / dmax
