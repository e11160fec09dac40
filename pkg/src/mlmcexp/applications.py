"""Problem builders and end-to-end solvers built on the multilevel engine.

Heat equation: the cube ``[-delta, delta]^3`` has ``n_x`` intervals per axis
and zero Dirichlet data, so the unknowns are the ``(n_x - 1)^3`` interior
points, ordered with x fastest.  The operator is the unit-spacing 7-point
stencil (``-6`` on the diagonal), negative semidefinite, and the physical
factor ``1/spacing^2 = n_x^2 / (4 delta^2)`` is folded into ``beta``.

Convection-diffusion: a lumped-mass FEM system ``M u' + K u = 0`` with a
source ``F`` is solved as ``u' = A u + F`` with ``A = -M^{-1} K``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, InvalidValueError, UnsupportedInputError
from .io import read_matrix_market, read_vector
from .mlmc import MlmcResult, mlmc
from .paths import Target, simpson_weights
from .sparse import SparseMatrix, decompose, spectral_scale, transpose

__all__ = [
    "Grid3D", "build_heat3d", "solve_heat_point", "FemSystem", "load_fem_system",
    "simpson_weights", "solve_convdiff_point", "total_communicability", "node_communicability",
]


@dataclass(frozen=True)
class Grid3D:
    n_x: int
    delta: float

    def __post_init__(self):
        if int(self.n_x) != self.n_x or self.n_x < 2:
            raise InvalidValueError("n_x must be an integer >= 2")
        if not self.delta > 0:
            raise InvalidValueError("delta must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.delta / self.n_x

    @property
    def m(self) -> int:
        """Interior points per axis."""
        return self.n_x - 1

    @property
    def size(self) -> int:
        return self.m ** 3

    @property
    def scale(self) -> float:
        return self.n_x ** 2 / (4.0 * self.delta ** 2)

    def axis(self) -> np.ndarray:
        return -self.delta + self.spacing * np.arange(1, self.n_x)

    def coordinates(self) -> np.ndarray:
        """(size, 3) array of interior points in storage order."""
        x = self.axis()
        zz, yy, xx = np.meshgrid(x, x, x, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    def index(self, ix: int, iy: int, iz: int) -> int:
        return ix + self.m * (iy + self.m * iz)

    def nearest(self, point) -> int:
        p = np.asarray(point, dtype=np.float64)
        if p.shape != (3,):
            raise DimensionError("a grid point needs three coordinates")
        if np.any(np.abs(p) > self.delta):
            raise InvalidValueError(f"point {tuple(p)} lies outside [-{self.delta}, {self.delta}]^3")
        k = np.rint((p + self.delta) / self.spacing).astype(np.int64)
        k = np.clip(k, 1, self.n_x - 1) - 1
        return self.index(*k)


def build_heat3d(grid: Grid3D, f: Callable) -> tuple[SparseMatrix, np.ndarray, float]:
    """Return ``(A, u0, scale)`` with ``A`` the unit 7-point Laplacian on interior nodes.

    ``f`` is called as ``f(x, y, z)`` on coordinate arrays.  The solution at
    time ``t`` is ``e^{t * scale * A} u0``.
    """
    m = grid.m
    idx = np.arange(grid.size, dtype=np.int64)
    ix = idx % m
    iy = (idx // m) % m
    iz = idx // (m * m)
    rows = [idx]
    cols = [idx]
    vals = [np.full(grid.size, -6.0)]
    for coord, stride in ((ix, 1), (iy, m), (iz, m * m)):
        for step in (-1, 1):
            ok = (coord + step >= 0) & (coord + step < m)
            rows.append(idx[ok])
            cols.append(idx[ok] + step * stride)
            vals.append(np.ones(int(ok.sum())))
    a = SparseMatrix.from_coo(grid.size, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
    xyz = grid.coordinates()
    u0 = np.asarray(f(xyz[:, 0], xyz[:, 1], xyz[:, 2]), dtype=np.float64)
    u0 = np.broadcast_to(u0, (grid.size,)).copy()
    return a, u0, grid.scale


def solve_heat_point(grid: Grid3D, f: Callable, point, t: float, epsilon: float, seed: int,
                     **kw) -> MlmcResult:
    """Heat solution at the interior grid point nearest ``point`` at time ``t``."""
    if not t > 0:
        raise InvalidValueError("t must be positive")
    i = grid.nearest(point)
    a, u0, scale = build_heat3d(grid, f)
    return mlmc(Target(decompose(a), u0, "entry", i), t * scale, epsilon, seed, **kw)


@dataclass(frozen=True)
class FemSystem:
    mass_diag: np.ndarray
    stiffness: SparseMatrix
    load: np.ndarray | Callable
    u0: np.ndarray

    def __post_init__(self):
        n = self.stiffness.n
        m = np.asarray(self.mass_diag, dtype=np.float64)
        if m.shape != (n,) or np.asarray(self.u0).shape != (n,):
            raise DimensionError(f"mass and initial vector must have length {n}")
        if not callable(self.load) and np.asarray(self.load).shape != (n,):
            raise DimensionError(f"load vector must have length {n}")
        if not np.all(m > 0):
            raise InvalidValueError("lumped mass entries must be positive")

    @property
    def n(self) -> int:
        return self.stiffness.n

    def generator(self) -> SparseMatrix:
        """``-M^{-1} K``."""
        return self.stiffness.scale_rows(-1.0 / np.asarray(self.mass_diag, dtype=np.float64))


def load_fem_system(mass_path, stiffness_path, load_path, u0_path) -> FemSystem:
    """Read a lumped-mass FEM export (Matrix Market matrices, plain vectors)."""
    mass = read_matrix_market(mass_path)
    rows, cols, vals = mass.to_coo()
    if np.any(rows != cols):
        raise UnsupportedInputError(f"{mass_path}: mass matrix is not diagonal (lump it first)")
    stiff = read_matrix_market(stiffness_path)
    if mass.n != stiff.n:
        raise DimensionError(f"mass is {mass.n}x{mass.n} but stiffness is {stiff.n}x{stiff.n}")
    load = read_vector(load_path, stiff.n)
    u0 = read_vector(u0_path, stiff.n)
    return FemSystem(mass.diagonal(), stiff, load, u0)


def solve_convdiff_point(system: FemSystem, node: int, t: float, epsilon: float, seed: int,
                         **kw) -> MlmcResult:
    """Entry ``node`` of ``e^{tA} u0 + int_0^t e^{sA} F ds`` with Simpson's rule on the path nodes.

    ``quadrature_error`` on the result is the bias estimate of the integral part alone.
    """
    if not t > 0:
        raise InvalidValueError("t must be positive")
    if not 0 <= int(node) < system.n:
        raise InvalidValueError(f"node {node} outside [0, {system.n})")
    target = Target(decompose(system.generator()), system.u0, "fem", int(node), system.load)
    return mlmc(target, t, epsilon, seed, **kw)


def _default_beta(a: SparseMatrix, beta):
    return spectral_scale(decompose(a)) if beta is None else float(beta)


def total_communicability(a: SparseMatrix, beta: float | None = None, epsilon: float = 1e-2,
                          seed: int = 0, **kw) -> MlmcResult:
    """``sum_i (e^{beta A} 1)_i`` by forward sampling on the transposed chain."""
    beta = _default_beta(a, beta)
    target = Target(decompose(transpose(a)), np.ones(a.n), "forward")
    return mlmc(target, beta, epsilon, seed, **kw)


def node_communicability(a: SparseMatrix, i: int, beta: float | None = None, epsilon: float = 1e-2,
                         seed: int = 0, **kw) -> MlmcResult:
    """``(e^{beta A} 1)_i``."""
    beta = _default_beta(a, beta)
    return mlmc(Target(decompose(a), np.ones(a.n), "entry", i), beta, epsilon, seed, **kw)
