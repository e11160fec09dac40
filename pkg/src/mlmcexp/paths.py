"""Continuous-time Markov chain paths and the Strang-weighted path functionals.

A path starts at row ``i`` and is advanced step by step.  Within a step of
length ``dt`` the chain holds in state ``j`` for an Exp(rate[j]) time, jumps to
a neighbour drawn from the row's jump table (flipping the sign when a_jk < 0),
and repeats until the step is used up.  The fine functional multiplies
``exp(d_j dt / 2)`` at both ends of every step; the coarse functional reuses the
same path but weights only at even step boundaries with ``exp(d_j dt)``, which
is the Strang product for step ``2 dt``.

Weights are accumulated as log-weights and differences are formed with
``expm1`` so ``fine - coarse`` keeps full relative precision.

The numba kernels at the top do the work.  The functions at the bottom are
one-sample wrappers for a single :class:`~mlmcexp.rng.RngStream`, and
:func:`sample_batch` is the parallel, chunked sampler used by the engines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba as nb
import numpy as np

from .errors import ConfigurationError, DimensionError, InvalidValueError, UnsupportedInputError
from .rng import STATE_SIZE, RngStream, init_state, next_exponential, next_uniform
from .sparse import ChainDecomposition
from .stats import Moments

ENTRY, FORWARD, FEM = 0, 1, 2
MODES = {"entry": ENTRY, "forward": FORWARD, "fem": FEM}

# Samples per reduction chunk.  Fixed so reductions do not depend on thread count.
CHUNK = 2048

# Batch output columns: count, then (mean, m2) for diff, fine, coarse, quadrature diff.
_NCOL = 9


@nb.njit(cache=True, inline="always")
def _pick(cdf, lo, hi, u):
    # first k in [lo, hi) with cdf[k] > u; cdf[hi-1] == 1 > u always
    while lo < hi - 1:
        mid = (lo + hi - 1) // 2
        if cdf[mid] > u:
            hi = mid + 1
        else:
            lo = mid + 1
    return lo


@nb.njit(cache=True, inline="always")
def _evolve(j, sign, dt, rate, jptr, jtgt, jcdf, jsgn, rng):
    """Run the chain for ``dt`` from state ``j``; returns (state, sign, jumps, exp draws)."""
    tau = next_exponential(rng, rate[j])
    draws = 1
    jumps = 0
    while tau < dt:
        k = _pick(jcdf, jptr[j], jptr[j + 1], next_uniform(rng))
        if jsgn[k]:
            sign = -sign
        j = jtgt[k]
        jumps += 1
        tau += next_exponential(rng, rate[j])
        draws += 1
    return j, sign, jumps, draws


@nb.njit(cache=True)
def _start_state(mode, i, ucdf, rng):
    if mode == FORWARD:
        return _pick(ucdf, 0, ucdf.shape[0], next_uniform(rng))
    return i


@nb.njit(cache=True)
def _fine_only(mode, i, dt, nsteps, d, rate, jptr, jtgt, jcdf, jsgn, u, ucdf, utot, fnodes, wf, rng):
    """One sample of the single-level functional. Returns (value, quad_part, cost)."""
    j = _start_state(mode, i, ucdf, rng)
    sign = 1.0
    logw = 0.0
    cost = nsteps
    integ = 0.0
    const_f = fnodes.shape[0] == 1
    if mode == FEM:
        integ = wf[0] * fnodes[0, j]
    half = 0.5 * dt
    for n in range(1, nsteps + 1):
        logw += d[j] * half
        j, sign, jumps, draws = _evolve(j, sign, dt, rate, jptr, jtgt, jcdf, jsgn, rng)
        cost += draws
        logw += d[j] * half
        if mode == FEM:
            row = 0 if const_f else n
            integ += wf[n] * sign * math.exp(logw) * fnodes[row, j]
    if mode == FORWARD:
        value = sign * math.exp(logw) * utot
    else:
        value = sign * math.exp(logw) * u[j]
    if mode == FEM:
        value += integ
    return value, integ, cost


@nb.njit(cache=True)
def _coupled(mode, i, dt, nsteps, d, rate, jptr, jtgt, jcdf, jsgn, u, ucdf, utot, fnodes, wf, wc, rng):
    """One coupled (fine, coarse) draw on a shared path.

    Returns (fine, coarse, diff, integ_fine, integ_coarse, cost, terminal_state);
    in fem mode ``fine``/``coarse``/``diff`` include the quadrature parts.
    """
    j = _start_state(mode, i, ucdf, rng)
    sign = 1.0
    lf = 0.0
    lc = 0.0
    cost = nsteps
    integ_f = 0.0
    integ_c = 0.0
    const_f = fnodes.shape[0] == 1
    if mode == FEM:
        integ_f = wf[0] * fnodes[0, j]
        integ_c = wc[0] * fnodes[0, j]
    half = 0.5 * dt
    for n in range(1, nsteps + 1):
        dj = d[j]
        lf += dj * half
        if n % 2 == 1:
            lc += dj * dt
        j, sign, jumps, draws = _evolve(j, sign, dt, rate, jptr, jtgt, jcdf, jsgn, rng)
        cost += draws
        dj = d[j]
        lf += dj * half
        if n % 2 == 0:
            lc += dj * dt
        if mode == FEM:
            row = 0 if const_f else n
            fj = fnodes[row, j]
            integ_f += wf[n] * sign * math.exp(lf) * fj
            if n % 2 == 0:
                integ_c += wc[n // 2] * sign * math.exp(lc) * fj
    if mode == FORWARD:
        scale = utot
    else:
        scale = u[j]
    ec = math.exp(lc)
    fine = sign * math.exp(lf) * scale
    coarse = sign * ec * scale
    diff = sign * scale * ec * math.expm1(lf - lc)
    if mode == FEM:
        fine += integ_f
        coarse += integ_c
        diff += integ_f - integ_c
    return fine, coarse, diff, integ_f, integ_c, cost, j


@nb.njit(cache=True, inline="always")
def _welford(out, col, k, x):
    # k is the 1-based count after adding x
    delta = x - out[col]
    out[col] += delta / k
    out[col + 1] += delta * (x - out[col])


@nb.njit(cache=True, parallel=True)
def _batch_kernel(mode, coupled, seed, level, start, count, chunk, i, dt, nsteps,
                  d, rate, jptr, jtgt, jcdf, jsgn, u, ucdf, utot, fnodes, wf, wc,
                  out, cost_out):
    nchunks = out.shape[0]
    for c in nb.prange(nchunks):
        rng = np.zeros(11, dtype=np.uint64)
        lo = c * chunk
        hi = min(lo + chunk, count)
        row = out[c]
        total_cost = 0
        for s in range(lo, hi):
            init_state(rng, seed, level, np.uint64(start + s), 0)
            k = s - lo + 1
            if coupled:
                fine, coarse, diff, integ_f, integ_c, cost, term = _coupled(
                    mode, i, dt, nsteps, d, rate, jptr, jtgt, jcdf, jsgn, u, ucdf, utot, fnodes, wf, wc, rng)
                _welford(row, 1, k, diff)
                _welford(row, 3, k, fine)
                _welford(row, 5, k, coarse)
                _welford(row, 7, k, integ_f - integ_c)
            else:
                value, integ, cost = _fine_only(
                    mode, i, dt, nsteps, d, rate, jptr, jtgt, jcdf, jsgn, u, ucdf, utot, fnodes, wf, rng)
                _welford(row, 1, k, value)
                _welford(row, 3, k, value)
                _welford(row, 7, k, integ)
            total_cost += cost
        row[0] = hi - lo
        cost_out[c] = total_cost


def simpson_weights(n_steps: int) -> np.ndarray:
    """Composite Simpson pattern (1, 4, 2, 4, ..., 2, 4, 1) / 3; multiply by the step."""
    n_steps = int(n_steps)
    if n_steps < 2 or n_steps % 2:
        raise ConfigurationError(f"Simpson's rule needs an even step count >= 2, got {n_steps}")
    w = np.ones(n_steps + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


@dataclass
class Target:
    """What a path functional estimates.

    ``entry``: ``(e^{beta A} u)[index]``.  ``forward``: ``sum_i (e^{beta A} u)_i``
    with ``dec`` the decomposition of A transposed and ``u >= 0``.  ``fem``: entry
    ``index`` of ``e^{beta A} u + int_0^beta e^{sA} F(beta - s) ds``; ``load`` is a
    vector (constant F) or a callable ``F(time) -> vector``.
    """

    dec: ChainDecomposition
    u: np.ndarray
    mode: str = "entry"
    index: int = 0
    load: np.ndarray | Callable | None = None
    _ucdf: np.ndarray = field(init=False, repr=False)
    _utot: float = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        self.u = np.ascontiguousarray(self.u, dtype=np.float64)
        n = self.dec.n
        if self.u.shape != (n,):
            raise DimensionError(f"vector length {self.u.shape} does not match n = {n}")
        if self.mode == "forward":
            if np.any(self.u < 0):
                # A signed u could be handled by folding sign(u_J) into the path
                # sign and sampling J from |u|; not exposed.
                raise UnsupportedInputError("forward sampling requires u >= 0")
            tot = float(self.u.sum())
            if not tot > 0:
                raise UnsupportedInputError("forward sampling requires sum(u) > 0")
            cdf = np.cumsum(self.u) / tot
            cdf[-1] = 1.0
            self._ucdf = cdf
            self._utot = tot
        else:
            idx = int(self.index)
            if not 0 <= idx < n:
                raise InvalidValueError(f"entry index {idx} outside [0, {n})")
            self.index = idx
            self._ucdf = np.ones(1)
            self._utot = 1.0
        if self.mode == "fem":
            if self.load is None:
                self.load = np.zeros(n)
            if not callable(self.load):
                self.load = np.ascontiguousarray(self.load, dtype=np.float64)
                if self.load.shape != (n,):
                    raise DimensionError(f"load length {self.load.shape} does not match n = {n}")
        elif self.load is not None:
            raise ConfigurationError("a load vector is only meaningful in fem mode")

    def load_nodes(self, beta: float, n_steps: int) -> np.ndarray:
        """F evaluated at the quadrature nodes: row k is F(beta - k*dt)."""
        if self.mode != "fem":
            return np.zeros((1, 1))
        if not callable(self.load):
            return self.load.reshape(1, -1)
        dt = beta / n_steps
        rows = [np.asarray(self.load(beta - k * dt), dtype=np.float64) for k in range(n_steps + 1)]
        return np.ascontiguousarray(np.vstack(rows))


@dataclass
class BatchStats:
    """Aggregated output of :func:`sample_batch`."""

    diff: Moments
    fine: Moments
    coarse: Moments
    quad: Moments
    cost: int

    @property
    def n(self) -> int:
        return self.diff.n


def _dec_arrays(dec):
    return (dec.d, dec.rate, dec.jump_ptr, dec.jump_target, dec.jump_cdf, dec.sign)


def sample_batch(target: Target, beta: float, n_steps: int, coupled: bool, seed: int,
                 level: int, start: int, count: int, chunk: int = CHUNK) -> BatchStats:
    """Draw samples ``start .. start+count-1`` of one level.

    With ``coupled`` the sampled quantity is ``P_fine - P_coarse`` for ``n_steps``
    fine steps; otherwise it is ``P`` itself.  Sample ``k`` always uses the
    stream keyed by ``(seed, level, k)``.
    """
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ConfigurationError("need at least one time step")
    if coupled and n_steps % 2:
        raise ConfigurationError(f"coupled sampling needs an even step count, got {n_steps}")
    mode = MODES[target.mode]
    dt = beta / n_steps
    wf = np.zeros(1)
    wc = np.zeros(1)
    if mode == FEM:
        if coupled and n_steps < 4:
            raise ConfigurationError("coupled fem sampling needs >= 4 fine steps")
        wf = simpson_weights(n_steps) * dt
        if coupled:
            wc = simpson_weights(n_steps // 2) * (2 * dt)
    fnodes = target.load_nodes(beta, n_steps)
    count = int(count)
    nchunks = max(1, -(-count // chunk))
    out = np.zeros((nchunks, _NCOL))
    cost_out = np.zeros(nchunks, dtype=np.int64)
    if count > 0:
        _batch_kernel(mode, bool(coupled), np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), int(level),
                      int(start), count, int(chunk), target.index, float(dt), n_steps,
                      *_dec_arrays(target.dec), target.u, target._ucdf, target._utot,
                      fnodes, wf, wc, out, cost_out)
    diff, fine, coarse, quad = Moments(), Moments(), Moments(), Moments()
    for row in out:
        cnt = int(row[0])
        diff.merge(cnt, row[1], row[2])
        fine.merge(cnt, row[3], row[4])
        coarse.merge(cnt, row[5], row[6])
        quad.merge(cnt, row[7], row[8])
    return BatchStats(diff, fine, coarse, quad, int(cost_out.sum()))


# ---------------------------------------------------------------------------
# single-sample API


@dataclass(frozen=True)
class PathState:
    state: int
    sign: int = 1
    jumps: int = 0


@dataclass(frozen=True)
class CoupledSample:
    eta_fine: float
    eta_coarse: float
    cost: int

    @property
    def difference(self) -> float:
        return self.eta_fine - self.eta_coarse


@dataclass(frozen=True)
class FemCoupledSample:
    eta_fine: float
    eta_coarse: float
    integ_fine: float
    integ_coarse: float
    terminal_state: int
    cost: int

    @property
    def contribution(self) -> float:
        return self.eta_fine - self.eta_coarse + self.integ_fine - self.integ_coarse


def _check_row(dec, i):
    if not 0 <= int(i) < dec.n:
        raise InvalidValueError(f"row index {i} outside [0, {dec.n})")
    return int(i)


def evolve_interval(dec: ChainDecomposition, start: PathState, dt: float, stream: RngStream) -> PathState:
    j = _check_row(dec, start.state)
    if not dt > 0:
        raise InvalidValueError("dt must be positive")
    j, sign, jumps, _ = _evolve(j, float(start.sign), float(dt), *_dec_arrays(dec)[1:], stream.state)
    return PathState(int(j), int(sign), start.jumps + int(jumps))


def single_functional(dec, u, i, dt, n_steps, stream):
    """One sample of the Strang functional for entry ``i``; returns (value, cost)."""
    target = Target(dec, u, "entry", _check_row(dec, i))
    value, _, cost = _fine_only(ENTRY, target.index, float(dt), int(n_steps), *_dec_arrays(dec),
                                target.u, target._ucdf, 1.0, np.zeros((1, 1)), np.zeros(1), stream.state)
    return value, int(cost)


def coupled_functional(dec, u, i, level, dt, n_steps, stream) -> CoupledSample:
    """One coupled draw of (P_l, P_{l-1}) for entry ``i`` on a shared path.

    ``level`` only documents the pairing (``n_steps`` is normally ``2**level``).
    """
    n_steps = int(n_steps)
    if n_steps < 2 or n_steps % 2:
        raise ConfigurationError(f"coupled sampling needs an even step count >= 2, got {n_steps}")
    target = Target(dec, u, "entry", _check_row(dec, i))
    fine, coarse, _, _, _, cost, _ = _coupled(ENTRY, target.index, float(dt), n_steps, *_dec_arrays(dec),
                                           target.u, target._ucdf, 1.0, np.zeros((1, 1)),
                                           np.zeros(1), np.zeros(1), stream.state)
    return CoupledSample(fine, coarse, int(cost))


def coupled_functional_fem(dec, u, load, i, level, dt, n_steps, weights, stream) -> FemCoupledSample:
    """Coupled draw that also accumulates Simpson sums of the load along the path.

    ``weights`` is the unscaled fine Simpson pattern of length ``n_steps + 1``
    (see :func:`simpson_weights`); the step length is applied here.  ``eta_*``
    are the terminal parts ``sign * w * u0[j]``, ``integ_*`` the quadrature parts.
    """
    n_steps = int(n_steps)
    if n_steps < 4 or n_steps % 2:
        raise ConfigurationError(f"coupled fem sampling needs an even step count >= 4, got {n_steps}")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n_steps + 1,):
        raise DimensionError(f"expected {n_steps + 1} quadrature weights, got {weights.shape[0]}")
    target = Target(dec, u, "fem", _check_row(dec, i), load)
    beta = dt * n_steps
    wf = weights * dt
    wc = simpson_weights(n_steps // 2) * (2 * dt)
    fine, coarse, _, integ_f, integ_c, cost, term = _coupled(
        FEM, target.index, float(dt), n_steps, *_dec_arrays(dec), target.u, target._ucdf, 1.0,
        target.load_nodes(beta, n_steps), wf, wc, stream.state)
    return FemCoupledSample(fine - integ_f, coarse - integ_c, integ_f, integ_c, int(term), int(cost))


def forward_scalar_functional(dec_t, u, dt, n_steps, stream):
    """One sample for ``sum_i (e^{beta A} u)_i`` from paths of the transposed chain."""
    target = Target(dec_t, u, "forward")
    value, _, cost = _fine_only(FORWARD, 0, float(dt), int(n_steps), *_dec_arrays(dec_t),
                                target.u, target._ucdf, target._utot, np.zeros((1, 1)),
                                np.zeros(1), stream.state)
    return value, int(cost)


def configure_threads(threads: int = 0) -> int:
    """Set the worker count for :func:`sample_batch` (0 = all available).

    numba cannot exceed the pool size fixed at import (``NUMBA_NUM_THREADS``);
    larger requests are capped.  Results do not depend on the choice.
    """
    limit = nb.config.NUMBA_NUM_THREADS
    threads = int(threads)
    if threads < 0:
        raise ConfigurationError("threads must be >= 0")
    use = limit if threads == 0 else min(threads, limit)
    nb.set_num_threads(use)
    return use
