"""Single-level Monte Carlo: the baseline the multilevel estimator is measured against."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidValueError
from .paths import Target, sample_batch
from .sparse import ChainDecomposition

PILOT_SAMPLES = 1000
# level key for calibration draws, disjoint from the production levels
_CALIBRATION_LEVEL = 0x4000


@dataclass
class McResult:
    estimate: float
    std_error: float
    samples: int
    dt: float
    steps: int
    wall_cost: int
    wall_time: float = 0.0
    bias_constant: float | None = None


def steps_for(beta: float, dt: float) -> int:
    """Number of steps ``beta / dt``, which must be a positive integer."""
    if not (beta > 0 and dt > 0):
        raise InvalidValueError("beta and dt must be positive")
    ratio = beta / dt
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ConfigurationError(f"beta/dt = {ratio} is not a positive integer")
    return n


def _level_key(n_steps):
    # power-of-two step counts share keys with the matching MLMC level
    return n_steps.bit_length() - 1 if n_steps & (n_steps - 1) == 0 else 0x2000 + (n_steps & 0x1FFF)


def _run(target, beta, n_steps, samples, seed, start=0, moments=None):
    if moments is None and samples < 2:
        raise ConfigurationError("need at least 2 samples")
    t0 = time.perf_counter()
    batch = sample_batch(target, beta, n_steps, False, seed, _level_key(n_steps), start, samples)
    m = batch.diff if moments is None else moments.merged(batch.diff)
    return m, batch.cost, time.perf_counter() - t0


def mc_estimate(target: Target, beta: float, dt: float, samples: int, seed: int) -> McResult:
    n_steps = steps_for(beta, dt)
    m, cost, wall = _run(target, beta, n_steps, int(samples), seed)
    return McResult(m.mean, m.std_error, m.n, beta / n_steps, n_steps, cost, wall)


def mc_single_entry(dec: ChainDecomposition, u, i, beta, dt, samples, seed) -> McResult:
    """Plain Monte Carlo estimate of ``(e^{beta A} u)[i]`` at a fixed step ``dt``."""
    return mc_estimate(Target(dec, u, "entry", i), beta, dt, samples, seed)


def mc_forward_scalar(dec_t: ChainDecomposition, u, beta, dt, samples, seed) -> McResult:
    """Plain Monte Carlo estimate of ``sum_i (e^{beta A} u)_i`` from the transposed chain."""
    return mc_estimate(Target(dec_t, u, "forward"), beta, dt, samples, seed)


def calibrate_bias_constant(target: Target, beta: float, level: int, samples: int, seed: int):
    """Estimate ``c`` in ``|bias(dt)| ~ c dt^2`` from coupled samples at ``level``.

    ``E[P_l - P_{l-1}] = c (dt_l^2 - 4 dt_l^2)``; two standard errors are added
    to the measured difference so a noisy pilot errs towards smaller steps.
    Returns (c, cost).
    """
    level = max(int(level), 1)
    n_steps = 2 ** level
    dt = beta / n_steps
    batch = sample_batch(target, beta, n_steps, True, seed, _CALIBRATION_LEVEL + level, 0, samples)
    diff = batch.diff
    c = (abs(diff.mean) + 2.0 * diff.std_error) / (3.0 * dt * dt)
    return c, batch.cost


def mc_auto(target: Target, beta: float, epsilon: float, seed: int, pilot: int = PILOT_SAMPLES,
            calibration_level: int | None = None) -> McResult:
    """Accuracy-driven classical Monte Carlo.

    Chooses the largest ``dt = beta / 2^k`` with ``c dt^2 <= epsilon / 2`` and then
    ``M = ceil(2 V / epsilon^2)`` samples, ``V`` taken from a pilot run at that step.
    Cost grows like ``epsilon^{-5/2}``.
    """
    if not epsilon > 0:
        raise InvalidValueError("epsilon must be positive")
    t0 = time.perf_counter()
    if calibration_level is None:
        from .mlmc import initial_level

        calibration_level = max(1, initial_level(beta, max(target.dec.d_absmax, 1e-300)) + 1)
    c, cost = calibrate_bias_constant(target, beta, calibration_level, pilot, seed)

    k = 0
    if c > 0:
        needed = beta * math.sqrt(2.0 * c / epsilon)
        k = max(0, math.ceil(math.log2(needed))) if needed > 1 else 0
    if k > 62:
        raise ConfigurationError(f"epsilon = {epsilon} needs 2^{k} steps, beyond a 64-bit count")
    n_steps = 2 ** k

    moments, pilot_cost, _ = _run(target, beta, n_steps, pilot, seed)
    cost += pilot_cost
    var = moments.sample_variance
    wanted = max(pilot, math.ceil(2.0 * var / epsilon ** 2))
    if var > 0 and wanted > moments.n:
        moments, more_cost, _ = _run(target, beta, n_steps, wanted - moments.n, seed,
                                     start=moments.n, moments=moments)
        cost += more_cost
    return McResult(moments.mean, moments.std_error, moments.n, beta / n_steps, n_steps, cost,
                    time.perf_counter() - t0, bias_constant=c)


def mc_auto_entry(dec, u, i, beta, epsilon, seed, **kw) -> McResult:
    return mc_auto(Target(dec, np.asarray(u, dtype=np.float64), "entry", i), beta, epsilon, seed, **kw)

