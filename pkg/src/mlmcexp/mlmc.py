"""Multilevel Monte Carlo over step sizes ``dt_l = beta / 2^l``.

The estimate is ``E[P_{l0}] + sum_{l0 < l <= L} E[P_l - P_{l-1}]`` with each
difference sampled on a shared path.  Sample counts follow the Lagrange-optimal
allocation for total variance ``epsilon^2 / 2``; levels are added while the
estimated remaining bias exceeds ``epsilon / sqrt(2)``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidValueError, NonConvergenceError
from .paths import Target, sample_batch
from .sparse import ChainDecomposition
from .stats import Moments

log = logging.getLogger(__name__)

WARMUP_SAMPLES = 1000
MAX_EXTRA_LEVELS = 30
ERROR_CONTROLS = ("combined", "statistical")


@dataclass
class LevelStats:
    """Accumulated samples for one level (differences above ``l0``, plain values at ``l0``)."""

    level: int
    coupled: bool
    moments: Moments = field(default_factory=Moments)
    fine: Moments = field(default_factory=Moments)
    coarse: Moments = field(default_factory=Moments)
    quad: Moments = field(default_factory=Moments)
    cost: int = 0

    @property
    def M(self) -> int:
        return self.moments.n

    @property
    def sum(self) -> float:
        return self.moments.sum

    @property
    def sum_sq(self) -> float:
        return self.moments.sum_sq

    @property
    def mean(self) -> float:
        return self.moments.mean

    @property
    def variance(self) -> float:
        return self.moments.variance

    @property
    def cost_per_sample(self) -> float:
        return self.cost / self.M if self.M else 0.0

    @property
    def n_steps(self) -> int:
        return 2 ** self.level

    def dt(self, beta: float) -> float:
        return beta / self.n_steps


@dataclass
class MlmcResult:
    estimate: float
    statistical_error: float
    bias_estimate: float
    levels: list[LevelStats]
    l0: int
    L: int
    total_cost: int
    converged: bool
    beta: float = float("nan")
    epsilon: float = float("nan")
    wall_time: float = 0.0
    quadrature_error: float | None = None

    @property
    def level_means(self):
        return [lv.mean for lv in self.levels]

    @property
    def level_variances(self):
        return [lv.variance for lv in self.levels]


def initial_level(beta: float, d_max: float) -> int:
    """Coarsest useful level ``round(log2(2 beta d_max))``, clamped at 0."""
    x = 2.0 * beta * d_max
    if not x > 0:
        return 0
    return max(0, int(math.floor(math.log2(x) + 0.5)))


def default_l0(dec: ChainDecomposition, beta: float, mode: str = "entry") -> int:
    # |d| rather than d: for Laplacian-type operators d_max is 0 but D still matters
    l0 = initial_level(beta, dec.d_absmax)
    return max(l0, 1) if mode == "fem" else l0


def optimal_allocation(variances, costs, epsilon: float) -> np.ndarray:
    """Per-level sample targets giving ``sum V_l / M_l <= epsilon^2 / 2`` at minimal cost."""
    v = np.maximum(np.asarray(variances, dtype=np.float64), 0.0)
    c = np.asarray(costs, dtype=np.float64)
    if np.any(c <= 0):
        raise InvalidValueError("level costs must be positive")
    if not epsilon > 0:
        raise InvalidValueError("epsilon must be positive")
    total = np.sum(np.sqrt(v * c))
    m = np.ceil(2.0 / epsilon ** 2 * np.sqrt(v / c) * total)
    return np.maximum(m, 2).astype(np.int64)


def bias_estimate(means, alpha: float = 2.0) -> float:
    """Remaining-bias bound from the last two level corrections, assuming ``m_l ~ 2^{-alpha l}``."""
    if len(means) < 2:
        raise ConfigurationError("bias estimate needs at least two correction levels")
    ratio = 2.0 ** alpha
    return max(abs(means[-1]), abs(means[-2]) / ratio) / (ratio - 1.0)


def cost_model(beta: float, d_bar: float, dt: float, M, alpha_in: float = 1.0, alpha_out: float = 1.0):
    """Predicted cost ``alpha_in beta d_bar M + alpha_out (beta/dt) M``."""
    return alpha_in * beta * d_bar * M + alpha_out * (beta / dt) * M


def fit_cost_model(beta: float, d_bar: float, dts, per_sample_costs):
    """Least-squares ``(alpha_in, alpha_out, r2)`` for per-sample costs."""
    dts = np.asarray(dts, dtype=np.float64)
    y = np.asarray(per_sample_costs, dtype=np.float64)
    X = np.column_stack([np.full_like(dts, beta * d_bar), beta / dts])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), float(r2)


def run_level(target: Target, beta: float, level: int, l0: int, stats: LevelStats | None,
              extra: int, seed: int) -> LevelStats:
    """Extend ``stats`` (or start a level) with ``extra`` new samples.

    New samples take the next unused sample indices, so extending in several
    calls draws exactly the same paths as one large call.
    """
    if level < l0:
        raise ConfigurationError(f"level {level} below l0 = {l0}")
    coupled = level > l0
    if stats is None:
        stats = LevelStats(level, coupled)
    elif stats.level != level or stats.coupled != coupled:
        raise ConfigurationError("statistics belong to a different level")
    if extra <= 0:
        return stats
    if target.mode == "fem" and level < 1:
        raise ConfigurationError("fem mode needs level >= 1 for Simpson's rule")
    batch = sample_batch(target, beta, 2 ** level, coupled, seed, level, stats.M, int(extra))
    stats.moments = stats.moments.merged(batch.diff)
    stats.fine = stats.fine.merged(batch.fine)
    stats.coarse = stats.coarse.merged(batch.coarse)
    stats.quad = stats.quad.merged(batch.quad)
    stats.cost += batch.cost
    return stats


def _summarize(levels, epsilon, beta, l0, converged, t0, mode):
    est = sum(lv.mean for lv in levels)
    var = sum(lv.variance / lv.M for lv in levels if lv.M)
    corr = [lv.mean for lv in levels if lv.coupled]
    bias = bias_estimate(corr) if len(corr) >= 2 else float("nan")
    quad = None
    if mode == "fem":
        qcorr = [lv.quad.mean for lv in levels if lv.coupled]
        quad = bias_estimate(qcorr) if len(qcorr) >= 2 else float("nan")
    return MlmcResult(
        estimate=est,
        statistical_error=math.sqrt(var),
        bias_estimate=bias,
        levels=list(levels),
        l0=l0,
        L=levels[-1].level,
        total_cost=sum(lv.cost for lv in levels),
        converged=converged,
        beta=beta,
        epsilon=epsilon,
        wall_time=time.perf_counter() - t0,
        quadrature_error=quad,
    )


def mlmc(target: Target, beta: float, epsilon: float, seed: int, l0: int | None = None,
         warmup: int = WARMUP_SAMPLES, error_control: str = "combined",
         max_extra_levels: int = MAX_EXTRA_LEVELS, initial_levels: int = 4) -> MlmcResult:
    """Adaptive multilevel estimate of the quantity described by ``target``.

    ``error_control="combined"`` requires both ``sqrt(V_T) <= epsilon/sqrt(2)``
    and ``bias <= epsilon/sqrt(2)``; ``"statistical"`` keeps ``L = l0 + initial_levels``
    and only requires ``sqrt(V_T) <= epsilon``.
    """
    if not epsilon > 0:
        raise InvalidValueError("epsilon must be positive")
    if not beta > 0:
        raise InvalidValueError("beta must be positive")
    if error_control not in ERROR_CONTROLS:
        raise ConfigurationError(f"error_control must be one of {ERROR_CONTROLS}")
    if l0 is None:
        l0 = default_l0(target.dec, beta, target.mode)
    l0 = int(l0)
    if l0 < 0:
        raise ConfigurationError("l0 must be >= 0")
    t0 = time.perf_counter()

    L = l0 + initial_levels
    levels = [run_level(target, beta, l, l0, None, warmup, seed) for l in range(l0, L + 1)]
    stat_budget = epsilon / math.sqrt(2.0) if error_control == "combined" else epsilon
    bias_budget = epsilon / math.sqrt(2.0)

    while True:
        var = np.array([lv.variance for lv in levels])
        cost = np.array([max(lv.cost_per_sample, 1.0) for lv in levels])
        want = optimal_allocation(var, cost, stat_budget * math.sqrt(2.0))
        for lv, m in zip(levels, want):
            run_level(target, beta, lv.level, l0, lv, int(m) - lv.M, seed)

        stat = math.sqrt(sum(lv.variance / lv.M for lv in levels))
        if error_control == "combined":
            bias = bias_estimate([lv.mean for lv in levels if lv.coupled])
            if bias > bias_budget:
                if L - l0 >= max_extra_levels:
                    partial = _summarize(levels, epsilon, beta, l0, False, t0, target.mode)
                    raise NonConvergenceError(
                        f"bias {bias:.3g} above {bias_budget:.3g} at level cap L = {L}", partial)
                L += 1
                log.debug("adding level %d (bias %.3g)", L, bias)
                levels.append(run_level(target, beta, L, l0, None, warmup, seed))
                continue
        if stat <= stat_budget * (1.0 + 1e-12):
            break
    return _summarize(levels, epsilon, beta, l0, True, t0, target.mode)


def mlmc_driver(dec: ChainDecomposition, u, i, beta: float, epsilon: float, seed: int,
                mode: str = "entry", M0: int = WARMUP_SAMPLES, load=None, **kw) -> MlmcResult:
    """Convenience wrapper building the :class:`Target` from its parts."""
    target = Target(dec, np.asarray(u, dtype=np.float64), mode, i if mode != "forward" else 0, load)
    return mlmc(target, beta, epsilon, seed, warmup=M0, **kw)
