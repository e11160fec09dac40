"""Benchmark harness: level decay, cost versus accuracy, and the choice of l0.

Every benchmark returns a small result object holding the table rows plus
fitted slopes; ``to_csv`` writes the table for external plotting.  Costs are
the engine's deterministic work counts (exponential draws plus time steps);
wall times are informational.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .mc import mc_auto
from .mlmc import WARMUP_SAMPLES, initial_level, mlmc, run_level
from .netgen import GraphSpec
from .paths import Target
from .sparse import SparseMatrix, decompose, spectral_scale


@dataclass
class BenchConfig:
    """Instance for the benchmarks: ``(e^{beta A} u)[node]`` with ``u = 1``.

    ``matrix`` overrides ``graph``; ``beta=None`` means ``1/d_max``.
    """

    graph: GraphSpec = field(default_factory=lambda: GraphSpec("smallw", 10_000, seed=1))
    node: int = 0
    beta: float | None = None
    seed: int = 0
    matrix: SparseMatrix | None = None

    def build(self):
        a = self.matrix if self.matrix is not None else self.graph.build()
        dec = decompose(a)
        beta = spectral_scale(dec) if self.beta is None else float(self.beta)
        return Target(dec, np.ones(a.n), "entry", self.node), beta


def log2_slope(x, y) -> float:
    """Least-squares slope of ``log2 |y|`` against ``x``; NaN if any ``y`` is 0."""
    y = np.abs(np.asarray(y, dtype=np.float64))
    if y.size < 2 or np.any(y == 0) or not np.all(np.isfinite(y)):
        return float("nan")
    return float(np.polyfit(np.asarray(x, dtype=np.float64), np.log2(y), 1)[0])


def _write_csv(path, header, rows, notes):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
        for k, v in notes.items():
            fh.write(f"# {k}={v!r}\n")


@dataclass
class LevelsBench:
    beta: float
    l0: int
    rows: list  # (l, M, m_l, V_l, cost_per_sample)
    mean_slope: float
    variance_slope: float
    cost_slope: float

    header = ("l", "M", "mean", "variance", "cost_per_sample")

    def summary(self) -> dict:
        return {"beta": self.beta, "l0": self.l0, "mean_slope": self.mean_slope,
                "variance_slope": self.variance_slope, "cost_slope": self.cost_slope}

    def to_csv(self, path):
        _write_csv(path, self.header, self.rows, self.summary())


def bench_levels(config: BenchConfig, levels=None, samples=100_000, growth: float = 1.0,
                 l0: int | None = None) -> LevelsBench:
    """Sample ``m_l`` and ``V_l`` on fixed sample counts.

    ``samples`` is the count on the first listed level, multiplied by
    ``growth`` per level above it (``growth = 4`` keeps the relative error
    of ``m_l`` roughly level-independent when ``m_l`` decays like ``4^-l``).
    Slopes are fitted over the coupled levels; the cost slope over the
    upper half of them.
    """
    target, beta = config.build()
    if l0 is None:
        l0 = initial_level(beta, target.dec.d_absmax)
    if levels is None:
        levels = range(l0, l0 + 6)
    levels = sorted(int(l) for l in levels)
    rows = []
    for k, l in enumerate(levels):
        m = int(math.ceil(samples * growth ** k))
        st = run_level(target, beta, l, min(l0, l), None, m, config.seed)
        rows.append((l, st.M, st.mean, st.variance, st.cost_per_sample))
    coupled = [r for r in rows if r[0] > l0]
    ls = [r[0] for r in coupled]
    upper = coupled[len(coupled) // 2:]
    return LevelsBench(
        beta, l0, rows,
        log2_slope(ls, [r[2] for r in coupled]),
        log2_slope(ls, [r[3] for r in coupled]),
        log2_slope([r[0] for r in upper], [r[4] for r in upper]),
    )


@dataclass
class ComplexityBench:
    beta: float
    rows: list  # (method, epsilon, cost, wall_time, estimate, steps_or_L)
    mlmc_slope: float
    mc_slope: float

    header = ("method", "epsilon", "cost", "wall_time", "estimate", "depth")

    def summary(self) -> dict:
        return {"beta": self.beta, "mlmc_slope": self.mlmc_slope, "mc_slope": self.mc_slope}

    def to_csv(self, path):
        _write_csv(path, self.header, self.rows, self.summary())


def _cost_slope(rows, method):
    sel = [r for r in rows if r[0] == method]
    if len(sel) < 2:
        return float("nan")
    e = np.log([r[1] for r in sel])
    c = np.log([r[2] for r in sel])
    return float(np.polyfit(e, c, 1)[0])


def bench_complexity(config: BenchConfig, epsilons=(4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4),
                     methods=("mlmc", "mc"), warmup: int = WARMUP_SAMPLES) -> ComplexityBench:
    """Cost against target accuracy for the multilevel and the single-level estimator."""
    target, beta = config.build()
    rows = []
    for eps in epsilons:
        if "mlmc" in methods:
            t0 = time.perf_counter()
            r = mlmc(target, beta, eps, config.seed, warmup=warmup)
            rows.append(("mlmc", float(eps), r.total_cost, time.perf_counter() - t0, r.estimate, r.L))
        if "mc" in methods:
            t0 = time.perf_counter()
            q = mc_auto(target, beta, eps, config.seed)
            rows.append(("mc", float(eps), q.wall_cost, time.perf_counter() - t0, q.estimate, q.steps))
    return ComplexityBench(beta, rows, _cost_slope(rows, "mlmc"), _cost_slope(rows, "mc"))


@dataclass
class L0Bench:
    beta: float
    epsilon: float
    rows: list  # (l0, cost, wall_time, estimate, L)
    best_l0: int
    predicted_l0: int

    header = ("l0", "cost", "wall_time", "estimate", "L")

    def summary(self) -> dict:
        return {"beta": self.beta, "epsilon": self.epsilon, "best_l0": self.best_l0,
                "predicted_l0": self.predicted_l0}

    def to_csv(self, path):
        _write_csv(path, self.header, self.rows, self.summary())


def bench_l0(config: BenchConfig, epsilon: float, l0s=None, warmup: int = WARMUP_SAMPLES) -> L0Bench:
    """Total multilevel cost at fixed ``epsilon`` for each starting level."""
    target, beta = config.build()
    predicted = initial_level(beta, target.dec.d_absmax)
    if l0s is None:
        l0s = range(max(0, predicted - 3), predicted + 4)
    rows = []
    for l0 in l0s:
        t0 = time.perf_counter()
        r = mlmc(target, beta, epsilon, config.seed, l0=int(l0), warmup=warmup)
        rows.append((int(l0), r.total_cost, time.perf_counter() - t0, r.estimate, r.L))
    best = min(rows, key=lambda r: r[1])[0]
    return L0Bench(beta, float(epsilon), rows, best, predicted)
