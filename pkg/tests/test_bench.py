import csv

import numpy as np
import pytest

from mlmcexp.bench import BenchConfig, bench_complexity, bench_l0, bench_levels, log2_slope
from mlmcexp.mc import mc_auto
from mlmcexp.mlmc import mlmc
from mlmcexp.netgen import GraphSpec
from mlmcexp.sparse import SparseMatrix

DIAG = SparseMatrix.from_dense(np.diag([1.0, 2.0, 0.5, 3.0]))


def test_log2_slope():
    assert log2_slope([1, 2, 3], [4.0, 1.0, 0.25]) == pytest.approx(-2.0)
    assert np.isnan(log2_slope([1, 2], [1.0, 0.0]))


def test_levels_on_diagonal_instance_are_flat():
    b = bench_levels(BenchConfig(matrix=DIAG, beta=1.0), levels=range(0, 5), samples=200, l0=0)
    assert all(abs(r[2]) < 1e-13 for r in b.rows[1:])
    assert all(r[3] < 1e-26 for r in b.rows[1:])


def test_levels_table_and_slopes(tmp_path):
    cfg = BenchConfig(graph=GraphSpec("smallw", 300, seed=1), beta=0.25)
    b = bench_levels(cfg, samples=2000, growth=2.0)
    assert [r[0] for r in b.rows] == list(range(b.l0, b.l0 + 6))
    assert [r[1] for r in b.rows] == [int(2000 * 2 ** k) for k in range(6)]
    assert b.variance_slope < -1.5
    assert 0.8 < b.cost_slope < 1.1
    b.to_csv(tmp_path / "levels.csv")
    rows = list(csv.reader(open(tmp_path / "levels.csv")))
    assert rows[0] == list(b.header)
    assert rows[-1][0].startswith("# ")


def test_complexity_single_point_matches_direct_calls():
    cfg = BenchConfig(graph=GraphSpec("smallw", 300, seed=1), beta=0.25, seed=4)
    b = bench_complexity(cfg, epsilons=(5e-3,))
    target, beta = cfg.build()
    r = mlmc(target, beta, 5e-3, 4)
    q = mc_auto(target, beta, 5e-3, 4)
    assert b.rows[0][2] == r.total_cost and b.rows[0][4] == r.estimate
    assert b.rows[1][2] == q.wall_cost and b.rows[1][4] == q.estimate
    assert np.isnan(b.mlmc_slope)


def test_complexity_on_diagonal_instance_is_flat():
    b = bench_complexity(BenchConfig(matrix=DIAG, beta=1.0), epsilons=(1e-2, 1e-3), methods=("mlmc",))
    assert b.rows[0][2] == b.rows[1][2]


def test_l0_on_diagonal_instance_is_flat_per_level():
    # zero variance everywhere: the cost is the fixed warmup of each level set
    b = bench_l0(BenchConfig(matrix=DIAG, beta=1.0), 1e-3, l0s=[2, 2])
    assert b.rows[0][1] == b.rows[1][1]


def test_l0_cost_grows_far_above_optimum():
    cfg = BenchConfig(graph=GraphSpec("smallw", 300, seed=1), beta=0.25)
    b = bench_l0(cfg, 2e-2, l0s=range(3, 8))
    costs = [r[1] for r in b.rows]
    assert all(c2 > c1 for c1, c2 in zip(costs, costs[1:]))
    assert b.predicted_l0 == 2  # round(log2(2 * 0.25 * 7))
