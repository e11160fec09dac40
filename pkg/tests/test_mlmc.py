import math

import numpy as np
import pytest

from conftest import random_sparse
from mlmcexp.errors import ConfigurationError, InvalidValueError, NonConvergenceError
from mlmcexp.mlmc import (
    LevelStats,
    bias_estimate,
    cost_model,
    default_l0,
    fit_cost_model,
    initial_level,
    mlmc,
    mlmc_driver,
    optimal_allocation,
    run_level,
)
from mlmcexp.netgen import smallw
from mlmcexp.oracle import dense_expmv
from mlmcexp.paths import Target
from mlmcexp.sparse import decompose


def test_initial_level():
    assert initial_level(1.0, 7) == 4  # log2(14) = 3.81
    assert initial_level(1 / 7, 7) == 1
    assert initial_level(0.25, 4) == 1
    assert initial_level(0.01, 1) == 0
    assert initial_level(1.0, 0.0) == 0


def test_default_l0_uses_magnitude_of_shift():
    lap = np.array([[-2.0, 1.0, 0], [1.0, -2.0, 1.0], [0, 1.0, -2.0]])
    dec = decompose(lap)
    assert dec.d_max == 0.0
    assert default_l0(dec, 4.0) == initial_level(4.0, 1.0)
    assert default_l0(decompose(np.zeros((2, 2))), 1.0, "fem") == 1


def test_optimal_allocation_formula():
    v = np.array([4.0, 1.0, 0.25])
    c = np.array([1.0, 2.0, 4.0])
    eps = 0.1
    m = optimal_allocation(v, c, eps)
    total = np.sum(np.sqrt(v * c))
    np.testing.assert_array_equal(m, np.ceil(2 / eps ** 2 * np.sqrt(v / c) * total))
    assert np.sum(v / m) <= eps ** 2 / 2 * (1 + 1e-12)


def test_optimal_allocation_is_optimal(rng):
    # the Lagrange allocation beats random allocations with the same variance
    v = rng.random(5) + 0.1
    c = 2.0 ** np.arange(5)
    eps = 0.05
    m = 2 / eps ** 2 * np.sqrt(v / c) * np.sum(np.sqrt(v * c))
    best = np.sum(m * c)
    for _ in range(200):
        w = rng.random(5) + 0.01
        m2 = w * np.sum(v / w) * 2 / eps ** 2
        assert np.sum(m2 * c) >= best * (1 - 1e-9)


def test_optimal_allocation_floor_and_errors():
    assert list(optimal_allocation([0.0, 0.0], [1.0, 2.0], 0.1)) == [2, 2]
    with pytest.raises(InvalidValueError):
        optimal_allocation([1.0], [0.0], 0.1)
    with pytest.raises(InvalidValueError):
        optimal_allocation([1.0], [1.0], 0.0)


def test_bias_estimate():
    assert bias_estimate([0.16, 0.04]) == pytest.approx(0.04 / 3)
    assert bias_estimate([0.16, 0.001]) == pytest.approx(0.04 / 3)
    with pytest.raises(ConfigurationError):
        bias_estimate([1.0])


def test_cost_model_fit_recovers_coefficients():
    beta, dbar = 1.0, 4.2
    dts = beta / 2.0 ** np.arange(1, 8)
    costs = cost_model(beta, dbar, dts, 1, alpha_in=1.3, alpha_out=2.0)
    a_in, a_out, r2 = fit_cost_model(beta, dbar, dts, costs)
    assert a_in == pytest.approx(1.3) and a_out == pytest.approx(2.0) and r2 == pytest.approx(1.0)


def test_measured_cost_follows_model():
    a = smallw(500, seed=2)
    dec = decompose(a)
    beta = 0.5
    target = Target(dec, np.ones(a.n), "entry", 0)
    levels = range(1, 8)
    per = [run_level(target, beta, l, 1, None, 4000, 0).cost_per_sample for l in levels]
    dts = [beta / 2 ** l for l in levels]
    a_in, a_out, r2 = fit_cost_model(beta, dec.d_bar, dts, per)
    # one step count plus one holding draw per step; jumps cost one draw each
    assert a_out == pytest.approx(2.0, abs=0.05)
    assert r2 > 0.999


def test_run_level_extends_reproducibly(rng):
    dec = decompose(random_sparse(rng, 5, density=0.6))
    target = Target(dec, rng.normal(size=5), "entry", 0)
    one = run_level(target, 1.0, 3, 1, None, 5000, 7)
    two = run_level(target, 1.0, 3, 1, run_level(target, 1.0, 3, 1, None, 2048, 7), 5000 - 2048, 7)
    assert one.M == two.M == 5000
    assert one.mean == pytest.approx(two.mean, rel=1e-12)
    assert one.cost == two.cost
    with pytest.raises(ConfigurationError):
        run_level(target, 1.0, 0, 1, None, 10, 7)
    with pytest.raises(ConfigurationError):
        run_level(target, 1.0, 3, 1, LevelStats(2, True), 10, 7)


def test_mlmc_meets_tolerance_on_small_graph():
    a = smallw(300, seed=5)
    dec = decompose(a)
    beta = 1 / dec.d_max
    ref = dense_expmv(a, np.ones(a.n), beta)[10]
    r = mlmc(Target(dec, np.ones(a.n), "entry", 10), beta, 2e-3, seed=1)
    assert r.converged
    assert r.statistical_error <= 2e-3 / math.sqrt(2) * (1 + 1e-9)
    assert r.bias_estimate <= 2e-3 / math.sqrt(2)
    assert abs(r.estimate - ref) <= 3 * r.statistical_error + r.bias_estimate
    assert r.L >= r.l0 + 4
    assert r.total_cost == sum(lv.cost for lv in r.levels)
    assert r.estimate == pytest.approx(sum(r.level_means))


def test_mlmc_is_deterministic():
    a = smallw(100, seed=1)
    dec = decompose(a)
    t = Target(dec, np.ones(a.n), "entry", 3)
    r1 = mlmc(t, 0.25, 1e-2, seed=4)
    r2 = mlmc(t, 0.25, 1e-2, seed=4)
    r3 = mlmc(t, 0.25, 1e-2, seed=5)
    assert r1.estimate == r2.estimate and r1.total_cost == r2.total_cost
    assert r1.estimate != r3.estimate


def test_statistical_error_control(rng):
    dec = decompose(random_sparse(rng, 6, density=0.5))
    t = Target(dec, rng.normal(size=6), "entry", 0)
    r = mlmc(t, 0.5, 1e-2, seed=0, error_control="statistical", initial_levels=3)
    assert r.L == r.l0 + 3
    assert r.statistical_error <= 1e-2 * (1 + 1e-9)


def test_level_cap_raises_with_partial_result():
    # l0 = 0 is far too coarse here, so the bias test fails at the capped depth
    t = Target(decompose(np.array([[3.0, 2.0], [2.0, -3.0]])), np.array([1.0, 0.0]), "entry", 0)
    with pytest.raises(NonConvergenceError) as info:
        mlmc(t, 1.0, 0.3, seed=0, l0=0, warmup=100, max_extra_levels=4)
    assert info.value.result is not None
    assert not info.value.result.converged
    assert info.value.result.L == 4


def test_argument_checks(rng):
    dec = decompose(random_sparse(rng, 4))
    t = Target(dec, np.ones(4), "entry", 0)
    with pytest.raises(InvalidValueError):
        mlmc(t, 1.0, 0.0, 0)
    with pytest.raises(InvalidValueError):
        mlmc(t, -1.0, 0.1, 0)
    with pytest.raises(ConfigurationError):
        mlmc(t, 1.0, 0.1, 0, error_control="bias")
    with pytest.raises(ConfigurationError):
        mlmc(t, 1.0, 0.1, 0, l0=-1)


def test_driver_wraps_target():
    a = smallw(100, seed=1)
    dec = decompose(a)
    r1 = mlmc_driver(dec, np.ones(100), 3, 0.25, 1e-2, 4)
    r2 = mlmc(Target(dec, np.ones(100), "entry", 3), 0.25, 1e-2, 4)
    assert r1.estimate == r2.estimate
