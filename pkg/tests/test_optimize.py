import numpy as np
import pytest

from dlrcrit.exceptions import InvalidInputError, StationaryPointError
from dlrcrit.lowrank import LowRankFlux
from dlrcrit.optimize import (AdaptOptSchedule, CriticalityOptimizer, OptConfig, OptProblem,
                              fd_gradient, four_layer_problem, objective, optimize_adaptive,
                              optimize_fixed_rank)
from dlrcrit.problems import synthetic_library


def surrogate_problem(fun, k_target=0.0, upper=None):
    return OptProblem(None, None, k_target, upper_bounds=upper, surrogate=fun)


def bowl(alpha):
    return (alpha[0] - 3.0) ** 2 + 2.0 * (alpha[1] - 1.5) ** 2


def test_quadratic_surrogate_converges():
    cfg = OptConfig(tol=1e-14, h0=0.3, fd_delta=1e-9)
    res = optimize_fixed_rank(surrogate_problem(bowl), [0.5, 4.0], None, cfg)
    np.testing.assert_allclose(res.alpha, [3.0, 1.5], atol=1e-6)
    fs = res.trace.fs
    assert all(b < a for a, b in zip(fs, fs[1:]))
    assert res.trace.total_cost == sum(s.iterations for s in res.trace)


def test_projection_keeps_bounds():
    # minimum on the boundary alpha1 = 0; the Armijo test uses the full
    # gradient norm, so the search ends at h_min next to the corner
    cfg = OptConfig(tol=1e-12, h0=0.3, fd_delta=1e-9)
    with pytest.raises(StationaryPointError) as exc:
        optimize_fixed_rank(surrogate_problem(lambda a: 2.0 * a[0] + a[1] ** 2),
                            [2.0, 2.0], None, cfg)
    res = exc.value.result
    assert all(min(s.alpha) >= 0.0 for s in res.trace)
    assert res.alpha[0] == 0.0 and res.f < 1e-3


def test_stationary_point_is_reported():
    cfg = OptConfig(tol=1e-8, h0=0.3, fd_delta=1e-7)
    with pytest.raises(StationaryPointError) as exc:
        optimize_fixed_rank(surrogate_problem(lambda a: bowl(a) + 1.0), [0.5, 4.0], None, cfg)
    assert abs(exc.value.result.f - 1.0) < 1e-6
    assert len(exc.value.trace) > 1


def test_constant_objective_gradient_is_zero():
    g, cost = fd_gradient(surrogate_problem(lambda a: 0.7), np.array([1.0, 2.0]), None,
                          OptConfig())
    np.testing.assert_array_equal(g, 0.0)
    assert cost == 3


def test_gradient_flips_at_upper_bound():
    prob = surrogate_problem(lambda a: 3.0 * a[0] + a[1], upper=[1.0, 10.0])
    g, _ = fd_gradient(prob, np.array([1.0, 2.0]), None, OptConfig(fd_delta=1e-6))
    np.testing.assert_allclose(g, [3.0, 1.0], rtol=1e-6)


def test_one_phase_schedule_equals_fixed_rank():
    cfg = OptConfig(tol=1e-10, h0=0.3, fd_delta=1e-9, rank=4)
    prob = surrogate_problem(bowl)
    a = optimize_fixed_rank(prob, [0.5, 4.0], None, cfg)
    b = optimize_adaptive(prob, [0.5, 4.0], None, AdaptOptSchedule(r0=4, tol0=1e-10), cfg)
    assert a.trace.steps == b.trace.steps


def test_config_validation():
    with pytest.raises(InvalidInputError):
        OptConfig(c=1.5)
    with pytest.raises(InvalidInputError):
        OptConfig(p=0.0)
    with pytest.raises(InvalidInputError):
        AdaptOptSchedule(rho_opt=2.0)


@pytest.fixture(scope="module")
def sphere():
    return four_layer_problem(synthetic_library(6, 3, 2), 1.0, n_cells=16)


def test_objective_identities(sphere):
    cfg = OptConfig(rank=3, tol_f=1e-12)
    zero = four_layer_problem(sphere.library, 0.0, n_cells=16)
    f, k, _, it = objective(zero, [5.0, 4.0], None, cfg)
    assert f == k > 0 and it > 0
    with pytest.raises(InvalidInputError):
        objective(sphere, [-1.0, 4.0], None, cfg)


def test_warm_and_cold_start_agree(sphere):
    cfg = OptConfig(rank=3, tol_f=1e-12)
    _, _, warm, _ = objective(sphere, [4.0, 5.0], None, cfg)
    f_cold, *_ = objective(sphere, [6.0, 3.0], None, cfg)
    f_warm, _, _, it = objective(sphere, [6.0, 3.0], warm, cfg)
    assert abs(f_cold - f_warm) < 1e-9
    with pytest.raises(InvalidInputError):
        objective(sphere, [6.0, 3.0], LowRankFlux.random(16, 6, 2), cfg)


def test_gradient_nonzero_at_start(sphere):
    cfg = OptConfig(rank=3, tol_f=1e-12)
    g, _ = fd_gradient(sphere, np.array([1.75, 10.564]), None, cfg)
    assert np.all(np.isfinite(g)) and np.linalg.norm(g) > 0


def test_small_sphere_optimization(sphere):
    est = CriticalityOptimizer(rank=3, tol=1e-6, tol_f=1e-12, h0=20.0, fd_delta=1e-7)
    est.fit(sphere, [6.0, 6.0])
    assert est.f_ <= 1e-6 and abs(est.k_eff_ - 1.0) <= 1e-6
    assert est.cost_ == est.trace_.total_cost
    assert np.all(np.diff([s.cumulative_cost for s in est.trace_]) > 0)
