import numpy as np
import pytest

from dlrcrit.exceptions import InvalidInputError, NonConvergenceError
from dlrcrit.power import PowerIterationSolver, dense_oracle, initial_flux, power_solve, power_step
from dlrcrit.problems import synthetic_problem

# frozen dense-oracle eigenvalues
FROZEN = {(20, 4, 0): 0.3772429486903381, (30, 8, 5): 0.7228088998759659}


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_frozen_oracle_values(key):
    N, G, seed = key
    ops = synthetic_problem(N, G, seed=seed).ops
    k, vec = dense_oracle(ops)
    assert abs(k - FROZEN[key]) < 1e-12
    assert vec.sum() > 0 and abs(np.linalg.norm(vec) - 1) < 1e-12
    assert abs(power_solve(ops, tol=1e-13).k_eff - FROZEN[key]) < 1e-10


def test_power_step_requires_unit_norm(small_problem):
    ops = small_problem.ops
    with pytest.raises(InvalidInputError):
        power_step(ops, 2 * initial_flux(ops.n_cells, ops.n_groups))
    with pytest.raises(InvalidInputError):
        power_step(ops, np.ones((3, 3)) / 3)


def test_nonconvergence_keeps_trace(small_problem):
    with pytest.raises(NonConvergenceError) as exc:
        power_solve(small_problem.ops, tol=1e-15, max_iter=3)
    assert len(exc.value.trace) == 3
    assert exc.value.result.iterations == 3


def test_flux_positive_at_convergence(medium_problem):
    res = power_solve(medium_problem.ops, tol=1e-12)
    phi = res.flux * np.sign(res.flux.sum())
    assert np.all(phi > 0)
    assert res.trace[0].delta == np.inf


def test_estimator(small_problem):
    est = PowerIterationSolver(tol=1e-12, random_state=3).fit(small_problem.ops)
    assert est.get_params()["tol"] == 1e-12
    k, _ = dense_oracle(small_problem.ops)
    assert abs(est.k_eff_ - k) < 1e-10
    assert est.n_iter_ == len(est.trace_)
