"""Full-rank inverse power iteration and a dense eigenvalue oracle."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from sklearn.base import BaseEstimator

from ._validation import check_int, check_matrix, check_positive
from .exceptions import CriticalityError, InvalidInputError, NonConvergenceError
from .kernels import SylvesterSolver, solve_generalized_sylvester
from .operators import DENSE_CAP, materialize_full_operators
from .trace import IterationTrace

DEFAULT_MAX_ITER = 10_000
DEFAULT_SEED = 0


@dataclass
class PowerResult:
    k_eff: float
    flux: np.ndarray
    iterations: int
    trace: IterationTrace


def initial_flux(n_cells, n_groups, seed=DEFAULT_SEED):
    """Deterministic positive random flux with unit Frobenius norm."""
    phi = np.random.default_rng(seed).random((n_cells, n_groups)) + 0.1
    return phi / np.linalg.norm(phi)


def _check_flux(ops, phi):
    phi = check_matrix(phi, "phi")
    if phi.shape != (ops.n_cells, ops.n_groups):
        raise InvalidInputError(
            f"flux shape {phi.shape} does not match operators {(ops.n_cells, ops.n_groups)}"
        )
    return phi


def power_step(ops, phi):
    """One implicit power step: solve ``L(phi_tilde) = F(phi)``."""
    phi = _check_flux(ops, phi)
    if abs(np.linalg.norm(phi) - 1.0) > 1e-10:
        raise InvalidInputError("power_step expects a flux with unit Frobenius norm")
    return solve_generalized_sylvester(ops.left_pairs(), ops.apply_fission(phi),
                                       context="full step")


def power_solve(ops, phi0=None, tol=1e-10, max_iter=DEFAULT_MAX_ITER, seed=DEFAULT_SEED):
    """Inverse power iteration on the full ``N_x x G`` flux.

    Iterates ``k_{n+1} = ||phi_tilde||_F``, ``phi_{n+1} = phi_tilde / k_{n+1}``
    until ``|k_{n+1} - k_n| < tol``. The loss operator is factored once and
    reused for every step.

    Raises
    ------
    NonConvergenceError
        If ``max_iter`` is reached; ``.trace`` and ``.result`` hold the
        partial run.
    """
    tol = check_positive(tol, "tol")
    max_iter = check_int(max_iter, "max_iter")
    N, G = ops.n_cells, ops.n_groups
    phi = initial_flux(N, G, seed) if phi0 is None else _check_flux(ops, phi0)
    norm = np.linalg.norm(phi)
    if norm == 0.0:
        raise InvalidInputError("initial flux is zero")
    phi = phi / norm
    solver = SylvesterSolver(ops.left_pairs(), context="full step")
    rank = min(N, G)
    trace = IterationTrace()
    k_prev = np.inf
    for _ in range(max_iter):
        phi_t = solver.solve(ops.apply_fission(phi))
        k = np.linalg.norm(phi_t)
        if k == 0.0:
            raise CriticalityError("fission source vanished: k = 0")
        phi = phi_t / k
        delta = abs(k - k_prev)
        trace.append(k, delta, rank, tol, rank)
        if delta < tol:
            return PowerResult(k, phi, len(trace), trace)
        k_prev = k
    result = PowerResult(k, phi, len(trace), trace)
    raise NonConvergenceError(
        f"power iteration did not reach tol={tol:g} in {max_iter} iterations",
        trace=trace, result=result,
    )


def dense_oracle(ops, cap=DENSE_CAP, tol=1e-13, max_iter=1_000_000, eig_cap=2000):
    """Dominant eigenvalue of ``T^{-1} F`` from the assembled dense matrices.

    Two independent routes: power iteration with the explicit matrix
    ``T^{-1} F`` and, when ``N_x * G <= eig_cap``, a dense eigensolve. They
    must agree to 1e-9; the eigensolve value is returned when available.

    Returns
    -------
    k : float
    flux : ndarray of shape (N_x * G,)
        Row-major flattened eigenvector with unit norm and positive sum.
    """
    T, F = materialize_full_operators(ops, cap=cap)
    A = sla.lu_solve(sla.lu_factor(T), F)
    x = np.ones(A.shape[0]) / np.sqrt(A.shape[0])
    k_prev = np.inf
    for _ in range(max_iter):
        y = A @ x
        k = np.linalg.norm(y)
        x = y / k
        if abs(k - k_prev) < tol:
            break
        k_prev = k
    else:
        raise NonConvergenceError(f"dense oracle power iteration did not reach {tol:g}")
    if x.sum() < 0:
        x = -x
    if A.shape[0] <= eig_cap:
        lam = sla.eigvals(A)
        k_eig = float(np.max(np.abs(lam)))
        if abs(k_eig - k) > 1e-9:
            raise CriticalityError(
                f"oracle routes disagree: power {k!r} vs eigensolve {k_eig!r}"
            )
        k = k_eig
    return float(k), x


class PowerIterationSolver(BaseEstimator):
    """Estimator wrapper around :func:`power_solve`.

    Parameters
    ----------
    tol : float
        Stop when successive eigenvalue estimates differ by less than this.
    max_iter : int
    random_state : int
        Seed of the default initial flux.

    Attributes
    ----------
    k_eff_ : float
    flux_ : ndarray of shape (N_x, G)
    n_iter_ : int
    trace_ : IterationTrace
    """

    def __init__(self, tol=1e-10, max_iter=DEFAULT_MAX_ITER, random_state=DEFAULT_SEED):
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, ops, phi0=None):
        res = power_solve(ops, phi0, tol=self.tol, max_iter=self.max_iter,
                          seed=self.random_state)
        self.k_eff_ = res.k_eff
        self.flux_ = res.flux
        self.n_iter_ = res.iterations
        self.trace_ = res.trace
        return self
