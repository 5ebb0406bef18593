"""Fixed-rank dynamical low-rank power iteration (K-, L- and S-steps).

The flux is kept factored as ``phi = X @ S @ W.T`` with orthonormal ``X``
(space, ``N_x x r``) and ``W`` (energy, ``G x r``). Each power iteration is
one step of the basis-update & Galerkin integrator: the K- and L-steps solve
the power step projected onto the old energy/space basis to get new bases,
and the S-step solves it in the new bases.
"""
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_int, check_matrix, check_positive
from .exceptions import CriticalityError, InvalidInputError, NonConvergenceError
from .kernels import orthonormalize, solve_generalized_sylvester, svd_full
from .power import DEFAULT_MAX_ITER, DEFAULT_SEED
from .trace import IterationTrace


@dataclass
class LowRankFlux:
    X: np.ndarray
    S: np.ndarray
    W: np.ndarray

    @property
    def rank(self):
        return self.S.shape[0]

    @property
    def shape(self):
        return self.X.shape[0], self.W.shape[0]

    def full(self):
        return self.X @ self.S @ self.W.T

    def orthonormality_error(self):
        r = self.rank
        return max(np.max(np.abs(self.X.T @ self.X - np.eye(r))),
                   np.max(np.abs(self.W.T @ self.W - np.eye(r))))

    @classmethod
    def random(cls, n_cells, n_groups, rank, seed=DEFAULT_SEED):
        """Random rank-``rank`` flux with positive factors before orthonormalization."""
        rank = check_int(rank, "rank")
        if rank > min(n_cells, n_groups):
            raise InvalidInputError(
                f"rank {rank} exceeds min(N_x, G) = {min(n_cells, n_groups)}")
        rng = np.random.default_rng(seed)
        X, _ = orthonormalize(rng.random((n_cells, rank)) + 0.1)
        W, _ = orthonormalize(rng.random((n_groups, rank)) + 0.1)
        S = np.diag(np.sort(rng.random(rank) + 0.1)[::-1])
        return cls(X, S / np.linalg.norm(S), W)

    @classmethod
    def from_full(cls, phi, rank):
        """Truncated SVD of a full flux, renormalized to unit Frobenius norm."""
        phi = check_matrix(phi, "phi")
        P, sigma, Q = svd_full(phi)
        S = np.diag(sigma[:rank])
        nrm = np.linalg.norm(S)
        if nrm == 0.0:
            raise InvalidInputError("cannot normalize a zero flux")
        return cls(P[:, :rank].copy(), S / nrm, Q[:, :rank].copy())


def project_energy(ops, W):
    """``W.T @ A @ W`` for the energy factors: diffusion, removal, fission."""
    M = {p: W.T @ ops.energy_diffusion[p] @ W for p in ops.pairs}
    Sig = {l: W.T @ ops.removal[l] @ W for l in ops.materials}
    Sf = {l: W.T @ ops.fission_right(l) @ W for l in ops.materials}
    return M, Sig, Sf


def project_space(ops, X):
    """``X.T @ A @ X`` for the spatial factors: diffusion stencils and densities."""
    D = {p: X.T @ ops.spatial_diffusion[p] @ X for p in ops.pairs}
    rho = {l: X.T @ ops.density[l] @ X for l in ops.materials}
    return D, rho


def _k_solve(ops, flux):
    M, Sig, Sf = project_energy(ops, flux.W)
    K = flux.X @ flux.S
    pairs = [(-ops.spatial_diffusion[p], M[p]) for p in ops.pairs]
    pairs += [(ops.density[l], Sig[l]) for l in ops.materials]
    rhs = sum(ops.density[l] @ K @ Sf[l] for l in ops.materials)
    return solve_generalized_sylvester(pairs, rhs, context="K-step")


def _l_solve(ops, flux):
    # solved transposed: unknown L.T = S W.T of shape (r, G)
    D, rho = project_space(ops, flux.X)
    Lt = flux.S @ flux.W.T
    pairs = [(-D[p], ops.energy_diffusion[p]) for p in ops.pairs]
    pairs += [(rho[l], ops.removal[l]) for l in ops.materials]
    rhs = sum(rho[l] @ Lt @ ops.fission_right(l) for l in ops.materials)
    return solve_generalized_sylvester(pairs, rhs, context="L-step").T


def k_step(ops, flux):
    """Update the spatial basis.

    Returns the new orthonormal basis ``X_new`` and ``M_x = X_new.T @ X``.
    """
    X_new, _ = orthonormalize(_k_solve(ops, flux))
    return X_new, X_new.T @ flux.X


def l_step(ops, flux):
    """Update the energy basis; returns ``W_new`` and ``N_w = W_new.T @ W``."""
    W_new, _ = orthonormalize(_l_solve(ops, flux))
    return W_new, W_new.T @ flux.W


def s_step(ops, X_new, W_new, M_x, N_w, S_old):
    """Galerkin power step for the coefficient matrix in the new bases.

    Works for rectangular cores, which the rank-change step needs when the
    augmented space and energy bases differ in size.
    """
    S0 = M_x @ S_old @ N_w.T
    D, rho = project_space(ops, X_new)
    M, Sig, Sf = project_energy(ops, W_new)
    pairs = [(-D[p], M[p]) for p in ops.pairs]
    pairs += [(rho[l], Sig[l]) for l in ops.materials]
    rhs = sum(rho[l] @ S0 @ Sf[l] for l in ops.materials)
    return solve_generalized_sylvester(pairs, rhs, context="S-step")


def dlrp_iteration(ops, flux):
    """One K/L/S sweep. Returns ``(k, normalized flux)``."""
    X_new, M_x = k_step(ops, flux)
    W_new, N_w = l_step(ops, flux)
    S_t = s_step(ops, X_new, W_new, M_x, N_w, flux.S)
    k = np.linalg.norm(S_t)
    if k == 0.0:
        raise CriticalityError("fission source vanished in the S-step: k = 0")
    return k, LowRankFlux(X_new, S_t / k, W_new)


def dlrp_solve(ops, flux0, theta, k_prev=np.inf, max_iter=DEFAULT_MAX_ITER, trace=None):
    """Fixed-rank low-rank power iteration.

    Stops as soon as ``|k_{n+1} - k_n| <= theta``; the first iterate is
    compared against ``k_prev`` so consecutive calls can be chained.

    Returns
    -------
    k : float
    flux : LowRankFlux
    trace : IterationTrace
        ``trace`` if given (rows appended), else a new one.
    """
    theta = check_positive(theta, "theta")
    max_iter = check_int(max_iter, "max_iter")
    if flux0.shape != (ops.n_cells, ops.n_groups):
        raise InvalidInputError(
            f"flux shape {flux0.shape} does not match operators "
            f"{(ops.n_cells, ops.n_groups)}")
    trace = IterationTrace() if trace is None else trace
    flux = flux0
    r = flux.rank
    for _ in range(max_iter):
        k, flux = dlrp_iteration(ops, flux)
        delta = abs(k - k_prev)
        trace.append(k, delta, r, theta, r)
        if delta <= theta:
            return k, flux, trace
        k_prev = k
    raise NonConvergenceError(
        f"rank-{r} power iteration did not reach theta={theta:g} in {max_iter} iterations",
        trace=trace, result=(k, flux),
    )


class LowRankPowerSolver(BaseEstimator):
    """Estimator wrapper around :func:`dlrp_solve`.

    Attributes
    ----------
    k_eff_ : float
    flux_ : LowRankFlux
    trace_ : IterationTrace
    n_iter_ : int
    """

    def __init__(self, rank=5, theta=1e-10, max_iter=DEFAULT_MAX_ITER,
                 random_state=DEFAULT_SEED):
        self.rank = rank
        self.theta = theta
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, ops, flux0=None):
        if flux0 is None:
            flux0 = LowRankFlux.random(ops.n_cells, ops.n_groups, self.rank,
                                       self.random_state)
        self.k_eff_, self.flux_, self.trace_ = dlrp_solve(
            ops, flux0, self.theta, max_iter=self.max_iter)
        self.n_iter_ = len(self.trace_)
        return self

    def full_flux(self):
        return self.flux_.full()
