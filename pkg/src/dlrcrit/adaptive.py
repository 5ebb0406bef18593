"""Rank-adaptive low-rank power iteration.

A chain of fixed-rank solves with shrinking tolerance. Between two solves the
iterate is moved to a higher rank by an augmented K/L/S sweep followed by SVD
truncation of the doubled core (the "change of rank" step).
"""
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_fraction, check_int, check_positive
from .exceptions import InvalidInputError, NonConvergenceError
from .kernels import orthonormalize, svd_full
from .lowrank import LowRankFlux, _k_solve, _l_solve, dlrp_solve, s_step
from .power import DEFAULT_MAX_ITER, DEFAULT_SEED
from .trace import IterationTrace


@dataclass(frozen=True)
class FixedIncrement:
    kappa: int = 1

    def __post_init__(self):
        check_int(self.kappa, "kappa")


@dataclass(frozen=True)
class SingularValueDriven:
    """Keep the smallest rank whose discarded squared singular values sum to
    at most ``beta * Delta_n``."""

    beta: float = 1e-4

    def __post_init__(self):
        check_fraction(self.beta, "beta")


@dataclass(frozen=True)
class AdaptConfig:
    r0: int = 5
    theta0: float = 0.1
    theta: float = 1e-10
    rho: float = 0.1
    mode: object = field(default_factory=FixedIncrement)
    max_rank: int = None
    max_outer: int = 200
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        check_int(self.r0, "r0")
        check_positive(self.theta0, "theta0")
        check_positive(self.theta, "theta")
        check_fraction(self.rho, "rho")
        check_int(self.max_outer, "max_outer")
        if self.max_rank is not None:
            check_int(self.max_rank, "max_rank")
        if self.theta > self.theta0:
            raise InvalidInputError("final tolerance theta must not exceed theta0")
        if not isinstance(self.mode, (FixedIncrement, SingularValueDriven)):
            raise InvalidInputError(f"unknown rank selection mode {self.mode!r}")


@dataclass
class RankChange:
    """Outcome of one change-of-rank step."""

    flux: LowRankFlux
    k: float
    old_rank: int
    sigma: np.ndarray
    rule_rank: int
    epsilon: float = None

    @property
    def rank(self):
        return self.flux.rank

    @property
    def tail(self):
        """Sum of the squared singular values that were dropped."""
        return float(np.sum(self.sigma[self.rank:] ** 2))


def _augmented_basis(new, old):
    """Orthonormal basis of ``[new, old]`` (the whole space if that is wider)."""
    C = np.hstack([new, old])
    m = C.shape[0]
    Q, _ = orthonormalize(C[:, :m] if C.shape[1] > m else C)
    return Q


def truncation_rank(sigma, epsilon):
    """Smallest ``r`` with ``sum(sigma[r:] ** 2) <= epsilon``."""
    tails = np.concatenate([np.cumsum((sigma**2)[::-1])[::-1], [0.0]])
    return int(np.flatnonzero(tails <= epsilon)[0])


def cr_change_rank(ops, flux, mode, epsilon=None, max_rank=None):
    """Move ``flux`` from rank ``r`` to a rank ``r' in [r, 2r]``.

    Parameters
    ----------
    mode : FixedIncrement or SingularValueDriven
    epsilon : float
        Truncation threshold for :class:`SingularValueDriven`.
    max_rank : int, optional
        Defaults to ``min(N_x, G)``.

    Returns
    -------
    RankChange
    """
    r = flux.rank
    N, G = flux.shape
    max_rank = min(N, G) if max_rank is None else min(max_rank, N, G)

    X_aug = _augmented_basis(_k_solve(ops, flux), flux.X)
    W_aug = _augmented_basis(_l_solve(ops, flux), flux.W)
    S_hat = s_step(ops, X_aug, W_aug, X_aug.T @ flux.X, W_aug.T @ flux.W, flux.S)
    P, sigma, Q = svd_full(S_hat)
    upper = min(2 * r, max_rank, len(sigma))

    if isinstance(mode, FixedIncrement):
        rule_rank = r + mode.kappa
        if rule_rank > 2 * r:
            raise InvalidInputError(
                f"invalid target: rank {rule_rank} exceeds twice the current rank {r}")
    elif isinstance(mode, SingularValueDriven):
        if epsilon is None:
            raise InvalidInputError("singular-value-driven truncation needs epsilon")
        rule_rank = truncation_rank(sigma, epsilon)
    else:
        raise InvalidInputError(f"unknown rank selection mode {mode!r}")
    new_rank = min(max(rule_rank, r), upper)
    if isinstance(mode, SingularValueDriven) and rule_rank <= upper:
        tail = np.sum(sigma[new_rank:] ** 2)
        assert tail <= epsilon, f"truncation rule violated: {tail} > {epsilon}"

    S_new = np.diag(sigma[:new_rank])
    k = np.linalg.norm(S_new)
    new = LowRankFlux(X_aug @ P[:, :new_rank], S_new / k, W_aug @ Q[:, :new_rank])
    return RankChange(new, k, r, sigma, rule_rank, epsilon)


@dataclass
class AdaptiveResult:
    k: float
    flux: LowRankFlux
    trace: IterationTrace
    changes: list
    thetas: list
    cost: int = 0

    @property
    def average_rank(self):
        return self.trace.average_rank


def raise_rank_fixed(ops, flux, kappa, max_rank=None):
    """Raise the rank by ``kappa`` (capped at ``max_rank``).

    Increments beyond doubling are split into successive change-of-rank
    steps. Returns ``(flux, changes, cost)`` with cost ``2 r`` per step.
    """
    N, G = flux.shape
    max_rank = min(N, G) if max_rank is None else min(max_rank, N, G)
    target = min(flux.rank + check_int(kappa, "kappa"), max_rank)
    changes, cost = [], 0
    while flux.rank < target:
        step = FixedIncrement(min(target, 2 * flux.rank) - flux.rank)
        change = cr_change_rank(ops, flux, step, None, max_rank)
        changes.append(change)
        cost += 2 * change.old_rank
        flux = change.flux
    return flux, changes, cost


def _raise_rank(ops, flux, cfg, delta, max_rank):
    if isinstance(cfg.mode, FixedIncrement):
        return raise_rank_fixed(ops, flux, cfg.mode.kappa, max_rank)
    eps = cfg.mode.beta * (delta if np.isfinite(delta) else cfg.theta0)
    change = cr_change_rank(ops, flux, cfg.mode, eps, max_rank)
    return change.flux, [change], 2 * change.old_rank


def adaptive_solve(ops, flux0, cfg):
    """Multi-fidelity rank-adaptive power iteration.

    Each outer pass runs a fixed-rank solve at tolerance ``theta_n``, chained
    to the previous eigenvalue. Between passes the rank is raised and
    ``theta_n`` shrinks by ``rho`` (never below ``theta``). A change of rank
    adds ``2 r`` to the cumulative cost.

    Termination: once ``theta_n == theta`` and two consecutive passes agree
    to ``theta``, the fixed-increment mode stops. The singular-value mode
    first runs one more change of rank and stops only if it keeps the rank;
    that probe is counted in ``cost`` but its flux is discarded. Without the
    probe a pass that did not change rank always looks converged, even when
    the rank is too small for the requested accuracy.

    Raises
    ------
    NonConvergenceError
        After ``max_outer`` passes; ``.result`` holds the partial
        :class:`AdaptiveResult`.
    """
    N, G = flux0.shape
    max_rank = min(N, G) if cfg.max_rank is None else min(cfg.max_rank, N, G)
    if flux0.rank > max_rank:
        raise InvalidInputError(f"initial rank {flux0.rank} exceeds max_rank {max_rank}")
    sv_mode = isinstance(cfg.mode, SingularValueDriven)
    trace = IterationTrace()
    changes, thetas = [], []
    theta_n = cfg.theta0
    k_prev = np.inf
    flux = flux0
    pending = 0
    for _ in range(cfg.max_outer):
        thetas.append(theta_n)
        k, flux, sub = dlrp_solve(ops, flux, theta_n, k_prev, cfg.max_iter)
        trace.extend(sub, extra_cost=pending)
        pending = 0
        delta = abs(k - k_prev)
        done = theta_n <= cfg.theta and delta <= cfg.theta
        if done and (not sv_mode or flux.rank >= max_rank):
            return AdaptiveResult(k, flux, trace, changes, thetas, trace.total_cost)
        if flux.rank < max_rank:
            new_flux, new_changes, pending = _raise_rank(ops, flux, cfg, delta, max_rank)
            changes.extend(new_changes)
            if done and new_flux.rank == flux.rank:
                return AdaptiveResult(k, flux, trace, changes, thetas,
                                      trace.total_cost + pending)
            flux = new_flux
        theta_n = max(cfg.rho * theta_n, cfg.theta)
        k_prev = k
    result = AdaptiveResult(k, flux, trace, changes, thetas, trace.total_cost + pending)
    raise NonConvergenceError(
        f"rank-adaptive iteration did not reach theta={cfg.theta:g} in "
        f"{cfg.max_outer} outer passes (final rank {flux.rank})",
        trace=trace, result=result,
    )


class RankAdaptiveSolver(BaseEstimator):
    """Estimator wrapper around :func:`adaptive_solve`.

    Passing ``beta`` selects singular-value-driven truncation; otherwise the
    rank grows by ``kappa`` per pass.
    """

    def __init__(self, r0=5, theta0=0.1, theta=1e-10, rho=0.1, kappa=1, beta=None,
                 max_rank=None, max_outer=200, max_iter=DEFAULT_MAX_ITER,
                 random_state=DEFAULT_SEED):
        self.r0 = r0
        self.theta0 = theta0
        self.theta = theta
        self.rho = rho
        self.kappa = kappa
        self.beta = beta
        self.max_rank = max_rank
        self.max_outer = max_outer
        self.max_iter = max_iter
        self.random_state = random_state

    def _config(self):
        mode = (SingularValueDriven(self.beta) if self.beta is not None
                else FixedIncrement(self.kappa))
        return AdaptConfig(self.r0, self.theta0, self.theta, self.rho, mode,
                           self.max_rank, self.max_outer, self.max_iter)

    def fit(self, ops, flux0=None):
        cfg = self._config()
        if flux0 is None:
            flux0 = LowRankFlux.random(ops.n_cells, ops.n_groups, cfg.r0,
                                       self.random_state)
        res = adaptive_solve(ops, flux0, cfg)
        self.k_eff_ = res.k
        self.flux_ = res.flux
        self.trace_ = res.trace
        self.rank_changes_ = res.changes
        self.n_iter_ = len(res.trace)
        self.average_rank_ = res.average_rank
        self.cost_ = res.cost
        return self
