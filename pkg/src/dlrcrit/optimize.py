"""Geometry optimization toward a target eigenvalue.

Minimizes ``f(alpha) = |k_eff(alpha) - k_target|`` over layer thicknesses by
projected gradient descent with forward-difference gradients and Armijo
backtracking. Every objective evaluation is a warm-started low-rank
eigensolve; the cumulative cost counts their iterations.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_fraction, check_int, check_positive, check_vector
from .adaptive import raise_rank_fixed
from .exceptions import InvalidInputError, NonConvergenceError, StationaryPointError
from .lowrank import LowRankFlux, dlrp_solve
from .operators import assemble
from .power import DEFAULT_MAX_ITER, DEFAULT_SEED
from .problems import DEFAULT_HOLLOW_LEN, DEFAULT_SS3_LEN, four_layer_sphere
from .reactor import build_mesh


@dataclass(frozen=True, eq=False)
class OptProblem:
    """Parameterized geometry on a fixed library.

    ``builder(alpha)`` returns ``(geometry, mesh)``; the mesh cell count must
    not depend on ``alpha`` so that fluxes can warm-start across evaluations.
    ``surrogate``, when set, maps ``alpha`` to ``k`` directly and bypasses
    the eigensolve (a test hook; each call costs one unit).
    """

    library: object
    builder: object
    k_target: float
    parameter_names: tuple = ("alpha1", "alpha2")
    lower_bounds: np.ndarray = None
    upper_bounds: np.ndarray = None
    assemble_kw: dict = field(default_factory=lambda: {"density_rule": "volume"})
    surrogate: object = None

    def __post_init__(self):
        n = len(self.parameter_names)
        lo = np.zeros(n) if self.lower_bounds is None else check_vector(
            self.lower_bounds, "lower_bounds", n)
        hi = np.full(n, np.inf) if self.upper_bounds is None else np.asarray(
            self.upper_bounds, dtype=float)
        if hi.shape != (n,) or np.any(hi <= lo):
            raise InvalidInputError("upper_bounds must exceed lower_bounds")
        object.__setattr__(self, "lower_bounds", lo)
        object.__setattr__(self, "upper_bounds", hi)

    @property
    def dim(self):
        return len(self.parameter_names)

    def project(self, alpha):
        return np.clip(np.asarray(alpha, dtype=float), self.lower_bounds, self.upper_bounds)

    def operators(self, alpha):
        geometry, mesh = self.builder(np.asarray(alpha, dtype=float))
        return assemble(self.library, geometry, mesh, **self.assemble_kw)


def four_layer_problem(library, k_target, n_cells=40, hollow_len=DEFAULT_HOLLOW_LEN,
                       ss3_len=DEFAULT_SS3_LEN, library_roles=(0, 1, 2), **assemble_kw):
    """Optimize the uranium and inner steel thicknesses of the hollow sphere."""
    n_cells = check_int(n_cells, "n_cells")

    def builder(alpha):
        geom = four_layer_sphere(alpha[0], alpha[1], hollow_len, ss3_len, library_roles)
        return geom, build_mesh(geom.outer_radius, n_cells)

    kw = {"density_rule": "volume", **assemble_kw}
    return OptProblem(library, builder, float(k_target), assemble_kw=kw)


@dataclass(frozen=True)
class OptConfig:
    """Descent parameters.

    ``fd_delta`` is relative: component ``i`` is perturbed by
    ``fd_delta * max(1, |alpha_i|)``.
    """

    tol: float = 1e-7
    tol_f: float = 1e-10
    h0: float = 1.0
    c: float = 1e-4
    p: float = 0.5
    h_min: float = 1e-9
    fd_delta: float = 1e-5
    rank: int = 8
    max_steps: int = 500
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        check_positive(self.tol, "tol")
        check_positive(self.tol_f, "tol_f")
        check_positive(self.h0, "h0")
        check_fraction(self.c, "c")
        check_fraction(self.p, "p")
        check_positive(self.h_min, "h_min")
        check_positive(self.fd_delta, "fd_delta")
        check_int(self.rank, "rank")
        check_int(self.max_steps, "max_steps")


@dataclass(frozen=True)
class AdaptOptSchedule:
    """Rank schedule for the phased optimization.

    Phase ``j`` runs at rank ``r0 + j * kappa`` to tolerance
    ``max(tol0 * rho_opt**j, tol)``. ``restart_alpha=True`` restarts every
    phase from the initial parameters instead of the last computed ones.
    """

    r0: int = 4
    kappa: int = 4
    rho_opt: float = 1e-3
    tol0: float = 1e-4
    restart_alpha: bool = False
    max_phases: int = 20

    def __post_init__(self):
        check_int(self.r0, "r0")
        check_int(self.kappa, "kappa")
        check_fraction(self.rho_opt, "rho_opt")
        check_positive(self.tol0, "tol0")
        check_int(self.max_phases, "max_phases")


@dataclass(frozen=True)
class OptStep:
    alpha: tuple
    f: float
    k: float
    h: float
    backtracks: int
    iterations: int
    cumulative_cost: int
    rank: int
    phase: int = 0


@dataclass
class OptTrace:
    """One row per accepted iterate (row 0 is the starting point).

    ``iterations`` counts every eigensolve iteration spent since the
    previous row: gradient, line search and rejected trials included. A
    change of rank between phases is charged as two iterations.
    """

    steps: list = field(default_factory=list)
    pending: int = field(default=0, repr=False)

    def append(self, alpha, f, k, h, backtracks, iterations, rank, phase=0):
        total = self.total_cost + iterations
        self.steps.append(OptStep(tuple(float(a) for a in alpha), float(f), float(k),
                                  float(h), int(backtracks), int(iterations), total,
                                  int(rank), int(phase)))

    def charge(self, iterations):
        """Add cost that is not tied to a new iterate (folded into the next row)."""
        self.pending += int(iterations)

    def take_pending(self):
        pending, self.pending = self.pending, 0
        return pending

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    @property
    def total_cost(self):
        return self.steps[-1].cumulative_cost if self.steps else 0

    @property
    def fs(self):
        return [s.f for s in self.steps]


@dataclass
class OptResult:
    alpha: np.ndarray
    f: float
    k: float
    flux: LowRankFlux
    trace: OptTrace
    h: float = None

    def __iter__(self):
        return iter((self.alpha, self.f, self.flux, self.trace))


def objective(problem, alpha, warm, cfg):
    """``f = |k(alpha) - k_target|`` from a warm-started fixed-rank solve.

    Returns ``(f, k, flux, iterations)``. ``warm`` may be ``None`` (random
    start at ``cfg.rank``).
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < problem.lower_bounds) or np.any(alpha > problem.upper_bounds):
        raise InvalidInputError(f"alpha={alpha.tolist()} violates the bounds")
    if problem.surrogate is not None:
        k = float(problem.surrogate(alpha))
        return abs(k - problem.k_target), k, warm, 1
    ops = problem.operators(alpha)
    if warm is None:
        warm = LowRankFlux.random(ops.n_cells, ops.n_groups, cfg.rank, DEFAULT_SEED)
    elif warm.rank != cfg.rank:
        raise InvalidInputError(f"warm start has rank {warm.rank}, expected {cfg.rank}")
    try:
        k, flux, trace = dlrp_solve(ops, warm, cfg.tol_f, max_iter=cfg.max_iter)
    except NonConvergenceError as exc:
        raise NonConvergenceError(f"{exc} at alpha={alpha.tolist()}",
                                  trace=exc.trace, result=exc.result) from exc
    return abs(k - problem.k_target), k, flux, len(trace)


def fd_gradient(problem, alpha, warm, cfg, f0=None):
    """Forward-difference gradient of the objective.

    A component whose forward perturbation would leave the box is
    differenced backward instead. Returns ``(gradient, iterations)``;
    ``iterations`` includes the base evaluation when ``f0`` is not given.
    """
    alpha = np.asarray(alpha, dtype=float)
    cost = 0
    if f0 is None:
        f0, _, _, cost = objective(problem, alpha, warm, cfg)
    grad = np.empty(alpha.shape[0])
    for i in range(alpha.shape[0]):
        delta = cfg.fd_delta * max(1.0, abs(alpha[i]))
        step = delta if alpha[i] + delta <= problem.upper_bounds[i] else -delta
        a = alpha.copy()
        a[i] += step
        f1, _, _, it = objective(problem, a, warm, cfg)
        cost += it
        grad[i] = (f1 - f0) / step
    return grad, cost


def optimize_fixed_rank(problem, alpha0, flux0, cfg, trace=None, phase=0, h0=None):
    """Projected gradient descent with Armijo backtracking at a fixed rank.

    The step size carries over between gradient steps and only ever shrinks.

    Returns
    -------
    OptResult
        Unpacks as ``(alpha_star, f_star, flux, trace)``.

    Raises
    ------
    StationaryPointError
        The step size fell to ``h_min`` with ``f > tol``; ``.result`` holds
        the best iterate.
    NonConvergenceError
        ``max_steps`` gradient steps without reaching ``tol``.
    """
    trace = OptTrace() if trace is None else trace
    alpha = problem.project(check_vector(alpha0, "alpha0", problem.dim))
    f0, k0, flux, it = objective(problem, alpha, flux0, cfg)
    trace.append(alpha, f0, k0, np.nan, 0, it + trace.take_pending(), cfg.rank, phase)
    h = cfg.h0 if h0 is None else h0
    for _ in range(cfg.max_steps):
        if f0 <= cfg.tol:
            return OptResult(alpha, f0, k0, flux, trace, h)
        grad, cost = fd_gradient(problem, alpha, flux, cfg, f0)
        gn2 = float(grad @ grad)
        backtracks = 0
        while h > cfg.h_min and gn2 > 0.0:
            cand = problem.project(alpha - h * grad)
            f1, k1, flux1, it = objective(problem, cand, flux, cfg)
            cost += it
            if f1 <= f0 - cfg.c * h * gn2 and f1 < f0:
                break
            h *= cfg.p
            backtracks += 1
        else:
            trace.charge(cost)
            result = OptResult(alpha, f0, k0, flux, trace)
            raise StationaryPointError(
                f"step size reached h_min={cfg.h_min:g} with f={f0:.3e} > tol={cfg.tol:g} "
                f"(|grad|^2={gn2:.3e}, phase {phase})", trace=trace, result=result)
        assert f1 <= f0 - cfg.c * h * gn2 and f1 < f0, "Armijo condition violated"
        alpha, f0, k0, flux = cand, f1, k1, flux1
        trace.append(alpha, f0, k0, h, backtracks, cost, cfg.rank, phase)
    if f0 <= cfg.tol:
        return OptResult(alpha, f0, k0, flux, trace, h)
    raise NonConvergenceError(
        f"optimization did not reach tol={cfg.tol:g} in {cfg.max_steps} steps "
        f"(f={f0:.3e}, phase {phase})", trace=trace,
        result=OptResult(alpha, f0, k0, flux, trace))


def optimize_adaptive(problem, alpha0, flux0, schedule, cfg):
    """Phased optimization with rank increases between phases.

    Each phase runs :func:`optimize_fixed_rank` at the current rank and phase
    tolerance. Unless the final tolerance ``cfg.tol`` has been reached, the
    returned flux is moved to rank ``r + kappa`` by a change-of-rank step at
    the computed parameters, the tolerance shrinks by ``rho_opt`` and the
    next phase starts from those parameters. ``cfg.rank`` is ignored.
    """
    trace = OptTrace()
    rank = schedule.r0
    tol_phase = max(schedule.tol0, cfg.tol)
    alpha, flux, h = np.asarray(alpha0, dtype=float), flux0, None
    for phase in range(schedule.max_phases):
        if tol_phase < cfg.tol * (1.0 + 1e-9):
            tol_phase = cfg.tol  # absorb rounding in the products of rho_opt
        phase_cfg = replace(cfg, rank=rank, tol=tol_phase)
        start = alpha0 if schedule.restart_alpha else alpha
        res = optimize_fixed_rank(problem, start, flux, phase_cfg, trace, phase, h0=h)
        if tol_phase <= cfg.tol:
            return res
        alpha, h = res.alpha, res.h
        if problem.surrogate is None:
            ops = problem.operators(alpha)
            flux, _, cost = raise_rank_fixed(ops, res.flux, schedule.kappa)
            trace.charge(cost // max(rank, 1))
            rank = flux.rank
        else:
            rank += schedule.kappa
        tol_phase = max(schedule.rho_opt * tol_phase, cfg.tol)
    raise NonConvergenceError(
        f"adaptive optimization did not reach tol={cfg.tol:g} in "
        f"{schedule.max_phases} phases", trace=trace, result=res)


class CriticalityOptimizer(BaseEstimator):
    """Estimator wrapper for the fixed-rank and phased optimizations.

    ``mode="adaptive"`` uses ``r0``, ``kappa``, ``rho_opt`` and ``tol0``;
    ``mode="fixed"`` uses ``rank``.
    """

    def __init__(self, mode="fixed", rank=8, tol=1e-7, tol_f=1e-10, h0=1.0, c=1e-4,
                 p=0.5, h_min=1e-9, fd_delta=1e-5, max_steps=500, r0=4, kappa=4,
                 rho_opt=1e-3, tol0=1e-4, restart_alpha=False, random_state=DEFAULT_SEED):
        self.mode = mode
        self.rank = rank
        self.tol = tol
        self.tol_f = tol_f
        self.h0 = h0
        self.c = c
        self.p = p
        self.h_min = h_min
        self.fd_delta = fd_delta
        self.max_steps = max_steps
        self.r0 = r0
        self.kappa = kappa
        self.rho_opt = rho_opt
        self.tol0 = tol0
        self.restart_alpha = restart_alpha
        self.random_state = random_state

    def fit(self, problem, alpha0):
        if self.mode not in ("fixed", "adaptive"):
            raise InvalidInputError(f"mode must be 'fixed' or 'adaptive', got {self.mode!r}")
        cfg = OptConfig(self.tol, self.tol_f, self.h0, self.c, self.p, self.h_min,
                        self.fd_delta, self.rank, self.max_steps)
        rank = self.rank if self.mode == "fixed" else self.r0
        flux0 = None
        if problem.surrogate is None:
            ops = problem.operators(problem.project(alpha0))
            flux0 = LowRankFlux.random(ops.n_cells, ops.n_groups, rank, self.random_state)
        if self.mode == "fixed":
            res = optimize_fixed_rank(problem, alpha0, flux0, cfg)
        else:
            schedule = AdaptOptSchedule(self.r0, self.kappa, self.rho_opt, self.tol0,
                                        self.restart_alpha)
            res = optimize_adaptive(problem, alpha0, flux0, schedule, cfg)
        self.alpha_ = res.alpha
        self.f_ = res.f
        self.k_eff_ = res.k
        self.flux_ = res.flux
        self.trace_ = res.trace
        self.cost_ = res.trace.total_cost
        return self
