"""Dense linear-algebra kernels: QR with rank completion, SVD, Sylvester solves.

Every implicit update in the solvers is a generalized Sylvester equation

    sum_i  A_i @ Z @ B_i  =  C

which we vectorize row-major, ``vec(A Z B) = kron(A, B.T) @ vec(Z)``, and
solve with a dense LU factorization.
"""
import warnings

import numpy as np
import scipy.linalg as sla

from ._validation import check_matrix
from .exceptions import InvalidInputError, SingularOperatorError

#: Relative pivot size below which a column (QR) or operator (LU) is singular.
PIVOT_RTOL = 1e-14
#: Relative residual accepted from a Sylvester solve.
RESIDUAL_RTOL = 1e-10


def _sign_first_nonzero(v, rtol=1e-12):
    """Return -1 if the first non-negligible entry of ``v`` is negative."""
    vmax = np.max(np.abs(v)) if v.size else 0.0
    if vmax == 0.0:
        return 1.0
    idx = np.flatnonzero(np.abs(v) > rtol * vmax)[0]
    return -1.0 if v[idx] < 0 else 1.0


def _project_out(Q, v):
    """Orthogonalize ``v`` against the columns of ``Q`` (classical GS, repeated)."""
    coef = np.zeros(Q.shape[1])
    if Q.shape[1] == 0:
        return v, coef
    for _ in range(3):
        before = np.linalg.norm(v)
        c = Q.T @ v
        v = v - Q @ c
        coef += c
        # a third pass only when the second one still cancelled heavily
        if np.linalg.norm(v) > 0.5 * before:
            break
    return v, coef


def orthonormalize(A):
    """Thin QR factorization ``A = Q R`` with a deterministic sign convention.

    ``Q`` has orthonormal columns and ``R`` is upper triangular with a
    non-negative diagonal. Columns of ``A`` that are numerically dependent on
    the preceding ones (residual below ``1e-14 * ||A||_F``) get a zero row in
    ``R``; their slot in ``Q`` is filled with a canonical basis vector
    orthogonalized against all other columns, so ``Q.T @ Q = I`` always holds.

    Parameters
    ----------
    A : ndarray of shape (m, n), m >= n

    Returns
    -------
    Q : ndarray of shape (m, n)
    R : ndarray of shape (n, n)
    """
    A = check_matrix(A, "A")
    m, n = A.shape
    if m < n:
        raise InvalidInputError(f"orthonormalize needs m >= n, got shape {A.shape}")
    tol = PIVOT_RTOL * np.linalg.norm(A)
    Q = np.zeros((m, n))
    R = np.zeros((n, n))
    filled = np.zeros(n, dtype=bool)
    deficient = []
    for j in range(n):
        v, coef = _project_out(Q[:, filled], A[:, j].copy())
        R[filled, j] = coef
        nv = np.linalg.norm(v)
        if nv <= tol or nv == 0.0:
            deficient.append(j)
            continue
        Q[:, j] = v / nv
        R[j, j] = nv
        filled[j] = True

    for j in deficient:
        basis = Q[:, filled]
        # canonical vector least represented in the current span
        leftover = 1.0 - np.sum(basis**2, axis=1)
        e = np.zeros(m)
        e[int(np.argmax(leftover))] = 1.0
        v, _ = _project_out(basis, e)
        Q[:, j] = v / np.linalg.norm(v)
        filled[j] = True
    return Q, R


def svd_full(A):
    """Full SVD ``A = P @ diag(sigma) @ Q.T`` with sigma non-increasing.

    Each left singular vector is flipped so that its first non-negligible
    entry is positive (the matching right vector is flipped with it), which
    makes repeated runs bit-identical.
    """
    A = check_matrix(A, "A")
    P, sigma, Qt = np.linalg.svd(A, full_matrices=True)
    Q = Qt.T.copy()
    for i in range(P.shape[1]):
        s = _sign_first_nonzero(P[:, i])
        if s < 0:
            P[:, i] *= -1.0
            if i < Q.shape[1]:
                Q[:, i] *= -1.0
    return P, sigma, Q


def sylvester_matrix(pairs):
    """Dense ``(m n) x (m n)`` matrix of ``Z -> sum_i left_i Z right_i``."""
    if not pairs:
        raise InvalidInputError("at least one factor pair is required")
    m = pairs[0][0].shape[0]
    n = pairs[0][1].shape[0]
    T = np.zeros((m * n, m * n))
    for left, right in pairs:
        if left.shape != (m, m) or right.shape != (n, n):
            raise InvalidInputError(
                f"factor pair shapes {left.shape}, {right.shape} do not match ({m}, {n})"
            )
        T += np.kron(left, right.T)
    return T


class SylvesterSolver:
    """LU-factored generalized Sylvester operator, reusable across right sides.

    Parameters
    ----------
    pairs : list of (left, right)
        Square factors of shapes ``(m, m)`` and ``(n, n)``.
    context : str
        Label attached to any singular-operator error.
    """

    def __init__(self, pairs, context="solve"):
        self.context = context
        self.pairs = [(np.asarray(a, float), np.asarray(b, float)) for a, b in pairs]
        self.shape = (self.pairs[0][0].shape[0], self.pairs[0][1].shape[0])
        self.matrix = sylvester_matrix(self.pairs)
        if not np.all(np.isfinite(self.matrix)):
            raise InvalidInputError(f"[{context}] operator has non-finite entries")
        scale = np.max(np.abs(self.matrix))
        if scale == 0.0:
            raise SingularOperatorError("operator is identically zero", context)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            self._lu = sla.lu_factor(self.matrix, check_finite=False)
        pivots = np.abs(np.diag(self._lu[0]))
        if pivots.min() < PIVOT_RTOL * scale:
            raise SingularOperatorError(
                f"pivot {pivots.min():.3e} below {PIVOT_RTOL:g} x operator scale {scale:.3e}",
                context,
            )

    def residual(self, Z, C):
        r = self.matrix @ Z.ravel() - C.ravel()
        return np.linalg.norm(r) / np.linalg.norm(C)

    def solve(self, C):
        C = np.asarray(C, dtype=np.float64)
        if C.shape != self.shape:
            raise InvalidInputError(
                f"[{self.context}] right side has shape {C.shape}, expected {self.shape}"
            )
        cnorm = np.linalg.norm(C)
        if cnorm == 0.0:
            return np.zeros(self.shape)
        z = sla.lu_solve(self._lu, C.ravel(), check_finite=False)
        r = C.ravel() - self.matrix @ z
        # up to two rounds of iterative refinement
        for _ in range(2):
            if np.linalg.norm(r) <= RESIDUAL_RTOL * cnorm:
                break
            z = z + sla.lu_solve(self._lu, r, check_finite=False)
            r = C.ravel() - self.matrix @ z
        res = np.linalg.norm(r) / cnorm
        if not res <= RESIDUAL_RTOL:
            raise SingularOperatorError(
                f"relative residual {res:.3e} exceeds {RESIDUAL_RTOL:g} (ill-conditioned)",
                self.context,
            )
        return z.reshape(self.shape)


def solve_generalized_sylvester(pairs, C, context="solve"):
    """Solve ``sum_i left_i @ Z @ right_i = C`` for ``Z`` by a dense direct method.

    >>> import numpy as np
    >>> Z = solve_generalized_sylvester([(2 * np.eye(2), np.eye(3))], np.ones((2, 3)))
    >>> float(Z[0, 0])
    0.5
    """
    C = check_matrix(C, "C")
    checked = [
        (check_matrix(a, "left"), check_matrix(b, "right")) for a, b in pairs
    ]
    return SylvesterSolver(checked, context=context).solve(C)
