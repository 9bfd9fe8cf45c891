"""Scalar and matrix kernels shared by the estimation recursions.

Contains the covariance-distortion budget function ``gamma`` and its
inversion, the closed-form Gaussian Kullback-Leibler divergence, symmetric
square roots, spectral extrema, and a small dense discrete Lyapunov solver.
All functions are pure and operate on plain numpy arrays.
"""

import numpy as np
from dataclasses import dataclass

SYM_TOL = 1e-10


class NumericsError(ValueError):
    """Raised when a kernel is called outside its mathematical domain."""


def _as_matrix(P):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[0] != P.shape[1]:
        raise NumericsError(f"expected a square matrix, got shape {P.shape}")
    return P


def sym(X):
    """Re-symmetrize a matrix, suppressing floating-point drift."""
    X = np.asarray(X, dtype=float)
    return 0.5 * (X + X.T)


def check_symmetric(S, tol=SYM_TOL):
    S = _as_matrix(S)
    scale = max(1.0, float(np.abs(S).max()))
    if np.abs(S - S.T).max() > tol * scale:
        raise NumericsError("matrix is not symmetric to tolerance")
    return sym(S)


def check_sympd(P, tol=SYM_TOL):
    """Validate a symmetric positive-definite matrix and return it symmetrized."""
    P = check_symmetric(P, tol)
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise NumericsError("matrix is not positive definite")
    return P


def chol_solve(P, B):
    """Solve P X = B for symmetric positive-definite P via Cholesky."""
    from scipy.linalg import cho_factor, cho_solve as _cho_solve

    c = cho_factor(sym(P), lower=True)
    return _cho_solve(c, np.asarray(B, dtype=float))


def spectral_extrema(S):
    """Extreme eigenvalues (min, max) of a symmetric matrix."""
    S = check_symmetric(S)
    w = np.linalg.eigvalsh(S)
    return float(w[0]), float(w[-1])


def spd_sqrt(P):
    """Lower-triangular L with L L^T = P (Cholesky convention)."""
    P = check_sympd(P)
    return np.linalg.cholesky(P)


def gamma(P, theta):
    """Kullback-Leibler cost of distorting a Gaussian covariance P by theta.

    gamma(P, theta) = 1/2 (ln det(I - theta P) + tr((I - theta P)^{-1} - I)).
    Defined for theta * sigma_max(P) < 1; nonnegative, zero at theta = 0, and
    strictly increasing in theta on its domain.
    """
    P = check_sympd(P)
    theta = float(theta)
    if theta < 0:
        raise NumericsError("theta must be nonnegative")
    if theta == 0.0:
        return 0.0
    n = P.shape[0]
    M = np.eye(n) - theta * P
    sign, logdet = np.linalg.slogdet(M)
    if sign <= 0:
        raise NumericsError("theta * sigma_max(P) >= 1: outside the domain of gamma")
    _, smax = spectral_extrema(P)
    if theta * smax >= 1.0:
        raise NumericsError("theta * sigma_max(P) >= 1: outside the domain of gamma")
    Minv = np.linalg.inv(sym(M))
    val = 0.5 * (logdet + np.trace(Minv) - n)
    return max(float(val), 0.0)


@dataclass
class BudgetSolveResult:
    """Solution of gamma(P, theta) = c for theta."""

    theta: float
    achieved_budget: float
    iterations: int


def solve_budget(P, c, tol=1e-12, max_iter=200):
    """Find theta with gamma(P, theta) = c by bisection.

    gamma is strictly increasing in theta and blows up at 1/sigma_max(P), so
    bisection over (0, (1 - 1e-9)/sigma_max(P)) is globally safe.  The
    stopping budget tolerance is relative to c so that tiny budgets are
    resolved as sharply as large ones; 200 halvings otherwise take the
    bracket to machine precision.
    """
    P = check_sympd(P)
    c = float(c)
    if c <= 0:
        raise NumericsError("budget c must be positive")
    _, smax = spectral_extrema(P)
    lo, hi = 0.0, (1.0 - 1e-9) / smax
    if gamma(P, hi) < c:
        raise NumericsError("budget c unreachable below the domain boundary")
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        g = gamma(P, mid)
        if abs(g - c) <= tol * c:
            return BudgetSolveResult(theta=mid, achieved_budget=g, iterations=it)
        if g < c:
            lo = mid
        else:
            hi = mid
        if hi - lo <= np.finfo(float).eps * hi:
            break
    mid = 0.5 * (lo + hi)
    return BudgetSolveResult(theta=mid, achieved_budget=gamma(P, mid), iterations=it)


def gaussian_kl(mean0, cov0, mean1, cov1):
    """KL divergence between Gaussians N(mean0, cov0) and N(mean1, cov1)."""
    mean0 = np.atleast_1d(np.asarray(mean0, dtype=float))
    mean1 = np.atleast_1d(np.asarray(mean1, dtype=float))
    cov0 = check_sympd(cov0)
    cov1 = check_sympd(cov1)
    if mean0.shape != mean1.shape or cov0.shape != cov1.shape:
        raise NumericsError("dimension mismatch between the two Gaussians")
    if mean0.shape[0] != cov0.shape[0]:
        raise NumericsError("mean/covariance dimension mismatch")
    n = mean0.shape[0]
    diff = mean1 - mean0
    sol = chol_solve(cov1, cov0)
    maha = float(diff @ chol_solve(cov1, diff))
    _, ld0 = np.linalg.slogdet(cov0)
    _, ld1 = np.linalg.slogdet(cov1)
    val = 0.5 * (np.trace(sol) + maha - n + ld1 - ld0)
    return max(float(val), 0.0)


def solve_discrete_lyapunov(F, V, tol=1e-9):
    """Solve X = F X F^T + V for stable F.

    Small systems (dim <= 20) use the exact Kronecker-vectorization direct
    solve; larger systems fall back to fixed-point iteration.
    """
    F = np.asarray(F, dtype=float)
    V = check_symmetric(V)
    n = F.shape[0]
    if F.shape != (n, n) or V.shape != (n, n):
        raise NumericsError("dimension mismatch in Lyapunov solve")
    rho = max(abs(np.linalg.eigvals(F)))
    if rho >= 1.0:
        raise NumericsError(
            f"spectral radius {rho:.6f} >= 1: discrete Lyapunov equation has no "
            "unique positive solution"
        )
    if n <= 20:
        K = np.eye(n * n) - np.kron(F, F)
        X = np.linalg.solve(K, V.reshape(-1)).reshape(n, n)
        return sym(X)
    X = V.copy()
    for _ in range(100000):
        Xn = sym(F @ X @ F.T + V)
        if np.abs(Xn - X).max() <= tol * max(1.0, np.abs(V).max()):
            return Xn
        X = Xn
    raise NumericsError("Lyapunov fixed-point iteration did not converge")
