"""Convergence and tolerance bounds for the resilient filters.

Two certified bounds:

- ``c_max``: the largest per-step distortion budget for which the
  update-resilient filter's gain provably converges.  Built from phi_k (the
  largest distortion strength keeping the Gramian-related matrix R_k
  positive definite) composed with the undistorted Riccati floor P_bar
  through the budget function gamma.
- ``theta_max``: the largest fixed distortion strength for which the
  risk-sensitive variant's covariance recursion stays bounded, obtained as
  min(beta, phi_k) where beta comes from a Lyapunov-certified contraction
  argument maximized over an observer gain G, a mixing weight alpha, and a
  contraction margin rho by deterministic grid search with refinement.
"""

import numpy as np
from dataclasses import dataclass, field

from scipy.optimize import brentq

from .model import validate, is_observable
from .numerics import (
    NumericsError,
    check_sympd,
    chol_solve,
    gamma,
    solve_discrete_lyapunov,
    spd_sqrt,
    spectral_extrema,
    sym,
)
from .filters import FilterConfig, covariance_schedule, FilterError


class StabilityError(RuntimeError):
    """Raised when a bound computation is infeasible."""


# ---------------------------------------------------------------------------
# Gramian machinery and phi_k


@dataclass
class GramianParts:
    """Stacks entering the matrix R_k over a window of length k.

    obs is the observability stack [ (CA^{k-1}); ...; CA; C ], obs_r the
    reachability-style stack [ A^{k-1}; ...; A; I ], Qk = I_k kron Q,
    Rk_noise = I_k kron R, and Hk / Lk the strictly upper block-triangular
    Toeplitz matrices with first block rows (0, H_1, ..., H_{k-1}) and
    (0, L_1, ..., L_{k-1}), H_j = C A^{j-1} Q^{1/2}, L_j = A^{j-1} Q^{1/2}.
    """

    k: int
    obs: np.ndarray      # km x n
    obs_r: np.ndarray    # kn x n
    Qk: np.ndarray       # kn x kn
    Rk_noise: np.ndarray  # km x km
    Hk: np.ndarray       # km x kn
    Lk: np.ndarray       # kn x kn
    # cached compositions used by rk_matrix
    T1: np.ndarray = None       # obs^T (Rk_noise + Hk Hk^T)^{-1} obs
    Minner: np.ndarray = None   # Lk (I + Hk^T Rk_noise^{-1} Hk)^{-1} Lk^T
    Jk: np.ndarray = None       # obs_r - Lk Hk^T (Rk_noise + Hk Hk^T)^{-1} obs
    phi_sup: float = None       # sigma_max(Minner), open upper endpoint for phi


def _block_toeplitz(blocks, k, br, bc):
    """Strictly upper block-triangular Toeplitz from the first block row
    (0, blocks[0], ..., blocks[k-2])."""
    M = np.zeros((k * br, k * bc))
    for i in range(k):
        for j in range(i + 1, k):
            M[i * br:(i + 1) * br, j * bc:(j + 1) * bc] = blocks[j - i - 1]
    return M


def build_gramian_parts(model, k):
    """Materialize the window-k stacks and cache the compositions of R_k."""
    validate(model)
    n, m = model.n, model.m
    if k < n:
        raise StabilityError(f"window k={k} must be at least the state dimension {n}")
    if not is_observable(model.A, model.C):
        raise StabilityError("(A, C) must be observable")
    A, C = model.A, model.C
    Qh = spd_sqrt(model.Q)
    powers = [np.linalg.matrix_power(A, j) for j in range(k)]
    obs = np.vstack([C @ powers[j] for j in range(k - 1, -1, -1)])
    obs_r = np.vstack([powers[j] for j in range(k - 1, -1, -1)])
    Hb = [C @ powers[j - 1] @ Qh for j in range(1, k)]
    Lb = [powers[j - 1] @ Qh for j in range(1, k)]
    Hk = _block_toeplitz(Hb, k, m, n)
    Lk = _block_toeplitz(Lb, k, n, n)
    Qk = np.kron(np.eye(k), model.Q)
    Rk_noise = np.kron(np.eye(k), model.R)
    W = sym(Rk_noise + Hk @ Hk.T)
    T1 = sym(obs.T @ chol_solve(W, obs))
    inner = sym(np.eye(k * n) + Hk.T @ chol_solve(Rk_noise, Hk))
    Minner = sym(Lk @ chol_solve(inner, Lk.T))
    Jk = obs_r - Lk @ Hk.T @ chol_solve(W, obs)
    _, phi_sup = spectral_extrema(Minner)
    return GramianParts(k=k, obs=obs, obs_r=obs_r, Qk=Qk, Rk_noise=Rk_noise,
                        Hk=Hk, Lk=Lk, T1=T1, Minner=Minner, Jk=Jk,
                        phi_sup=float(phi_sup))


def rk_matrix(parts, phi):
    """The n x n symmetric matrix R_k(phi) whose positive definiteness
    certifies contraction of the distorted Riccati map at strength phi.

    R_k = obs^T (Rk_noise + Hk Hk^T)^{-1} obs + Jk^T S_k^{-1} Jk with
    S_k = Minner - phi^{-1} I; valid for phi in (0, sigma_max(Minner)).
    """
    phi = float(phi)
    if phi <= 0.0 or (parts.phi_sup > 0.0 and phi >= parts.phi_sup):
        raise StabilityError(
            f"phi={phi:.6g} outside the admissible interval (0, {parts.phi_sup:.6g})"
        )
    S = sym(parts.Minner - (1.0 / phi) * np.eye(parts.Minner.shape[0]))
    try:
        X = np.linalg.solve(S, parts.Jk)
    except np.linalg.LinAlgError:
        raise StabilityError(f"S_k singular at phi={phi:.6g} (breakpoint)")
    return sym(parts.T1 + parts.Jk.T @ X)


def _min_eig_rk(parts, phi):
    mn, _ = spectral_extrema(rk_matrix(parts, phi))
    return mn


def phi_max(model, k, tol=1e-6):
    """Largest phi for which R_k(phi) is positive definite.

    The minimum eigenvalue of R_k(phi) is positive for small phi (under
    observability) and crosses zero before the upper endpoint; the first
    sign change is located by a coarse geometric scan and pinned down by
    bisection to absolute tolerance ``tol``.
    """
    parts = model if isinstance(model, GramianParts) else build_gramian_parts(model, k)
    if parts.phi_sup <= 0.0:
        # degenerate window (Lk = 0): R_k = T1 - phi Jk^T Jk is linear in
        # phi, so the positive-definiteness boundary has a closed form
        X = chol_solve(parts.T1, parts.Jk.T @ parts.Jk)
        lam = max(np.linalg.eigvals(X).real)
        if lam <= 0:
            raise StabilityError("R_k stays positive definite for every phi")
        return float(1.0 / lam)
    ub = parts.phi_sup * (1.0 - 1e-9)
    grid = np.geomspace(1e-6 * parts.phi_sup, ub, 200)
    prev = grid[0]
    if _min_eig_rk(parts, prev) <= 0:
        raise StabilityError(
            "R_k is not positive definite even at tiny phi; "
            "check observability of (A, C)"
        )
    for g in grid[1:]:
        if _min_eig_rk(parts, g) <= 0:
            return float(brentq(lambda p: _min_eig_rk(parts, p), prev, g, xtol=tol))
        prev = g
    return float(ub)


# ---------------------------------------------------------------------------
# Riccati floor and c_max


def pbar_filtered(model, q):
    """Filtered covariance floor after q undistorted Riccati steps from
    P_bar_0 = Q: returns (P_bar_q^{-1} + C^T R^{-1} C)^{-1}."""
    validate(model)
    if q < 0:
        raise StabilityError("q must be nonnegative")
    A, C, Q = model.A, model.C, model.Q
    CRC = sym(C.T @ chol_solve(model.R, C))
    P = Q.copy()
    for _ in range(q):
        P = sym(A @ np.linalg.inv(sym(np.linalg.inv(check_sympd(P)) + CRC)) @ A.T + Q)
    return check_sympd(np.linalg.inv(sym(np.linalg.inv(check_sympd(P)) + CRC)))


@dataclass
class BoundReport:
    """Result of a tolerance-bound computation with its reproducing inputs."""

    phi_k: float
    c_max: float = None
    theta_max: float = None
    pbar_qq: np.ndarray = None
    beta: float = None
    sigma: np.ndarray = None
    rho: float = None
    alpha: float = None
    G: np.ndarray = None
    search: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"phi_k": self.phi_k}
        if self.c_max is not None:
            d["c_max"] = self.c_max
            d["pbar_qq"] = self.pbar_qq.tolist()
        if self.theta_max is not None:
            d["theta_max"] = self.theta_max
            d["beta"] = self.beta
            d["sigma"] = self.sigma.tolist()
            d["rho"] = self.rho
            d["alpha"] = self.alpha
            d["G"] = self.G.tolist()
        if self.search:
            d["search"] = self.search
        return d


def c_max(model, k=10, q=20, tol=1e-6):
    """Budget bound c_max = gamma(P_bar_{q|q}, phi_k) certifying gain
    convergence of the update-resilient filter for any c in (0, c_max]."""
    parts = build_gramian_parts(model, k)
    phik = phi_max(parts, k, tol=tol)
    Pq = pbar_filtered(model, q)
    val = gamma(Pq, phik)
    return BoundReport(phi_k=phik, c_max=float(val), pbar_qq=Pq,
                       search={"k": k, "q": q, "phi_tol": tol})


# ---------------------------------------------------------------------------
# Lyapunov contraction certificate and theta_max


def sigma_beta(model, G, alpha, rho):
    """Lyapunov certificate (Sigma, beta) for gain G, weight alpha, margin rho.

    Sigma solves Sigma = rho^2 (A - alpha G C) Sigma (A - alpha G C)^T
    + G R G^T + Q, requiring rho times the spectral radius of A - alpha G C
    below one; beta is the minimum eigenvalue of
    (rho^2 - 1)/rho^2 Sigma^{-1} + (1 - alpha^2) C^T R^{-1} C.
    """
    validate(model)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if not 0.0 < alpha <= 1.0:
        raise StabilityError("alpha must be in (0, 1]")
    if rho <= 1.0:
        raise StabilityError("rho must exceed 1")
    F = model.A - alpha * G @ model.C
    r = max(abs(np.linalg.eigvals(F)))
    if rho * r >= 1.0:
        raise StabilityError(
            f"rho * spectral_radius(A - alpha G C) = {rho * r:.6g} >= 1"
        )
    V = sym(G @ model.R @ G.T + model.Q)
    Sigma = check_sympd(solve_discrete_lyapunov(rho * F, V))
    CRC = sym(model.C.T @ chol_solve(model.R, model.C))
    M = sym((rho ** 2 - 1.0) / rho ** 2 * np.linalg.inv(Sigma)
            + (1.0 - alpha ** 2) * CRC)
    beta, _ = spectral_extrema(M)
    return Sigma, float(beta)


@dataclass
class ThetaSearchConfig:
    """Grid-search resolution for the theta_max optimization."""

    alpha_points: int = 100
    gain_points: int = 21
    gain_range: tuple = (-10.0, 10.0)
    rho_points: int = 50
    refine_rounds: int = 3


def _batch_beta(model, alphas, gain_axes, nrho):
    """Best beta over the product grid alphas x gain_axes (one axis per
    entry of G) x an adaptive log-spaced rho sweep.  Vectorized over grid
    cells; returns (best_beta, (alpha, G, rho)) or (-inf, None)."""
    A, C, Q, R = model.A, model.C, model.Q, model.R
    n, m = model.n, model.m
    mesh = np.meshgrid(alphas, *gain_axes, indexing="ij")
    al = mesh[0].ravel()
    Gflat = np.stack([g.ravel() for g in mesh[1:]], axis=1)  # (N, n*m)
    G = Gflat.reshape(-1, n, m)
    F = A[None] - al[:, None, None] * (G @ C[None])
    r = np.abs(np.linalg.eigvals(F)).max(axis=1)
    ok = r < 1.0 - 1e-12
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        return -np.inf, None
    F, G, al, r = F[idx], G[idx], al[idx], r[idx]
    V = G @ R[None] @ G.transpose(0, 2, 1) + Q[None]
    CRC = sym(C.T @ chol_solve(R, C))
    Inn = np.eye(n * n)
    best_val, best_args = -np.inf, None
    # rho = r^{-s}: log-spaced sweep of (1, 1/r) per cell
    for s in np.linspace(1e-6, 1.0 - 1e-9, nrho):
        rho = np.exp(-s * np.log(np.maximum(r, 1e-12)))
        Fr = rho[:, None, None] * F
        K = Inn[None] - np.einsum("nij,nkl->nikjl", Fr, Fr).reshape(-1, n * n, n * n)
        dets = np.abs(np.linalg.det(K))
        sing = dets < 1e-12
        K[sing] = Inn
        Sig = np.linalg.solve(K, V.reshape(-1, n * n, 1)).reshape(-1, n, n)
        Sig[sing] = -np.eye(n)
        Sig = 0.5 * (Sig + Sig.transpose(0, 2, 1))
        w_all = np.linalg.eigvalsh(Sig)
        good = w_all[:, 0] > 0
        if not good.any():
            continue
        Sinv = np.linalg.inv(Sig[good])
        rr, aa = rho[good], al[good]
        M = (((rr ** 2 - 1.0) / rr ** 2)[:, None, None] * Sinv
             + (1.0 - aa ** 2)[:, None, None] * CRC[None])
        w = np.linalg.eigvalsh(0.5 * (M + M.transpose(0, 2, 1)))[:, 0]
        j = int(np.argmax(w))
        if w[j] > best_val:
            gi = np.nonzero(good)[0][j]
            best_val = float(w[j])
            best_args = (float(al[gi]), G[gi].copy(), float(rho[gi]))
    return best_val, best_args


def _beta_search(model, cfg, fix_alpha=None):
    """Grid search for the best beta, with coordinate-wise refinement."""
    n, m = model.n, model.m
    lo, hi = cfg.gain_range
    if fix_alpha is not None:
        alphas = np.array([fix_alpha])
        da = 0.0
    else:
        alphas = np.linspace(1.0 / cfg.alpha_points, 1.0, cfg.alpha_points)
        da = alphas[1] - alphas[0] if cfg.alpha_points > 1 else 0.0
    axes = [np.linspace(lo, hi, cfg.gain_points) for _ in range(n * m)]
    dg = axes[0][1] - axes[0][0]
    val, args = _batch_beta(model, alphas, axes, cfg.rho_points)
    for _ in range(cfg.refine_rounds):
        if args is None:
            break
        a0, G0, _ = args
        g0 = G0.ravel()
        alphas = (np.array([fix_alpha]) if fix_alpha is not None
                  else np.clip(np.linspace(a0 - da, a0 + da, cfg.gain_points),
                               1e-6, 1.0))
        axes = [np.linspace(g - dg, g + dg, cfg.gain_points) for g in g0]
        v2, a2 = _batch_beta(model, alphas, axes, cfg.rho_points)
        if v2 > val:
            val, args = v2, a2
        da /= 10.0
        dg /= 10.0
    return val, args


def theta_max(model, k=10, config=None, tol=1e-6):
    """Risk-sensitivity bound theta_max = min(beta*, phi_k).

    Maximizes beta over (alpha, G, rho) by grid search with refinement
    (and, in the search diagnostics, the alpha = 1 restriction that
    corresponds to robustifying the prediction instead of the update).
    """
    cfg = config or ThetaSearchConfig()
    parts = build_gramian_parts(model, k)
    phik = phi_max(parts, k, tol=tol)
    val, args = _beta_search(model, cfg)
    if args is None:
        raise StabilityError("empty admissible search set for theta_max")
    val1, args1 = _beta_search(model, cfg, fix_alpha=1.0)
    alpha, G, rho = args
    Sigma, beta = sigma_beta(model, G, alpha, rho)
    search = {
        "k": k,
        "alpha_points": cfg.alpha_points,
        "gain_points": cfg.gain_points,
        "rho_points": cfg.rho_points,
        "refine_rounds": cfg.refine_rounds,
        "alpha1": {
            "beta": val1,
            "theta_max": min(val1, phik) if args1 is not None else None,
            "alpha": 1.0,
            "G": args1[1].tolist() if args1 is not None else None,
            "rho": args1[2] if args1 is not None else None,
        },
    }
    return BoundReport(phi_k=phik, theta_max=float(min(beta, phik)),
                       beta=beta, sigma=Sigma, rho=rho, alpha=alpha, G=G,
                       search=search)


def prop6_guard(model, theta, P0, G, alpha, rho, horizon=1000):
    """Certify boundedness of the fixed-theta covariance recursion.

    Checks 0 < P0 <= Sigma and theta <= beta for the given certificate
    arguments; when both hold, runs the fixed-theta covariance recursion
    for ``horizon`` steps and verifies every distorted covariance stays
    positive definite and every predicted covariance stays below Sigma.
    Returns (ok, certificate-dict); never raises on a failed check.
    """
    cert = {"theta": float(theta), "alpha": float(alpha), "rho": float(rho)}
    try:
        P0 = check_sympd(P0)
        Sigma, beta = sigma_beta(model, G, alpha, rho)
    except (NumericsError, StabilityError) as e:
        return False, {**cert, "reason": f"inadmissible certificate arguments: {e}"}
    cert["beta"] = beta
    if theta < 0:
        return False, {**cert, "reason": "theta must be nonnegative"}
    if theta == 0.0:
        return True, {**cert, "reason": "theta = 0 reduces to the standard filter"}
    mn, _ = spectral_extrema(sym(Sigma - P0))
    if mn < -1e-10:
        return False, {**cert,
                       "reason": "P0 exceeds Sigma (ordering violation)"}
    if theta > beta + 1e-12:
        return False, {**cert, "reason": f"theta exceeds beta = {beta:.6g}"}
    try:
        _, _, _, dists, preds = covariance_schedule(
            model, FilterConfig(kind="ursf", theta=theta), P0, horizon)
    except (FilterError, NumericsError) as e:
        return False, {**cert, "reason": f"covariance recursion failed: {e}"}
    worst_pd = min(spectral_extrema(V)[0] for V in dists)
    worst_gap = min(spectral_extrema(sym(Sigma - P))[0] for P in preds)
    cert["min_eig_distorted"] = float(worst_pd)
    cert["min_eig_sigma_minus_pred"] = float(worst_gap)
    if worst_pd <= 0:
        return False, {**cert, "reason": "distorted covariance lost definiteness"}
    if worst_gap < -1e-8:
        return False, {**cert, "reason": "predicted covariance escaped Sigma"}
    cert["reason"] = "certified"
    return True, cert
