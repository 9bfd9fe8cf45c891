"""Worst-case (hostile) model synthesis and evaluation.

Two adversarial constructions are provided, both driven by the same forward
gain/budget pass of the update-resilient filter:

1. ``worst_case_*`` — the saddle-achieving adversary.  The per-step minimax
   game is solved in terms of the conditional joint law of (state,
   measurement) given the past; its maximizer inflates the filtered state
   covariance from P_filt to V = (P_filt^{-1} - theta I)^{-1} while leaving
   the measurement statistics and filter gain unchanged.  That law is
   realized by injecting extra state noise d_t ~ N(0, V_t - P_filt_t) after
   each measurement update, invisible to the sensor at injection time.
   Under this model the update-resilient filter is the exactly matched
   Kalman filter, so it is worst-case optimal by construction; any other
   gain schedule does strictly worse.

2. ``backward_pass`` / ``assemble_lf`` / ``simulate_lf`` — a hostile
   observation-channel model on a 3n-dimensional augmented state, obtained
   by a backward recursion that converts the per-step exponential tilting
   of the measurement-noise density into proper Gaussian conditionals.
   This construction keeps the state process exactly nominal and corrupts
   only the measurement channel (noise correlated with the filter's own
   error and inflated in variance).  It is a strictly weaker adversary than
   the saddle-achieving one: constrained to the observation channel, it
   cannot reproduce the inflated conditional state covariance, and the
   evaluated worst-case variances come out below the game value.

``error_cov_recursion`` and ``worst_case_error_cov`` propagate the exact
error covariance of an arbitrary gain schedule under constructions 2 and 1
respectively, each as a Lyapunov recursion on a 3n x 3n joint covariance
whose top-left n x n block is the evaluated estimator's error covariance.
"""

import numpy as np
from dataclasses import dataclass

from .model import validate, GaussianBelief, Trajectory
from .numerics import (
    NumericsError,
    check_sympd,
    chol_solve,
    solve_budget,
    spd_sqrt,
    spectral_extrema,
    sym,
)
from .filters import FilterError, _inflate


class SynthesisError(RuntimeError):
    """Raised when the hostile-model synthesis is infeasible."""


# ---------------------------------------------------------------------------
# Forward pass


@dataclass
class ForwardPass:
    """Gain/budget schedule of the update-resilient filter over t = 0..N.

    ``gains[t]`` is the filter gain, ``thetas[t]`` the distortion strength,
    ``cov_pred``/``cov_filt``/``cov_distorted`` the predicted, filtered, and
    inflated covariances.  Covariances are data-independent, so no
    observations are needed.
    """

    gains: list
    thetas: list
    cov_pred: list
    cov_filt: list
    cov_distorted: list

    @property
    def horizon(self):
        return len(self.gains) - 1


def forward_gains(model, budget, N, P0=None, solver_tol=1e-12):
    """Run the covariance-only forward recursion of the robust filter.

    ``budget`` is either {"c": tolerance} for the per-step budget solve or
    {"theta": value} for the fixed-parameter variant.
    """
    validate(model)
    n = model.n
    P = check_sympd(P0 if P0 is not None else np.eye(n))
    use_c = "c" in budget
    if use_c and budget["c"] <= 0:
        raise SynthesisError("tolerance c must be positive")
    if not use_c and "theta" not in budget:
        raise SynthesisError("budget must specify either c or theta")
    gains, thetas, preds, filts, dists = [], [], [], [], []
    for t in range(N + 1):
        preds.append(P.copy())
        S = sym(model.C @ P @ model.C.T + model.R)
        L = chol_solve(S, model.C @ P).T
        Ptt = sym(P - L @ model.C @ P)
        try:
            theta = (solve_budget(Ptt, budget["c"], tol=solver_tol).theta
                     if use_c else float(budget["theta"]))
            V = _inflate(Ptt, theta)
        except (NumericsError, FilterError) as e:
            raise SynthesisError(f"budget solve failed at t={t}: {e}") from e
        gains.append(L)
        thetas.append(theta)
        filts.append(Ptt)
        dists.append(V)
        P = sym(model.A @ V @ model.A.T + model.Q)
    return ForwardPass(gains=gains, thetas=thetas, cov_pred=preds,
                       cov_filt=filts, cov_distorted=dists)


# ---------------------------------------------------------------------------
# Saddle-achieving worst-case model (noise-injection form)


def injection_covariances(fwd):
    """Extra state-noise covariances D_t = V_t - P_filt_t of the
    saddle-achieving adversary, one per step."""
    return [sym(V - P) for V, P in zip(fwd.cov_distorted, fwd.cov_filt)]


def simulate_worst_case(model, fwd, init, n_traj, seed):
    """Draw trajectories from the saddle-achieving worst-case law.

    x_{t+1} = A (x_t + d_t) + w_t with d_t ~ N(0, V_t - P_filt_t) injected
    after the measurement at t, y_t = C x_t + v_t with nominal v_t.
    Returns (states, observations) with shapes (n_traj, N+1, n) and
    (n_traj, N+1, m).
    """
    rng = np.random.default_rng(seed)
    n, m = model.n, model.m
    N = fwd.horizon
    Ds = injection_covariances(fwd)
    Lq = spd_sqrt(model.Q)
    Lr = spd_sqrt(model.R)
    Lp = np.linalg.cholesky(init.cov + 1e-15 * np.eye(n))
    x = init.mean + rng.standard_normal((n_traj, n)) @ Lp.T
    X = np.zeros((n_traj, N + 1, n))
    Y = np.zeros((n_traj, N + 1, m))
    for t in range(N + 1):
        X[:, t] = x
        Y[:, t] = x @ model.C.T + rng.standard_normal((n_traj, m)) @ Lr.T
        Ld = np.linalg.cholesky(Ds[t] + 1e-15 * np.eye(n))
        d = rng.standard_normal((n_traj, n)) @ Ld.T
        x = (x + d) @ model.A.T + rng.standard_normal((n_traj, n)) @ Lq.T
    return X, Y


def worst_case_error_cov(model, eval_gains, fwd, P0=None):
    """Exact error covariance of a gain schedule under the saddle-achieving
    worst-case model.

    Propagates the 3n x 3n joint covariance of [e'_t; e_t; xi_t], where e'
    is the evaluated estimator's filtered error, e the robust filter's, and
    xi_t = w_t + A d_t the effective worst-case process noise entering the
    transition t -> t+1.  Returns the list of 3n x 3n matrices, one per
    step; the top-left n x n block of the t-th entry is the evaluated
    estimator's filtered error covariance at t.
    """
    n = model.n
    N = fwd.horizon
    if len(eval_gains) != N + 1:
        raise SynthesisError("gain schedule length does not match the horizon")
    P0 = check_sympd(P0 if P0 is not None else fwd.cov_pred[0])
    Ds = injection_covariances(fwd)
    A, C, Q, R = model.A, model.C, model.Q, model.R
    I = np.eye(n)

    def filtered_block(Lp, L, Ppred_joint):
        """Joint filtered covariance of (e'_t, e_t) given the joint
        prediction-error covariance and the shared measurement noise."""
        Ep = I - Lp @ C
        E = I - L @ C
        T = np.block([[Ep, np.zeros((n, n))], [np.zeros((n, n)), E]])
        noise = np.block([[Lp @ R @ Lp.T, Lp @ R @ L.T],
                          [L @ R @ Lp.T, L @ R @ L.T]])
        return sym(T @ Ppred_joint @ T.T + noise)

    out = []
    # both estimators start from the same prior, so the joint prediction
    # error at t=0 is perfectly correlated
    J = np.block([[P0, P0], [P0, P0]])
    for t in range(N + 1):
        F = filtered_block(eval_gains[t], fwd.gains[t], J)
        xi_cov = sym(Q + A @ Ds[t] @ A.T)
        Pi = np.zeros((3 * n, 3 * n))
        Pi[:2 * n, :2 * n] = F
        Pi[2 * n:, 2 * n:] = xi_cov
        out.append(sym(Pi))
        # propagate: e*_{t+1}^pred = A e*_t + xi_t (shared xi)
        Ablk = np.block([[A, np.zeros((n, n))], [np.zeros((n, n)), A]])
        ones = np.vstack([I, I])
        J = sym(Ablk @ F @ Ablk.T + ones @ xi_cov @ ones.T)
    return out


def one_step_joints(model, fwd, t):
    """Nominal and worst-case one-step joint covariances of (x_t, y_t)
    conditioned on the past.

    The nominal joint has state block P_pred, measurement block
    K_y = C P_pred C^T + R, and cross block P_pred C^T.  The per-step
    maximizer keeps the measurement statistics and cross covariance and
    inflates the conditional state covariance from P_filt to V, so its
    state block is V + L K_y L^T.  The KL divergence between the two
    joints equals the budget gamma(P_filt, theta) spent at that step.
    Returns (K_nominal, K_worst), each (n+m) x (n+m).
    """
    n, m = model.n, model.m
    P = fwd.cov_pred[t]
    L = fwd.gains[t]
    V = fwd.cov_distorted[t]
    Ky = sym(model.C @ P @ model.C.T + model.R)
    Kxy = P @ model.C.T
    K = np.block([[P, Kxy], [Kxy.T, Ky]])
    Kx_tilde = sym(V + L @ Ky @ L.T)
    Kt = np.block([[Kx_tilde, Kxy], [Kxy.T, Ky]])
    return sym(K), sym(Kt)


# ---------------------------------------------------------------------------
# Hostile observation-channel model (3n augmented state form)


@dataclass
class BackwardPass:
    """Backward recursion output for the observation-channel adversary.

    All channel quantities live in whitened measurement units (measurement
    noise scaled to identity).  Per step t: ``omega_inv[t]`` (n x n PSD),
    ``W[t]`` = theta_t I + omega_inv[t+1] (n x n, PD for theta_t > 0),
    ``O[t]`` (m x m PD) the whitened hostile measurement-noise covariance
    (identity at zero budget), ``F[t]`` (m x n) its feedback onto the
    filter's error, ``Ups[t]`` the lower-triangular square root of
    ``O[t]``.  ``r_half`` maps whitened outputs back to physical units.
    """

    omega_inv: list
    W: list
    O: list
    F: list
    Ups: list
    r_half: np.ndarray  # R^{1/2}, lower triangular


def backward_pass(fwd, model):
    """Backward recursion synthesizing the observation-channel adversary.

    In whitened measurement units (Lw = L R^{1/2}, Cw = R^{-1/2} C):
    terminal condition omega_inv[N+1] = 0; then for t = N..0:
    W_{t+1} = theta_t I + omega_inv_{t+1},
    O_t = (I_m - Lw^T W_{t+1} Lw)^{-1},
    F_t = -O_t Lw^T W_{t+1} (I - Lw Cw),
    omega_inv_t = Abar^T (W_{t+1}^{-1} - Lw Lw^T)^{-1} Abar
    with Abar = (I - Lw Cw) A = (I - L C) A.  The omega update is the
    symmetric-definite safe form; it equals
    A^T F^T O^{-1} F A + Abar^T W Abar algebraically.
    """
    n, m = model.n, model.m
    N = fwd.horizon
    A, C = model.A, model.C
    Rh = spd_sqrt(model.R)
    omega_inv = [None] * (N + 2)
    Ws = [None] * (N + 1)
    Os = [None] * (N + 1)
    Fs = [None] * (N + 1)
    Upss = [None] * (N + 1)
    omega_inv[N + 1] = np.zeros((n, n))
    for t in range(N, -1, -1):
        L = fwd.gains[t]
        Lw = L @ Rh
        theta = fwd.thetas[t]
        W = sym(theta * np.eye(n) + omega_inv[t + 1])
        Oinv = sym(np.eye(m) - Lw.T @ W @ Lw)
        mn, _ = spectral_extrema(Oinv)
        if mn <= 0:
            raise SynthesisError(
                f"channel synthesis infeasible at t={t}: "
                "I - L^T W L is not positive definite (budget too large)"
            )
        O = check_sympd(np.linalg.inv(Oinv))
        F = -O @ Lw.T @ W @ (np.eye(n) - L @ C)
        Abar = (np.eye(n) - L @ C) @ A
        if theta == 0.0 and np.abs(omega_inv[t + 1]).max() == 0.0:
            omega_inv[t] = np.zeros((n, n))
        else:
            Winv = np.linalg.inv(check_sympd(W))
            core = sym(Winv - Lw @ Lw.T)
            mnc, _ = spectral_extrema(core)
            if mnc <= 0:
                raise SynthesisError(
                    f"channel synthesis infeasible at t={t}: "
                    "W^{-1} - L L^T is not positive definite"
                )
            omega_inv[t] = sym(Abar.T @ np.linalg.inv(core) @ Abar)
        Ws[t] = W
        Os[t] = O
        Fs[t] = F
        Upss[t] = spd_sqrt(O)
    return BackwardPass(omega_inv=omega_inv, W=Ws, O=Os, F=Fs, Ups=Upss,
                        r_half=Rh)


@dataclass
class LeastFavorableModel:
    """Hostile observation-channel model on the augmented state
    eta_t = [x_t; e_{t-1}; w_{t-1}] (3n-dimensional), driven by noise
    v_t = [w_t; u_t] with covariance Xi = blockdiag(Q, I_m)."""

    Abar: list  # 3n x 3n per step
    Bbar: list  # 3n x (n+m) per step
    Cbar: list  # m x 3n per step
    Dbar: list  # m x (n+m) per step
    Xi: np.ndarray
    n: int
    m: int
    N: int


def assemble_lf(fwd, bwd, model):
    """Assemble the augmented-state hostile channel model."""
    n, m = model.n, model.m
    N = fwd.horizon
    A, C, Q = model.A, model.C, model.Q
    I = np.eye(n)
    Xi = np.block([
        [Q, np.zeros((n, m))],
        [np.zeros((m, n)), np.eye(m)],
    ])
    Abars, Bbars, Cbars, Dbars = [], [], [], []
    for t in range(N + 1):
        L = fwd.gains[t]
        # physical-unit feedback and noise shaping (bwd stores whitened)
        F = bwd.r_half @ bwd.F[t]
        Ups = bwd.r_half @ bwd.Ups[t]
        Abar = np.zeros((3 * n, 3 * n))
        Abar[:n, :n] = A
        Abar[n:2 * n, n:2 * n] = A - L @ C @ A - L @ F @ A
        Abar[n:2 * n, 2 * n:] = I - L @ F - L @ C
        Bbar = np.zeros((3 * n, n + m))
        Bbar[:n, :n] = I
        Bbar[n:2 * n, n:] = -L @ Ups
        Bbar[2 * n:, :n] = I
        Cbar = np.hstack([C, F @ A, F])
        Dbar = np.hstack([np.zeros((m, n)), Ups])
        Abars.append(Abar)
        Bbars.append(Bbar)
        Cbars.append(Cbar)
        Dbars.append(Dbar)
    return LeastFavorableModel(Abar=Abars, Bbar=Bbars, Cbar=Cbars,
                               Dbar=Dbars, Xi=Xi, n=n, m=m, N=N)


def simulate_lf(lf, init, seed, n_traj=1):
    """Simulate the hostile channel model.

    The augmented state starts at eta_0 = [x_0; 0; x_0 - xhat_0]: placing
    the initial estimation error in the process-noise slot makes the
    filter's prediction error at t = 0 come out as x_0 - xhat_0 exactly.
    Returns (eta, states, observations) with shapes (n_traj, N+1, 3n),
    (n_traj, N+1, n), (n_traj, N+1, m).
    """
    rng = np.random.default_rng(seed)
    n, m, N = lf.n, lf.m, lf.N
    Lxi = np.linalg.cholesky(lf.Xi + 1e-15 * np.eye(n + m))
    Lp = np.linalg.cholesky(init.cov + 1e-15 * np.eye(n))
    x0 = init.mean + rng.standard_normal((n_traj, n)) @ Lp.T
    eta = np.zeros((n_traj, 3 * n))
    eta[:, :n] = x0
    eta[:, 2 * n:] = x0 - init.mean
    etas = np.zeros((n_traj, N + 1, 3 * n))
    Y = np.zeros((n_traj, N + 1, m))
    for t in range(N + 1):
        v = rng.standard_normal((n_traj, n + m)) @ Lxi.T
        etas[:, t] = eta
        Y[:, t] = eta @ lf.Cbar[t].T + v @ lf.Dbar[t].T
        eta = eta @ lf.Abar[t].T + v @ lf.Bbar[t].T
    return etas, etas[:, :, :n], Y


def error_cov_recursion(model, eval_gains, fwd, bwd, P0=None):
    """Error covariance of a gain schedule under the hostile channel model.

    Lyapunov recursion on the 3n x 3n covariance of [e'_t; e_t; w_t]
    (evaluated estimator's error, robust filter's error, process noise):

        Pi_{t+1} = Gam_t Pi_t Gam_t^T + X_t Xi X_t^T

    with Gam_t assembled from Del' = A - L'CA, Del = A - LCA, Lam' =
    I - L'F - L'C, Lam = I - LF - LC, and X_t carrying the fresh noises.
    The top-left n x n block of Pi_t is the evaluated estimator's filtered
    error covariance.  Initialization Pi_{-1} = blockdiag(0, 0, P0) places
    the initial estimation error in the noise slot, consistent with
    ``simulate_lf``.
    """
    n, m = model.n, model.m
    N = fwd.horizon
    if len(eval_gains) != N + 1:
        raise SynthesisError("gain schedule length does not match the horizon")
    P0 = check_sympd(P0 if P0 is not None else fwd.cov_pred[0])
    A, C, Q = model.A, model.C, model.Q
    I = np.eye(n)
    Xi = np.block([
        [Q, np.zeros((n, m))],
        [np.zeros((m, n)), np.eye(m)],
    ])
    Pi = np.zeros((3 * n, 3 * n))
    Pi[2 * n:, 2 * n:] = P0
    out = []
    for t in range(N + 1):
        L = fwd.gains[t]
        Lp = eval_gains[t]
        F = bwd.r_half @ bwd.F[t]
        Ups = bwd.r_half @ bwd.Ups[t]
        Delp = A - Lp @ C @ A
        Del = A - L @ C @ A
        Lamp = I - Lp @ F - Lp @ C
        Lam = I - L @ F - L @ C
        Gam = np.zeros((3 * n, 3 * n))
        Gam[:n, :n] = Delp
        Gam[:n, n:2 * n] = -Lp @ F @ A
        Gam[:n, 2 * n:] = Lamp
        Gam[n:2 * n, n:2 * n] = Del - L @ F @ A
        Gam[n:2 * n, 2 * n:] = Lam
        X = np.zeros((3 * n, n + m))
        X[:n, n:] = -Lp @ Ups
        X[n:2 * n, n:] = -L @ Ups
        X[2 * n:, :n] = I
        Pi = sym(Gam @ Pi @ Gam.T + X @ Xi @ X.T)
        out.append(Pi)
    return out


# ---------------------------------------------------------------------------
# Steady-state backward fixed point


def steady_state_w(model, L, theta, tol=1e-10, max_iter=100000):
    """Fixed point of the backward recursion at converged (L, theta).

    Iterates W <- Abar^T (W^{-1} - L R L^T)^{-1} Abar + theta I from
    W = theta I, with Abar = (I - L C) A.  Returns (W, J, spectral radius
    of Abar - Lw J^T), where Lw is the whitened gain L R^{1/2} and
    J = Abar^T W Lw (Lw^T W Lw - I)^{-1}; the radius being below one
    certifies mean-square boundedness of the filter error under the
    hostile channel model in steady state.
    """
    n = model.n
    A, C = model.A, model.C
    L = np.asarray(L, dtype=float)
    Lw = L @ spd_sqrt(model.R)
    Abar = (np.eye(n) - L @ C) @ A
    if theta < 0:
        raise SynthesisError("theta must be nonnegative")
    W = theta * np.eye(n)
    if theta == 0.0:
        J = np.zeros((n, model.m))
        rad = float(max(abs(np.linalg.eigvals(Abar))))
        return W, J, rad
    streak = 0
    for _ in range(max_iter):
        Winv = np.linalg.inv(check_sympd(W))
        core = sym(Winv - L @ model.R @ L.T)
        mn, _ = spectral_extrema(core)
        if mn <= 0:
            raise SynthesisError(
                "steady-state recursion infeasible: W^{-1} - L R L^T lost "
                "positive definiteness; reduce theta or the tolerance"
            )
        Wn = sym(Abar.T @ np.linalg.inv(core) @ Abar + theta * np.eye(n))
        if np.abs(Wn - W).max() <= tol * max(1.0, np.abs(Wn).max()):
            streak += 1
            if streak >= 10:
                W = Wn
                break
        else:
            streak = 0
        W = Wn
    else:
        raise SynthesisError(
            "steady-state backward recursion did not converge; "
            "a smaller theta or tolerance may be required"
        )
    M = sym(Lw.T @ W @ Lw - np.eye(model.m))
    J = Abar.T @ W @ Lw @ np.linalg.inv(M)
    rad = float(max(abs(np.linalg.eigvals(Abar - Lw @ J.T))))
    return W, J, rad
