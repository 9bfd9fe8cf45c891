"""State-space model representations, validation, and simulation.

Provides the nominal time-invariant linear-Gaussian model, Gaussian beliefs,
trajectory containers, mass-spring-damper discretization (both the nominal
design model and the continuous-time "actual" generator used by the
benchmark), and nominal-model simulation.
"""

import json
import numpy as np
from dataclasses import dataclass, field

from scipy.linalg import expm

from .numerics import NumericsError, check_sympd, sym, spd_sqrt


class ModelError(ValueError):
    """Raised when a model fails validation."""


@dataclass
class LinearGaussianModel:
    """Time-invariant model x_{t+1} = A x_t + w_t, y_t = C x_t + v_t.

    w_t ~ N(0, Q), v_t ~ N(0, R), both white and mutually independent.
    """

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.C.shape[0]


@dataclass
class GaussianBelief:
    """Gaussian state belief N(mean, cov)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = check_sympd(self.cov)
        if self.mean.shape[0] != self.cov.shape[0]:
            raise ModelError("belief mean/covariance dimension mismatch")


@dataclass
class Trajectory:
    """Simulated states x_0..x_N and observations y_0..y_N."""

    states: np.ndarray       # (N+1, n)
    observations: np.ndarray  # (N+1, m)
    seed: int

    def __post_init__(self):
        if len(self.states) != len(self.observations):
            raise ModelError("state/observation horizon mismatch")


def observability_matrix(A, C):
    n = A.shape[0]
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def is_observable(A, C):
    return np.linalg.matrix_rank(observability_matrix(A, C)) == A.shape[0]


def validate(model):
    """Validate a LinearGaussianModel; returns the model on success.

    Requires Q > 0 and R > 0 and consistent dimensions.  Observability of
    (A, C) is diagnosed but not fatal (the convergence bounds require it;
    plain filtering does not).  Q > 0 implies reachability of (A, Q).
    """
    n = model.A.shape[0]
    if model.A.shape != (n, n):
        raise ModelError(f"A must be square, got {model.A.shape}")
    if model.C.shape[1] != n:
        raise ModelError(
            f"C has {model.C.shape[1]} columns, expected {n}"
        )
    m = model.C.shape[0]
    try:
        check_sympd(model.Q)
    except NumericsError as e:
        raise ModelError(f"Q must be symmetric positive definite: {e}")
    try:
        check_sympd(model.R)
    except NumericsError as e:
        raise ModelError(f"R must be symmetric positive definite: {e}")
    if model.Q.shape != (n, n):
        raise ModelError("Q dimension mismatch")
    if model.R.shape != (m, m):
        raise ModelError("R dimension mismatch")
    model.observable = is_observable(model.A, model.C)
    return model


@dataclass
class MsdParams:
    """Mass-spring-damper parameters.

    The continuous dynamics are m p'' + c (p' + nu) + k p = F with external
    force F and a small disturbance nu acting through the damper.
    """

    mass: float = 0.1
    spring: float = 5.0
    damping: float = 2.0
    nominal_force_var: float = 1.0
    force_var: float = 1.0
    disturbance_var: float = 0.0
    sample_time: float = 0.1

    def __post_init__(self):
        if min(self.mass, self.spring, self.damping, self.sample_time) <= 0:
            raise ModelError("mass, spring, damping, sample_time must be positive")
        if self.force_var <= 0 or self.nominal_force_var <= 0:
            raise ModelError("force variances must be positive")
        if self.disturbance_var < 0:
            raise ModelError("disturbance_var must be nonnegative")


def _continuous_matrices(p):
    Ac = np.array([[0.0, 1.0], [-p.spring / p.mass, -p.damping / p.mass]])
    Bc = np.array([[0.0], [1.0 / p.mass]])
    return Ac, Bc


def van_loan_cov(Ac, Bc, psd, Ts):
    """Process-noise covariance of the sampled system via the augmented
    matrix-exponential construction, for continuous white noise of intensity
    ``psd`` injected through Bc."""
    n = Ac.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -Ac
    M[:n, n:] = Bc @ Bc.T * psd
    M[n:, n:] = Ac.T
    E = expm(M * Ts)
    Ad = E[n:, n:].T
    return sym(Ad @ E[:n, n:])


def zoh_input(Ac, Bc, Ts):
    """Discrete input matrix for a zero-order-hold input: int_0^Ts e^{Ac s} ds Bc."""
    return np.linalg.solve(Ac, (expm(Ac * Ts) - np.eye(Ac.shape[0]))) @ Bc


@dataclass
class ActualMsdDynamics:
    """Generator for the physical (continuous-time, sampled) system.

    The state evolves as x_{t+1} = A x_t + w_t with w_t drawn from the exact
    sampled covariance of the continuous force and damper-disturbance noises.
    """

    A: np.ndarray
    Qw: np.ndarray  # sampled process-noise covariance

    def noise_chol(self):
        return np.linalg.cholesky(self.Qw + 1e-15 * np.eye(self.Qw.shape[0]))


def msd_discretize(p, measurement_var=0.25, jitter=1e-10):
    """Discretize the mass-spring-damper system.

    Returns (nominal, actual):

    - ``nominal`` is the designer's model: exact zero-order-hold dynamics
      A = expm(Ac Ts) with the force modeled as *discrete-time* white noise
      of variance ``nominal_force_var`` injected through the sampled input channel
      (plus a tiny diagonal jitter so Q stays positive definite), no damper
      disturbance, displacement measurement C = [1 0] with variance
      ``measurement_var``.
    - ``actual`` generates the physical system: the same A, but with the
      sampled covariance of the continuous-time force (intensity
      ``force_var``) and damper disturbance (force intensity
      damping^2 * disturbance_var) obtained by the augmented-exponential
      construction.

    The nominal and actual noise models deliberately differ: the designer
    posits simple per-sample force noise, while the physical plant
    integrates continuous excitation over each sampling interval.  This
    understated process noise is the model mismatch the robust filters are
    meant to absorb.
    """
    Ac, Bc = _continuous_matrices(p)
    Ts = p.sample_time
    A = expm(Ac * Ts)
    Bd = zoh_input(Ac, Bc, Ts)
    Qnom = sym(Bd @ Bd.T * p.nominal_force_var + jitter * np.eye(2))
    C = np.array([[1.0, 0.0]])
    R = np.array([[measurement_var]])
    nominal = validate(LinearGaussianModel(A=A, C=C, Q=Qnom, R=R))
    psd_total = p.force_var + p.damping ** 2 * p.disturbance_var
    Qact = van_loan_cov(Ac, Bc, psd_total, Ts)
    actual = ActualMsdDynamics(A=A, Qw=Qact)
    return nominal, actual


def simulate_nominal(model, init, N, seed):
    """Simulate the nominal model for N steps; deterministic per seed."""
    validate(model)
    rng = np.random.default_rng(seed)
    n, m = model.n, model.m
    Lq = spd_sqrt(model.Q)
    Lr = spd_sqrt(model.R)
    Lp = np.linalg.cholesky(init.cov + 1e-15 * np.eye(n))
    x = init.mean + Lp @ rng.standard_normal(n)
    states = np.zeros((N + 1, n))
    obs = np.zeros((N + 1, m))
    for t in range(N + 1):
        states[t] = x
        obs[t] = model.C @ x + Lr @ rng.standard_normal(m)
        x = model.A @ x + Lq @ rng.standard_normal(n)
    return Trajectory(states=states, observations=obs, seed=seed)


# ---------------------------------------------------------------------------
# File formats


def model_to_dict(model):
    return {
        "A": model.A.tolist(),
        "C": model.C.tolist(),
        "Q": model.Q.tolist(),
        "R": model.R.tolist(),
    }


def model_from_dict(d):
    try:
        return validate(
            LinearGaussianModel(A=d["A"], C=d["C"], Q=d["Q"], R=d["R"])
        )
    except KeyError as e:
        raise ModelError(f"model file missing key {e}")


def load_model(path):
    with open(path) as f:
        return model_from_dict(json.load(f))


def save_model(model, path):
    with open(path, "w") as f:
        json.dump(model_to_dict(model), f, indent=2)


def belief_from_dict(d):
    try:
        return GaussianBelief(mean=np.asarray(d["mean"], dtype=float),
                              cov=np.asarray(d["cov"], dtype=float))
    except KeyError as e:
        raise ModelError(f"belief file missing key {e}")
