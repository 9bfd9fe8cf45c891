import numpy as np
import pytest

from resilientkf import LinearGaussianModel
from resilientkf.filters import FilterConfig, covariance_schedule
from resilientkf.numerics import gamma
from resilientkf.stability import (
    StabilityError,
    ThetaSearchConfig,
    build_gramian_parts,
    c_max,
    pbar_filtered,
    phi_max,
    prop6_guard,
    rk_matrix,
    sigma_beta,
    theta_max,
)


def test_gramian_shapes(model_a):
    k = 10
    parts = build_gramian_parts(model_a, k)
    n, m = 2, 1
    assert parts.obs.shape == (k * m, n)
    assert parts.obs_r.shape == (k * n, n)
    assert parts.Hk.shape == (k * m, k * n)
    assert parts.Lk.shape == (k * n, k * n)
    assert parts.Qk.shape == (k * n, k * n)
    assert parts.Rk_noise.shape == (k * m, k * m)
    # stack ordering: top block is C A^{k-1}, bottom is C
    assert np.allclose(parts.obs[-m:], model_a.C)
    assert np.allclose(parts.obs[:m],
                       model_a.C @ np.linalg.matrix_power(model_a.A, k - 1))
    # strict upper-triangular Toeplitz: zero diagonal blocks
    for i in range(k):
        assert np.abs(parts.Hk[i * m:(i + 1) * m, i * n:(i + 1) * n]).max() == 0.0


def test_gramian_identity_model():
    model = LinearGaussianModel(A=np.eye(2), C=np.eye(2), Q=np.eye(2), R=np.eye(2))
    parts = build_gramian_parts(model, 2)
    # H_1 = C Q^{1/2} = I in the single off-diagonal block
    assert np.allclose(parts.Hk[:2, 2:], np.eye(2))
    assert np.allclose(parts.obs, np.vstack([np.eye(2), np.eye(2)]))


def test_gramian_rejects_small_window(model_a):
    with pytest.raises(StabilityError):
        build_gramian_parts(model_a, 1)


def test_rk_symmetry_and_small_phi_limit(model_a):
    parts = build_gramian_parts(model_a, 10)
    Rk = rk_matrix(parts, 1e-8)
    assert np.abs(Rk - Rk.T).max() < 1e-12
    # phi -> 0+: the S-term vanishes, leaving the PD observability part
    assert np.linalg.eigvalsh(Rk).min() > 0
    limit = parts.T1
    assert np.abs(Rk - limit).max() < 1e-4
    with pytest.raises(StabilityError):
        rk_matrix(parts, parts.phi_sup * 2)


def test_phi_max_bracketing(model_a):
    parts = build_gramian_parts(model_a, 10)
    tol = 1e-6
    phik = phi_max(model_a, 10, tol=tol)
    assert 0.090 <= phik <= 0.100
    lo = np.linalg.eigvalsh(rk_matrix(parts, phik * (1 - 10 * tol))).min()
    hi = np.linalg.eigvalsh(rk_matrix(parts, phik * (1 + 10 * tol))).min()
    assert lo > 0 > hi


def test_phi_max_second_model(model_b):
    phik = phi_max(model_b, 10)
    assert abs(phik - 0.0052) <= 2e-4


def test_pbar_filtered_first_step(model_a):
    P00 = pbar_filtered(model_a, 0)
    CRC = model_a.C.T @ np.linalg.inv(model_a.R) @ model_a.C
    expected = np.linalg.inv(np.linalg.inv(model_a.Q) + CRC)
    assert np.allclose(P00, expected)


def test_pbar_filtered_reference_value(model_a):
    P = pbar_filtered(model_a, 20)
    ref = np.array([[1.8078, 1.2824], [1.2824, 0.9868]])
    assert np.abs(P - ref).max() < 1e-3


def test_pbar_floor_under_distortion(model_a):
    # the distorted filtered covariances sit above the undistorted floor
    q = 20
    floor = pbar_filtered(model_a, q)
    rep = c_max(model_a, k=10, q=q)
    _, _, filts, _, _ = covariance_schedule(
        model_a, FilterConfig(kind="urkf", c=rep.c_max), np.eye(2), 60)
    for t in range(q + 1, 61):
        assert np.linalg.eigvalsh(filts[t] - floor).min() >= -1e-8


def test_c_max_composition(model_a):
    rep = c_max(model_a, k=10, q=20)
    assert rep.c_max == pytest.approx(gamma(rep.pbar_qq, rep.phi_k), abs=1e-12)
    assert rep.c_max > 0


def test_c_max_scalar_closed_form():
    # A=0: P_bar_1 = Q, so the filtered floor is constant (Q^{-1}+R^{-1})^{-1}
    model = LinearGaussianModel(A=[[0.0]], C=[[1.0]], Q=[[1.0]], R=[[1.0]])
    rep = c_max(model, k=1, q=5)
    pbar = 1.0 / (1.0 + 1.0)
    assert rep.pbar_qq[0, 0] == pytest.approx(pbar, abs=1e-12)
    assert rep.c_max == pytest.approx(gamma(np.array([[pbar]]), rep.phi_k), abs=1e-12)


def test_c_max_gain_convergence(model_a):
    rep = c_max(model_a, k=10, q=20)
    gains, _, _, _, _ = covariance_schedule(
        model_a, FilterConfig(kind="urkf", c=rep.c_max), np.eye(2), 600)
    assert np.abs(gains[-1] - gains[-2]).max() < 1e-10


def test_sigma_beta_residual(model_b):
    G = np.array([[0.5], [0.4]])
    alpha, rho = 0.8, 1.02
    Sigma, beta = sigma_beta(model_b, G, alpha, rho)
    F = rho * (model_b.A - alpha * G @ model_b.C)
    V = G @ model_b.R @ G.T + model_b.Q
    res = np.abs(Sigma - (F @ Sigma @ F.T + V)).max()
    assert res <= 1e-9 * max(1.0, np.abs(Sigma).max())
    assert np.linalg.eigvalsh(Sigma).min() > 0


def test_sigma_beta_alpha_one_rho_near_one(model_b):
    # alpha = 1 and rho -> 1+ sends both beta summands to zero
    G = np.array([[0.5], [0.4]])
    _, beta = sigma_beta(model_b, G, 1.0, 1.0 + 1e-9)
    assert abs(beta) < 1e-6


def test_sigma_beta_validation(model_b):
    G = np.array([[0.5], [0.4]])
    with pytest.raises(StabilityError):
        sigma_beta(model_b, G, 0.8, 0.99)
    with pytest.raises(StabilityError):
        sigma_beta(model_b, G, 1.5, 1.02)
    with pytest.raises(StabilityError):
        sigma_beta(model_b, G, 0.8, 50.0)  # rho * radius >= 1


def test_theta_max_report_invariant(model_b):
    cfg = ThetaSearchConfig(alpha_points=20, gain_points=9, rho_points=15,
                            refine_rounds=1)
    rep = theta_max(model_b, k=10, config=cfg)
    Sigma, beta = sigma_beta(model_b, rep.G, rep.alpha, rep.rho)
    assert min(beta, rep.phi_k) == pytest.approx(rep.theta_max, abs=1e-12)
    # free-alpha bound dominates the alpha = 1 restriction
    assert rep.theta_max >= rep.search["alpha1"]["theta_max"] - 1e-12


def test_prop6_guard_certifies(model_b):
    rep = theta_max(model_b, k=10,
                    config=ThetaSearchConfig(alpha_points=20, gain_points=9,
                                             rho_points=15, refine_rounds=1))
    Sigma, beta = sigma_beta(model_b, rep.G, rep.alpha, rep.rho)
    ok, cert = prop6_guard(model_b, beta, Sigma, rep.G, rep.alpha, rep.rho)
    assert ok, cert
    assert cert["min_eig_sigma_minus_pred"] >= -1e-8


def test_prop6_guard_rejections(model_b):
    G = np.array([[0.5], [0.4]])
    Sigma, beta = sigma_beta(model_b, G, 0.8, 1.02)
    ok, cert = prop6_guard(model_b, 0.0, Sigma, G, 0.8, 1.02)
    assert ok  # theta = 0 is trivially safe
    ok, cert = prop6_guard(model_b, beta, 2.0 * Sigma, G, 0.8, 1.02)
    assert not ok and "ordering" in cert["reason"]
    ok, cert = prop6_guard(model_b, 10 * beta + 1.0, Sigma, G, 0.8, 1.02)
    assert not ok
