import numpy as np
import pytest
from scipy.integrate import quad

from ellipsorb.geometry import EllipseParams, elliptic_data, metric_xi
from ellipsorb.quadrature import periodic_nodes
from ellipsorb.spectral import (actions_on_density_over_xi2, adjoint_q_matrix,
                                derivative_actions, eval_forward_basis,
                                forward_basis_matrix, kappa_coefficients, make_basis,
                                singular_actions_adjoint, singular_actions_forward,
                                trig_table)


def test_index_layout():
    basis = make_basis(EllipseParams(10, 6, 0, 0, 0), 0, 10)
    assert list(basis.orders) == [1, 2, 3, 4, 0, 1, 2, 3, 4, 5]
    assert list(basis.is_sin.astype(int)) == [1, 1, 1, 1, 0, 0, 0, 0, 0, 0]
    assert basis.alpha[4] == pytest.approx(0.5)          # order 0
    assert basis.alpha[0] == pytest.approx(0.125)        # e^{-2 ln 2}/2
    assert np.all(np.diff(basis.alpha[4:]) < 0)          # strictly decreasing in order


def test_eval_forward_basis():
    p = EllipseParams(10, 6, 0, 0, 0)
    basis = make_basis(p, 0, 10)
    ed = elliptic_data(p)
    # cos order 0 is 1/Xi
    assert eval_forward_basis(basis, 4, 0.7) == pytest.approx(1.0 / metric_xi(ed, 0.7))
    # sin order 1 vanishes at pi
    assert eval_forward_basis(basis, 0, np.pi) == pytest.approx(0.0, abs=1e-14)
    # sin order 2 at pi/4
    assert eval_forward_basis(basis, 1, np.pi / 4) == pytest.approx(
        1.0 / metric_xi(ed, np.pi / 4))
    with pytest.raises(IndexError):
        eval_forward_basis(basis, 10, 0.0)


def test_forward_closed_forms():
    p = EllipseParams(10, 6, 0, 0, 0)
    basis = make_basis(p, 0, 10)
    t = periodic_nodes(32)
    s_vals, k_vals = singular_actions_forward(basis, t)
    assert np.allclose(s_vals[0], -0.375 * np.sin(t), atol=1e-14)
    ed = basis.elliptic
    assert np.allclose(s_vals[4], ed.rho + np.log(ed.c / 2.0))
    psi = forward_basis_matrix(basis, t)
    assert np.allclose(k_vals[0], -0.125 * psi[0], atol=1e-15)
    assert np.allclose(k_vals[4], 0.5 * psi[4], atol=1e-15)


@pytest.mark.parametrize("ab", [(10, 6), (10, 4), (10, 2)])
def test_forward_actions_vs_quadrature(ab, laplace_oracle):
    p = EllipseParams(ab[0], ab[1], 0, 0, 0)
    basis = make_basis(p, 0, 10)
    oracle = laplace_oracle(p, n=512)
    psi = forward_basis_matrix(basis, oracle.nodes)
    s_ref = oracle.s_forward(psi)
    k_ref = oracle.k_star(psi)
    s_vals, k_vals = singular_actions_forward(basis, oracle.nodes)
    assert np.max(np.abs(s_ref - s_vals.T)) < 1e-6
    assert np.max(np.abs(k_ref - k_vals.T)) < 1e-6


@pytest.mark.parametrize("ab", [(10, 6), (10, 4), (10, 2)])
def test_eigen_residual(ab, laplace_oracle):
    # || K*[psi_i] -/+ alpha psi_i ||_inf <= 1e-6 against the quadrature oracle
    p = EllipseParams(ab[0], ab[1], 0, 0, 0)
    basis = make_basis(p, 0, 10)
    oracle = laplace_oracle(p, n=512)
    psi = forward_basis_matrix(basis, oracle.nodes)
    k_ref = oracle.k_star(psi)
    sign = np.where(basis.is_sin, -1.0, 1.0)
    target = (sign * basis.alpha)[None, :] * psi.T
    assert np.max(np.abs(k_ref - target)) < 1e-6


def test_adjoint_closed_forms():
    p = EllipseParams(10, 6, 0, 0, 0)
    basis = make_basis(p, 0, 10)
    t = periodic_nodes(32)
    xi = metric_xi(basis.elliptic, t)
    s_vals, k_vals = singular_actions_adjoint(basis, t)
    assert np.allclose(s_vals[0], -0.375 * np.sin(t) * xi, atol=1e-13)
    q = adjoint_q_matrix(basis, t)
    assert np.allclose(k_vals[4], 0.5 * q[4], atol=1e-14)   # alpha_0 = 1/2


def test_adjoint_actions_vs_quadrature(laplace_oracle):
    p = EllipseParams(10, 6, 0, 0, 0)
    basis = make_basis(p, 0, 10)
    oracle = laplace_oracle(p, n=512)
    trig = trig_table(basis, oracle.nodes)
    q = adjoint_q_matrix(basis, oracle.nodes)
    s_ref = oracle.s_adjoint(trig)
    k_ref = oracle.k_adjoint(q)
    s_vals, k_vals = singular_actions_adjoint(basis, oracle.nodes)
    assert np.max(np.abs(s_ref - s_vals.T)) < 1e-6
    assert np.max(np.abs(k_ref - k_vals.T)) < 1e-6


def test_adjointness(laplace_oracle):
    # <K*[f], g> = <f, K[g]> in L2([0, 2pi)) for random trigonometric f, g
    p = EllipseParams(10, 5, 0, 0, 0)
    oracle = laplace_oracle(p, n=512)
    rng = np.random.default_rng(11)
    t = oracle.nodes
    w = 2.0 * np.pi / t.size
    for _ in range(10):
        cf = rng.normal(size=5)
        cg = rng.normal(size=5)
        f = sum(cf[n] * np.cos((n + 1) * t) for n in range(5)) + cf[0] * np.sin(2 * t)
        g = sum(cg[n] * np.sin((n + 1) * t) for n in range(5)) + cg[1]
        lhs = w * np.sum(oracle.k_star(f[None, :])[:, 0] * g)
        rhs = w * np.sum(f * oracle.k_adjoint(g[None, :])[:, 0])
        assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-10)


def test_kappa_parity_and_symmetry():
    basis = make_basis(EllipseParams(10, 6, 0, 0, 0), 0, 10)
    # sin x cos parity: cross coefficients vanish
    for n, i in ((1, 2), (2, 1), (3, 3)):
        kss, kcs, ksc, kcc = kappa_coefficients(basis, n, i)
        assert abs(kcs) < 1e-15 and abs(ksc) < 1e-15
    kss_13 = kappa_coefficients(basis, 1, 3)[0]
    kss_31 = kappa_coefficients(basis, 3, 1)[0]
    assert kss_13 == pytest.approx(kss_31, abs=1e-15)
    assert kss_13 != 0.0
    # odd n+i annihilates by pi-periodicity of the weight
    assert kappa_coefficients(basis, 1, 2)[0] == pytest.approx(0.0, abs=1e-15)
    assert kappa_coefficients(basis, 2, 2)[0] != 0.0


def test_kappa_against_adaptive_quadrature():
    p = EllipseParams(10, 6, 0, 0, 0)
    basis = make_basis(p, 0, 10)
    ed = basis.elliptic
    kcc00 = kappa_coefficients(basis, 0, 0)[3]
    ref, _ = quad(lambda s: 1.0 / (ed.c * np.pi * (np.sinh(ed.rho) ** 2 + np.sin(s) ** 2)),
                  0.0, 2.0 * np.pi, limit=200)
    assert kcc00 == pytest.approx(ref, rel=1e-10)


def test_density_over_xi2_vs_quadrature(laplace_oracle):
    # validates the corrected kappa-series normalization
    p = EllipseParams(10, 6, 0, 0, 0)
    basis = make_basis(p, 0, 10)
    oracle = laplace_oracle(p, n=512)
    xi = metric_xi(basis.elliptic, oracle.nodes)
    dens = forward_basis_matrix(basis, oracle.nodes) / xi[None, :] ** 2
    s_ref = oracle.s_forward(dens)
    k_ref = oracle.k_star(dens)
    s_ser, k_ser = actions_on_density_over_xi2(basis, oracle.nodes, n_series=80,
                                               n_nodes=1024)
    assert np.max(np.abs(s_ref - s_ser.T)) < 1e-10
    assert np.max(np.abs(k_ref - k_ser.T)) < 1e-10


def test_series_truncation_converges():
    basis = make_basis(EllipseParams(10, 6, 0, 0, 0), 0, 10)
    t = periodic_nodes(16)
    s64, k64 = actions_on_density_over_xi2(basis, t, n_series=64, n_nodes=512)
    s128, k128 = actions_on_density_over_xi2(basis, t, n_series=128, n_nodes=512)
    assert np.max(np.abs(s64 - s128)) < 1e-12
    assert np.max(np.abs(k64 - k128)) < 1e-12


def test_derivative_actions_zero_slots():
    basis = make_basis(EllipseParams(10, 6, 0, 0, 0), 0, 10)
    ds, dk = derivative_actions(basis, periodic_nodes(16))
    assert np.all(ds[2:] == 0.0)
    assert np.all(dk[2:] == 0.0)


def test_derivative_actions_order_zero_single_layer():
    # d(S_w[psi_0])/dw = drho/dw + (dc/dw)/c for the full derivative; the
    # operator derivative subtracts S_w[d psi_0/dw]
    from ellipsorb.geometry import focal_jacobians

    p = EllipseParams(10, 6, 0, 0, 0)
    basis = make_basis(p, 0, 10)
    t = periodic_nodes(8)
    ds, _ = derivative_actions(basis, t)
    dc, drho = focal_jacobians(p)
    ed = basis.elliptic
    s_act, k_act = singular_actions_forward(basis, t)
    s_over, _ = actions_on_density_over_xi2(basis, t)
    for j in range(2):
        full = drho[j] + dc[j] / ed.c
        corr = -(dc[j] / ed.c) * s_act[4] - p.a * p.b * drho[j] * s_over[4]
        assert np.allclose(ds[j, 4], full - corr, atol=1e-13)


def test_derivative_actions_frozen_density_fd(laplace_oracle):
    # perturb (a, b), recompute the operators by quadrature with the density
    # function frozen in t; difference quotients match the closed forms
    p = EllipseParams(10, 6, 0, 0, 0)
    basis = make_basis(p, 0, 10)
    n = 256
    probe = laplace_oracle(p, n=n)
    dens = forward_basis_matrix(basis, probe.nodes)
    step = 1e-5
    eval_idx = np.arange(0, n, n // 16)
    ds, dk = derivative_actions(basis, probe.nodes[eval_idx], n_series=80, n_nodes=1024)
    w0 = p.as_array()
    for j in range(2):
        wp_, wm_ = w0.copy(), w0.copy()
        wp_[j] += step
        wm_[j] -= step
        o_p = laplace_oracle(EllipseParams(*wp_), n=n)
        o_m = laplace_oracle(EllipseParams(*wm_), n=n)
        fd_s = (o_p.s_forward(dens) - o_m.s_forward(dens)) / (2 * step)
        fd_k = (o_p.k_star(dens) - o_m.k_star(dens)) / (2 * step)
        assert np.max(np.abs(fd_s[eval_idx] - ds[j].T)) < 1e-4 * max(1.0, np.max(np.abs(ds[j])))
        assert np.max(np.abs(fd_k[eval_idx] - dk[j].T)) < 1e-4 * max(1.0, np.max(np.abs(dk[j])))


def test_basis_size_validation():
    with pytest.raises(ValueError):
        make_basis(EllipseParams(10, 6, 0, 0, 0), 0, 7)
    with pytest.raises(ValueError):
        make_basis(EllipseParams(10, 6, 0, 0, 0), 0, 2)
