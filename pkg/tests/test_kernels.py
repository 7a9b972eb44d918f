import numpy as np
import pytest
from scipy.special import y0 as scipy_y0

from ellipsorb import kernels
from ellipsorb.geometry import EllipseParams, boundary_point, curvature, speed_and_normal

EULER = kernels.EULER_GAMMA


def _series_j0(z, terms=40):
    """Independent power-series J0."""
    out = 0.0
    term = 1.0
    for m in range(terms):
        if m > 0:
            term *= -(z * z / 4.0) / (m * m)
        out += term
    return out


def _series_y0(z, terms=40):
    """Independent series Y0 = (2/pi)[(ln(z/2)+gamma) J0 + sum h_m (-1)^{m+1} (z^2/4)^m/(m!)^2]."""
    s = 0.0
    term = 1.0
    h = 0.0
    for m in range(1, terms):
        term *= (z * z / 4.0) / (m * m)
        h += 1.0 / m
        s += (-1) ** (m + 1) * h * term
    return (2.0 / np.pi) * ((np.log(z / 2.0) + EULER) * _series_j0(z, terms) + s)


def test_hankel_against_series_oracle():
    for z in (0.5, 1.0, 2.0):
        h0, _ = kernels.hankel_h0_h1(z)
        assert h0.imag == pytest.approx(_series_y0(z), rel=1e-12)
        assert h0.real == pytest.approx(_series_j0(z), rel=1e-12)
        # sanity against an unrelated library routine
        assert h0.imag == pytest.approx(scipy_y0(z), rel=1e-12)


def test_bessel_wronskian():
    rng = np.random.default_rng(42)
    z = rng.uniform(0.05, 50.0, 20)
    h0, h1 = kernels.hankel_h0_h1(z)
    j0, y0 = h0.real, h0.imag
    j1, y1 = h1.real, h1.imag
    assert np.allclose(j0 * y1 - j1 * y0, -2.0 / (np.pi * z), rtol=1e-11)


def test_hankel_large_argument():
    z = 500.0
    h0, _ = kernels.hankel_h0_h1(z)
    asymptotic = np.sqrt(2.0 / (np.pi * z)) * np.exp(1j * (z - np.pi / 4.0))
    assert h0 == pytest.approx(asymptotic, rel=1e-3)


def test_hankel_rejects_nonpositive():
    with pytest.raises(ValueError):
        kernels.hankel_h0_h1(0.0)
    with pytest.raises(ValueError):
        kernels.hankel_h0_h1(-1.0)


def test_green_definition_and_conjugation():
    r, k = 2.5, 0.4
    h0 = kernels.hankel_h0_h1(k * r)[0]
    assert kernels.green_helmholtz(r, k) == pytest.approx(-0.25j * h0, rel=1e-14)
    for rr in (0.3, 5.0, 80.0):
        g = kernels.green_helmholtz(rr, k)
        g_neg = kernels.green_helmholtz(rr, -k)
        assert g_neg == pytest.approx(np.conj(g), rel=1e-14)


def test_green_far_field_decay():
    k = 0.05
    g1 = abs(kernels.green_helmholtz(1e3, k))
    g4 = abs(kernels.green_helmholtz(4e3, k))
    assert g4 / g1 == pytest.approx(0.5, rel=1e-2)   # r^{-1/2} magnitude decay


def test_ghat_limits():
    gh, gp = kernels.ghat_and_derivatives(0.0, 2.0)   # ln(k/2) = 0
    assert gh == pytest.approx(-0.25j + EULER / (2.0 * np.pi), rel=1e-14)
    assert gp == 0.0
    for k in (0.013, 0.4 + 0.2j):
        assert kernels.ghat_and_derivatives(0.0, k)[1] == 0.0


def test_ghat_continuity_at_switch():
    k = 0.01
    r_switch = kernels.KR_SWITCH / k
    below = kernels.ghat_and_derivatives(r_switch * (1 - 1e-9), k)
    above = kernels.ghat_and_derivatives(r_switch * (1 + 1e-9), k)
    assert abs(below[0] - above[0]) < 1e-10
    assert abs(below[1] - above[1]) < 1e-10


def test_ghat_reproduces_green():
    k = 0.02
    r = np.geomspace(1e-4, 100.0, 50)
    gh, _ = kernels.ghat_and_derivatives(r, k)
    g = kernels.green_helmholtz(r, k)
    assert np.allclose(gh + np.log(r) / (2.0 * np.pi), g, rtol=1e-12, atol=1e-15)


def test_ghat_second_log_growth():
    k = 0.05
    r = 10.0 ** np.arange(-2, -9, -1)
    vals = np.abs(kernels.ghat_second(r, k))
    assert np.all(np.diff(vals) > 0)           # grows as r -> 0
    growth = np.diff(vals)
    assert np.all(growth > 0.5 * k**2 / (4.0 * np.pi) * np.log(10.0))
    with pytest.raises(ValueError):
        kernels.ghat_second(0.0, k)


def test_normal_derivative_kernel_orthogonal():
    z = np.array([1.0, 0.0])
    nu = np.array([0.0, 1.0])
    hat, lap = kernels.normal_derivative_kernel(z, nu, 0.1)
    assert hat == 0.0 and lap == 0.0


def test_normal_derivative_diagonal_limits():
    # Ghat part vanishes on the diagonal; the Laplace part tends to the
    # curvature value kappa |x'| / (4 pi) (checked by straddling evaluation).
    p = EllipseParams(10, 6, 0.5, 2.0, -1.0)
    t = 1.234
    eps = 1e-4
    x_t = boundary_point(p, t)
    x_s = boundary_point(p, t + eps)
    sp, nu = speed_and_normal(p, t)
    z = x_t - x_s
    hat, lap = kernels.normal_derivative_kernel(z, nu, 0.05)
    sp_s = speed_and_normal(p, t + eps)[0]
    expected = curvature(p, t) * sp / (4.0 * np.pi)
    assert lap * sp_s == pytest.approx(expected, rel=1e-3)
    assert abs(hat) < 1e-8


def test_kernel_triple_consistency():
    k = 0.04 + 0.01j
    r = np.array([0.3, 2.0, 15.0])
    g, gp, gpp = kernels.kernel_triple(r, k, smooth_remainder=False)
    assert np.allclose(g, kernels.green_helmholtz(r, k), rtol=1e-14)
    assert np.allclose(gp, kernels.green_helmholtz_radial(r, k), rtol=1e-14)
    assert np.allclose(gpp, kernels.green_helmholtz_radial2(r, k), rtol=1e-14)
    gh, ghp, ghpp = kernels.kernel_triple(r, k, smooth_remainder=True)
    gh_ref, ghp_ref = kernels.ghat_and_derivatives(r, k)
    assert np.allclose(gh, gh_ref, rtol=1e-13)
    assert np.allclose(ghp, ghp_ref, rtol=1e-13, atol=1e-16)
    assert np.allclose(ghpp, kernels.ghat_second(r, k), rtol=1e-13)


def test_grad_green_matches_radial():
    k = 0.03
    z = np.array([3.0, -4.0])   # r = 5
    grad = kernels.grad_green_helmholtz(z, k)
    gp = kernels.green_helmholtz_radial(5.0, k)
    assert np.allclose(grad, gp * z / 5.0, rtol=1e-14)
