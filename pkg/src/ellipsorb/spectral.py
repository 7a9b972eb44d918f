"""Closed-form spectral actions on the per-ellipse trigonometric eigenbases.

For an ellipse with elliptic radius rho and focal distance c, the boundary
operators of the Laplace kernel act in closed form on

    forward basis   psi_n = sin(n t)/Xi or cos(n t)/Xi   (eigenfunctions),
    adjoint bases   pure trig (p side) and trig * Xi (q side),

with eigenvalues alpha_n = exp(-2 n rho)/2.  The unified index keeps sin
orders 1..N/2-1 followed by cos orders 0..N/2 (N even), which is exactly the
classical basis for trigonometric interpolation at N equispaced nodes.

The module also provides every closed-form ingredient of the shape
derivatives of the self-interaction operators: the full derivatives of the
actions, the density-derivative corrections, and the kappa-series for the
operators applied to psi/Xi^2.  All of these depend only on (a, b); the
self-interaction is rotation/translation invariant, so the (theta, x1, x2)
slots are identically zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import EllipseParams, EllipticData, elliptic_data, focal_jacobians, metric_xi

N_SERIES = 64
N_KAPPA = 256


@dataclass(frozen=True)
class SpectralBasis:
    """Eigen-system data of one particle: index map, eigenvalues, elliptic frame."""

    particle_index: int
    size: int
    orders: np.ndarray   # (N,) trig order per basis function
    is_sin: np.ndarray   # (N,) True for sin rows
    alpha: np.ndarray    # (N,) e^{-2 n rho} / 2
    elliptic: EllipticData
    params: EllipseParams

    def __post_init__(self):
        if self.size % 2 != 0 or self.size < 4:
            raise ValueError(f"basis size must be even and >= 4, got {self.size}")


def make_basis(params: EllipseParams, particle_index: int, size: int) -> SpectralBasis:
    """Build the unified sin/cos basis of the given even size for one particle."""
    if size % 2 != 0 or size < 4:
        raise ValueError(f"basis size must be even and >= 4, got {size}")
    half = size // 2
    orders = np.concatenate([np.arange(1, half), np.arange(0, half + 1)])
    is_sin = np.concatenate([np.ones(half - 1, dtype=bool), np.zeros(half + 1, dtype=bool)])
    ed = elliptic_data(params)
    alpha = np.exp(-2.0 * orders * ed.rho) / 2.0
    for arr in (orders, is_sin, alpha):
        arr.setflags(write=False)
    return SpectralBasis(particle_index=particle_index, size=size, orders=orders,
                         is_sin=is_sin, alpha=alpha, elliptic=ed, params=params)


def trig_table(basis: SpectralBasis, t) -> np.ndarray:
    """Matrix T[i, j] = sin(n_i t_j) or cos(n_i t_j), shape (N, len(t))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    nt = basis.orders[:, None] * t[None, :]
    return np.where(basis.is_sin[:, None], np.sin(nt), np.cos(nt))


def forward_basis_matrix(basis: SpectralBasis, t) -> np.ndarray:
    """Forward eigenfunctions psi_i(t) = trig(n_i t)/Xi(rho, t), shape (N, len(t))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return trig_table(basis, t) / metric_xi(basis.elliptic, t)[None, :]


def adjoint_p_matrix(basis: SpectralBasis, t) -> np.ndarray:
    """Adjoint p-side basis: pure trigonometric functions."""
    return trig_table(basis, t)


def adjoint_q_matrix(basis: SpectralBasis, t) -> np.ndarray:
    """Adjoint q-side basis: q_i(t) = trig(n_i t) * Xi(rho, t)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return trig_table(basis, t) * metric_xi(basis.elliptic, t)[None, :]


def eval_forward_basis(basis: SpectralBasis, i: int, t):
    """Value of the i-th (0-based) forward eigenfunction at t."""
    if not 0 <= i < basis.size:
        raise IndexError(f"basis index {i} out of range [0, {basis.size})")
    t = np.asarray(t, dtype=float)
    return forward_basis_matrix(basis, np.atleast_1d(t))[i].reshape(t.shape)[()]


def _sign(basis: SpectralBasis) -> np.ndarray:
    """Eigenvalue sign: K*[psi] = -alpha psi on sin rows, +alpha psi on cos rows."""
    return np.where(basis.is_sin, -1.0, 1.0)


def singular_actions_forward(basis: SpectralBasis, t):
    """Closed-form S_w[psi_i](t) and K*_w[psi_i](t) for all i, shapes (N, len(t)).

    S on sin rows is -(1/2 - alpha_n) sin(n t)/n, on cos rows
    -(1/2 + alpha_n) cos(n t)/n, and rho + ln(c/2) for the order-0 row;
    K* multiplies each eigenfunction by -alpha (sin) or +alpha (cos).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    trig = trig_table(basis, t)
    ed = basis.elliptic
    n = basis.orders.astype(float)
    coef = np.where(basis.is_sin, -(0.5 - basis.alpha), -(0.5 + basis.alpha))
    with np.errstate(divide="ignore", invalid="ignore"):
        s_vals = (coef / np.where(n == 0, 1.0, n))[:, None] * trig
    zero = basis.orders == 0
    s_vals[zero] = ed.rho + np.log(ed.c / 2.0)
    k_vals = (_sign(basis) * basis.alpha)[:, None] * forward_basis_matrix(basis, t)
    return s_vals, k_vals


def singular_actions_adjoint(basis: SpectralBasis, t):
    """Closed-form S*_w on the trig p-basis and K_w on the q-basis, shapes (N, len(t)).

    S*_w[trig(n s)](t) = -(1/2 -/+ alpha_n) trig(n t) Xi(t)/n with the order-0
    value (rho + ln(c/2)) Xi(t); K_w[q_i] = -/+ alpha_i q_i.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    xi = metric_xi(basis.elliptic, t)
    trig = trig_table(basis, t)
    ed = basis.elliptic
    n = basis.orders.astype(float)
    coef = np.where(basis.is_sin, -(0.5 - basis.alpha), -(0.5 + basis.alpha))
    with np.errstate(divide="ignore", invalid="ignore"):
        s_vals = (coef / np.where(n == 0, 1.0, n))[:, None] * trig * xi[None, :]
    zero = basis.orders == 0
    s_vals[zero] = (ed.rho + np.log(ed.c / 2.0)) * xi
    k_vals = (_sign(basis) * basis.alpha)[:, None] * (trig * xi[None, :])
    return s_vals, k_vals


def kappa_coefficients(basis: SpectralBasis, n: int, i: int, n_nodes: int = N_KAPPA):
    """The four trig-weighted integrals against 1/(c pi (sinh^2 rho + sin^2 s)).

    Returns (kappa_ss, kappa_cs, kappa_sc, kappa_cc) for row order n and
    density order i, by the periodic trapezoid rule on n_nodes nodes.
    """
    s = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    ed = basis.elliptic
    weight = (2.0 * np.pi / n_nodes) / (ed.c * np.pi * (np.sinh(ed.rho) ** 2 + np.sin(s) ** 2))
    sn, cn = np.sin(n * s), np.cos(n * s)
    si, ci = np.sin(i * s), np.cos(i * s)
    return (float(np.sum(sn * si * weight)), float(np.sum(cn * si * weight)),
            float(np.sum(sn * ci * weight)), float(np.sum(cn * ci * weight)))


def _kappa_tables(basis: SpectralBasis, n_series: int, n_nodes: int):
    """kappa matrices for row orders 0..n_series against every basis order.

    Returns (k_same, k_cross0) where k_same[n, i] pairs the row trig of the
    same parity as basis function i (sin rows for sin functions, cos rows for
    cos functions) and k_cross0[i] is the n=0 cos row against function i's
    trig; the opposite-parity coefficients vanish identically.
    """
    s = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    ed = basis.elliptic
    weight = (2.0 * np.pi / n_nodes) / (ed.c * np.pi * (np.sinh(ed.rho) ** 2 + np.sin(s) ** 2))
    rows = np.arange(n_series + 1)
    sin_rows = np.sin(rows[:, None] * s[None, :])
    cos_rows = np.cos(rows[:, None] * s[None, :])
    dens = trig_table(basis, s)  # (N, n_nodes)
    weighted = dens * weight[None, :]
    k_sin = sin_rows @ weighted.T   # (rows, N): int sin(ns) * dens_i * w
    k_cos = cos_rows @ weighted.T
    k_same = np.where(basis.is_sin[None, :], k_sin, k_cos)
    k_cross0 = k_cos[0]
    return k_same, k_cross0


def actions_on_density_over_xi2(basis: SpectralBasis, t,
                                n_series: int = N_SERIES, n_nodes: int = N_KAPPA):
    """S_w[psi_i / Xi^2](t) and K*_w[psi_i / Xi^2](t) via the kappa series.

    Derived from the elliptic-harmonics expansion of the Laplace kernel (the
    same expansion that reproduces the closed-form actions of the
    eigenfunctions); truncated at n_series terms, which converge like
    exp(-n rho).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    ed = basis.elliptic
    rho, c = ed.rho, ed.c
    xi = metric_xi(ed, t)
    k_same, k_cross0 = _kappa_tables(basis, n_series, n_nodes)

    rows = np.arange(1, n_series + 1)
    trig_rows = np.where(basis.is_sin[:, None, None],
                         np.sin(rows[None, :, None] * t[None, None, :]),
                         np.cos(rows[None, :, None] * t[None, None, :]))  # (N, n_series, Nt)
    # e^{-n rho} sinh(n rho) = (1 - e^{-2 n rho})/2 ; cosh analogue with +.
    shrink = np.exp(-2.0 * rows * rho)
    hyp = np.where(basis.is_sin[:, None], (1.0 - shrink)[None, :] / 2.0,
                   (1.0 + shrink)[None, :] / 2.0)  # (N, n_series)

    series_s = np.einsum("in,in,int->it", k_same[1:].T, hyp / rows[None, :], trig_rows)
    series_k = np.einsum("in,in,int->it", k_same[1:].T, hyp, trig_rows)

    const = k_cross0 * (rho + np.log(c / 2.0)) / 2.0  # zero on sin rows by parity
    s_vals = (const[:, None] - series_s) / c

    psi_over_xi2 = trig_table(basis, t) / (xi**3)[None, :]
    k_vals = (k_cross0[:, None] / 2.0 + series_k) / (c * xi[None, :]) - 0.5 * psi_over_xi2
    return s_vals, k_vals


def derivative_actions(basis: SpectralBasis, t,
                       n_series: int = N_SERIES, n_nodes: int = N_KAPPA):
    """Shape derivatives of the self-interaction operators on the eigenbasis.

    Returns (dS, dK) of shape (5, N, len(t)): the derivative of the operators
    with the density function held fixed,

        dOp/dw [psi_i] = d(Op[psi_i])/dw - Op[d psi_i / dw],

    assembled from the closed-form full derivatives and the kappa-series
    corrections.  The (theta, x1, x2) slots vanish identically.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    p = basis.params
    ed = basis.elliptic
    dc, drho = focal_jacobians(p)
    n = basis.orders.astype(float)
    xi = metric_xi(ed, t)
    trig = trig_table(basis, t)
    psi = trig / xi[None, :]
    sgn = _sign(basis)

    s_full = np.zeros((2, basis.size, t.size))
    k_full = np.zeros((2, basis.size, t.size))
    s_act, k_act = singular_actions_forward(basis, t)
    for j in range(2):  # only (a, b) slots are nonzero
        dalpha = -2.0 * n * basis.alpha * drho[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            s_full[j] = (-sgn * dalpha / np.where(n == 0, 1.0, n))[:, None] * trig
        s_full[j][basis.orders == 0] = drho[j] + dc[j] / ed.c
        factor = dc[j] / ed.c + (2.0 * n[:, None] + p.a * p.b / (xi**2)[None, :]) * drho[j]
        k_full[j] = -sgn[:, None] * basis.alpha[:, None] * psi * factor

    s_over, k_over = actions_on_density_over_xi2(basis, t, n_series, n_nodes)

    ds = np.zeros((5, basis.size, t.size))
    dk = np.zeros((5, basis.size, t.size))
    for j in range(2):
        s_corr = -(dc[j] / ed.c) * s_act - p.a * p.b * drho[j] * s_over
        k_corr = -(dc[j] / ed.c) * k_act - p.a * p.b * drho[j] * k_over
        ds[j] = s_full[j] - s_corr
        dk[j] = k_full[j] - k_corr
    return ds, dk
