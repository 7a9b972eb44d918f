"""Broadband objective gradient assembled from forward and adjoint solutions.

Per wavelength the absorptance sensitivity splits into the explicit part
A_w (frozen densities) and the constraint part transported by the adjoint
densities,

    dA/dw = A_w - Re( <p, E_w>_V + <q, F_w>_V ),

where E_w and F_w are the shape derivatives of the two boundary-integral
constraint maps with the densities held fixed.  Their self blocks combine the
closed-form spectral derivatives (Laplace part) with trapezoid quadrature of
the smooth remainder-kernel derivatives, whose diagonal limits vanish; cross
blocks differentiate the full kernels and touch only the slots of the two
particles involved.  The broadband gradient is then

    J'(w) = 2 int_Lambda (A - A_tar) dA/dw dlambda

on the same wavelength trapezoid as the objective itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .adjoint import AdjointSolution, adjoint_rhs_function, assemble_adjoint, solve_adjoint
from .forward import DensitySolution, Numerics, build_grids, solve_at
from .geometry import DesignConfig, N_SLOTS, shape_jacobians
from .materials import BackgroundMedium
from .observables import MeasurementArc, TargetSpectrum, absorptance, far_field_h
from .parallel import parallel_map
from .spectral import derivative_actions

try:  # numpy >= 2
    _trapezoid = np.trapezoid
except AttributeError:  # pragma: no cover
    _trapezoid = np.trapz


@dataclass
class GradientResult:
    """Broadband gradient with its per-wavelength diagnostics."""

    gradient: np.ndarray        # (5M,) real
    objective: float
    absorptance: np.ndarray     # (n_lambda,)
    integrand: np.ndarray       # (n_lambda, 5M) per-wavelength dA/dw


def _arc_weights(arc: MeasurementArc, n_theta: int):
    thetas = arc.nodes(n_theta)
    h = (thetas[-1] - thetas[0]) / (n_theta - 1)
    wts = np.full(n_theta, h)
    wts[0] = wts[-1] = h / 2.0
    return thetas, wts


def dA_dw(fwd: DensitySolution, arc: MeasurementArc, n_theta: int = 129) -> np.ndarray:
    """Explicit absorptance sensitivity A_w (densities frozen), length 5M."""
    k_m = fwd.k_m
    ell = arc.length_scale
    if abs(ell) < 1e-10 * arc.radius:
        raise ValueError("degenerate measurement arc (L = 0)")
    thetas, wts = _arc_weights(arc, n_theta)
    xhat = np.stack([np.cos(thetas), np.sin(thetas)], axis=-1)
    h_vals = far_field_h(fwd.exterior_sources(), k_m, thetas)
    forward = arc.forward_scattering
    xhat0 = np.array([np.cos(arc.theta0), np.sin(arc.theta0)])

    out = np.zeros(N_SLOTS * fwd.n_particles)
    for m, g in enumerate(fwd.grids):
        jac = shape_jacobians(fwd.config.particles[m], g.s_quad)
        dens = fwd.exterior_quad[m] * g.quad_weight
        phase = np.exp(-1j * k_m * (xhat @ g.y_quad.T))        # (n_theta, Q)
        phase0 = np.exp(-1j * k_m * (g.y_quad @ xhat0))        # (Q,)
        for ell_idx in range(N_SLOTS):
            slot = N_SLOTS * m + ell_idx
            proj = xhat @ jac.dx[ell_idx].T                    # (n_theta, Q)
            hw = (phase * proj) @ (-1j * k_m * g.speed_quad * dens) \
                + phase @ (jac.dspeed[ell_idx] * dens)
            term = np.sum(wts * hw * np.conj(h_vals)) / (4.0 * k_m * np.pi)
            if forward:
                hw0 = np.sum(phase0 * (-1j * k_m * (jac.dx[ell_idx] @ xhat0)
                                       * g.speed_quad + jac.dspeed[ell_idx]) * dens)
                term = term + (-1j / k_m) * hw0
            out[slot] = -np.real(term) / ell
    return out


def _pair_slot_contributions(fwd: DensitySolution, i: int, j: int, tables,
                             dens_j, jac_rows, jac_cols):
    """Kernel-derivative contributions of ordered particle pair (rows i, source j).

    ``tables`` holds the (g, g', g'', r, zhat) arrays on the (Q_i, Q_j) grid
    (smooth remainders on the self block, full kernels on cross blocks).
    Returns a list of (slot, dE (Q_i,), dF (Q_i,)); cross blocks split into
    source-side and output-side slots, self blocks combine both variations
    (the only surviving diagonal term is ghat(0;k) * d|y'|/dw).
    """
    gi, gj = fwd.grids[i], fwd.grids[j]
    same = i == j
    gh, gp, gpp, r, zhat = tables
    rsafe = np.where(r == 0.0, 1.0, r)
    zn = np.sum(zhat * gi.nu_quad[:, None, :], axis=-1)        # zhat . nu_i(t)

    h = gj.quad_weight
    wd = h * gj.speed_quad * dens_j          # |y'| ds weighted density
    wd0 = h * dens_j                          # plain ds weighted density
    gp_over_r = gp / rsafe
    gppzn = gpp * zn
    gpzn_over_r = gp_over_r * zn

    # source-side variation (all 5 slots at once): z varies by -dy(s); |y'| varies
    dzy = -np.einsum("tqd,lqd->ltq", zhat, jac_cols.dx)             # (5, Qi, Qj)
    de_src = (gp[None] * dzy) @ wd + (gh @ (jac_cols.dspeed * wd0[None, :]).T).T
    dnu_src = -np.einsum("lqd,td->ltq", jac_cols.dx, gi.nu_quad)
    df_src = (gppzn[None] * dzy + gp_over_r[None] * dnu_src
              - gpzn_over_r[None] * dzy) @ wd \
        + ((gp * zn) @ (jac_cols.dspeed * wd0[None, :]).T).T

    # output-side variation: z varies by +dx(t); nu_i(t) varies
    dzx = np.einsum("tqd,ltd->ltq", zhat, jac_rows.dx)
    de_out = (gp[None] * dzx) @ wd
    nui = np.einsum("ltd,td->lt", jac_rows.dx, gi.nu_quad)
    zdnu = np.einsum("tqd,ltd->ltq", zhat, jac_rows.dnu)
    df_out = (gppzn[None] * dzx + gp_over_r[None] * nui[..., None]
              + gp[None] * zdnu - gpzn_over_r[None] * dzx) @ wd

    out = []
    for ell_idx in range(N_SLOTS):
        if same:
            out.append((N_SLOTS * j + ell_idx, de_src[ell_idx] + de_out[ell_idx],
                        df_src[ell_idx] + df_out[ell_idx]))
        else:
            out.append((N_SLOTS * j + ell_idx, de_src[ell_idx], df_src[ell_idx]))
            out.append((N_SLOTS * i + ell_idx, de_out[ell_idx], df_out[ell_idx]))
    return out


def _pair_tables(fwd: DensitySolution, i: int, j: int, k: complex):
    """(g, g', g'', r, zhat) on the (Q_i, Q_j) quadrature grid for one wavenumber."""
    gi, gj = fwd.grids[i], fwd.grids[j]
    z = gi.y_quad[:, None, :] - gj.y_quad[None, :, :]
    r = np.linalg.norm(z, axis=-1)
    zhat = z / np.where(r == 0.0, 1.0, r)[..., None]           # zero rows stay 0
    gh, gp, gpp = kernels.kernel_triple(r, k, smooth_remainder=(i == j))
    return gh, gp, gpp, r, zhat


def _transpose_tables(tables):
    gh, gp, gpp, r, zhat = tables
    return (gh.T, gp.T, gpp.T, r.T, -np.transpose(zhat, (1, 0, 2)))


def operator_derivative_terms(fwd: DensitySolution, adj: AdjointSolution,
                              numerics: Numerics = Numerics()):
    """Adjoint pairings (<p, E_w>_V, <q, F_w>_V) for every parameter slot (5M each)."""
    config = fwd.config
    m_parts = config.n_particles
    nslots = N_SLOTS * m_parts
    q_nodes = fwd.grids[0].s_quad.size
    eps_c, eps_m = fwd.eps_c, fwd.eps_m
    k_m, k_c = fwd.k_m, fwd.k_c

    jacs = [shape_jacobians(config.particles[m], fwd.grids[m].s_quad)
            for m in range(m_parts)]

    ew = np.zeros((nslots, m_parts, q_nodes), dtype=complex)
    fw = np.zeros((nslots, m_parts, q_nodes), dtype=complex)

    for i in range(m_parts):
        gi = fwd.grids[i]
        # spectral (Laplace) self-block derivatives; (theta, x1, x2) slots vanish
        ds, dk = derivative_actions(gi.basis, gi.s_quad, numerics.series_terms,
                                    numerics.kappa_nodes)
        diff = fwd.coeff_interior[i] - fwd.coeff_exterior[i]
        mixed = fwd.coeff_interior[i] / eps_c - fwd.coeff_exterior[i] / eps_m
        for ell_idx in range(2):
            slot = N_SLOTS * i + ell_idx
            ew[slot, i] += diff @ ds[ell_idx]
            fw[slot, i] += mixed @ dk[ell_idx]

        # incident-trace derivatives: rows of particle i see only its own slots
        ui = np.exp(1j * k_m * (gi.y_quad @ fwd.direction))
        dnu_dir = jacs[i].dnu @ fwd.direction        # (5, Q)
        dx_dir = jacs[i].dx @ fwd.direction          # (5, Q)
        nu_dir = gi.nu_quad @ fwd.direction
        for ell_idx in range(N_SLOTS):
            slot = N_SLOTS * i + ell_idx
            ew[slot, i] -= 1j * k_m * dx_dir[ell_idx] * ui
            fw[slot, i] -= (1j * k_m / eps_m) * (dnu_dir[ell_idx]
                                                 + nu_dir * 1j * k_m * dx_dir[ell_idx]) * ui

    # smooth remainder (self) and full-kernel (cross) derivatives; each unordered
    # pair's kernel tables serve both orientations (r symmetric, zhat antisymmetric)
    for i in range(m_parts):
        for j in range(i, m_parts):
            for k, dens_key, sgn_e, coef_f in (
                    (k_c, "interior", 1.0, 1.0 / eps_c),
                    (k_m, "exterior", -1.0, -1.0 / eps_m)):
                dens = getattr(fwd, f"{dens_key}_quad")
                tables = _pair_tables(fwd, i, j, k)
                for slot, de, df in _pair_slot_contributions(fwd, i, j, tables,
                                                             dens[j], jacs[i], jacs[j]):
                    ew[slot, i] += sgn_e * de
                    fw[slot, i] += coef_f * df
                if i != j:
                    tables_t = _transpose_tables(tables)
                    for slot, de, df in _pair_slot_contributions(fwd, j, i, tables_t,
                                                                 dens[i], jacs[j], jacs[i]):
                        ew[slot, j] += sgn_e * de
                        fw[slot, j] += coef_f * df

    h = fwd.grids[0].quad_weight
    pair_e = h * np.einsum("smq,mq->s", ew, np.conj(adj.p_quad))
    pair_f = h * np.einsum("smq,mq->s", fw, np.conj(adj.q_quad))
    return pair_e, pair_f


def gradient_integrand(fwd: DensitySolution, adj: AdjointSolution, arc: MeasurementArc,
                       numerics: Numerics = Numerics()) -> np.ndarray:
    """Per-wavelength sensitivity dA/dw = A_w - Re(<p,E_w> + <q,F_w>), length 5M."""
    a_w = dA_dw(fwd, arc, numerics.theta_nodes)
    pair_e, pair_f = operator_derivative_terms(fwd, adj, numerics)
    return a_w - np.real(pair_e + pair_f)


def _gradient_task(args):
    """Per-wavelength forward + adjoint solve and sensitivity (picklable worker)."""
    config, lam, material, medium, numerics, arc, theta0 = args
    grids = build_grids(config, numerics)
    fwd = solve_at(config, lam, material, medium, numerics, grids, theta0)
    a_val = absorptance(fwd, arc, numerics.theta_nodes)
    g2 = adjoint_rhs_function(fwd, arc, numerics.theta_nodes)
    t_col = grids[0].t_col
    rhs = np.stack([g2(m, t_col) for m in range(config.n_particles)])
    system = assemble_adjoint(config, lam, material, medium, rhs, numerics, grids)
    adj = solve_adjoint(system, numerics)
    return a_val, gradient_integrand(fwd, adj, arc, numerics)


def full_gradient(config: DesignConfig, target: TargetSpectrum, arc: MeasurementArc,
                  material, medium: BackgroundMedium, numerics: Numerics = Numerics(),
                  threads: int = 1, grids=None, theta0: float | None = None) -> GradientResult:
    """Broadband objective value and gradient over the target's wavelength grid."""
    lambdas = target.lambdas
    if theta0 is None:
        theta0 = arc.theta0
    results = parallel_map(_gradient_task,
                           [(config, lam, material, medium, numerics, arc, theta0)
                            for lam in lambdas], threads)
    a_vals = np.array([r[0] for r in results])
    integrand = np.stack([r[1] for r in results])
    misfit = a_vals - target.values
    grad = 2.0 * _trapezoid(misfit[:, None] * integrand, lambdas, axis=0)
    obj = float(_trapezoid(misfit**2, lambdas))
    return GradientResult(gradient=grad, objective=obj, absorptance=a_vals,
                          integrand=integrand)
