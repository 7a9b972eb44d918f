"""Assembly and solution of the adjoint system on the adjoint spectral basis.

The adjoint operators are the exact L2 adjoints of the parameterized forward
operators: conjugated kernels with the speed weight moved to the output
variable.  The p-side density is expanded in pure trigonometric functions and
the q-side in trig * Xi, for which the Laplace parts act in closed form.

The right-hand side has a zero first block (the absorptance does not see the
interior density) and the derivative of the absorptance with respect to the
exterior density in the second block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .forward import (DensitySolution, Numerics, ParticleGrids, _solve_dense, build_grids)
from .geometry import DesignConfig, boundary_point, speed
from .materials import BackgroundMedium, wavenumbers
from .observables import MeasurementArc, far_field_h
from .spectral import adjoint_q_matrix, trig_table

try:  # numpy >= 2
    _trapezoid = np.trapezoid
except AttributeError:  # pragma: no cover
    _trapezoid = np.trapz


def adjoint_rhs_function(fwd_sol, arc: MeasurementArc, n_theta: int = 129):
    """Data of the adjoint second equation as a callable (particle, s) -> values.

    g2(s) = -(1/L) [ (1/(4 k_m pi)) int_Theta h(theta) p(theta, s) dtheta
                     + (i/k_m) p(theta0, s) ]  (interference term only for
    forward scattering), with p(theta, s) = e^{i k_m xhat(theta).y(s)} |y'(s)|.
    """
    k_m = fwd_sol.k_m
    ell = arc.length_scale
    if abs(ell) < 1e-10 * arc.radius:
        raise ValueError("degenerate measurement arc (L = 0)")
    thetas = arc.nodes(n_theta)
    h_vals = far_field_h(fwd_sol.exterior_sources(), k_m, thetas)
    # trapezoid weights on the endpoint-inclusive arc grid
    wts = np.gradient(thetas)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    wh = wts * h_vals
    xhat = np.stack([np.cos(thetas), np.sin(thetas)], axis=-1)
    config = fwd_sol.config
    forward = arc.forward_scattering
    xhat0 = np.array([np.cos(arc.theta0), np.sin(arc.theta0)])

    def g2(particle: int, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        p = config.particles[particle]
        y = boundary_point(p, s)
        sp = speed(p, s)
        phase = np.exp(1j * k_m * (xhat @ y.T))            # (n_theta, n_s)
        integral = (wh @ phase) * sp
        out = integral / (4.0 * k_m * np.pi)
        if forward:
            p0 = np.exp(1j * k_m * (y @ xhat0)) * sp
            out = out + (1j / k_m) * p0
        return -out / ell

    return g2


@dataclass
class AdjointSystem:
    """Assembled adjoint collocation system T d = g at one wavelength."""

    config: DesignConfig
    grids: list
    lam: float
    k_m: float
    k_c: complex
    eps_m: float
    eps_c: complex
    t1: np.ndarray
    t2: np.ndarray
    rhs: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.t1 + self.t2


def adjoint_operator_matrices(t_rows, x_rows, row_speed, grid_src: ParticleGrids,
                              k: complex, same_particle: bool):
    """Quadrature matrices of the adjoint remainder/full operators on one pair.

    The adjoint kernels are the conjugated forward kernels with the speed
    weight moved to the output variable and the normal derivative taken at the
    source point: |x'(t)| conj(G^k)(z) and -|x'(t)| conj(g')(r) (zhat.nu_y(s)).
    Self blocks use the Kress product rule on the conjugated remainder kernels.
    Returns (sstar_op, k_op), each (len(rows), Q).
    """
    from scipy.special import jv

    from .quadrature import collocation_log_plan, log_split_quadrature_at, trapezoid_quadrature

    z = x_rows[:, None, :] - grid_src.y_quad[None, :, :]
    r = np.linalg.norm(z, axis=-1)
    zero = r == 0.0
    zn = np.sum(z * grid_src.nu_quad[None, :, :], axis=-1)
    wrow = np.asarray(row_speed)[:, None]
    if same_particle:
        plan = collocation_log_plan(len(t_rows), grid_src.s_quad.size)
        gh, gp = kernels.ghat_and_derivatives(r, k)
        with np.errstate(invalid="ignore", divide="ignore"):
            dg = np.where(zero, 0.0, -gp * zn / np.where(zero, 1.0, r))
        s_log = np.conj((jv(0, k * r) - 1.0)) / (4.0 * np.pi)
        s_op = log_split_quadrature_at(t_rows, np.conj(gh), s_log,
                                       np.conj(kernels.ghat_zero(k)), plan)
        with np.errstate(invalid="ignore", divide="ignore"):
            k_log = np.conj(np.where(zero, 0.0,
                                     (k / (4.0 * np.pi)) * jv(1, k * r) * zn
                                     / np.where(zero, 1.0, r)))
        k_op = log_split_quadrature_at(t_rows, np.conj(dg), k_log, 0.0, plan)
        return wrow * s_op, wrow * k_op
    if np.any(zero):
        raise ValueError("coincident points between distinct particles")
    g = kernels.green_helmholtz(r, k)
    gp = kernels.green_helmholtz_radial(r, k)
    count = grid_src.s_quad.size
    return (wrow * trapezoid_quadrature(np.conj(g), count),
            wrow * trapezoid_quadrature(np.conj(-gp * zn / r), count))


def assemble_adjoint(config: DesignConfig, lam: float, material, medium: BackgroundMedium,
                     rhs_values, numerics: Numerics = Numerics(),
                     grids=None) -> AdjointSystem:
    """Assemble the adjoint system; ``rhs_values`` holds g2 at collocation nodes (M, N)."""
    if grids is None:
        grids = build_grids(config, numerics)
    k_m, k_c = wavenumbers(lam, medium, material)
    k_m = float(np.real(k_m))
    k_c = complex(k_c)
    eps_m = medium.rel_permittivity
    eps_c = complex(material.permittivity(lam))

    m = config.n_particles
    n = numerics.basis_size
    mn = m * n
    t1 = np.zeros((2 * mn, 2 * mn), dtype=complex)
    t2 = np.zeros((2 * mn, 2 * mn), dtype=complex)
    g = np.zeros(2 * mn, dtype=complex)
    rhs_values = np.asarray(rhs_values, dtype=complex).reshape(m, n)

    for i, gi in enumerate(grids):
        sl = slice(i * n, (i + 1) * n)
        t1[sl, sl] = gi.sstar_col
        t1[sl, mn + i * n:mn + (i + 1) * n] = (-0.5 * gi.q_col + gi.kq_col) / np.conj(eps_c)
        t1[mn + i * n:mn + (i + 1) * n, sl] = -gi.sstar_col
        t1[mn + i * n:mn + (i + 1) * n, mn + i * n:mn + (i + 1) * n] = \
            -(0.5 * gi.q_col + gi.kq_col) / eps_m
        g[mn + i * n:mn + (i + 1) * n] = rhs_values[i]

    for i, gi in enumerate(grids):
        for j, gj in enumerate(grids):
            same = i == j
            s_c, d_c = adjoint_operator_matrices(gi.t_col, gi.x_col, gi.speed_col,
                                                 gj, k_c, same)
            s_m, d_m = adjoint_operator_matrices(gi.t_col, gi.x_col, gi.speed_col,
                                                 gj, k_m, same)
            rows = slice(i * n, (i + 1) * n)
            cols = slice(j * n, (j + 1) * n)
            trig_t = gj.trig_quad.T
            q_t = gj.q_quad.T
            t2[rows, cols] = s_c @ trig_t
            t2[rows.start:rows.stop, mn + cols.start:mn + cols.stop] = \
                (d_c @ q_t) / np.conj(eps_c)
            t2[mn + rows.start:mn + rows.stop, cols] = -(s_m @ trig_t)
            t2[mn + rows.start:mn + rows.stop, mn + cols.start:mn + cols.stop] = \
                -(d_m @ q_t) / eps_m

    return AdjointSystem(config=config, grids=grids, lam=lam, k_m=k_m, k_c=k_c,
                         eps_m=eps_m, eps_c=eps_c, t1=t1, t2=t2, rhs=g)


@dataclass
class AdjointSolution:
    """Adjoint density coefficients with reconstruction metadata."""

    config: DesignConfig
    grids: list
    lam: float
    k_m: float
    coeff_p: np.ndarray   # (M, N)
    coeff_q: np.ndarray   # (M, N)
    residual: float
    condition: float
    p_quad: np.ndarray = field(init=False)
    q_quad: np.ndarray = field(init=False)

    def __post_init__(self):
        self.p_quad = np.stack([
            self.coeff_p[m] @ g.trig_quad for m, g in enumerate(self.grids)])
        self.q_quad = np.stack([
            self.coeff_q[m] @ g.q_quad for m, g in enumerate(self.grids)])

    def reconstruct(self, particle: int, t):
        """Adjoint densities (p, q) of one particle at parameter t."""
        g = self.grids[particle]
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return (self.coeff_p[particle] @ trig_table(g.basis, t),
                self.coeff_q[particle] @ adjoint_q_matrix(g.basis, t))


def solve_adjoint(system: AdjointSystem, numerics: Numerics = Numerics()) -> AdjointSolution:
    """Dense direct solve of the adjoint system."""
    sol, residual, cond = _solve_dense(system.matrix, system.rhs, system.lam,
                                       numerics.residual_tol)
    m = system.config.n_particles
    n = system.grids[0].basis.size
    mn = m * n
    return AdjointSolution(config=system.config, grids=system.grids, lam=system.lam,
                           k_m=system.k_m, coeff_p=sol[:mn].reshape(m, n),
                           coeff_q=sol[mn:].reshape(m, n), residual=residual, condition=cond)


def solve_adjoint_at(fwd_sol: DensitySolution, arc: MeasurementArc, material,
                     medium: BackgroundMedium, numerics: Numerics = Numerics()) -> AdjointSolution:
    """Build the rhs from a forward solution and solve the adjoint at the same wavelength."""
    g2 = adjoint_rhs_function(fwd_sol, arc, numerics.theta_nodes)
    t_col = fwd_sol.grids[0].t_col
    rhs = np.stack([g2(m, t_col) for m in range(fwd_sol.config.n_particles)])
    system = assemble_adjoint(fwd_sol.config, fwd_sol.lam, material, medium, rhs,
                              numerics, fwd_sol.grids)
    return solve_adjoint(system, numerics)
