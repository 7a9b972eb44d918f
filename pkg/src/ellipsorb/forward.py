"""Assembly and direct solution of the reduced-basis multiple-scattering system.

The collocated system M c = f couples interior (wavenumber k_c) and exterior
(wavenumber k_m) single-layer densities expanded on each particle's
eigenbasis.  M = M1 + M2 splits into a wavelength-independent singular part,
evaluated in closed form, and a wavelength-dependent remainder: the Ghat
kernels on the self blocks keep a weak r^2 ln r diagonal singularity and get
the Kress product rule, while the cross-particle blocks are analytic and use
the plain periodic trapezoid.

The grids are nested: the quadrature node count is a multiple of the basis
size, so collocation nodes coincide with quadrature nodes and the same kernel
tables serve the forward system, its adjoint, and the shape-derivative
pairings.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import zgecon

from . import kernels
from .geometry import DesignConfig, EllipseParams, boundary_point, speed_and_normal
from .materials import BackgroundMedium, wavenumbers
from .quadrature import periodic_nodes
from .spectral import (SpectralBasis, adjoint_q_matrix, forward_basis_matrix, make_basis,
                       singular_actions_adjoint, singular_actions_forward, trig_table)


class SolverError(RuntimeError):
    """Raised when a scattering or adjoint system is numerically singular."""


@dataclass(frozen=True)
class Numerics:
    """Discretization controls shared by the forward, adjoint, and gradient paths."""

    basis_size: int = 10
    quad_nodes: int = 0          # 0 -> geometry-aware default (quad_nodes_for)
    theta_nodes: int = 129       # arc quadrature (odd, endpoint-inclusive trapezoid)
    full_circle_nodes: int = 256
    series_terms: int = 64
    kappa_nodes: int = 256
    nystrom_nodes: int = 200
    residual_tol: float = 1e-8

    def __post_init__(self):
        if self.basis_size % 2 != 0 or self.basis_size < 4:
            raise ValueError("basis_size must be even and >= 4")

    @property
    def resolved_quad_nodes(self) -> int:
        if self.quad_nodes:
            return self.quad_nodes
        n = self.basis_size
        target = max(40, 4 * n)
        return ((target + n - 1) // n) * n

    def quad_nodes_for(self, config) -> int:
        """Geometry-aware quadrature count, a multiple of the basis size.

        The remainder kernels' analyticity strip shrinks like the elliptic
        radius rho, so flat particles need more nodes: the periodic rules
        converge like exp(-rho Q).  15/rho targets ~1e-7 smooth-part accuracy;
        round shapes keep the max(40, 4 N) floor.
        """
        if self.quad_nodes:
            return self.quad_nodes
        from .geometry import elliptic_data

        n = self.basis_size
        rho_min = min(elliptic_data(p).rho for p in config.particles)
        target = max(40, 4 * n, int(np.ceil(15.0 / rho_min)))
        target = min(target, 600)
        return ((target + n - 1) // n) * n


@dataclass(frozen=True)
class ParticleGrids:
    """Per-particle discrete data reused across wavelengths for one shape."""

    basis: SpectralBasis
    t_col: np.ndarray        # (N,) collocation nodes
    x_col: np.ndarray        # (N, 2)
    speed_col: np.ndarray    # (N,)
    nu_col: np.ndarray       # (N, 2)
    s_quad: np.ndarray       # (Q,)
    y_quad: np.ndarray       # (Q, 2)
    speed_quad: np.ndarray   # (Q,)
    nu_quad: np.ndarray      # (Q, 2)
    psi_col: np.ndarray      # (N, N) forward basis at collocation nodes
    basis_quad: np.ndarray   # (N, Q) forward basis at quadrature nodes
    trig_quad: np.ndarray    # (N, Q) adjoint p basis at quadrature nodes
    q_quad: np.ndarray       # (N, Q) adjoint q basis at quadrature nodes
    s_col: np.ndarray        # (N, N) closed-form S at collocation
    k_col: np.ndarray        # (N, N) closed-form K* at collocation
    sstar_col: np.ndarray    # (N, N) closed-form S* on trig basis
    kq_col: np.ndarray       # (N, N) closed-form K on q basis
    q_col: np.ndarray        # (N, N) q basis at collocation (identity block)

    @property
    def quad_weight(self) -> float:
        return 2.0 * np.pi / self.s_quad.size


def build_grids(config: DesignConfig, numerics: Numerics) -> list:
    """Precompute the wavelength-independent singular blocks for every particle."""
    n = numerics.basis_size
    q = numerics.quad_nodes_for(config)
    t_col = periodic_nodes(n)
    s_quad = periodic_nodes(q)
    grids = []
    for m, p in enumerate(config.particles):
        basis = make_basis(p, m, n)
        x_col = boundary_point(p, t_col)
        speed_col, nu_col = speed_and_normal(p, t_col)
        y_quad = boundary_point(p, s_quad)
        speed_quad, nu_quad = speed_and_normal(p, s_quad)
        s_vals, k_vals = singular_actions_forward(basis, t_col)
        sstar, kq = singular_actions_adjoint(basis, t_col)
        grids.append(ParticleGrids(
            basis=basis, t_col=t_col, x_col=x_col, speed_col=speed_col, nu_col=nu_col,
            s_quad=s_quad, y_quad=y_quad, speed_quad=speed_quad, nu_quad=nu_quad,
            psi_col=forward_basis_matrix(basis, t_col).T,
            basis_quad=forward_basis_matrix(basis, s_quad),
            trig_quad=trig_table(basis, s_quad),
            q_quad=adjoint_q_matrix(basis, s_quad),
            s_col=s_vals.T, k_col=k_vals.T,
            sstar_col=sstar.T, kq_col=kq.T,
            q_col=adjoint_q_matrix(basis, t_col).T,
        ))
    return grids


def layer_operator_matrices(t_rows, x_rows, nu_rows, grid_src: ParticleGrids, k: complex,
                            same_particle: bool):
    """Quadrature matrices of the remainder/full layer operators on one particle pair.

    Returns (s_op, k_op), each (len(rows), Q), such that s_op @ values
    approximates the single-layer remainder (self block: Ghat kernel, Kress
    product rule on its weak r^2 ln r diagonal singularity) or the full
    single layer (cross block, plain trapezoid), applied to a density given by
    its values at the source quadrature nodes; k_op likewise for the
    normal-derivative kernel at the row points.  The |y'(s)| surface weight is
    included.
    """
    from scipy.special import jv

    from .quadrature import collocation_log_plan, log_split_quadrature_at, trapezoid_quadrature

    z = x_rows[:, None, :] - grid_src.y_quad[None, :, :]
    r = np.linalg.norm(z, axis=-1)
    zero = r == 0.0
    zn = np.sum(z * nu_rows[:, None, :], axis=-1)
    sp = grid_src.speed_quad[None, :]
    if same_particle:
        plan = collocation_log_plan(len(t_rows), grid_src.s_quad.size)
        gh, gp = kernels.ghat_and_derivatives(r, k)
        with np.errstate(invalid="ignore", divide="ignore"):
            dg = np.where(zero, 0.0, gp * zn / np.where(zero, 1.0, r))
        s_log = (jv(0, k * r) - 1.0) / (4.0 * np.pi) * sp
        s_op = log_split_quadrature_at(t_rows, gh * sp, s_log, kernels.ghat_zero(k) * sp,
                                       plan)
        with np.errstate(invalid="ignore", divide="ignore"):
            k_log = np.where(zero, 0.0,
                             -(k / (4.0 * np.pi)) * jv(1, k * r) * zn
                             / np.where(zero, 1.0, r)) * sp
        k_op = log_split_quadrature_at(t_rows, dg * sp, k_log, 0.0, plan)
        return s_op, k_op
    if np.any(zero):
        raise ValueError("coincident points between distinct particles")
    g = kernels.green_helmholtz(r, k)
    gp = kernels.green_helmholtz_radial(r, k)
    return (trapezoid_quadrature(g * sp, grid_src.s_quad.size),
            trapezoid_quadrature(gp * zn / r * sp, grid_src.s_quad.size))


def _incident_trace(grid: ParticleGrids, k_m: float, direction):
    ui = np.exp(1j * k_m * grid.x_col @ direction)
    dui = 1j * k_m * (grid.nu_col @ direction) * ui
    return ui, dui


@dataclass
class ForwardSystem:
    """Assembled collocation system M c = f at one wavelength."""

    config: DesignConfig
    grids: list
    lam: float
    k_m: float
    k_c: complex
    eps_m: float
    eps_c: complex
    direction: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    rhs: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.m1 + self.m2


def assemble_forward(config: DesignConfig, lam: float, material, medium: BackgroundMedium,
                     numerics: Numerics = Numerics(), grids=None, theta0: float = 0.0,
                     overlap_warning: bool = True) -> ForwardSystem:
    """Assemble the forward system at one wavelength.

    ``grids`` may carry precomputed singular blocks (build_grids) to amortize
    them across wavelengths; they must match ``config`` and ``numerics``.
    """
    if grids is None:
        grids = build_grids(config, numerics)
    if overlap_warning:
        _warn_on_overlap(config)
    k_m, k_c = wavenumbers(lam, medium, material)
    k_m = float(np.real(k_m))
    eps_m = medium.rel_permittivity
    eps_c = complex(material.permittivity(lam))
    direction = np.array([np.cos(theta0), np.sin(theta0)])

    m = config.n_particles
    n = numerics.basis_size
    mn = m * n
    m1 = np.zeros((2 * mn, 2 * mn), dtype=complex)
    m2 = np.zeros((2 * mn, 2 * mn), dtype=complex)
    rhs = np.zeros(2 * mn, dtype=complex)

    for i, g in enumerate(grids):
        sl = slice(i * n, (i + 1) * n)
        m1[sl, sl] = g.s_col
        m1[sl, mn + i * n:mn + (i + 1) * n] = -g.s_col
        m1[mn + i * n:mn + (i + 1) * n, sl] = (-0.5 * g.psi_col + g.k_col) / eps_c
        m1[mn + i * n:mn + (i + 1) * n, mn + i * n:mn + (i + 1) * n] = \
            -(0.5 * g.psi_col + g.k_col) / eps_m
        ui, dui = _incident_trace(g, k_m, direction)
        rhs[sl] = ui
        rhs[mn + sl.start:mn + sl.stop] = dui / eps_m

    for i, gi in enumerate(grids):
        for j, gj in enumerate(grids):
            same = i == j
            s_c, d_c = layer_operator_matrices(gi.t_col, gi.x_col, gi.nu_col, gj, k_c, same)
            s_m, d_m = layer_operator_matrices(gi.t_col, gi.x_col, gi.nu_col, gj, k_m, same)
            rows = slice(i * n, (i + 1) * n)
            cols = slice(j * n, (j + 1) * n)
            basis_t = gj.basis_quad.T
            m2[rows, cols] = s_c @ basis_t
            m2[rows.start:rows.stop, mn + cols.start:mn + cols.stop] = -(s_m @ basis_t)
            m2[mn + rows.start:mn + rows.stop, cols] = (d_c @ basis_t) / eps_c
            m2[mn + rows.start:mn + rows.stop, mn + cols.start:mn + cols.stop] = \
                -(d_m @ basis_t) / eps_m

    return ForwardSystem(config=config, grids=grids, lam=lam, k_m=k_m, k_c=complex(k_c),
                         eps_m=eps_m, eps_c=eps_c, direction=direction, m1=m1, m2=m2, rhs=rhs)


def _warn_on_overlap(config: DesignConfig):
    parts = config.particles
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            pi, pj = parts[i], parts[j]
            dist = np.hypot(pi.x1 - pj.x1, pi.x2 - pj.x2)
            if dist < pi.a + pj.a:
                warnings.warn(
                    f"particles {i} and {j} may overlap (center distance {dist:.3g} nm "
                    f"< a_i + a_j = {pi.a + pj.a:.3g} nm)", stacklevel=3)
                return


def _solve_dense(matrix, rhs, lam, residual_tol):
    lu, piv = lu_factor(matrix)
    diag = np.abs(np.diag(lu))
    if np.any(diag == 0.0) or not np.all(np.isfinite(diag)):
        raise SolverError(f"exactly singular system at lambda = {lam} nm")
    anorm = np.linalg.norm(matrix, 1)
    rcond, _ = zgecon(lu, anorm, norm="1")
    if rcond == 0.0:
        raise SolverError(f"singular system at lambda = {lam} nm (rcond = 0)")
    sol = lu_solve((lu, piv), rhs)
    scale = np.linalg.norm(rhs, np.inf)
    residual = np.linalg.norm(matrix @ sol - rhs, np.inf) / (scale if scale > 0 else 1.0)
    cond = 1.0 / rcond
    if residual > residual_tol:
        warnings.warn(
            f"solve residual {residual:.3e} above {residual_tol:.1e} at lambda = {lam} nm "
            f"(condition estimate {cond:.3e})", stacklevel=3)
    return sol, residual, cond


@dataclass
class DensitySolution:
    """Forward density coefficients with reconstruction metadata."""

    config: DesignConfig
    grids: list
    lam: float
    k_m: float
    k_c: complex
    eps_m: float
    eps_c: complex
    direction: np.ndarray
    coeff_interior: np.ndarray   # (M, N) coefficients of the k_c-side density
    coeff_exterior: np.ndarray   # (M, N) coefficients of the k_m-side density
    residual: float
    condition: float
    interior_quad: np.ndarray = field(init=False)   # (M, Q) values at quadrature nodes
    exterior_quad: np.ndarray = field(init=False)

    def __post_init__(self):
        self.interior_quad = np.stack([
            self.coeff_interior[m] @ g.basis_quad for m, g in enumerate(self.grids)])
        self.exterior_quad = np.stack([
            self.coeff_exterior[m] @ g.basis_quad for m, g in enumerate(self.grids)])

    @property
    def n_particles(self):
        return self.config.n_particles

    def exterior_sources(self):
        """Per-particle (points, d-sigma weights, exterior density values) triples."""
        out = []
        for m, g in enumerate(self.grids):
            out.append((g.y_quad, g.quad_weight * g.speed_quad, self.exterior_quad[m]))
        return out

    def reconstruct(self, particle: int, t):
        """Interior and exterior densities of one particle at parameter t."""
        g = self.grids[particle]
        mat = forward_basis_matrix(g.basis, np.atleast_1d(np.asarray(t, dtype=float)))
        return self.coeff_interior[particle] @ mat, self.coeff_exterior[particle] @ mat


def solve_forward(system: ForwardSystem,
                  numerics: Numerics = Numerics()) -> DensitySolution:
    """Dense direct solve of the forward system with residual and condition reporting."""
    sol, residual, cond = _solve_dense(system.matrix, system.rhs, system.lam,
                                       numerics.residual_tol)
    m = system.config.n_particles
    n = system.grids[0].basis.size
    mn = m * n
    return DensitySolution(
        config=system.config, grids=system.grids, lam=system.lam, k_m=system.k_m,
        k_c=system.k_c, eps_m=system.eps_m, eps_c=system.eps_c, direction=system.direction,
        coeff_interior=sol[:mn].reshape(m, n), coeff_exterior=sol[mn:].reshape(m, n),
        residual=residual, condition=cond)


def reconstruct_density(sol: DensitySolution, particle: int, t):
    """Basis expansion of the interior and exterior densities at parameter t."""
    return sol.reconstruct(particle, t)


def solve_at(config: DesignConfig, lam: float, material, medium,
             numerics: Numerics = Numerics(), grids=None, theta0: float = 0.0) -> DensitySolution:
    """Assemble and solve at one wavelength (convenience wrapper)."""
    system = assemble_forward(config, lam, material, medium, numerics, grids, theta0,
                              overlap_warning=False)
    return solve_forward(system, numerics)
