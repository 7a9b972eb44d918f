"""Classical Nystrom reference solver for the forward and adjoint systems.

Kress-style trigonometric product quadrature handles the logarithmic kernel
singularity on each particle's self block; cross-particle blocks are smooth
and use the plain periodic trapezoid.  This solver shares no discretization
machinery with the reduced-basis path and serves as its validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from . import kernels
from .forward import Numerics, SolverError, _solve_dense
from .geometry import (DesignConfig, boundary_point, curvature, speed_and_normal)
from .materials import BackgroundMedium, wavenumbers
from .quadrature import log_split_quadrature, periodic_nodes, trapezoid_quadrature


@dataclass(frozen=True)
class NystromGrid:
    """Shared parameter grid: nodes and trapezoid weights (sum 2 pi)."""

    count: int
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def make(cls, count: int):
        if count % 2 != 0 or count < 8:
            raise ValueError(f"node count must be even and >= 8, got {count}")
        nodes = periodic_nodes(count)
        weights = np.full(count, 2.0 * np.pi / count)
        return cls(count=count, nodes=nodes, weights=weights)


@dataclass(frozen=True)
class _ParticleMesh:
    points: np.ndarray
    speed: np.ndarray
    normal: np.ndarray
    kappa: np.ndarray


def _meshes(config: DesignConfig, grid: NystromGrid):
    out = []
    for p in config.particles:
        pts = boundary_point(p, grid.nodes)
        sp, nu = speed_and_normal(p, grid.nodes)
        out.append(_ParticleMesh(points=pts, speed=sp, normal=nu,
                                 kappa=curvature(p, grid.nodes)))
    return out


def _self_geometry(mesh: _ParticleMesh):
    z = mesh.points[:, None, :] - mesh.points[None, :, :]
    r = np.linalg.norm(z, axis=-1)
    return z, r


def _single_layer_self(mesh, grid, k):
    """Kress matrix for int G^k(x(t)-x(s)) |x'(s)| f(s) ds on one particle."""
    _, r = _self_geometry(mesh)
    off = ~np.eye(grid.count, dtype=bool)
    full = np.zeros((grid.count, grid.count), dtype=complex)
    full[off] = kernels.green_helmholtz(r[off], k)
    full *= mesh.speed[None, :]
    logcoef = jv(0, k * r) / (4.0 * np.pi) * mesh.speed[None, :]
    diag = ((np.log(mesh.speed) / (2.0 * np.pi)) + kernels.ghat_zero(k)) * mesh.speed
    return log_split_quadrature(full, logcoef, diag, grid.nodes)


def _np_adjoint_self(mesh, grid, k):
    """Kress matrix for int dG^k/dnu_x(t) |x'(s)| f(s) ds on one particle."""
    z, r = _self_geometry(mesh)
    off = ~np.eye(grid.count, dtype=bool)
    zn = np.sum(z * mesh.normal[:, None, :], axis=-1)
    full = np.zeros((grid.count, grid.count), dtype=complex)
    full[off] = kernels.green_helmholtz_radial(r[off], k) * zn[off] / r[off]
    full *= mesh.speed[None, :]
    logcoef = np.zeros((grid.count, grid.count), dtype=complex)
    logcoef[off] = -(k / (4.0 * np.pi)) * jv(1, k * r[off]) * zn[off] / r[off]
    logcoef *= mesh.speed[None, :]
    diag = mesh.kappa * mesh.speed / (4.0 * np.pi)
    return log_split_quadrature(full, logcoef, diag, grid.nodes)


def _single_layer_cross(mesh_row, mesh_col, grid, k):
    z = mesh_row.points[:, None, :] - mesh_col.points[None, :, :]
    r = np.linalg.norm(z, axis=-1)
    full = kernels.green_helmholtz(r, k) * mesh_col.speed[None, :]
    return trapezoid_quadrature(full, grid.count)


def _np_adjoint_cross(mesh_row, mesh_col, grid, k):
    z = mesh_row.points[:, None, :] - mesh_col.points[None, :, :]
    r = np.linalg.norm(z, axis=-1)
    zn = np.sum(z * mesh_row.normal[:, None, :], axis=-1)
    full = kernels.green_helmholtz_radial(r, k) * zn / r * mesh_col.speed[None, :]
    return trapezoid_quadrature(full, grid.count)


@dataclass
class NystromSolution:
    """Nodal forward densities on the reference grid."""

    config: DesignConfig
    grid: NystromGrid
    lam: float
    k_m: float
    k_c: complex
    eps_m: float
    eps_c: complex
    direction: np.ndarray
    meshes: list
    phi_interior: np.ndarray   # (M, n)
    phi_exterior: np.ndarray   # (M, n)
    residual: float
    condition: float

    def exterior_sources(self):
        out = []
        for m, mesh in enumerate(self.meshes):
            out.append((mesh.points, self.grid.weights * mesh.speed, self.phi_exterior[m]))
        return out


def solve_forward_nystrom(config: DesignConfig, lam: float, material,
                          medium: BackgroundMedium, n: int = 200,
                          theta0: float = 0.0,
                          numerics: Numerics = Numerics()) -> NystromSolution:
    """Solve the transmission system with nodal densities on n points per particle."""
    grid = NystromGrid.make(n)
    meshes = _meshes(config, grid)
    k_m, k_c = wavenumbers(lam, medium, material)
    k_m = float(np.real(k_m))
    k_c = complex(k_c)
    eps_m = medium.rel_permittivity
    eps_c = complex(material.permittivity(lam))
    direction = np.array([np.cos(theta0), np.sin(theta0)])

    mm = config.n_particles
    size = mm * n
    a = np.zeros((2 * size, 2 * size), dtype=complex)
    rhs = np.zeros(2 * size, dtype=complex)
    for i, mi in enumerate(meshes):
        ri = slice(i * n, (i + 1) * n)
        ui = np.exp(1j * k_m * (mi.points @ direction))
        rhs[ri] = ui
        rhs[size + i * n:size + (i + 1) * n] = \
            1j * k_m * (mi.normal @ direction) * ui / eps_m
        for j, mj in enumerate(meshes):
            cj = slice(j * n, (j + 1) * n)
            if i == j:
                s_c = _single_layer_self(mi, grid, k_c)
                s_m = _single_layer_self(mi, grid, k_m)
                d_c = _np_adjoint_self(mi, grid, k_c)
                d_m = _np_adjoint_self(mi, grid, k_m)
                half = 0.5 * np.eye(n)
            else:
                s_c = _single_layer_cross(mi, mj, grid, k_c)
                s_m = _single_layer_cross(mi, mj, grid, k_m)
                d_c = _np_adjoint_cross(mi, mj, grid, k_c)
                d_m = _np_adjoint_cross(mi, mj, grid, k_m)
                half = 0.0
            a[ri, cj] = s_c
            a[ri.start:ri.stop, size + cj.start:size + cj.stop] = -s_m
            a[size + ri.start:size + ri.stop, cj] = (-half + d_c) / eps_c
            a[size + ri.start:size + ri.stop, size + cj.start:size + cj.stop] = \
                -(half + d_m) / eps_m

    sol, residual, cond = _solve_dense(a, rhs, lam, numerics.residual_tol)
    return NystromSolution(config=config, grid=grid, lam=lam, k_m=k_m, k_c=k_c,
                           eps_m=eps_m, eps_c=eps_c, direction=direction, meshes=meshes,
                           phi_interior=sol[:size].reshape(mm, n),
                           phi_exterior=sol[size:].reshape(mm, n),
                           residual=residual, condition=cond)


@dataclass
class NystromAdjointSolution:
    """Nodal adjoint densities on the reference grid."""

    config: DesignConfig
    grid: NystromGrid
    lam: float
    k_m: float
    meshes: list
    p_tilde: np.ndarray   # (M, n)
    q_tilde: np.ndarray   # (M, n)
    residual: float
    condition: float


def solve_adjoint_nystrom(config: DesignConfig, lam: float, material,
                          medium: BackgroundMedium, rhs_function, n: int = 200,
                          numerics: Numerics = Numerics()) -> NystromAdjointSolution:
    """Solve the adjoint system with nodal densities; conjugate kernels, output-side weight.

    ``rhs_function(particle_index, s_nodes)`` supplies the data of the second
    equation; the first equation's right-hand side is identically zero.
    """
    grid = NystromGrid.make(n)
    meshes = _meshes(config, grid)
    k_m, k_c = wavenumbers(lam, medium, material)
    k_m = float(np.real(k_m))
    k_c = complex(k_c)
    eps_m = medium.rel_permittivity
    eps_c = complex(material.permittivity(lam))

    mm = config.n_particles
    size = mm * n
    a = np.zeros((2 * size, 2 * size), dtype=complex)
    rhs = np.zeros(2 * size, dtype=complex)
    for i, mi in enumerate(meshes):
        ri = slice(i * n, (i + 1) * n)
        rhs[size + i * n:size + (i + 1) * n] = rhs_function(i, grid.nodes)
        for j, mj in enumerate(meshes):
            cj = slice(j * n, (j + 1) * n)
            if i == j:
                s_blk = _adjoint_single_layer_self(mi, grid, k_c)
                s_blk_m = _adjoint_single_layer_self(mi, grid, k_m)
                k_blk = _adjoint_np_self(mi, grid, k_c)
                k_blk_m = _adjoint_np_self(mi, grid, k_m)
                half = 0.5 * np.eye(n)
            else:
                s_blk = _adjoint_single_layer_cross(mi, mj, grid, k_c)
                s_blk_m = _adjoint_single_layer_cross(mi, mj, grid, k_m)
                k_blk = _adjoint_np_cross(mi, mj, grid, k_c)
                k_blk_m = _adjoint_np_cross(mi, mj, grid, k_m)
                half = 0.0
            a[ri, cj] = s_blk
            a[ri.start:ri.stop, size + cj.start:size + cj.stop] = \
                (-half + k_blk) / np.conj(eps_c)
            a[size + ri.start:size + ri.stop, cj] = -s_blk_m
            a[size + ri.start:size + ri.stop, size + cj.start:size + cj.stop] = \
                -(half + k_blk_m) / eps_m

    sol, residual, cond = _solve_dense(a, rhs, lam, numerics.residual_tol)
    return NystromAdjointSolution(config=config, grid=grid, lam=lam, k_m=k_m, meshes=meshes,
                                  p_tilde=sol[:size].reshape(mm, n),
                                  q_tilde=sol[size:].reshape(mm, n),
                                  residual=residual, condition=cond)


def _adjoint_single_layer_self(mesh, grid, k):
    """Kress matrix for |x'(t)| int conj(G^k)(x(t)-x(s)) f(s) ds (no source weight)."""
    _, r = _self_geometry(mesh)
    off = ~np.eye(grid.count, dtype=bool)
    full = np.zeros((grid.count, grid.count), dtype=complex)
    full[off] = np.conj(kernels.green_helmholtz(r[off], k))
    logcoef = np.conj(jv(0, k * r)) / (4.0 * np.pi)
    diag = (np.log(mesh.speed) / (2.0 * np.pi)) + np.conj(kernels.ghat_zero(k))
    q = log_split_quadrature(full, logcoef, diag, grid.nodes)
    return mesh.speed[:, None] * q


def _adjoint_np_self(mesh, grid, k):
    """Kress matrix for |x'(t)| int dG^{-k}/dnu_y(s) f(s) ds on one particle."""
    z, r = _self_geometry(mesh)
    off = ~np.eye(grid.count, dtype=bool)
    zn = np.sum(z * mesh.normal[None, :, :], axis=-1)  # z(t,s) . nu(s)
    full = np.zeros((grid.count, grid.count), dtype=complex)
    full[off] = -np.conj(kernels.green_helmholtz_radial(r[off], k)) * zn[off] / r[off]
    logcoef = np.zeros((grid.count, grid.count), dtype=complex)
    logcoef[off] = np.conj((k / (4.0 * np.pi)) * jv(1, k * r[off])) * zn[off] / r[off]
    diag = mesh.kappa / (4.0 * np.pi)
    q = log_split_quadrature(full, logcoef, diag, grid.nodes)
    return mesh.speed[:, None] * q


def _adjoint_single_layer_cross(mesh_row, mesh_col, grid, k):
    z = mesh_row.points[:, None, :] - mesh_col.points[None, :, :]
    r = np.linalg.norm(z, axis=-1)
    full = np.conj(kernels.green_helmholtz(r, k))
    return mesh_row.speed[:, None] * trapezoid_quadrature(full, grid.count)


def _adjoint_np_cross(mesh_row, mesh_col, grid, k):
    z = mesh_row.points[:, None, :] - mesh_col.points[None, :, :]
    r = np.linalg.norm(z, axis=-1)
    zn = np.sum(z * mesh_col.normal[None, :, :], axis=-1)
    full = -np.conj(kernels.green_helmholtz_radial(r, k)) * zn / r
    return mesh_row.speed[:, None] * trapezoid_quadrature(full, grid.count)
