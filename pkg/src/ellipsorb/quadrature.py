"""Periodic trapezoid and Kress-style product quadrature for log kernels.

The product rule integrates ln(4 sin^2((t-s)/2)) against trigonometric
polynomials exactly: with P = 2n equispaced nodes s_j = pi j / n,

    int_0^{2pi} ln(4 sin^2((t_i - s)/2)) f(s) ds ~ sum_j R_{ij} f(s_j),

where R depends only on (i - j) mod P.  Smooth remainders use the plain
trapezoid weight 2 pi / P.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import circulant


def periodic_nodes(count: int) -> np.ndarray:
    """Equispaced nodes 2 pi j / count, j = 0..count-1."""
    return 2.0 * np.pi * np.arange(count) / count


def kress_log_matrix(count: int) -> np.ndarray:
    """Quadrature matrix R for the ln(4 sin^2((t-s)/2)) factor on count nodes (even)."""
    if count % 2 != 0 or count < 4:
        raise ValueError(f"need an even node count >= 4, got {count}")
    half = count // 2
    d = np.arange(count)
    angles = np.pi * d / half
    m = np.arange(1, half)
    row = -(2.0 * np.pi / half) * np.sum(np.cos(np.outer(m, angles)) / m[:, None], axis=0)
    row -= (np.pi / half**2) * np.cos(half * angles)
    return circulant(row)


def log_split_quadrature(full, logcoef, diag_smooth, nodes=None):
    """Nystrom matrix for a kernel with a ln(4 sin^2((t-s)/2)) singularity.

    Parameters
    ----------
    full : (P, P) kernel values at node pairs; the diagonal may be arbitrary.
    logcoef : (P, P) smooth coefficient of ln(4 sin^2((t-s)/2)), diagonal included.
    diag_smooth : (P,) diagonal limit of the smooth remainder
        full - logcoef * ln(4 sin^2(...)).
    nodes : optional node vector (defaults to periodic_nodes(P)).

    Returns the (P, P) matrix Q with (Q @ f)[i] ~ int kernel(t_i, s) f(s) ds.
    """
    full = np.asarray(full)
    logcoef = np.asarray(logcoef)
    count = full.shape[0]
    if nodes is None:
        nodes = periodic_nodes(count)
    diff = nodes[:, None] - nodes[None, :]
    logfac = np.log(4.0 * np.sin(diff / 2.0) ** 2, where=~np.eye(count, dtype=bool),
                    out=np.zeros((count, count)))
    smooth = full - logcoef * logfac
    np.fill_diagonal(smooth, diag_smooth)
    return kress_log_matrix(count) * logcoef + (2.0 * np.pi / count) * smooth


def trapezoid_quadrature(full, count: int | None = None):
    """Plain periodic-trapezoid Nystrom matrix for a smooth kernel."""
    full = np.asarray(full)
    if count is None:
        count = full.shape[1]
    return (2.0 * np.pi / count) * full


from functools import lru_cache


@lru_cache(maxsize=128)
def collocation_log_plan(n_rows: int, count: int):
    """Cached Kress weights and log factors for periodic rows against count nodes.

    Valid only when the evaluation rows are exactly periodic_nodes(n_rows),
    which holds throughout the collocation assembly.
    """
    rows = periodic_nodes(n_rows)
    r_mat = kress_log_weights_at(rows, count)
    diff = rows[:, None] - periodic_nodes(count)[None, :]
    four_sin2 = 4.0 * np.sin(diff / 2.0) ** 2
    coincide = np.isclose(four_sin2, 0.0, atol=1e-24)
    logfac = np.log(np.where(coincide, 1.0, four_sin2))
    for arr in (r_mat, logfac, coincide):
        arr.setflags(write=False)
    return r_mat, logfac, coincide


def kress_log_weights_at(t_rows, count: int) -> np.ndarray:
    """Kress weights R_q(t) for arbitrary evaluation points against count nodes.

    (R @ f)[i] ~ int_0^{2pi} ln(4 sin^2((t_i - s)/2)) f(s) ds with f sampled at
    the count equispaced source nodes; exact for trigonometric polynomials of
    degree < count/2.
    """
    if count % 2 != 0 or count < 4:
        raise ValueError(f"need an even node count >= 4, got {count}")
    half = count // 2
    t_rows = np.atleast_1d(np.asarray(t_rows, dtype=float))
    d = t_rows[:, None] - periodic_nodes(count)[None, :]
    m = np.arange(1, half)
    out = -(2.0 * np.pi / half) * np.einsum("m,mij->ij", 1.0 / m,
                                            np.cos(m[:, None, None] * d[None, :, :]))
    out -= (np.pi / half**2) * np.cos(half * d)
    return out


def log_split_quadrature_at(t_rows, full, logcoef, diag_smooth, plan=None) -> np.ndarray:
    """Rectangular variant of log_split_quadrature with rows at arbitrary points.

    ``diag_smooth`` supplies the smooth-remainder value wherever a row point
    coincides with a source node.  ``plan`` may carry the cached
    (weights, logfac, coincide) triple from collocation_log_plan.
    """
    count = full.shape[1]
    if plan is None:
        t_rows = np.atleast_1d(np.asarray(t_rows, dtype=float))
        s = periodic_nodes(count)
        diff = t_rows[:, None] - s[None, :]
        four_sin2 = 4.0 * np.sin(diff / 2.0) ** 2
        coincide = np.isclose(four_sin2, 0.0, atol=1e-24)
        logfac = np.log(np.where(coincide, 1.0, four_sin2))
        weights = kress_log_weights_at(t_rows, count)
    else:
        weights, logfac, coincide = plan
    smooth = full - logcoef * logfac
    if np.any(coincide):
        smooth = np.where(coincide, np.broadcast_to(diag_smooth, smooth.shape), smooth)
    return weights * logcoef + (2.0 * np.pi / count) * smooth
