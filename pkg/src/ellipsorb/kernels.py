"""Laplace and Helmholtz Green's functions and the smooth remainder split.

The Helmholtz kernel G^k(z) = -(i/4) H0^(1)(k|z|) is split as G + Ghat^k,
where G(z) = ln|z|/(2 pi) carries the wavelength-independent logarithmic
singularity and Ghat^k is smooth up to the diagonal with the limits

    ghat(0; k)  = -(i/4 - gamma/(2 pi) - ln(k/2)/(2 pi)),
    ghat'(0; k) = 0.

Near r = 0 the direct subtraction g(r;k) - g(r) loses digits, so below a
switch radius (|k| r <= KR_SWITCH by default) the values come from the small-
argument series through O(r^2 ln r).  ghat'' stays logarithmically singular at
0 and must never be evaluated there.

Complex wavenumbers are supported for Re(k) > 0 (first-quadrant k r, on the
principal Hankel branch); negative real k is handled through the symmetry
G^{-k}(z) = conj(G^k(z)).
"""

from __future__ import annotations

import numpy as np
from scipy.special import hankel1, jv

EULER_GAMMA = 0.57721566490153286

# Default switch: series evaluation of ghat, ghat' for |k| r below this.
KR_SWITCH = 1e-4


def hankel_h0_h1(z):
    """First-kind Hankel functions (H0, H1) for z > 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("hankel_h0_h1 requires z > 0")
    return hankel1(0, z), hankel1(1, z)


def green_laplace(r):
    """Laplace Green's function ln(r) / (2 pi)."""
    return np.log(r) / (2.0 * np.pi)


def _check_wavenumber(k):
    k = complex(k)
    if k == 0:
        raise ValueError("wavenumber must be nonzero")
    return k


def green_helmholtz(r, k):
    """Helmholtz Green's function -(i/4) H0^(1)(k r) for r > 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("green_helmholtz requires r > 0; use the split limits at r = 0")
    k = _check_wavenumber(k)
    if k.imag == 0 and k.real < 0:
        return np.conj(green_helmholtz(r, -k))
    return -0.25j * hankel1(0, k * r)


def green_helmholtz_radial(r, k):
    """Radial derivative d/dr of green_helmholtz: (i k / 4) H1^(1)(k r)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("green_helmholtz_radial requires r > 0")
    k = _check_wavenumber(k)
    if k.imag == 0 and k.real < 0:
        return np.conj(green_helmholtz_radial(r, -k))
    return 0.25j * k * hankel1(1, k * r)


def green_helmholtz_radial2(r, k):
    """Second radial derivative of green_helmholtz."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("green_helmholtz_radial2 requires r > 0")
    k = _check_wavenumber(k)
    if k.imag == 0 and k.real < 0:
        return np.conj(green_helmholtz_radial2(r, -k))
    kr = k * r
    return 0.25j * k**2 * (hankel1(0, kr) - hankel1(1, kr) / kr)


def ghat_zero(k):
    """Diagonal limit ghat(0; k) of the smooth remainder."""
    k = _check_wavenumber(k)
    if k.imag == 0 and k.real < 0:
        return np.conj(ghat_zero(-k))
    return -(0.25j - EULER_GAMMA / (2.0 * np.pi) - np.log(k / 2.0) / (2.0 * np.pi))


def ghat_and_derivatives(r, k, kr_switch: float = KR_SWITCH):
    """Smooth remainder ghat(r;k) = g(r;k) - ln(r)/(2 pi) and its r-derivative.

    Accepts r >= 0 (scalar or array); below the switch radius the values come
    from the small-argument series, continuous with ghat(0;k) and ghat'(0;k)=0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    k = _check_wavenumber(k)
    if k.imag == 0 and k.real < 0:
        gh, gp = ghat_and_derivatives(r, -k, kr_switch)
        return np.conj(gh), np.conj(gp)

    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    gh = np.empty(r.shape, dtype=complex)
    gp = np.empty(r.shape, dtype=complex)

    small = np.abs(k) * r <= kr_switch
    big = ~small
    if np.any(big):
        rb = r[big]
        gh[big] = -0.25j * hankel1(0, k * rb) - np.log(rb) / (2.0 * np.pi)
        gp[big] = 0.25j * k * hankel1(1, k * rb) - 1.0 / (2.0 * np.pi * rb)
    if np.any(small):
        rs = r[small]
        g0 = ghat_zero(k)
        k2r2 = (k * rs) ** 2
        # ln(r) * r^2 -> 0; guard the exact origin.
        lnr = np.where(rs > 0, np.log(np.where(rs > 0, rs, 1.0)), 0.0)
        gh[small] = (g0 * (1.0 - k2r2 / 4.0)
                     - k2r2 * lnr / (8.0 * np.pi)
                     + k2r2 / (8.0 * np.pi))
        gp[small] = (-(k**2) * rs * lnr / (4.0 * np.pi)
                     + (k**2) * rs * (0.125 / np.pi - g0 / 2.0))
    if scalar:
        return gh[0], gp[0]
    return gh, gp


def ghat_second(r, k, kr_switch: float = KR_SWITCH):
    """Second r-derivative of ghat; logarithmically singular as r -> 0 (never call at 0).

    Below the switch radius the value comes from the small-argument series
    -(k^2/(4 pi)) ln r - k^2 (ghat(0;k)/2 + 1/(8 pi)); the direct subtraction
    would cancel catastrophically against the 1/(2 pi r^2) Laplace term.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("ghat_second is singular at r = 0")
    k = _check_wavenumber(k)
    if k.imag == 0 and k.real < 0:
        return np.conj(ghat_second(r, -k, kr_switch))
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.empty(r.shape, dtype=complex)
    small = np.abs(k) * r <= kr_switch
    big = ~small
    if np.any(big):
        rb = r[big]
        out[big] = green_helmholtz_radial2(rb, k) + 1.0 / (2.0 * np.pi * rb**2)
    if np.any(small):
        rs = r[small]
        g0 = ghat_zero(k)
        out[small] = -(k**2) * np.log(rs) / (4.0 * np.pi) - (k**2) * (g0 / 2.0 + 0.125 / np.pi)
    return out[0] if scalar else out


def kernel_triple(r, k, smooth_remainder: bool, kr_switch: float = KR_SWITCH):
    """(g, g', g'') tables from a single Hankel pass, for assembly and gradients.

    With ``smooth_remainder`` the Laplace parts are subtracted (ghat family);
    ghat'' entries at r = 0 are set to 0 because every use multiplies them by
    factors vanishing at least quadratically there.
    """
    r = np.asarray(r, dtype=float)
    k = _check_wavenumber(k)
    if k.imag == 0 and k.real < 0:
        g, gp, gpp = kernel_triple(r, -k, smooth_remainder, kr_switch)
        return np.conj(g), np.conj(gp), np.conj(gpp)
    if not smooth_remainder:
        if np.any(r <= 0):
            raise ValueError("full-kernel tables need r > 0")
        kr = k * r
        h0, h1 = hankel1(0, kr), hankel1(1, kr)
        return (-0.25j * h0, 0.25j * k * h1, 0.25j * k**2 * (h0 - h1 / kr))

    g = np.empty(r.shape, dtype=complex)
    gp = np.empty(r.shape, dtype=complex)
    gpp = np.zeros(r.shape, dtype=complex)
    small = np.abs(k) * r <= kr_switch
    big = ~small
    if np.any(big):
        rb = r[big]
        kr = k * rb
        h0, h1 = hankel1(0, kr), hankel1(1, kr)
        g[big] = -0.25j * h0 - np.log(rb) / (2.0 * np.pi)
        gp[big] = 0.25j * k * h1 - 1.0 / (2.0 * np.pi * rb)
        gpp[big] = 0.25j * k**2 * (h0 - h1 / kr) + 1.0 / (2.0 * np.pi * rb**2)
    if np.any(small):
        rs = r[small]
        g0 = ghat_zero(k)
        k2r2 = (k * rs) ** 2
        pos = rs > 0
        lnr = np.where(pos, np.log(np.where(pos, rs, 1.0)), 0.0)
        g[small] = (g0 * (1.0 - k2r2 / 4.0) - k2r2 * lnr / (8.0 * np.pi)
                    + k2r2 / (8.0 * np.pi))
        gp[small] = (-(k**2) * rs * lnr / (4.0 * np.pi)
                     + (k**2) * rs * (0.125 / np.pi - g0 / 2.0))
        gpp[small] = np.where(
            pos, -(k**2) * lnr / (4.0 * np.pi) - (k**2) * (g0 / 2.0 + 0.125 / np.pi), 0.0)
    return g, gp, gpp


def normal_derivative_kernel(z, nu, k, kr_switch: float = KR_SWITCH):
    """Normal-derivative kernel split for d G^k(z)/d nu_x.

    Parameters
    ----------
    z : (..., 2) displacement x - y with |z| > 0 off the diagonal.
    nu : (..., 2) unit normal at the derivative point x.
    k : wavenumber.

    Returns
    -------
    (hat_part, laplace_part) : the smooth part ghat'(|z|;k) (zhat . nu), which
    tends to 0 on the diagonal, and the Laplace part (zhat . nu)/(2 pi |z|),
    whose diagonal limit on a smooth curve is curvature * |x'| / (4 pi) and is
    supplied by the caller.
    """
    z = np.asarray(z, dtype=float)
    nu = np.asarray(nu, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    if np.any(r == 0):
        raise ValueError("normal_derivative_kernel needs |z| > 0; use the diagonal limits")
    zn = np.sum(z * nu, axis=-1)
    _, gp = ghat_and_derivatives(r, k, kr_switch)
    hat_part = gp * zn / r
    laplace_part = zn / (2.0 * np.pi * r**2)
    return hat_part, laplace_part


def grad_green_helmholtz(z, k):
    """Gradient (with respect to x) of G^k(x - y) at displacement z, shape (..., 2)."""
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    if np.any(r == 0):
        raise ValueError("grad_green_helmholtz requires |z| > 0")
    gp = green_helmholtz_radial(r, k)
    return (gp / r)[..., None] * z
