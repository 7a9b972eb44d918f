"""Parametric elliptical boundaries and their shape derivatives.

Each particle is the rotated, translated ellipse

    x(t; w) = R(theta) (a cos t, b sin t) + (x1, x2),   t in [0, 2pi),

with parameter vector w = (a, b, theta, x1, x2) and the counterclockwise
orientation.  The outward unit normal is the tangent rotated 90 degrees
clockwise.  Strictly a > b is required so the focal distance c = sqrt(a^2-b^2)
stays real positive; circles would degenerate the elliptic radius rho.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Parameter-slot ordering used for every 5-vector of shape derivatives.
SLOTS = ("a", "b", "theta", "x1", "x2")
N_SLOTS = 5

# Relative margin enforcing strict a > b.
_AB_MARGIN = 1e-9


@dataclass(frozen=True)
class EllipseParams:
    """Five shape parameters of one particle: semi-axes (nm), rotation (rad), center (nm)."""

    a: float
    b: float
    theta: float
    x1: float
    x2: float

    def __post_init__(self):
        for name in ("a", "b", "theta", "x1", "x2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (np.isfinite(self.a) and np.isfinite(self.b) and np.isfinite(self.theta)
                and np.isfinite(self.x1) and np.isfinite(self.x2)):
            raise ValueError(f"non-finite ellipse parameters: {self}")
        if not self.b > 0:
            raise ValueError(f"semi-minor axis must be positive, got b={self.b}")
        if not self.a >= self.b * (1.0 + _AB_MARGIN):
            raise ValueError(
                f"need strictly a > b (focal distance degenerates), got a={self.a}, b={self.b}"
            )

    def as_array(self):
        return np.array([self.a, self.b, self.theta, self.x1, self.x2])


@dataclass(frozen=True)
class EllipticData:
    """Focal distance c = sqrt(a^2-b^2) (nm) and elliptic radius rho = ln((a+b)/c)."""

    c: float
    rho: float


@dataclass(frozen=True)
class Bounds:
    """Admissible parameter box: a in [a_min, a_max], aspect b/a in [eta_min, eta_max]."""

    a_min: float = 8.0
    a_max: float = 20.0
    eta_min: float = 0.1
    eta_max: float = 0.9

    def __post_init__(self):
        if not (0 < self.a_min <= self.a_max):
            raise ValueError(f"need 0 < a_min <= a_max, got [{self.a_min}, {self.a_max}]")
        if not (0 < self.eta_min <= self.eta_max < 1):
            raise ValueError(
                f"need 0 < eta_min <= eta_max < 1, got [{self.eta_min}, {self.eta_max}]"
            )

    def contains(self, p: EllipseParams, tol: float = 1e-9) -> bool:
        eta = p.b / p.a
        return (self.a_min - tol <= p.a <= self.a_max + tol
                and self.eta_min - tol <= eta <= self.eta_max + tol)


# Permissive box for ad-hoc geometries (tests, oracles); designs use tighter bounds.
WIDE_BOUNDS = Bounds(a_min=0.5, a_max=1000.0, eta_min=1e-4, eta_max=1.0 - 1e-8)


@dataclass(frozen=True)
class DesignConfig:
    """Ordered list of particles plus admissible bounds and layout spacing (nm)."""

    particles: tuple
    bounds: Bounds = Bounds()
    spacing: tuple = (80.0, 80.0)

    def __post_init__(self):
        particles = tuple(self.particles)
        object.__setattr__(self, "particles", particles)
        if len(particles) < 1:
            raise ValueError("DesignConfig needs at least one particle")
        for m, p in enumerate(particles):
            if not isinstance(p, EllipseParams):
                raise TypeError(f"particle {m} is not EllipseParams")
            if not self.bounds.contains(p):
                raise ValueError(
                    f"particle {m} outside bounds: a={p.a}, eta={p.b / p.a}, bounds={self.bounds}"
                )

    @property
    def n_particles(self) -> int:
        return len(self.particles)

    def parameter_vector(self):
        """All particle parameters concatenated, ordered (a,b,theta,x1,x2) per particle."""
        return np.concatenate([p.as_array() for p in self.particles])


def config_from_vector(w, bounds: Bounds, spacing=(80.0, 80.0)) -> DesignConfig:
    """Rebuild a DesignConfig from the concatenated parameter vector."""
    w = np.asarray(w, dtype=float)
    if w.size % N_SLOTS != 0:
        raise ValueError(f"parameter vector length {w.size} not a multiple of {N_SLOTS}")
    parts = tuple(EllipseParams(*w[5 * m:5 * m + 5]) for m in range(w.size // N_SLOTS))
    return DesignConfig(particles=parts, bounds=bounds, spacing=tuple(spacing))


def _rotation(theta):
    ct, st = np.cos(theta), np.sin(theta)
    return np.array([[ct, -st], [st, ct]])


def boundary_point(p: EllipseParams, t):
    """Boundary point x(t; w), shape (..., 2)."""
    t = np.asarray(t, dtype=float)
    v = np.stack([p.a * np.cos(t), p.b * np.sin(t)], axis=-1)
    return v @ _rotation(p.theta).T + np.array([p.x1, p.x2])


def boundary_tangent(p: EllipseParams, t):
    """Velocity x'(t; w), shape (..., 2)."""
    t = np.asarray(t, dtype=float)
    v = np.stack([-p.a * np.sin(t), p.b * np.cos(t)], axis=-1)
    return v @ _rotation(p.theta).T


def boundary_second_derivative(p: EllipseParams, t):
    """Acceleration x''(t; w), shape (..., 2); used for curvature-limit quadrature."""
    t = np.asarray(t, dtype=float)
    v = np.stack([-p.a * np.cos(t), -p.b * np.sin(t)], axis=-1)
    return v @ _rotation(p.theta).T


def speed(p: EllipseParams, t):
    """|x'(t)| = sqrt(a^2 sin^2 t + b^2 cos^2 t); rotation/translation invariant."""
    t = np.asarray(t, dtype=float)
    return np.sqrt((p.a * np.sin(t)) ** 2 + (p.b * np.cos(t)) ** 2)


def speed_and_normal(p: EllipseParams, t):
    """Speed |x'(t)| and outward unit normal (tangent rotated 90 deg clockwise)."""
    dx = boundary_tangent(p, t)
    sp = np.linalg.norm(dx, axis=-1)
    nu = np.stack([dx[..., 1], -dx[..., 0]], axis=-1) / sp[..., None]
    return sp, nu


def curvature(p: EllipseParams, t):
    """Signed curvature of the counterclockwise boundary (positive for convex)."""
    d1 = boundary_tangent(p, t)
    d2 = boundary_second_derivative(p, t)
    sp = np.linalg.norm(d1, axis=-1)
    return (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / sp**3


def elliptic_data(p: EllipseParams) -> EllipticData:
    """Focal distance and elliptic radius of the particle's self frame."""
    c = np.sqrt(p.a**2 - p.b**2)
    rho = np.log((p.a + p.b) / c)
    return EllipticData(c=float(c), rho=float(rho))


def metric_xi(data: EllipticData, t):
    """Elliptic metric coefficient Xi(rho, t) = c sqrt(sinh^2 rho + sin^2 t)."""
    t = np.asarray(t, dtype=float)
    return data.c * np.sqrt(np.sinh(data.rho) ** 2 + np.sin(t) ** 2)


@dataclass(frozen=True)
class ShapeJacobians:
    """Derivatives with respect to w = (a, b, theta, x1, x2).

    Attributes
    ----------
    dx : (5, ..., 2) derivative of the boundary point.
    dspeed : (5, ...) derivative of |x'(t)|.
    dnu : (5, ..., 2) derivative of the outward unit normal.
    dc : (5,) derivative of the focal distance.
    drho : (5,) derivative of the elliptic radius.
    """

    dx: np.ndarray
    dspeed: np.ndarray
    dnu: np.ndarray
    dc: np.ndarray
    drho: np.ndarray


def focal_jacobians(p: EllipseParams):
    """dc/dw = (a,-b,0,0,0)/c and drho/dw = (-b,a,0,0,0)/c^2 in the SLOTS order."""
    c2 = p.a**2 - p.b**2
    c = np.sqrt(c2)
    dc = np.array([p.a / c, -p.b / c, 0.0, 0.0, 0.0])
    drho = np.array([-p.b / c2, p.a / c2, 0.0, 0.0, 0.0])
    return dc, drho


def shape_jacobians(p: EllipseParams, t) -> ShapeJacobians:
    """Analytic derivatives of point, speed and normal with respect to all five slots."""
    t = np.asarray(t, dtype=float)
    ct, st = np.cos(t), np.sin(t)
    rot = _rotation(p.theta)

    zeros2 = np.zeros(t.shape + (2,))
    dx = np.empty((N_SLOTS,) + t.shape + (2,))
    dx[0] = np.stack([p.a * 0 + ct, 0 * t], axis=-1) @ rot.T          # d/da of (a cos t, b sin t)
    dx[1] = np.stack([0 * t, st], axis=-1) @ rot.T
    v = np.stack([p.a * ct, p.b * st], axis=-1)
    drot = np.array([[-np.sin(p.theta), -np.cos(p.theta)],
                     [np.cos(p.theta), -np.sin(p.theta)]])
    dx[2] = v @ drot.T
    dx[3] = zeros2 + np.array([1.0, 0.0])
    dx[4] = zeros2 + np.array([0.0, 1.0])

    # x'(t) = R(theta) (-a sin t, b cos t)
    dtan = np.empty((N_SLOTS,) + t.shape + (2,))
    dtan[0] = np.stack([-st, 0 * t], axis=-1) @ rot.T
    dtan[1] = np.stack([0 * t, ct], axis=-1) @ rot.T
    vp = np.stack([-p.a * st, p.b * ct], axis=-1)
    dtan[2] = vp @ drot.T
    dtan[3] = zeros2
    dtan[4] = zeros2

    sp = np.sqrt((p.a * st) ** 2 + (p.b * ct) ** 2)
    dspeed = np.zeros((N_SLOTS,) + t.shape)
    dspeed[0] = p.a * st**2 / sp
    dspeed[1] = p.b * ct**2 / sp

    # nu = Rot(x') / |x'| with Rot(u) = (u2, -u1)
    tan = vp @ rot.T
    rot_tan = np.stack([tan[..., 1], -tan[..., 0]], axis=-1)
    dnu = np.empty((N_SLOTS,) + t.shape + (2,))
    for j in range(N_SLOTS):
        rot_dtan = np.stack([dtan[j][..., 1], -dtan[j][..., 0]], axis=-1)
        dnu[j] = rot_dtan / sp[..., None] - rot_tan * (dspeed[j] / sp**2)[..., None]

    dc, drho = focal_jacobians(p)
    return ShapeJacobians(dx=dx, dspeed=dspeed, dnu=dnu, dc=dc, drho=drho)
