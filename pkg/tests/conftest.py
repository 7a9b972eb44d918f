"""Shared fixtures and independent quadrature oracles.

The oracles assemble the Laplace boundary operators by Kress product
quadrature / plain trapezoid on fine grids, independently of every closed
form they are used to check.
"""

import numpy as np
import pytest

from ellipsorb.geometry import (Bounds, DesignConfig, EllipseParams, boundary_point,
                                curvature, elliptic_data, metric_xi, speed,
                                speed_and_normal)
from ellipsorb.materials import SILVER, VACUUM
from ellipsorb.forward import Numerics
from ellipsorb.observables import MeasurementArc
from ellipsorb.quadrature import kress_log_matrix, periodic_nodes


@pytest.fixture(scope="session")
def silver():
    return SILVER


@pytest.fixture(scope="session")
def vacuum():
    return VACUUM


@pytest.fixture(scope="session")
def arc():
    return MeasurementArc()


@pytest.fixture(scope="session")
def numerics():
    return Numerics()


@pytest.fixture
def ellipse_10_4():
    return EllipseParams(10.0, 4.0, np.pi / 4, 0.0, 0.0)


@pytest.fixture
def config_10_4(ellipse_10_4):
    return DesignConfig((ellipse_10_4,), bounds=Bounds())


class LaplaceOracle:
    """Fine-grid quadrature of the Laplace layer operators on one ellipse.

    All four operators (forward/adjoint single layer and NP) are assembled
    from the kernel definitions only: Kress product quadrature for the log
    singularity, plain trapezoid with the curvature diagonal for the smooth
    NP kernels.
    """

    def __init__(self, params: EllipseParams, n: int = 512):
        self.params = params
        self.n = n
        self.nodes = periodic_nodes(n)
        self.points = boundary_point(params, self.nodes)
        self.speed, self.normal = speed_and_normal(params, self.nodes)
        self.kappa = curvature(params, self.nodes)
        diff = self.points[:, None, :] - self.points[None, :, :]
        self.r2 = np.sum(diff**2, axis=-1)
        self.diff = diff
        eye = np.eye(n, dtype=bool)
        dsin = 4.0 * np.sin((self.nodes[:, None] - self.nodes[None, :]) / 2.0) ** 2
        ratio = np.where(eye, 1.0, self.r2 / np.where(dsin == 0.0, 1.0, dsin))
        smooth = np.log(ratio) / (4.0 * np.pi)
        np.fill_diagonal(smooth, np.log(self.speed**2) / (4.0 * np.pi))
        # integrates f(s) ds against G(x(t) - x(s)) (no surface weight)
        self.single_layer_plain = (kress_log_matrix(n) / (4.0 * np.pi)
                                   + (2.0 * np.pi / n) * smooth)

    def s_forward(self, values):
        """S_w[f](t_i) = int G |y'(s)| f(s) ds for nodal values f, shape (n, F)."""
        values = np.atleast_2d(values)
        return self.single_layer_plain @ (values * self.speed[None, :]).T

    def k_star(self, values):
        """K*_w[f](t_i) = int dG/dnu_x |y'(s)| f(s) ds (smooth kernel, trapezoid)."""
        n = self.n
        eye = np.eye(n, dtype=bool)
        zn = np.sum(self.diff * self.normal[:, None, :], axis=-1)
        ker = np.where(eye, 0.0, zn / (2.0 * np.pi * np.where(self.r2 == 0, 1.0, self.r2)))
        ker = ker * self.speed[None, :]
        np.fill_diagonal(ker, self.kappa * self.speed / (4.0 * np.pi))
        return (2.0 * np.pi / n) * ker @ values.T

    def s_adjoint(self, values):
        """S*_w[f](t_i) = |x'(t_i)| int G f(s) ds."""
        return self.speed[:, None] * (self.single_layer_plain @ values.T)

    def k_adjoint(self, values):
        """K_w[f](t_i) = |x'(t_i)| int dG/dnu_y(s) f(s) ds."""
        n = self.n
        eye = np.eye(n, dtype=bool)
        zn = -np.sum(self.diff * self.normal[None, :, :], axis=-1)
        ker = np.where(eye, 0.0, zn / (2.0 * np.pi * np.where(self.r2 == 0, 1.0, self.r2)))
        np.fill_diagonal(ker, self.kappa / (4.0 * np.pi))
        return self.speed[:, None] * ((2.0 * np.pi / n) * ker @ values.T)


@pytest.fixture
def laplace_oracle():
    return LaplaceOracle
