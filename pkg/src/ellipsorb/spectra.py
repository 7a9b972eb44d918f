"""Broadband spectrum driver: per-wavelength forward solves plus observables."""

from __future__ import annotations

import numpy as np

from .forward import Numerics, solve_at
from .geometry import DesignConfig
from .materials import BackgroundMedium
from .observables import MeasurementArc, Spectrum, absorptance, cross_sections
from .parallel import parallel_map


def _spectrum_task(args):
    config, lam, arc, material, medium, numerics = args
    sol = solve_at(config, lam, material, medium, numerics, theta0=arc.theta0)
    a_val = absorptance(sol, arc, numerics.theta_nodes)
    qe, qs, qa = cross_sections(sol, numerics.full_circle_nodes)
    return a_val, qe, qs, qa


def compute_spectrum(config: DesignConfig, lambdas, arc: MeasurementArc, material,
                     medium: BackgroundMedium, numerics: Numerics = Numerics(),
                     threads: int = 1) -> Spectrum:
    """Absorptance and cross sections of one configuration over a wavelength grid."""
    lambdas = np.asarray(lambdas, dtype=float)
    rows = parallel_map(_spectrum_task,
                        [(config, lam, arc, material, medium, numerics)
                         for lam in lambdas], threads)
    arr = np.array(rows)
    return Spectrum(lambdas=lambdas, absorptance=arr[:, 0], q_ext=arr[:, 1],
                    q_scat=arr[:, 2], q_abs=arr[:, 3])


def _absorptance_task(args):
    config, lam, arc, material, medium, numerics = args
    sol = solve_at(config, lam, material, medium, numerics, theta0=arc.theta0)
    return absorptance(sol, arc, numerics.theta_nodes)


def absorptance_curve(config: DesignConfig, lambdas, arc: MeasurementArc, material,
                      medium: BackgroundMedium, numerics: Numerics = Numerics(),
                      threads: int = 1) -> np.ndarray:
    """Absorptance only, over a wavelength grid."""
    lambdas = np.asarray(lambdas, dtype=float)
    return np.array(parallel_map(_absorptance_task,
                                 [(config, lam, arc, material, medium, numerics)
                                  for lam in lambdas], threads))
