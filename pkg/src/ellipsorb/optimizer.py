"""Projected gradient descent over the particle shape parameters.

Each iteration recomputes the wavelength-independent singular blocks for the
current shapes, accumulates the broadband gradient, takes a constant step,
and projects: a is clamped to [a_min, a_max], theta to [0, 2 pi] (no modular
wrap, by design), and the aspect ratio b/a to [eta_min, eta_max] with b
reassigned as eta * a.  Particle positions are unconstrained.  Overlap is not
prevented; a detector only warns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .forward import Numerics
from .geometry import Bounds, DesignConfig, N_SLOTS, config_from_vector
from .gradient import full_gradient
from .materials import BackgroundMedium
from .observables import MeasurementArc, TargetSpectrum


@dataclass
class OptimizationState:
    """Current iterate with its objective and per-iteration history."""

    iteration: int
    config: DesignConfig
    objective: float
    gradient_norm: float
    history: list = field(default_factory=list)   # rows (iteration, J, grad_inf_norm)


def project(w, bounds: Bounds) -> np.ndarray:
    """Componentwise projection onto the admissible box, aspect ratio included."""
    w = np.asarray(w, dtype=float).copy()
    for m in range(w.size // N_SLOTS):
        base = N_SLOTS * m
        a_new = np.clip(w[base + 0], bounds.a_min, bounds.a_max)
        eta = np.clip(w[base + 1] / w[base + 0], bounds.eta_min, bounds.eta_max)
        w[base + 0] = a_new
        w[base + 1] = eta * a_new
        w[base + 2] = np.clip(w[base + 2], 0.0, 2.0 * np.pi)
    return w


def _check_overlap(config: DesignConfig):
    parts = config.particles
    for i in range(len(parts)):
        for j in range(i + 1, len(parts)):
            pi, pj = parts[i], parts[j]
            if np.hypot(pi.x1 - pj.x1, pi.x2 - pj.x2) < pi.a + pj.a:
                warnings.warn(f"iterate has potentially overlapping particles {i}, {j}",
                              stacklevel=3)
                return


def step(state: OptimizationState, target: TargetSpectrum, arc: MeasurementArc,
         material, medium: BackgroundMedium, numerics: Numerics = Numerics(),
         step_size: float = 0.2, threads: int = 1) -> OptimizationState:
    """One projected gradient-descent step from the given state."""
    res = full_gradient(state.config, target, arc, material, medium, numerics, threads)
    grad = res.gradient
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise FloatingPointError(f"non-finite gradient entries at slots {bad.tolist()} "
                                 f"(iteration {state.iteration})")
    gnorm = float(np.linalg.norm(grad, np.inf))
    history = state.history + [(state.iteration, res.objective, gnorm)]
    w_new = project(state.config.parameter_vector() - step_size * grad,
                    state.config.bounds)
    new_config = config_from_vector(w_new, state.config.bounds, state.config.spacing)
    _check_overlap(new_config)
    return OptimizationState(iteration=state.iteration + 1, config=new_config,
                             objective=res.objective, gradient_norm=gnorm,
                             history=history)


def run(initial: DesignConfig, target: TargetSpectrum, arc: MeasurementArc, material,
        medium: BackgroundMedium, numerics: Numerics = Numerics(),
        step_size: float = 0.2, iterations: int = 1000, threads: int = 1,
        callback=None) -> OptimizationState:
    """Fixed-iteration projected gradient descent; history gets one row per iterate.

    The history has ``iterations + 1`` rows; the final row evaluates the
    objective and gradient at the last iterate without stepping further.
    """
    state = OptimizationState(iteration=0, config=initial, objective=np.nan,
                              gradient_norm=np.nan, history=[])
    for _ in range(iterations):
        state = step(state, target, arc, material, medium, numerics, step_size, threads)
        if callback is not None:
            callback(state)
    res = full_gradient(state.config, target, arc, material, medium, numerics, threads)
    gnorm = float(np.linalg.norm(res.gradient, np.inf))
    state.history.append((state.iteration, res.objective, gnorm))
    state.objective = res.objective
    state.gradient_norm = gnorm
    return state
