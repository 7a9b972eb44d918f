"""Physics-informed initial guess: offline dataset, NNLS relaxation, rounding,
integer-constrained particle-swarm refinement, and grid layout.

Under the weak-coupling assumption the total absorptance of well-separated
particles superposes, so fitting a target spectrum reduces to the quadratic
integer program  min_{c in Z_+^L} || D c - A_tar ||^2_{L2(Lambda)}  over the
per-shape multiplicities c.  The chain solves the non-negative relaxation
exactly (Lawson-Hanson NNLS), rounds, and lets an integer-constrained PSO
improve the rounding; the rounded point is seeded into the swarm so the
refined fit is never worse.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import nnls

from .forward import Numerics
from .geometry import Bounds, DesignConfig, EllipseParams
from .materials import BackgroundMedium
from .observables import MeasurementArc, TargetSpectrum
from .parallel import parallel_map
from .spectra import absorptance_curve


@dataclass(frozen=True)
class DatasetSpec:
    """Single-particle shape grid: fixed a, uniform b and theta grids."""

    a: float = 10.0
    b_min: float = 1.0
    b_max: float = 9.0
    b_count: int = 80
    theta_min: float = 0.0
    theta_max: float = np.pi / 2.0
    theta_count: int = 40

    def shape_grid(self):
        """(b, theta) pairs in deterministic b-major order, a > b enforced."""
        bs = np.linspace(self.b_min, self.b_max, self.b_count)
        thetas = np.linspace(self.theta_min, self.theta_max, self.theta_count)
        out = []
        for b in bs:
            if not self.a >= b * (1.0 + 1e-9):
                continue
            for th in thetas:
                out.append((float(b), float(th)))
        return out


@dataclass
class AbsorptanceDataset:
    """Origin-centered single-particle absorptance spectra over a shared grid."""

    a: float
    shapes: list                 # list of (b, theta)
    lambdas: np.ndarray          # (n_lambda,)
    spectra: np.ndarray          # (L, n_lambda)

    @property
    def size(self) -> int:
        return len(self.shapes)

    def params(self, index: int) -> EllipseParams:
        b, theta = self.shapes[index]
        return EllipseParams(self.a, b, theta, 0.0, 0.0)

    def design_matrix(self) -> np.ndarray:
        """Columns are the entry spectra: D[lambda, entry]."""
        return self.spectra.T


def _dataset_task(args):
    """One dataset entry's absorptance spectrum; None marks a solver failure."""
    a, b, theta, lambdas, material, medium, arc, numerics, bounds = args
    try:
        cfg = DesignConfig((EllipseParams(a, b, theta, 0.0, 0.0),), bounds=bounds)
        return absorptance_curve(cfg, lambdas, arc, material, medium, numerics, threads=1)
    except Exception:
        return None


def build_dataset(spec: DatasetSpec, material, medium: BackgroundMedium,
                  arc: MeasurementArc, lambdas, numerics: Numerics = Numerics(),
                  threads: int = 1, bounds: Bounds = Bounds()) -> AbsorptanceDataset:
    """Forward-solve every shape in the grid; failed entries are dropped with a warning."""
    lambdas = np.asarray(lambdas, dtype=float)
    shapes = spec.shape_grid()
    results = parallel_map(_dataset_task,
                           [(spec.a, b, theta, lambdas, material, medium, arc,
                             numerics, bounds) for b, theta in shapes], threads)
    kept, spectra = [], []
    for shape, res in zip(shapes, results):
        if res is None:
            warnings.warn(f"dataset entry b={shape[0]:.4g}, theta={shape[1]:.4g} dropped "
                          "(solver failure)")
            continue
        kept.append(shape)
        spectra.append(res)
    return AbsorptanceDataset(a=spec.a, shapes=kept, lambdas=lambdas,
                              spectra=np.array(spectra))


def save_dataset(ds: AbsorptanceDataset, directory, material_info=None, arc_info=None,
                 extra=None):
    """Persist as manifest.json + one concatenated long-format CSV."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "a_nm": ds.a,
        "entries": [{"b_nm": b, "theta_rad": th} for b, th in ds.shapes],
        "lambda_nm": [float(x) for x in ds.lambdas],
        "ordering": "b-major, then theta; dropped entries omitted",
        "material": material_info or {},
        "arc": arc_info or {},
    }
    if extra:
        manifest.update(extra)
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    with open(directory / "dataset.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entry", "a_nm", "b_nm", "theta_rad", "lambda_nm", "absorptance"])
        for idx, (b, th) in enumerate(ds.shapes):
            for lam, val in zip(ds.lambdas, ds.spectra[idx]):
                writer.writerow([idx, _fmt(ds.a), _fmt(b), _fmt(th), _fmt(lam), _fmt(val)])


def load_dataset(directory) -> AbsorptanceDataset:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    lambdas = np.array(manifest["lambda_nm"], dtype=float)
    shapes = [(e["b_nm"], e["theta_rad"]) for e in manifest["entries"]]
    spectra = np.zeros((len(shapes), lambdas.size))
    with open(directory / "dataset.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        counters = {}
        for row in reader:
            idx = int(row["entry"])
            j = counters.get(idx, 0)
            spectra[idx, j] = float(row["absorptance"])
            counters[idx] = j + 1
    return AbsorptanceDataset(a=manifest["a_nm"], shapes=shapes, lambdas=lambdas,
                              spectra=spectra)


def _fmt(x) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class CountVector:
    """Per-entry particle multiplicities at one stage of the initializer chain."""

    counts: np.ndarray
    stage: str   # relaxed | rounded | refined

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, "counts", counts)
        if self.stage not in ("relaxed", "rounded", "refined"):
            raise ValueError(f"unknown stage {self.stage!r}")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if self.stage != "relaxed" and not np.allclose(counts, np.round(counts)):
            raise ValueError(f"stage {self.stage!r} requires integer counts")


def _l2_weights(lambdas) -> np.ndarray:
    """Trapezoid weights defining the discrete L2(Lambda) norm."""
    lambdas = np.asarray(lambdas, dtype=float)
    w = np.zeros(lambdas.size)
    dl = np.diff(lambdas)
    w[:-1] += dl / 2.0
    w[1:] += dl / 2.0
    return w


def fit_residual(dataset: AbsorptanceDataset, target: TargetSpectrum, counts) -> float:
    """L2(Lambda) misfit || D c - A_tar || for a given count vector."""
    w = _l2_weights(dataset.lambdas)
    resid = dataset.design_matrix() @ np.asarray(counts, dtype=float) - target.values
    return float(np.sqrt(np.sum(w * resid**2)))


def solve_relaxed(dataset: AbsorptanceDataset, target: TargetSpectrum) -> CountVector:
    """Non-negative least squares over the Lambda-weighted system (Lawson-Hanson)."""
    if not np.array_equal(dataset.lambdas, target.lambdas):
        raise ValueError("dataset and target wavelength grids differ")
    sqw = np.sqrt(_l2_weights(dataset.lambdas))
    a = dataset.design_matrix() * sqw[:, None]
    b = target.values * sqw
    counts, _ = nnls(a, b, maxiter=10 * max(a.shape))
    return CountVector(counts=counts, stage="relaxed")


def round_counts(relaxed: CountVector) -> CountVector:
    """Element-wise nearest integer, half away from zero (counts are >= 0)."""
    if relaxed.stage != "relaxed":
        raise ValueError("round_counts expects the relaxed stage")
    return CountVector(counts=np.floor(relaxed.counts + 0.5), stage="rounded")


def refine_heuristic(dataset: AbsorptanceDataset, target: TargetSpectrum,
                     start: CountVector, seed: int = 0, budget: int = 500,
                     swarm_size: int = 64, inertia: float = 0.7,
                     cognitive: float = 1.5, social: float = 1.5) -> CountVector:
    """Integer-constrained PSO around the rounded counts.

    Swarm positions are real and clamped to >= 0; fitness is evaluated on the
    rounded positions.  The start vector is seeded into the swarm, so the best
    rounded position never fits worse than the start.
    """
    if start.stage != "rounded":
        raise ValueError("refine_heuristic expects the rounded stage")
    rng = np.random.default_rng(seed)
    dim = dataset.size
    sqw = np.sqrt(_l2_weights(dataset.lambdas))
    a = dataset.design_matrix() * sqw[:, None]
    b = target.values * sqw

    def fitness(c_rounded):
        r = a @ c_rounded - b
        return float(r @ r)

    ub = np.maximum(4.0, 2.0 * np.max(start.counts) if start.counts.size else 4.0)
    pos = rng.uniform(0.0, ub, size=(swarm_size, dim))
    pos[0] = start.counts
    vel = rng.uniform(-1.0, 1.0, size=(swarm_size, dim))
    rounded = np.floor(pos + 0.5)
    cost = np.array([fitness(rounded[i]) for i in range(swarm_size)])
    best_pos = pos.copy()
    best_cost = cost.copy()
    g_idx = int(np.argmin(best_cost))
    g_pos = best_pos[g_idx].copy()
    g_rounded = np.floor(g_pos + 0.5)
    g_cost = best_cost[g_idx]

    for _ in range(budget):
        r1 = rng.random((swarm_size, dim))
        r2 = rng.random((swarm_size, dim))
        vel = inertia * vel + cognitive * r1 * (best_pos - pos) + social * r2 * (g_pos - pos)
        pos = np.clip(pos + vel, 0.0, None)
        rounded = np.floor(pos + 0.5)
        cost = np.array([fitness(rounded[i]) for i in range(swarm_size)])
        improved = cost < best_cost
        best_pos[improved] = pos[improved]
        best_cost[improved] = cost[improved]
        i_best = int(np.argmin(best_cost))
        if best_cost[i_best] < g_cost:
            g_cost = best_cost[i_best]
            g_pos = best_pos[i_best].copy()
            g_rounded = np.floor(g_pos + 0.5)
    return CountVector(counts=g_rounded, stage="refined")


def layout(refined: CountVector, dataset: AbsorptanceDataset, spacing=(80.0, 80.0),
           bounds: Bounds = Bounds()) -> DesignConfig:
    """Materialize the counts on a centered uniform grid (row-major fill).

    The grid has ceil(sqrt(M)) columns; leftover slots in the last row stay
    empty.  Shape parameters are copied entry by entry in dataset order.
    """
    counts = refined.counts.astype(int)
    m_total = int(np.sum(counts))
    if m_total == 0:
        raise ValueError("layout needs at least one particle (all counts are zero)")
    nx1 = int(np.ceil(np.sqrt(m_total)))
    nx2 = int(np.ceil(m_total / nx1))
    d1, d2 = spacing
    particles = []
    m = 0
    for idx, mult in enumerate(counts):
        b, theta = dataset.shapes[idx]
        for _ in range(mult):
            i = m % nx1 + 1
            j = m // nx1 + 1
            x1 = (i - (1 + nx1) / 2.0) * d1
            x2 = (j - (1 + nx2) / 2.0) * d2
            particles.append(EllipseParams(dataset.a, b, theta, x1, x2))
            m += 1
    return DesignConfig(tuple(particles), bounds=bounds, spacing=tuple(spacing))
