"""Experiment driver: declarative JSON configs in, CSV/JSON artifacts out.

Subcommands
-----------
sweep     absorptance / cross-section spectra for particle variants
validate  reduced-basis vs Nystrom error tables (forward and adjoint)
dataset   offline single-particle absorptance dataset
init      initial-guess generation from a dataset (relax / round / refine)
optimize  projected gradient-descent design loop

Every output CSV starts with a provenance comment block (version, config
hash, seed); outputs are byte-identical across runs with the same config and
seed.  Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adjoint import adjoint_rhs_function, solve_adjoint_at
from .forward import Numerics, SolverError, solve_at
from .geometry import Bounds, DesignConfig, EllipseParams
from .gradient import full_gradient
from .initializer import (AbsorptanceDataset, DatasetSpec, build_dataset, fit_residual,
                          layout, load_dataset, refine_heuristic, round_counts,
                          save_dataset, solve_relaxed)
from .materials import (BackgroundMedium, ConstantMaterial, DrudeMaterial, WavelengthGrid)
from .nystrom import solve_adjoint_nystrom, solve_forward_nystrom
from .observables import MeasurementArc, TargetSpectrum, cross_sections
from .optimizer import run as run_optimizer
from .parallel import default_threads
from .spectra import absorptance_curve, compute_spectrum


class ConfigError(ValueError):
    """Invalid run configuration; the message carries the offending field path."""


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _expect(cond, path, message):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _get(d, key, path, kind=None, required=True, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    value = d[key]
    if kind is not None and not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ConfigError(f"{path}.{key}: expected {names}, got {type(value).__name__}")
    return value


def _num(d, key, path, required=True, default=None):
    value = _get(d, key, path, (int, float), required, default)
    if isinstance(value, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got a boolean")
    return value


def parse_material(d, path="material"):
    _expect(isinstance(d, dict), path, "expected an object")
    model = _get(d, "model", path, str, required=False, default="drude")
    if model == "drude":
        wp = _num(d, "plasma_frequency_ev", path, required=False, default=7.613)
        tau = _num(d, "damping_ev", path, required=False, default=0.048)
        try:
            return DrudeMaterial(plasma_frequency=float(wp), damping=float(tau))
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if model == "constant":
        eps = _get(d, "rel_permittivity", path, (list, int, float))
        if isinstance(eps, list):
            _expect(len(eps) == 2, f"{path}.rel_permittivity", "expected [re, im]")
            eps = complex(eps[0], eps[1])
        return ConstantMaterial(rel_permittivity=complex(eps))
    raise ConfigError(f"{path}.model: unknown material model {model!r}")


def parse_medium(d, path="medium"):
    _expect(isinstance(d, dict), path, "expected an object")
    try:
        return BackgroundMedium(
            rel_permittivity=float(_num(d, "rel_permittivity", path, False, 1.0)),
            rel_permeability=float(_num(d, "rel_permeability", path, False, 1.0)),
            rel_permeability_particle=float(
                _num(d, "particle_rel_permeability", path, False, 1.0)))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_arc(d, path="arc"):
    _expect(isinstance(d, dict), path, "expected an object")
    try:
        return MeasurementArc(
            radius=float(_num(d, "radius_nm", path, False, 1500.0)),
            theta_bar=float(_num(d, "theta_bar", path, False, 0.0)),
            delta_theta=float(_num(d, "delta_theta", path, False, np.pi / 4)),
            theta0=float(_num(d, "theta0", path, False, 0.0)))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_wavelengths(d, path="wavelengths"):
    _expect(isinstance(d, dict), path, "expected an object")
    try:
        return WavelengthGrid(lambda_min=float(_num(d, "min_nm", path)),
                              lambda_max=float(_num(d, "max_nm", path)),
                              count=int(_num(d, "count", path)))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_numerics(d, path="numerics"):
    if d is None:
        return Numerics()
    _expect(isinstance(d, dict), path, "expected an object")
    allowed = {"basis_size", "quad_nodes", "theta_nodes", "full_circle_nodes",
               "series_terms", "kappa_nodes", "nystrom_nodes", "residual_tol"}
    unknown = set(d) - allowed
    _expect(not unknown, path, f"unknown numerics fields {sorted(unknown)}")
    try:
        return Numerics(**{k: (float(v) if k == "residual_tol" else int(v))
                           for k, v in d.items()})
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_bounds(d, path="bounds"):
    if d is None:
        return Bounds()
    _expect(isinstance(d, dict), path, "expected an object")
    try:
        return Bounds(a_min=float(_num(d, "a_min", path, False, 8.0)),
                      a_max=float(_num(d, "a_max", path, False, 20.0)),
                      eta_min=float(_num(d, "eta_min", path, False, 0.1)),
                      eta_max=float(_num(d, "eta_max", path, False, 0.9)))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_particles(items, bounds, spacing, path):
    _expect(isinstance(items, list) and items, path, "expected a non-empty list")
    particles = []
    for i, row in enumerate(items):
        _expect(isinstance(row, list) and len(row) == 5, f"{path}[{i}]",
                "expected [a_nm, b_nm, theta_rad, x1_nm, x2_nm]")
        try:
            particles.append(EllipseParams(*[float(v) for v in row]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}[{i}]: {exc}") from exc
    try:
        return DesignConfig(tuple(particles), bounds=bounds, spacing=spacing)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_target(d, lambdas, path="target"):
    _expect(isinstance(d, dict), path, "expected an object")
    kind = _get(d, "kind", path, str)
    if kind == "constant":
        return TargetSpectrum.constant(lambdas, float(_num(d, "value", path)))
    if kind == "bands":
        bands = _get(d, "bands", path, list)
        parsed = []
        for i, band in enumerate(bands):
            _expect(isinstance(band, list) and len(band) == 3, f"{path}.bands[{i}]",
                    "expected [lo_nm, hi_nm, value]")
            parsed.append(tuple(float(v) for v in band))
        return TargetSpectrum.bands(lambdas, parsed)
    raise ConfigError(f"{path}.kind: unknown target kind {kind!r}")


def design_to_json(config: DesignConfig) -> dict:
    return {
        "particles": [[p.a, p.b, p.theta, p.x1, p.x2] for p in config.particles],
        "bounds": {"a_min": config.bounds.a_min, "a_max": config.bounds.a_max,
                   "eta_min": config.bounds.eta_min, "eta_max": config.bounds.eta_max},
        "spacing_nm": list(config.spacing),
    }


def design_from_json(d, path="initial_config") -> DesignConfig:
    _expect(isinstance(d, dict), path, "expected an object")
    bounds = parse_bounds(_get(d, "bounds", path, dict, required=False), f"{path}.bounds")
    spacing = tuple(_get(d, "spacing_nm", path, list, required=False, default=[80.0, 80.0]))
    return parse_particles(_get(d, "particles", path, list), bounds, spacing,
                           f"{path}.particles")


class Writer:
    """CSV writer stamping the provenance header block."""

    def __init__(self, out_dir: Path, config_hash: str, seed):
        self.out_dir = out_dir
        self.header = [f"# ellipsorb {__version__}",
                       f"# config_sha256={config_hash}",
                       f"# seed={seed}"]

    def csv(self, name: str, columns, rows):
        path = self.out_dir / name
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(self.header) + "\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                                  else str(v) for v in row) + "\n")
        return path

    def json(self, name: str, payload: dict):
        path = self.out_dir / name
        payload = {"_provenance": {"version": __version__,
                                   "config_sha256": self.header[1].split("=", 1)[1],
                                   "seed": self.header[2].split("=", 1)[1]},
                   **payload}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        return path


def _spectrum_rows(spec):
    for lam, a, qe, qs, qa in spec.rows():
        yield (lam, a, qe, qs, qa)


def cmd_sweep(cfg: dict, writer: Writer, threads: int, seed: int):
    material = parse_material(_get(cfg, "material", "config", dict, False, {}) or {})
    medium = parse_medium(_get(cfg, "medium", "config", dict, False, {}) or {})
    arc = parse_arc(_get(cfg, "arc", "config", dict, False, {}) or {})
    grid = parse_wavelengths(_get(cfg, "wavelengths", "config", dict))
    numerics = parse_numerics(_get(cfg, "numerics", "config", dict, False))
    bounds = parse_bounds(_get(cfg, "bounds", "config", dict, False))
    variants = _get(cfg, "variants", "config", list)
    for i, var in enumerate(variants):
        path = f"variants[{i}]"
        name = _get(var, "name", path, str)
        design = parse_particles(_get(var, "particles", path, list), bounds,
                                 (80.0, 80.0), f"{path}.particles")
        spec = compute_spectrum(design, grid.nodes, arc, material, medium, numerics, threads)
        writer.csv(f"sweep_{name}.csv", spec.CSV_COLUMNS, _spectrum_rows(spec))
        if design.n_particles > 1:
            singles = []
            for p in design.particles:
                solo = DesignConfig((p,), bounds=bounds, spacing=design.spacing)
                singles.append(absorptance_curve(solo, grid.nodes, arc, material,
                                                 medium, numerics, threads))
            singles = np.array(singles)
            cols = (["lambda_nm", "A_total"]
                    + [f"A_particle{j}" for j in range(design.n_particles)] + ["A_sum"])
            rows = []
            for li, lam in enumerate(grid.nodes):
                rows.append([lam, spec.absorptance[li], *singles[:, li],
                             float(np.sum(singles[:, li]))])
            writer.csv(f"sweep_{name}_parts.csv", cols, rows)
    return 0


def _validate_task(args):
    """RBM-vs-Nystrom comparison at one wavelength (picklable worker)."""
    design, lam, material, medium, arc, numerics, n_nys = args
    fwd = solve_at(design, lam, material, medium, numerics, theta0=arc.theta0)
    qe_rbm = cross_sections(fwd, numerics.full_circle_nodes)[0]
    adj = solve_adjoint_at(fwd, arc, material, medium, numerics)
    fwd_n = solve_forward_nystrom(design, lam, material, medium, n_nys,
                                  arc.theta0, numerics)
    qe_nys = cross_sections(fwd_n, numerics.full_circle_nodes)[0]
    adj_n = solve_adjoint_nystrom(design, lam, material, medium,
                                  adjoint_rhs_function(fwd_n, arc, numerics.theta_nodes),
                                  n_nys, numerics)
    nodes = adj_n.grid.nodes
    p_err = q_err = p_ref = q_ref = 0.0
    for mth in range(design.n_particles):
        p_r, q_r = adj.reconstruct(mth, nodes)
        p_err += np.sum(np.abs(p_r - adj_n.p_tilde[mth]) ** 2)
        q_err += np.sum(np.abs(q_r - adj_n.q_tilde[mth]) ** 2)
        p_ref += np.sum(np.abs(adj_n.p_tilde[mth]) ** 2)
        q_ref += np.sum(np.abs(adj_n.q_tilde[mth]) ** 2)
    return (lam, qe_rbm, qe_nys, abs(qe_rbm - qe_nys) / max(abs(qe_nys), 1e-300),
            np.sqrt(p_err / max(p_ref, 1e-300)), np.sqrt(q_err / max(q_ref, 1e-300)))


def cmd_validate(cfg: dict, writer: Writer, threads: int, seed: int):
    material = parse_material(_get(cfg, "material", "config", dict, False, {}) or {})
    medium = parse_medium(_get(cfg, "medium", "config", dict, False, {}) or {})
    arc = parse_arc(_get(cfg, "arc", "config", dict, False, {}) or {})
    grid = parse_wavelengths(_get(cfg, "wavelengths", "config", dict))
    numerics = parse_numerics(_get(cfg, "numerics", "config", dict, False))
    bounds = parse_bounds(_get(cfg, "bounds", "config", dict, False))
    n_nys = int(_num(cfg, "nystrom_nodes", "config", False, numerics.nystrom_nodes))
    cases = _get(cfg, "cases", "config", list)
    from .parallel import parallel_map

    for i, case in enumerate(cases):
        path = f"cases[{i}]"
        name = _get(case, "name", path, str)
        design = parse_particles(_get(case, "particles", path, list), bounds,
                                 (80.0, 80.0), f"{path}.particles")
        rows = parallel_map(_validate_task,
                            [(design, lam, material, medium, arc, numerics, n_nys)
                             for lam in grid.nodes], threads)
        writer.csv(f"validate_{name}.csv",
                   ["lambda_nm", "Qe_rbm", "Qe_nystrom", "Qe_rel_err",
                    "p_rel_l2_err", "q_rel_l2_err"], rows)
    return 0


def cmd_dataset(cfg: dict, writer: Writer, threads: int, seed: int):
    material = parse_material(_get(cfg, "material", "config", dict, False, {}) or {})
    medium = parse_medium(_get(cfg, "medium", "config", dict, False, {}) or {})
    arc = parse_arc(_get(cfg, "arc", "config", dict, False, {}) or {})
    grid = parse_wavelengths(_get(cfg, "wavelengths", "config", dict))
    numerics = parse_numerics(_get(cfg, "numerics", "config", dict, False))
    bounds = parse_bounds(_get(cfg, "bounds", "config", dict, False))
    d = _get(cfg, "dataset", "config", dict)
    spec = DatasetSpec(
        a=float(_num(d, "a_nm", "dataset", False, 10.0)),
        b_min=float(_num(d, "b_min_nm", "dataset", False, 1.0)),
        b_max=float(_num(d, "b_max_nm", "dataset", False, 9.0)),
        b_count=int(_num(d, "b_count", "dataset", False, 80)),
        theta_min=float(_num(d, "theta_min", "dataset", False, 0.0)),
        theta_max=float(_num(d, "theta_max", "dataset", False, np.pi / 2)),
        theta_count=int(_num(d, "theta_count", "dataset", False, 40)))
    ds = build_dataset(spec, material, medium, arc, grid.nodes, numerics, threads, bounds)
    out = writer.out_dir / "dataset"
    save_dataset(ds, out,
                 material_info=cfg.get("material", {}),
                 arc_info=cfg.get("arc", {}),
                 extra={"provenance": {"version": __version__, "seed": seed,
                                       "config_sha256": writer.header[1].split("=", 1)[1]}})
    print(f"dataset: L = {ds.size} entries over {len(ds.lambdas)} wavelengths -> {out}")
    return 0


def cmd_init(cfg: dict, writer: Writer, threads: int, seed: int):
    ds_dir = _get(cfg, "dataset_dir", "config", str)
    if not (Path(ds_dir) / "manifest.json").exists():
        raise ConfigError(f"dataset_dir: no dataset manifest found at {ds_dir}")
    ds = load_dataset(ds_dir)
    target = parse_target(_get(cfg, "target", "config", dict), ds.lambdas)
    pso = _get(cfg, "pso", "config", dict, False, {}) or {}
    budget = int(_num(pso, "iterations", "pso", False, 500))
    swarm = int(_num(pso, "swarm", "pso", False, 64))
    inertia = float(_num(pso, "inertia", "pso", False, 0.7))
    cognitive = float(_num(pso, "cognitive", "pso", False, 1.5))
    social = float(_num(pso, "social", "pso", False, 1.5))
    bounds = parse_bounds(_get(cfg, "bounds", "config", dict, False))
    spacing = tuple(_get(cfg, "spacing_nm", "config", list, False, [80.0, 80.0]))

    relaxed = solve_relaxed(ds, target)
    rounded = round_counts(relaxed)
    refined = refine_heuristic(ds, target, rounded, seed=seed, budget=budget,
                               swarm_size=swarm, inertia=inertia,
                               cognitive=cognitive, social=social)
    design = layout(refined, ds, spacing, bounds)

    dmat = ds.design_matrix()
    rows = []
    for li, lam in enumerate(ds.lambdas):
        rows.append([lam, target.values[li], float(dmat[li] @ relaxed.counts),
                     float(dmat[li] @ rounded.counts), float(dmat[li] @ refined.counts)])
    writer.csv("init_fit.csv",
               ["lambda_nm", "target", "fit_relaxed", "fit_rounded", "fit_refined"], rows)
    counts_rows = [[i, ds.shapes[i][0], ds.shapes[i][1], relaxed.counts[i],
                    rounded.counts[i], refined.counts[i]]
                   for i in range(ds.size) if refined.counts[i] > 0 or rounded.counts[i] > 0
                   or relaxed.counts[i] > 1e-12]
    writer.csv("init_counts.csv",
               ["entry", "b_nm", "theta_rad", "relaxed", "rounded", "refined"], counts_rows)
    writer.json("init_config.json", {
        "design": design_to_json(design),
        "n_particles": design.n_particles,
        "residuals": {"relaxed": fit_residual(ds, target, relaxed.counts),
                      "rounded": fit_residual(ds, target, rounded.counts),
                      "refined": fit_residual(ds, target, refined.counts)},
    })
    print(f"init: M = {design.n_particles} particles; residuals "
          f"relaxed {fit_residual(ds, target, relaxed.counts):.6g} <= "
          f"refined {fit_residual(ds, target, refined.counts):.6g} <= "
          f"rounded {fit_residual(ds, target, rounded.counts):.6g}")
    return 0


def cmd_optimize(cfg: dict, writer: Writer, threads: int, seed: int):
    material = parse_material(_get(cfg, "material", "config", dict, False, {}) or {})
    medium = parse_medium(_get(cfg, "medium", "config", dict, False, {}) or {})
    arc = parse_arc(_get(cfg, "arc", "config", dict, False, {}) or {})
    grid = parse_wavelengths(_get(cfg, "wavelengths", "config", dict))
    numerics = parse_numerics(_get(cfg, "numerics", "config", dict, False))
    target = parse_target(_get(cfg, "target", "config", dict), grid.nodes)
    step_size = float(_num(cfg, "step_size", "config", False, 0.2))
    iterations = int(_num(cfg, "iterations", "config", False, 1000))

    initial = _get(cfg, "initial_config", "config", (str, dict))
    if isinstance(initial, str):
        loaded = json.loads(Path(initial).read_text())
        design = design_from_json(loaded.get("design", loaded), "initial_config")
    else:
        design = design_from_json(initial, "initial_config")

    init_spec = compute_spectrum(design, grid.nodes, arc, material, medium,
                                 numerics, threads)
    writer.csv("initial_spectrum.csv", init_spec.CSV_COLUMNS, _spectrum_rows(init_spec))
    state = run_optimizer(design, target, arc, material, medium, numerics,
                          step_size, iterations, threads)
    writer.csv("history.csv", ["iteration", "objective", "grad_inf_norm"], state.history)
    final_spec = compute_spectrum(state.config, grid.nodes, arc, material, medium,
                                  numerics, threads)
    writer.csv("final_spectrum.csv", final_spec.CSV_COLUMNS, _spectrum_rows(final_spec))
    writer.csv("target_spectrum.csv", ["lambda_nm", "A_target"],
               list(zip(grid.nodes, target.values)))
    writer.json("final_config.json", {"design": design_to_json(state.config),
                                      "objective": state.objective,
                                      "iterations": iterations})
    print(f"optimize: J {state.history[0][1]:.6g} -> {state.objective:.6g} "
          f"after {iterations} iterations")
    return 0


COMMANDS = {"sweep": cmd_sweep, "validate": cmd_validate, "dataset": cmd_dataset,
            "init": cmd_init, "optimize": cmd_optimize}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ellipsorb",
                                     description="Plasmonic broadband-absorber "
                                                 "simulation and design driver")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap for per-wavelength loops (default: cores)")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed override (default: config seed or 0)")
    args = parser.parse_args(argv)

    try:
        raw = Path(args.config).read_bytes()
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    # Pin BLAS to one thread: byte-identical outputs whatever the worker count,
    # and no oversubscription against the process-level wavelength workers.
    try:
        from threadpoolctl import threadpool_limits
        _limiter = threadpool_limits(limits=1)  # noqa: F841 (held until return)
    except Exception:
        _limiter = None
    try:
        cfg = json.loads(raw)
        if not isinstance(cfg, dict):
            raise ConfigError("config: top level must be a JSON object")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        threads = args.threads if args.threads is not None else default_threads()
        writer = Writer(out_dir, hashlib.sha256(raw).hexdigest(), seed)
        return COMMANDS[args.command](cfg, writer, threads, seed)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
