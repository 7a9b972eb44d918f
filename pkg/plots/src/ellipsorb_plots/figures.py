"""Render ellipsorb CSV/JSON artifacts as matplotlib figures.

Pure post-processing: every number comes from the files the primary CLI
wrote.  Four figure kinds are supported:

    spectrum     absorptance / cross-section curves, one per input CSV
    error        solver-comparison error curves on a logarithmic axis
    layout       particle layouts drawn from design JSON files
    convergence  objective versus iteration from optimizer histories

Input schemas (as documented in the primary package):
    spectrum CSVs  lambda_nm,A,Qe,Qs,Qa  (extra columns allowed, e.g. the
                   sweep *_parts.csv and init_fit.csv variants)
    error CSVs     lambda_nm,...err... columns from validate_*.csv
    histories      iteration,objective,grad_inf_norm
    designs        JSON with design.particles = [[a,b,theta,x1,x2], ...]
Comment lines starting with '#' carry provenance and are skipped.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Ellipse

FIGURE_KINDS = ("spectrum", "error", "layout", "convergence")

_STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.labelsize": 11,
    "legend.fontsize": 9,
}


class SchemaError(ValueError):
    """An input file is missing or does not match the documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure: input paths, kind, labels, and the output image path."""

    kind: str
    inputs: tuple
    output: str
    labels: tuple = ()
    title: str = ""
    column: str = "A"

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {FIGURE_KINDS}")
        if not self.inputs:
            raise SchemaError("figure needs at least one input file")
        for path in self.inputs:
            if not Path(path).exists():
                raise SchemaError(f"input file not found: {path}")


def read_table(path) -> dict:
    """Numeric CSV with a header row and '#' comment lines -> column dict."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: no header row found")
    header, data = rows[0], rows[1:]
    if not data:
        raise SchemaError(f"{path}: no data rows")
    try:
        values = np.array([[float(v) for v in row] for row in data])
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric data row ({exc})") from exc
    if values.shape[1] != len(header):
        raise SchemaError(f"{path}: row width does not match header")
    return {name: values[:, i] for i, name in enumerate(header)}


def read_design(path) -> list:
    """Particle list [[a, b, theta, x1, x2], ...] from a design JSON file."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    design = payload.get("design", payload)
    particles = design.get("particles")
    if not isinstance(particles, list) or not particles:
        raise SchemaError(f"{path}: missing design.particles")
    for row in particles:
        if not (isinstance(row, list) and len(row) == 5):
            raise SchemaError(f"{path}: particles must be [a, b, theta, x1, x2] rows")
    return particles


def _label_for(spec: FigureSpec, index: int) -> str:
    if index < len(spec.labels):
        return spec.labels[index]
    return Path(spec.inputs[index]).stem


def _render_spectrum(spec: FigureSpec, ax):
    for i, path in enumerate(spec.inputs):
        table = read_table(path)
        if "lambda_nm" not in table:
            raise SchemaError(f"{path}: spectrum CSV needs a lambda_nm column")
        col = spec.column if spec.column in table else None
        if col is None:
            candidates = [c for c in table if c != "lambda_nm"]
            if not candidates:
                raise SchemaError(f"{path}: no data column to plot")
            col = candidates[0]
        ax.plot(table["lambda_nm"], table[col], label=f"{_label_for(spec, i)}")
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel(spec.column)
    ax.legend()


def _render_error(spec: FigureSpec, ax):
    for i, path in enumerate(spec.inputs):
        table = read_table(path)
        if "lambda_nm" not in table:
            raise SchemaError(f"{path}: error CSV needs a lambda_nm column")
        err_cols = [c for c in table if c.endswith("err")]
        if not err_cols:
            raise SchemaError(f"{path}: no *err columns found")
        for col in err_cols:
            positive = np.maximum(table[col], 1e-300)
            ax.semilogy(table["lambda_nm"], positive,
                        label=f"{_label_for(spec, i)}:{col}")
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("relative error")
    ax.legend()


def _render_layout(spec: FigureSpec, ax):
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for i, path in enumerate(spec.inputs):
        particles = read_design(path)
        color = colors[i % len(colors)]
        for a, b, theta, x1, x2 in particles:
            ax.add_patch(Ellipse((x1, x2), 2 * a, 2 * b, angle=np.degrees(theta),
                                 facecolor="none", edgecolor=color, linewidth=0.8))
        ax.plot([], [], color=color, label=f"{_label_for(spec, i)} (M={len(particles)})")
    ax.set_xlabel("x1 (nm)")
    ax.set_ylabel("x2 (nm)")
    ax.set_aspect("equal")
    reach = max(max(abs(p[3]) + p[0], abs(p[4]) + p[0])
                for path in spec.inputs for p in read_design(path))
    ax.set_xlim(-1.2 * reach, 1.2 * reach)
    ax.set_ylim(-1.2 * reach, 1.2 * reach)
    ax.legend(loc="upper right")


def _render_convergence(spec: FigureSpec, ax):
    for i, path in enumerate(spec.inputs):
        table = read_table(path)
        if "iteration" not in table or "objective" not in table:
            raise SchemaError(f"{path}: history CSV needs iteration and objective columns")
        ax.semilogy(table["iteration"], table["objective"], label=_label_for(spec, i))
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.legend()


_RENDERERS = {
    "spectrum": _render_spectrum,
    "error": _render_error,
    "layout": _render_layout,
    "convergence": _render_convergence,
}


def render(spec: FigureSpec) -> str:
    """Render one figure spec to its output path; returns the path written."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        try:
            _RENDERERS[spec.kind](spec, ax)
            if spec.title:
                ax.set_title(spec.title)
            fig.tight_layout()
            out = Path(spec.output)
            out.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(out)
        finally:
            plt.close(fig)
    return str(spec.output)
