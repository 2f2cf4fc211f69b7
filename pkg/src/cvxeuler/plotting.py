"""SVG charts of report CSV files.

Figures are drawn with matplotlib's object interface (no global pyplot state)
and saved as SVG with a fixed hash salt and without a date stamp, so a given
CSV always produces the same bytes.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .diagnostics import fit_rate
from .reports import read_csv

__all__ = ["energy_figure", "rates_figure", "contraction_figure", "render_report", "SVG_RC"]

SVG_RC = {"svg.hashsalt": "cvxeuler", "svg.fonttype": "path", "path.simplify": False}

RATE_QUANTITIES = ("w_o", "w_c", "Rring_out", "energy_deviation", "oscillation_sup", "oscillation_holder")


def _save(fig: Figure, path) -> None:
    with matplotlib.rc_context(SVG_RC):
        FigureCanvasSVG(fig)
        fig.savefig(path, format="svg", metadata={"Date": None})


def energy_figure(rows: list[dict]) -> Figure:
    """Kinetic energy and target profile against time, one line per stage."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    energy = defaultdict(list)
    profile = defaultdict(list)
    for r in rows:
        if r["t"] is None:
            continue
        if r["quantity"] == "energy":
            energy[r["stage"] or 0].append((r["t"], r["value"]))
        elif r["quantity"] == "profile":
            profile[r["stage"] or 0].append((r["t"], r["value"]))
    for stage in sorted(energy):
        pts = sorted(energy[stage])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=f"stage {stage}")
    if profile:
        pts = sorted(profile[max(profile)])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "k--", label="target e(t)")
    series = energy or profile
    ax.set_xlabel("t")
    ax.set_ylabel("kinetic energy")
    ax.set_title("Energy against time")
    if series:
        ax.legend(fontsize=8)
    return fig


def rates_figure(rows: list[dict]) -> tuple[Figure, dict]:
    """Log-log norms against lambda with fitted slopes.

    Quantities with at least four distinct lambda values get a least-squares
    slope, shown in the legend and returned as ``{quantity: slope}``.
    """
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    series = defaultdict(dict)
    for r in rows:
        if r["quantity"] in RATE_QUANTITIES and r["t"] is None and r["lambda"] is not None and r["value"] > 0:
            series[r["quantity"]][r["lambda"]] = r["value"]
    slopes = {}
    for name in RATE_QUANTITIES:
        pts = sorted(series.get(name, {}).items())
        if not pts:
            continue
        xs, ys = [p[0] for p in pts], [p[1] for p in pts]
        label = name
        if len(pts) >= 4:
            fit = fit_rate(xs, ys)
            slopes[name] = fit.slope
            label = f"{name}: slope {fit.slope:.3f}"
        ax.loglog(xs, ys, marker="o", ms=3, label=label)
    ax.set_xlabel("lambda")
    ax.set_ylabel("norm")
    ax.set_title("Norms against frequency")
    if series:
        ax.legend(fontsize=8)
    return fig, slopes


def contraction_figure(rows: list[dict]) -> Figure:
    """Per-stage measured quantities against their bounds (log scale)."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    pairs = ("reynolds", "velocity_increment", "pressure_increment", "w_o_bound")
    drawn = False
    for name in pairs:
        meas = sorted((r["stage"], r["value"]) for r in rows if r["quantity"] == f"{name}_measured" and r["stage"])
        bound = sorted((r["stage"], r["value"]) for r in rows if r["quantity"] == f"{name}_bound" and r["stage"])
        if not meas:
            continue
        lines = ax.semilogy([m[0] for m in meas], [max(m[1], 1e-300) for m in meas], marker="o", label=name)
        ax.semilogy([b[0] for b in bound], [b[1] for b in bound], "--", color=lines[0].get_color())
        drawn = True
    ax.set_xlabel("stage")
    ax.set_ylabel("measured (solid) and bound (dashed)")
    ax.set_title("Stage estimates")
    if drawn:
        ax.legend(fontsize=8)
    return fig


def render_report(csv_path, out_dir) -> dict:
    """Render the three charts for one CSV into ``out_dir``; returns paths and slopes."""
    rows = read_csv(csv_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(csv_path).stem
    paths = {
        "energy": out / f"{stem}_energy.svg",
        "rates": out / f"{stem}_rates.svg",
        "contraction": out / f"{stem}_contraction.svg",
    }
    _save(energy_figure(rows), paths["energy"])
    fig, slopes = rates_figure(rows)
    _save(fig, paths["rates"])
    _save(contraction_figure(rows), paths["contraction"])
    return {"paths": {k: str(v) for k, v in paths.items()}, "slopes": slopes}
