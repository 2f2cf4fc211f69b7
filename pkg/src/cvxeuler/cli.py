"""Command line interface: ``cvxeuler {geometry,iterate,diagnose,plot}``.

Exit codes: 0 success, 2 configuration error, 3 stage precondition failure,
4 input/output error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from pathlib import Path

import matplotlib
import numpy as np
import scipy

from . import __version__
from .beltrami import build_basis
from .config import ConfigError, RunConfig, load_config, parse_config
from .diagnostics import energy_report, fit_rate, holder_norm, pressure_consistency, shear_rate_sweep
from .geometry import (
    GeometryError,
    compute_eta,
    default_direction_system,
    dump_direction_system,
    find_direction_system,
    load_direction_system,
)
from .plotting import render_report
from .profile import EnergyProfile, ExpressionError
from .reports import CsvFormatError, read_csv, stage_rows, sweep_rows, write_csv, write_json
from .snapshot import SnapshotError, read_snapshot, write_snapshot
from .spectral import Grid3, TimeGrid, set_workers
from .stage import (
    EulerReynoldsState,
    StageConstants,
    StageParams,
    StagePreconditionError,
    calibrate_M,
    run_iteration,
    run_stage,
    zero_state,
)

__all__ = ["main", "build_parser", "cmd_geometry", "cmd_iterate", "cmd_diagnose", "cmd_plot"]

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_IO = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# geometry


def cmd_geometry(search_bound: int, out_path, seed: int = 0) -> dict:
    """Search a direction system and write it as text."""
    try:
        system = find_direction_system(search_bound, seed=seed)
    except GeometryError as exc:
        print("no direction system found:")
        for lam0, reason in sorted(exc.reasons.items()):
            print(f"  lambda0={lam0}: {reason}")
        raise CliError("geometry search failed", EXIT_PRECONDITION) from exc
    Path(out_path).write_text(dump_direction_system(system), encoding="utf-8")
    print(f"lambda0 = {system.lambda0}")
    print(f"r0 = {system.r0:.6g}")
    print("family sizes = " + " ".join(str(s) for s in system.family_sizes()))
    print("margins = " + " ".join(f"{m:.4g}" for m in system.margins))
    return {"lambda0": system.lambda0, "r0": system.r0}


# ---------------------------------------------------------------------------
# iterate


def _direction_system(cfg: RunConfig, base: Path):
    if cfg.geometry_source == "pinned":
        return default_direction_system()
    if cfg.geometry_source == "file":
        path = Path(cfg.geometry_file)
        if not path.is_absolute():
            path = base / path
        return load_direction_system(path.read_text(encoding="utf-8"))
    return find_direction_system(cfg.search_bound, seed=cfg.seed)


def _versions() -> dict:
    return {
        "cvxeuler": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "python": ".".join(platform.python_version_tuple()[:2]),
    }


def _stage_dir(run_dir: Path, index: int) -> Path:
    return run_dir / f"stage_{index:03d}"


def _complete_stages(run_dir: Path) -> list[int]:
    done = []
    for d in sorted(run_dir.glob("stage_[0-9][0-9][0-9]")):
        names = ("v.cvxf", "p.cvxf", "R.cvxf", "state.json", "report.json")
        if all((d / n).exists() for n in names):
            done.append(int(d.name[6:]))
    return done


def _load_state(stage_dir: Path) -> EulerReynoldsState:
    info = json.loads((stage_dir / "state.json").read_text(encoding="utf-8"))
    return EulerReynoldsState(
        read_snapshot(stage_dir / "v.cvxf"),
        read_snapshot(stage_dir / "p.cvxf"),
        read_snapshot(stage_dir / "R.cvxf"),
        float(info["delta"]),
        int(info["stage_index"]),
    )


def _write_stage(run_dir: Path, state: EulerReynoldsState, report: dict) -> None:
    d = _stage_dir(run_dir, state.stage_index)
    d.mkdir(parents=True, exist_ok=True)
    write_snapshot(d / "v.cvxf", state.v)
    write_snapshot(d / "p.cvxf", state.p)
    write_snapshot(d / "R.cvxf", state.Rring)
    params = report.get("params", {})
    write_json(
        d / "state.json",
        {
            "delta": state.delta,
            "stage_index": state.stage_index,
            "lambda": params.get("lambda"),
            "mu": params.get("mu"),
            "grid": state.grid.to_dict(),
            "time_samples": state.time_grid.samples,
            "success": report.get("success"),
        },
    )
    write_csv(d / "report.csv", stage_rows(report))
    write_json(d / "report.json", report)


def _collect_reports(run_dir: Path) -> list[dict]:
    reports = []
    for d in sorted(run_dir.glob("stage_[0-9][0-9][0-9]")):
        if (d / "report.json").exists():
            reports.append(json.loads((d / "report.json").read_text(encoding="utf-8")))
    return reports


def cmd_iterate(config_path, out_dir=None) -> Path:
    """Run the configured stages (or frequency sweep) into a run directory.

    A run directory that already holds completed stages of the same
    configuration is resumed after its last complete stage.
    """
    config_path = Path(config_path)
    cfg = load_config(config_path)
    set_workers(cfg.workers)
    run_dir = Path(out_dir) if out_dir is not None else config_path.parent / cfg.output
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = run_dir / "manifest.json"
    old_manifest = None
    if manifest_path.exists():
        old_manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if old_manifest.get("config_sha256") != cfg.sha256:
            raise CliError(f"{run_dir} holds a run of a different configuration", EXIT_CONFIG)

    system = _direction_system(cfg, config_path.parent)
    system_text = dump_direction_system(system)
    manifest = {
        "config_sha256": cfg.sha256,
        "config_text": cfg.text,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": _versions(),
        "direction_system_sha256": hashlib.sha256(system_text.encode("utf-8")).hexdigest(),
        "lambda0": system.lambda0,
        "r0": system.r0,
    }

    if cfg.mode == "shear_sweep":
        (run_dir / "direction_system.txt").write_text(system_text, encoding="utf-8")
        write_json(manifest_path, manifest)
        sweep = shear_rate_sweep(
            cfg.sweep_lambdas,
            system,
            cfg.profile,
            amplitude=cfg.sweep_amplitude,
            alpha=cfg.iteration.alpha,
            beta=cfg.iteration.beta,
            grid_factor=cfg.sweep_grid_factor,
        )
        write_json(run_dir / "sweep.json", sweep)
        write_csv(run_dir / "sweep.csv", sweep_rows(sweep))
        render_report(run_dir / "sweep.csv", run_dir / "figures")
        for name, fit in sorted(sweep["fits"].items()):
            print(f"{name}: slope {fit['fit']['slope']:.4f}, predicted {fit['predicted']:.4f}")
        return run_dir

    if old_manifest is not None and "constants" in old_manifest:
        constants = StageConstants(**old_manifest["constants"])
        manifest["constants"] = old_manifest["constants"]
        manifest["M_calibration"] = old_manifest.get("M_calibration")
    else:
        eta = compute_eta(system, cfg.profile.minimum())
        if cfg.iteration.M is not None:
            M, cal = cfg.iteration.M, {"source": "config"}
        else:
            M, cal = calibrate_M(
                cfg.profile, system, build_basis(system.lambda0), cfg.iteration.M_probes, cfg.seed, cfg.iteration.M_safety
            )
        constants = StageConstants(eta, M)
        manifest["constants"] = {"eta": eta, "M": M}
        manifest["M_calibration"] = cal
    (run_dir / "direction_system.txt").write_text(system_text, encoding="utf-8")
    write_json(manifest_path, manifest)
    if cfg.iteration.stages == 0:
        return run_dir

    done = _complete_stages(run_dir)
    start = _load_state(_stage_dir(run_dir, done[-1])) if done else None
    if start is not None:
        print(f"resuming after stage {start.stage_index}")

    def on_stage(state, report):
        _write_stage(run_dir, state, report)
        chk = report["checks"]
        flags = " ".join(f"{k}={'ok' if v['ok'] else 'FAIL'}" for k, v in sorted(chk.items()))
        print(f"stage {report['stage']}: lambda={report['params']['lambda']} mu={report['params']['mu']} {flags}")

    _, reports = run_iteration(cfg.profile, cfg.iteration, system, start=start, on_stage=on_stage, constants=constants)
    failure = None
    if reports and "failure" in reports[-1]:
        failure = reports[-1]
        fdir = _stage_dir(run_dir, failure["stage"])
        fdir.mkdir(exist_ok=True)
        write_json(fdir / "failure.json", failure)
        print(f"stage {failure['stage']} not run: {failure['message']}")
    all_reports = _collect_reports(run_dir)
    rows = [row for rep in all_reports for row in stage_rows(rep)]
    write_csv(run_dir / "stages.csv", rows)
    render_report(run_dir / "stages.csv", run_dir / "figures")
    if failure is not None and failure["failure"] == "StagePreconditionError":
        raise CliError(failure["message"], EXIT_PRECONDITION)
    return run_dir


# ---------------------------------------------------------------------------
# diagnose


def _resolve_snapshot(path: Path) -> tuple[Path | None, Path]:
    """``(stage directory or None, velocity snapshot)`` for a path argument."""
    if path.is_dir():
        return path, path / "v.cvxf"
    if (path.parent / "state.json").exists():
        return path.parent, path
    return None, path


def _manifest_for(stage_dir: Path | None) -> dict | None:
    if stage_dir is None:
        return None
    m = stage_dir.parent / "manifest.json"
    return json.loads(m.read_text(encoding="utf-8")) if m.exists() else None


def _diag_energy(path: Path, profile_expr: str | None, delta: float | None) -> list[tuple]:
    stage_dir, vpath = _resolve_snapshot(path)
    v = read_snapshot(vpath)
    info = json.loads((stage_dir / "state.json").read_text()) if stage_dir else {}
    manifest = _manifest_for(stage_dir)
    if profile_expr is None:
        if manifest is None:
            raise CliError("the energy diagnostic needs --profile outside a run directory", EXIT_CONFIG)
        profile_expr = manifest["config"]["energy_profile"]
    profile = EnergyProfile(profile_expr)
    if delta is None:
        delta = float(info.get("delta", 1.0))
    rep = energy_report(v, profile, delta)
    stage, lam, mu = info.get("stage_index"), info.get("lambda"), info.get("mu")
    rows = []
    for name in ("e", "energy", "error", "band_lower", "band_upper", "deviation", "dE_dt"):
        for t, val in zip(rep["t"], rep[name]):
            rows.append((name, stage, lam, mu, t, val))
    return rows


def _diag_holder(path: Path, r: float) -> list[tuple]:
    stage_dir, vpath = _resolve_snapshot(path)
    files = [stage_dir / n for n in ("v.cvxf", "p.cvxf", "R.cvxf")] if stage_dir and path.is_dir() else [vpath]
    info = json.loads((stage_dir / "state.json").read_text()) if stage_dir else {}
    rows = []
    for f in files:
        rep = holder_norm(read_snapshot(f), r)
        for order, val in rep.seminorms.items():
            rows.append((f"holder_{f.stem}_{order:g}", info.get("stage_index"), info.get("lambda"), info.get("mu"), None, val))
        rows.append((f"holder_{f.stem}_norm", info.get("stage_index"), info.get("lambda"), info.get("mu"), None, rep.norm))
        rows.append(
            (f"holder_{f.stem}_outer_energy", info.get("stage_index"), info.get("lambda"), info.get("mu"), None,
             rep.outer_energy_fraction)
        )
    return rows


def _diag_pressure(path: Path) -> list[tuple]:
    stage_dir, _ = _resolve_snapshot(path)
    if stage_dir is None:
        raise CliError("the pressure diagnostic needs a stage directory", EXIT_CONFIG)
    state = _load_state(stage_dir)
    info = json.loads((stage_dir / "state.json").read_text())
    rep = pressure_consistency(state.v, state.p, state.Rring)
    return [(k, info["stage_index"], info.get("lambda"), info.get("mu"), None, v) for k, v in sorted(rep.items())]


def _diag_decomposition(path: Path) -> list[tuple]:
    stage_dir, _ = _resolve_snapshot(path)
    manifest = _manifest_for(stage_dir)
    if stage_dir is None or manifest is None:
        raise CliError("the decomposition diagnostic needs a stage directory inside a run", EXIT_CONFIG)
    run_dir = stage_dir.parent
    cfg = parse_config(manifest["config_text"])
    system = load_direction_system((run_dir / "direction_system.txt").read_text(encoding="utf-8"))
    report = json.loads((stage_dir / "report.json").read_text())
    p = report["params"]
    params = StageParams(
        p["lambda"], p["mu"], p["alpha"], p["beta"], Grid3.from_dict(p["grid"]), TimeGrid(p["time_samples"])
    )
    index = int(stage_dir.name[6:])
    if index > 1:
        prev = _load_state(_stage_dir(run_dir, index - 1))
    else:
        prev = zero_state(params.grid, params.time_grid)
    constants = StageConstants(**manifest["constants"])
    new_state, rep = run_stage(
        prev, cfg.profile, system, build_basis(system.lambda0), params, constants,
        decomposition=True, fd_check=False, mean_tolerance=cfg.iteration.mean_tolerance,
    )
    stored = read_snapshot(stage_dir / "R.cvxf")
    mismatch = float(np.abs(stored.coeffs - new_state.Rring.coeffs).max())
    dec = rep["decomposition"]
    rows = [(f"part_{k}", index, p["lambda"], p["mu"], None, v["sup"]) for k, v in sorted(dec["parts"].items())]
    rows.append(("parts_sum_residual", index, p["lambda"], p["mu"], None, dec["sum_residual"]))
    rows.append(("stored_stress_mismatch", index, p["lambda"], p["mu"], None, mismatch))
    return rows


def _diag_rates(path: Path) -> list[tuple]:
    if not path.is_dir():
        raise CliError("the rates diagnostic needs a directory", EXIT_CONFIG)
    if (path / "sweep.json").exists():
        sweep = json.loads((path / "sweep.json").read_text())
        return sweep_rows(sweep)
    reports = [r for r in _collect_reports(path) if "norms" in r]
    series: dict = {}
    for rep in reports:
        for name, val in rep["norms"].items():
            series.setdefault(name, []).append((rep["params"]["lambda"], rep["params"]["mu"], val))
    rows = []
    for name in sorted(series):
        pts = series[name]
        for lam, mu, val in pts:
            rows.append((name, None, lam, mu, None, val))
        good = [(lam, val) for lam, _, val in pts if val > 0]
        if len({lam for lam, _ in good}) >= 4:
            fit = fit_rate([g[0] for g in good], [g[1] for g in good])
            rows += [
                (f"slope_{name}", None, None, None, None, fit.slope),
                (f"residual_{name}", None, None, None, None, fit.residual),
                (f"stderr_{name}", None, None, None, None, fit.stderr),
            ]
    return rows


def cmd_diagnose(path, what: str, out_dir=None, r: float = 0.5, profile: str | None = None,
                 delta: float | None = None) -> Path:
    """Run one diagnostic on a snapshot, stage directory or run directory; writes ``<what>.csv``."""
    path = Path(path)
    if not path.exists():
        raise CliError(f"{path} does not exist", EXIT_IO)
    if what == "energy":
        rows = _diag_energy(path, profile, delta)
    elif what == "holder":
        rows = _diag_holder(path, r)
    elif what == "pressure":
        rows = _diag_pressure(path)
    elif what == "decomposition":
        rows = _diag_decomposition(path)
    elif what == "rates":
        rows = _diag_rates(path)
    else:
        raise CliError(f"unknown diagnostic {what!r}", EXIT_CONFIG)
    out = Path(out_dir) if out_dir is not None else (path if path.is_dir() else path.parent)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{what}.csv"
    write_csv(target, rows)
    print(f"wrote {target} ({len(rows)} rows)")
    return target


# ---------------------------------------------------------------------------
# plot


def cmd_plot(report_path, out_dir=None) -> dict:
    """Render SVG charts for a report CSV."""
    report_path = Path(report_path)
    out = Path(out_dir) if out_dir is not None else report_path.parent
    result = render_report(report_path, out)
    for name, p in sorted(result["paths"].items()):
        print(f"{name}: {p}")
    for name, slope in sorted(result["slopes"].items()):
        print(f"slope {name} = {slope:.4f}")
    return result


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvxeuler", description="Convex-integration iterates for the Euler equations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("geometry", help="search a direction system and write it as text")
    g.add_argument("--search-bound", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output text file")

    it = sub.add_parser("iterate", help="run the stages of a configuration")
    it.add_argument("config", help="INI configuration file")
    it.add_argument("--out", help="run directory (default: [run] output next to the config)")

    d = sub.add_parser("diagnose", help="run a diagnostic on stored output")
    d.add_argument("path", help="snapshot file, stage directory or run directory")
    d.add_argument("--what", required=True, choices=["holder", "energy", "decomposition", "pressure", "rates"])
    d.add_argument("--out", help="output directory")
    d.add_argument("--r", type=float, default=0.5, help="Hölder exponent for the holder diagnostic")
    d.add_argument("--profile", help="energy profile expression (default: from the run manifest)")
    d.add_argument("--delta", type=float, help="level delta (default: from state.json, else 1)")

    p = sub.add_parser("plot", help="render SVG charts from a report CSV")
    p.add_argument("report", help="CSV file written by iterate or diagnose")
    p.add_argument("--out", help="output directory (default: next to the CSV)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "geometry":
            cmd_geometry(args.search_bound, args.out, args.seed)
        elif args.command == "iterate":
            cmd_iterate(args.config, args.out)
        elif args.command == "diagnose":
            cmd_diagnose(args.path, args.what, args.out, args.r, args.profile, args.delta)
        else:
            cmd_plot(args.report, args.out)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ExpressionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StagePreconditionError as exc:
        print(f"precondition failure: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (OSError, SnapshotError, CsvFormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
