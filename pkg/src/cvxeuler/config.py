"""Run configuration: an INI file with flat ``key = value`` entries.

Example::

    [run]
    energy_profile = 1 - t/2
    stages = 2
    seed = 0

    [scheme]
    alpha = 0.05
    beta = 0.15
    lambdas = 131072, 262144

Every key is optional; unknown sections or keys are rejected with the line
on which they appear.
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

from .profile import EnergyProfile, ExpressionError
from .stage import IterationConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "SCHEMA"]


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int_list(text: str) -> list[int]:
    items = [x for x in re.split(r"[,\s]+", text.strip()) if x]
    return [int(x) for x in items]


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "energy_profile": (str, "1"),
        "stages": (int, 1),
        "seed": (int, 0),
        "output": (str, "run"),
        "workers": (int, 1),
        "mode": (str, "stages"),
    },
    "scheme": {
        "alpha": (float, 0.05),
        "beta": (float, 0.4),
        "lambdas": (_int_list, []),
        "lambda_initial": (int, 16),
        "lambda_ratio": (int, 2),
        "mus": (_int_list, []),
    },
    "grid": {
        "grid_factor": (float, 4.0),
        "grid_margin": (int, 0),
        "time_samples": (int, 9),
        "lattice_stride": (_bool, True),
    },
    "geometry": {
        "source": (str, "pinned"),
        "search_bound": (int, 10),
        "file": (str, ""),
    },
    "checks": {
        "decomposition": (_bool, True),
        "fd_check": (_bool, True),
        "mean_tolerance": (float, 1e-9),
        "M": (_opt_float, None),
        "M_probes": (int, 64),
        "M_safety": (float, 1.25),
    },
    "sweep": {
        "lambdas": (_int_list, [16, 32, 64, 128]),
        "amplitude": (float, 0.6),
        "grid_factor": (int, 3),
    },
}


@dataclass
class RunConfig:
    """Validated run configuration."""

    profile: EnergyProfile
    iteration: IterationConfig
    output: str = "run"
    seed: int = 0
    workers: int = 1
    mode: str = "stages"
    geometry_source: str = "pinned"
    search_bound: int = 10
    geometry_file: str = ""
    sweep_lambdas: list = field(default_factory=lambda: [16, 32, 64, 128])
    sweep_amplitude: float = 0.6
    sweep_grid_factor: int = 3
    text: str = ""

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        it = self.iteration
        return {
            "energy_profile": self.profile.expression,
            "mode": self.mode,
            "stages": it.stages,
            "seed": self.seed,
            "workers": self.workers,
            "alpha": it.alpha,
            "beta": it.beta,
            "lambdas": list(it.lambdas),
            "lambda_initial": it.lambda_initial,
            "lambda_ratio": it.lambda_ratio,
            "mus": list(it.mus),
            "grid_factor": it.grid_factor,
            "grid_margin": it.grid_margin,
            "time_samples": it.time_samples,
            "lattice_stride": it.lattice_stride,
            "geometry_source": self.geometry_source,
            "search_bound": self.search_bound,
            "geometry_file": self.geometry_file,
            "decomposition": it.decomposition,
            "fd_check": it.fd_check,
            "mean_tolerance": it.mean_tolerance,
            "M": it.M,
            "M_probes": it.M_probes,
            "M_safety": it.M_safety,
            "sweep_lambdas": list(self.sweep_lambdas),
            "sweep_amplitude": self.sweep_amplitude,
            "sweep_grid_factor": self.sweep_grid_factor,
        }


def _line_numbers(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    out: dict = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), no)
            continue
        if section is not None and raw[:1] not in (" ", "\t"):
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            out.setdefault((section, key.lower()), no)
    return out


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate configuration text."""
    lines = _line_numbers(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], line, source) from exc
    values: dict[str, dict] = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)), source)
        known = {k.lower(): k for k in SCHEMA[sec]}
        for key, raw in parser.items(sec):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", lines.get((sec, key)), source)
            name = known[key]
            conv = SCHEMA[sec][name][0]
            try:
                values[sec][name] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", lines.get((sec, key)), source) from exc

    def fail(sec: str, key: str, message: str):
        raise ConfigError(message, lines.get((sec, key.lower())), source)

    run, sch, grd, geo, chk, swp = (values[s] for s in ("run", "scheme", "grid", "geometry", "checks", "sweep"))
    try:
        profile = EnergyProfile(run["energy_profile"])
        profile.validate()
    except ExpressionError as exc:
        fail("run", "energy_profile", str(exc))
    if run["stages"] < 0:
        fail("run", "stages", "stages must be non-negative")
    if run["workers"] < 1:
        fail("run", "workers", "workers must be positive")
    if run["mode"] not in ("stages", "shear_sweep"):
        fail("run", "mode", "mode must be 'stages' or 'shear_sweep'")
    if geo["source"] not in ("pinned", "search", "file"):
        fail("geometry", "source", "source must be 'pinned', 'search' or 'file'")
    if geo["source"] == "file" and not geo["file"]:
        fail("geometry", "file", "source = file needs a file path")
    for key in sch["lambdas"] + [sch["lambda_initial"]]:
        if key < 1 or key & (key - 1):
            fail("scheme", "lambdas" if sch["lambdas"] else "lambda_initial", f"lambda={key} is not a power of two")
    if sch["lambda_ratio"] < 2 or sch["lambda_ratio"] & (sch["lambda_ratio"] - 1):
        fail("scheme", "lambda_ratio", "lambda_ratio must be a power of two and at least 2")
    if sch["lambdas"] and len(sch["lambdas"]) < run["stages"]:
        fail("scheme", "lambdas", f"{len(sch['lambdas'])} lambdas listed for {run['stages']} stages")
    if len(swp["lambdas"]) < 4:
        fail("sweep", "lambdas", "a sweep needs at least four lambdas")
    try:
        iteration = IterationConfig(
            alpha=sch["alpha"],
            beta=sch["beta"],
            stages=run["stages"],
            lambdas=tuple(sch["lambdas"]),
            lambda_initial=sch["lambda_initial"],
            lambda_ratio=sch["lambda_ratio"],
            mus=tuple(sch["mus"]),
            grid_factor=grd["grid_factor"],
            grid_margin=grd["grid_margin"],
            time_samples=grd["time_samples"],
            lattice_stride=grd["lattice_stride"],
            decomposition=chk["decomposition"],
            fd_check=chk["fd_check"],
            mean_tolerance=chk["mean_tolerance"],
            M=chk["M"],
            M_probes=chk["M_probes"],
            M_safety=chk["M_safety"],
            seed=run["seed"],
        )
    except ValueError as exc:
        msg = str(exc)
        key = "time_samples" if "time samples" in msg else ("alpha" if "alpha" in msg else "beta")
        sec = "grid" if key == "time_samples" else "scheme"
        fail(sec, key, msg)
    if chk["M"] is not None and chk["M"] <= 1:
        fail("checks", "M", "M must exceed 1")
    return RunConfig(
        profile=profile,
        iteration=iteration,
        output=run["output"],
        seed=run["seed"],
        workers=run["workers"],
        mode=run["mode"],
        geometry_source=geo["source"],
        search_bound=geo["search_bound"],
        geometry_file=geo["file"],
        sweep_lambdas=list(swp["lambdas"]),
        sweep_amplitude=swp["amplitude"],
        sweep_grid_factor=swp["grid_factor"],
        text=text,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))
