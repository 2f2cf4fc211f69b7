"""JSON and CSV output for stage reports and sweeps.

CSV files have the fixed header ``quantity,stage,lambda,mu,t,value``.  Rows
that do not depend on time leave ``t`` empty; rows that are not tied to a
stage leave ``stage`` empty.  Rows are written in a deterministic order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable

__all__ = [
    "CSV_COLUMNS",
    "CsvFormatError",
    "to_json",
    "write_json",
    "stage_rows",
    "sweep_rows",
    "write_csv",
    "read_csv",
]

CSV_COLUMNS = ("quantity", "stage", "lambda", "mu", "t", "value")


class CsvFormatError(ValueError):
    """A CSV file does not follow the report layout."""


def _clean(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    return obj


def to_json(obj) -> str:
    """Canonical JSON text: sorted keys, no NaN, trailing newline."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(to_json(obj), encoding="utf-8")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def stage_rows(report: dict) -> list[tuple]:
    """Flatten one stage report into CSV rows."""
    stage = report.get("stage")
    params = report.get("params", {})
    lam, mu = params.get("lambda"), params.get("mu")
    rows: list[tuple] = []
    if "checks" not in report:
        return [("failed", stage, lam, mu, None, 1.0)]
    band = report["checks"]["energy_band"]
    for i, t in enumerate(band["times"]):
        rows.append(("energy_gap", stage, lam, mu, t, band["gap"][i]))
        rows.append(("band_lower", stage, lam, mu, t, band["lower"][i]))
        rows.append(("band_upper", stage, lam, mu, t, band["upper"][i]))
        rows.append(("energy", stage, lam, mu, t, report["energy_out"][i]))
        rows.append(("profile", stage, lam, mu, t, band["gap"][i] + report["energy_out"][i]))
        rows.append(("rho", stage, lam, mu, t, report["rho"][i]))
    for name in sorted(report["norms"]):
        rows.append((name, stage, lam, mu, None, report["norms"][name]))
    for name in sorted(report["checks"]):
        chk = report["checks"][name]
        if "measured" in chk:
            rows.append((f"{name}_measured", stage, lam, mu, None, chk["measured"]))
            rows.append((f"{name}_bound", stage, lam, mu, None, chk["bound"]))
    for name in sorted(report.get("cauchy", {})):
        chk = report["cauchy"][name]
        rows.append((f"cauchy_{name}_measured", stage, lam, mu, None, chk["measured"]))
        rows.append((f"cauchy_{name}_bound", stage, lam, mu, None, chk["bound"]))
    dec = report.get("decomposition")
    if dec:
        for name in sorted(dec["parts"]):
            rows.append((f"part_{name}", stage, lam, mu, None, dec["parts"][name]["sup"]))
        if "sum_residual" in dec:
            rows.append(("parts_sum_residual", stage, lam, mu, None, dec["sum_residual"]))
    rows.append(("success", stage, lam, mu, None, 1.0 if report.get("success") else 0.0))
    return rows


def sweep_rows(sweep: dict) -> list[tuple]:
    """CSV rows of a frequency sweep (no stage column)."""
    rows = []
    for row in sweep["rows"]:
        for name in ("w_o", "w_c", "energy_deviation", "oscillation_sup", "oscillation_holder"):
            rows.append((name, None, row["lambda"], row["mu"], None, row[name]))
    for name in sorted(sweep.get("fits", {})):
        fit = sweep["fits"][name]
        rows.append((f"slope_{name}", None, None, None, None, fit["fit"]["slope"]))
        rows.append((f"predicted_{name}", None, None, None, None, fit["predicted"]))
        rows.append((f"residual_{name}", None, None, None, None, fit["fit"]["residual"]))
    return rows


def write_csv(path, rows: Iterable[tuple]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path) -> list[dict]:
    """Parse a report CSV; raises :class:`CsvFormatError` naming the bad row."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise CsvFormatError(f"row 1: expected header {','.join(CSV_COLUMNS)}, got {','.join(header)}")
    out = []
    for no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise CsvFormatError(f"row {no}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        try:
            rec = {
                "quantity": row[0],
                "stage": int(row[1]) if row[1] else None,
                "lambda": int(row[2]) if row[2] else None,
                "mu": int(row[3]) if row[3] else None,
                "t": float(row[4]) if row[4] else None,
                "value": float(row[5]),
            }
        except ValueError as exc:
            raise CsvFormatError(f"row {no}: {exc}") from exc
        if not rec["quantity"]:
            raise CsvFormatError(f"row {no}: empty quantity")
        out.append(rec)
    return out
