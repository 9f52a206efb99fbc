"""Verification reports and the CSV / JSON / XLSX emitters used by the CLI."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class VerificationReport:
    """
    Outcome of one check. `worst_violation` is the largest deficit
    (required minus actual, so negative means slack) and `at` its location.
    """

    check: str
    passed: bool
    worst_violation: float
    at: float
    tol: float
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "check": self.check,
            "pass": bool(self.passed),
            "worst_violation": self.worst_violation,
            "at": self.at,
            "tol": self.tol,
        }
        out.update(self.details)
        return _jsonable(out)


def report_from_deficits(
    check: str,
    locations: Sequence[float],
    deficits: Sequence[float],
    tol,
    details: Optional[Dict[str, Any]] = None,
) -> VerificationReport:
    """
    Build a report from pointwise deficits: the check passes iff every
    deficit is <= its tolerance (`tol` may be a scalar or one value per point).
    """
    loc = np.asarray(locations, dtype=float)
    d = np.asarray(deficits, dtype=float)
    t = np.broadcast_to(np.asarray(tol, dtype=float), d.shape)
    if d.size == 0:
        t0 = float(np.max(tol)) if np.size(tol) else 0.0
        return VerificationReport(check, True, -math.inf, math.nan, t0, dict(details or {}))
    over = d - t
    over = np.where(np.isnan(over), math.inf, over)
    j = int(np.argmax(over))
    return VerificationReport(
        check=check,
        passed=bool(np.all(over <= 0)),
        worst_violation=float(d[j]),
        at=float(loc[j]),
        tol=float(t[j]),
        details=dict(details or {}),
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def to_json(obj: Any) -> str:
    """Deterministic JSON; non-finite floats become null."""
    if isinstance(obj, VerificationReport):
        obj = obj.to_dict()
    elif isinstance(obj, list):
        obj = [o.to_dict() if isinstance(o, VerificationReport) else o for o in obj]
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def to_csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def reports_frame(reports: Iterable[VerificationReport]) -> pd.DataFrame:
    rows: List[Dict[str, Any]] = []
    for rep in reports:
        rows.append({
            "check": rep.check,
            "pass": bool(rep.passed),
            "worst_violation": rep.worst_violation,
            "at": rep.at,
            "tol": rep.tol,
        })
    return pd.DataFrame(rows, columns=["check", "pass", "worst_violation", "at", "tol"])


def write_workbook(path: str | Path, sheets: Dict[str, pd.DataFrame]) -> Path:
    """One sheet per table, in insertion order."""
    path = Path(path)
    with pd.ExcelWriter(path, engine="openpyxl") as writer:
        for name, df in sheets.items():
            df.to_excel(writer, sheet_name=name[:31], index=False)
    return path


__all__ = [
    "VerificationReport",
    "report_from_deficits",
    "to_json",
    "to_csv",
    "reports_frame",
    "write_workbook",
    "FLOAT_FORMAT",
]
