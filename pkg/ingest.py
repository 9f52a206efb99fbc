"""
Readers for curve tables, sampled functions and space specs.

Column names are matched case-insensitively against a list of known
aliases, then loosely by substring, the way hand-made exports tend to vary.
"""
from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from comparison import unit_ball_volume
from errors import InputError
from isoprofile import ProfileCurve
from rearrangement import SampledFunction
from spaces import ModelSpace, space_from_json

logger = logging.getLogger(__name__)

VOLUME_COLUMNS = ("v", "volume", "vol", "mass")
PROFILE_COLUMNS = ("i", "profile", "perimeter", "per", "i(v)")


def _find_column(df: pd.DataFrame, candidates: Sequence[str], loose: str, what: str) -> str:
    cols = {str(c).strip().lower(): c for c in df.columns}
    for k in candidates:
        if k in cols:
            return cols[k]
    # loose fallback: any column containing the stem
    for k, orig in cols.items():
        if loose in k:
            return orig
    raise InputError(f"CSV must contain a {what} column (e.g. '{candidates[0]}'), got {list(df.columns)}")


def _numeric(df: pd.DataFrame, col: str) -> np.ndarray:
    series = pd.to_numeric(df[col], errors="coerce")
    if series.isna().any():
        first = df[col][series.isna()].iloc[0]
        raise InputError(f"Could not parse a number in column '{col}': {first!r}")
    return series.to_numpy(dtype=float)


def _read_csv(path: str | Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, skipinitialspace=True)
    except FileNotFoundError as exc:
        raise InputError(f"No such file: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InputError(f"Malformed CSV {path}: {exc}") from exc


def curve_from_frame(
    df: pd.DataFrame,
    N: float,
    K: float = 0.0,
    v0: Optional[float] = None,
    total_mass: float = math.inf,
) -> ProfileCurve:
    vcol = _find_column(df, VOLUME_COLUMNS, "vol", "volume")
    icol = _find_column(df.drop(columns=[vcol]), PROFILE_COLUMNS, "per", "profile")
    frame = pd.DataFrame({"v": _numeric(df, vcol), "I": _numeric(df, icol)}).sort_values("v")
    if frame["v"].duplicated().any():
        raise InputError("Curve volumes must be distinct")
    logger.debug("curve columns v=%r I=%r, %d rows", vcol, icol, len(frame))
    return ProfileCurve(
        N=N,
        K=K,
        v0=v0 if v0 is not None else unit_ball_volume(N),
        total_mass=total_mass,
        grid=frame["v"].to_numpy(),
        values=frame["I"].to_numpy(),
    )


def read_curve_json(
    path: str | Path,
    N: Optional[float] = None,
    K: Optional[float] = None,
    total_mass: Optional[float] = None,
) -> ProfileCurve:
    raw = _load_json(Path(path).read_text(encoding="utf-8"))
    if total_mass is None:
        total_mass = raw.get("total_mass")
    try:
        return ProfileCurve(
            N=float(raw["N"] if N is None else N),
            K=float(raw.get("K", 0.0) if K is None else K),
            v0=float(raw.get("v0") or unit_ball_volume(float(raw["N"] if N is None else N))),
            total_mass=math.inf if total_mass is None else float(total_mass),
            grid=np.asarray(raw["grid"], dtype=float),
            values=np.asarray(raw["values"], dtype=float),
        )
    except KeyError as exc:
        raise InputError(f"Curve JSON is missing {exc.args[0]!r}") from exc


def read_curve(
    path: str | Path,
    N: float,
    K: float = 0.0,
    v0: Optional[float] = None,
    total_mass: Optional[float] = None,
) -> ProfileCurve:
    """
    Load a sampled profile from a `v,I` CSV (or the JSON form written by `profile`).

    total_mass bounds the volumes of the space; a JSON file may carry its own.
    """
    if total_mass is not None and not total_mass > 0:
        raise InputError(f"total_mass must be positive, got {total_mass}")
    if str(path).lower().endswith(".json"):
        try:
            return read_curve_json(path, N, K, total_mass)
        except FileNotFoundError as exc:
            raise InputError(f"No such file: {path}") from exc
    return curve_from_frame(_read_csv(path), N, K, v0, math.inf if total_mass is None else total_mass)


def read_sampled_function(path: str | Path, N: float) -> SampledFunction:
    """Sampled function table with columns node, value and (optionally) weight."""
    df = _read_csv(path)
    ncol = _find_column(df, ("node", "x", "r", "radius"), "node", "node")
    ucol = _find_column(df.drop(columns=[ncol]), ("value", "u", "f"), "val", "value")
    cols = {str(c).strip().lower(): c for c in df.columns}
    weights = _numeric(df, cols["weight"]) if "weight" in cols else None
    nodes = _numeric(df, ncol)
    if weights is None:
        if nodes.size < 2:
            raise InputError("Need a weight column or at least two nodes to infer cell weights")
        # uniform cells of the weighted half-line around the given nodes
        edges = np.concatenate([[0.0], 0.5 * (nodes[1:] + nodes[:-1]), [nodes[-1] + 0.5 * (nodes[-1] - nodes[-2])]])
        weights = unit_ball_volume(N) * np.diff(edges ** N)
    return SampledFunction(nodes=nodes, values=_numeric(df, ucol), weights=weights, N=N)


def _load_json(text: str) -> Dict[str, Any]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"Malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError(f"Expected a JSON object, got {type(raw).__name__}")
    return raw


def read_space_spec(text_or_path: str) -> ModelSpace:
    """Accept an inline JSON space spec or a path to a file holding one."""
    text = text_or_path.strip()
    if not text.startswith("{"):
        p = Path(text)
        if not p.exists():
            raise InputError(f"Space spec is neither JSON nor an existing file: {text_or_path!r}")
        text = p.read_text(encoding="utf-8")
    return space_from_json(_load_json(text))


__all__ = [
    "curve_from_frame",
    "read_curve",
    "read_curve_json",
    "read_sampled_function",
    "read_space_spec",
]
