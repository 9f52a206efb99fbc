from __future__ import annotations

import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict

from errors import InputError

logger = logging.getLogger(__name__)

DEFAULT_PATH = "isoperimetry.toml"


@dataclass(frozen=True)
class Tolerances:
    sharp: float = 1e-10
    viscosity: float = 1e-6
    concavity: float = 1e-9
    barrier: float = 1e-8
    spectral: float = 1e-4
    polya_szego: float = 1e-3


@dataclass(frozen=True)
class Grids:
    vmin: float = 0.1
    vmax: float = 10.0
    samples: int = 64
    split_grid: int = 200


@dataclass(frozen=True)
class SolverOptions:
    """Rayleigh-quotient solver settings (`{grid_points, max_iters, tol}`)."""

    grid_points: int = 4000
    max_iters: int = 20000
    tol: float = 1e-12

    @classmethod
    def from_json(cls, text: str | None) -> "SolverOptions":
        if not text:
            return cls()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"Solver options are not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise InputError(f"Solver options must be a JSON object, got {raw!r}")
        return _section(cls, raw, "solver")

    def __post_init__(self) -> None:
        if self.grid_points < 8:
            raise InputError(f"grid_points must be >= 8, got {self.grid_points}")
        if self.max_iters < 1:
            raise InputError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise InputError(f"solver tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class Settings:
    tolerances: Tolerances = field(default_factory=Tolerances)
    grids: Grids = field(default_factory=Grids)
    solver: SolverOptions = field(default_factory=SolverOptions)


DEFAULT_SETTINGS = Settings()


def _section(cls, raw: Dict[str, Any], name: str):
    known = {f.name: f for f in fields(cls)}
    kwargs: Dict[str, Any] = {}
    for key, value in raw.items():
        if key not in known:
            logger.warning("Ignoring unknown key %r in [%s]", key, name)
            continue
        target = known[key].type
        try:
            kwargs[key] = int(value) if target in (int, "int") else float(value)
        except (TypeError, ValueError) as exc:
            raise InputError(f"[{name}] {key} must be numeric, got {value!r}") from exc
    return replace(cls(), **kwargs)


def load_settings(path: str | Path | None = None) -> Settings:
    """
    Read settings from a TOML file. Missing file, sections or keys fall back
    to the defaults; an explicitly named file must exist.
    """
    p = Path(path) if path is not None else Path(DEFAULT_PATH)
    if not p.exists():
        if path is not None:
            raise InputError(f"Settings file not found: {p}")
        return DEFAULT_SETTINGS
    try:
        sec = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"Could not parse settings file {p}: {exc}") from exc

    for name in sec:
        if name not in ("tolerances", "grids", "solver"):
            logger.warning("Ignoring unknown section [%s] in %s", name, p)

    settings = Settings(
        tolerances=_section(Tolerances, sec.get("tolerances", {}), "tolerances"),
        grids=_section(Grids, sec.get("grids", {}), "grids"),
        solver=_section(SolverOptions, sec.get("solver", {}), "solver"),
    )
    logger.debug("Loaded settings from %s: %s", p, settings)
    return settings


__all__ = ["Tolerances", "Grids", "SolverOptions", "Settings", "DEFAULT_SETTINGS", "load_settings"]
