"""
Model metric measure spaces: space forms, Euclidean cones of opening theta,
the weighted half-line ([0, r_max), N omega_N r^(N-1) dr), warped products
dt^2 + dr^2 + sigma(t,r)^2 dtheta^2 and finite disjoint unions.

Cones are described by (theta, N) only; balls are always centred at the
distinguished point (pole, tip or 0).
"""
from __future__ import annotations

import json
import logging
import math
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from comparison import model_ball_volume, model_sphere_area, unit_ball_volume
from errors import DomainError, InputError
from reports import VerificationReport, report_from_deficits

logger = logging.getLogger(__name__)

Hessian = Callable[[float, float], Tuple[float, float, float]]


# ----------------------------
# Descriptors
# ----------------------------
@dataclass(frozen=True)
class SpaceForm:
    K: float
    N: float

    def __post_init__(self) -> None:
        if not self.N >= 1:
            raise InputError(f"SpaceForm needs N >= 1, got {self.N}")


@dataclass(frozen=True)
class Cone:
    theta: float
    N: float

    def __post_init__(self) -> None:
        if not 0 < self.theta <= 1:
            raise InputError(f"Cone opening theta must lie in (0, 1], got {self.theta}")
        if not self.N >= 2:
            raise InputError(f"Cone needs N >= 2, got {self.N}")


@dataclass(frozen=True)
class WeightedHalfLine:
    N: float
    r_max: float = math.inf

    def __post_init__(self) -> None:
        if not self.N >= 1:
            raise InputError(f"WeightedHalfLine needs N >= 1, got {self.N}")
        if not self.r_max > 0:
            raise InputError(f"r_max must be positive, got {self.r_max}")

    @property
    def total_mass(self) -> float:
        return unit_ball_volume(self.N) * self.r_max ** self.N if math.isfinite(self.r_max) else math.inf


@dataclass(frozen=True)
class ScalarField:
    """Warping function sigma(t, r) with optional analytic (s_tt, s_rr, s_tr)."""

    name: str
    value: Callable[[float, float], float] = field(compare=False)
    hessian: Optional[Hessian] = field(default=None, compare=False)
    limit_density: Optional[float] = None
    params: Tuple[Tuple[str, float], ...] = ()

    def without_hessian(self) -> "ScalarField":
        return ScalarField(self.name, self.value, None, self.limit_density, self.params)


@dataclass(frozen=True)
class WarpedExample:
    sigma: ScalarField
    N: float = 3.0


@dataclass(frozen=True)
class DisjointUnion:
    parts: Tuple[Any, ...]

    def __post_init__(self) -> None:
        parts = tuple(self.parts)
        if not parts:
            raise InputError("DisjointUnion needs at least one part")
        dims = {dimension(p) for p in parts}
        if len(dims) != 1:
            raise InputError(f"All parts of a union must share N, got {sorted(dims)}")
        object.__setattr__(self, "parts", parts)

    @property
    def N(self) -> float:
        return dimension(self.parts[0])


ModelSpace = Union[SpaceForm, Cone, WeightedHalfLine, WarpedExample, DisjointUnion]


@dataclass(frozen=True)
class RicciComponents:
    Ric_tt: float
    Ric_rr: float
    Ric_thth: float
    Ric_tr: float

    def min_tr_eigenvalue(self) -> float:
        """Smallest eigenvalue of the symmetric (t, r) block."""
        mean = 0.5 * (self.Ric_tt + self.Ric_rr)
        rad = math.hypot(0.5 * (self.Ric_tt - self.Ric_rr), self.Ric_tr)
        return mean - rad

    def min_eigenvalue(self) -> float:
        return min(self.min_tr_eigenvalue(), self.Ric_thth)


def dimension(space: ModelSpace) -> float:
    if isinstance(space, DisjointUnion):
        return space.N
    return float(space.N)


# ----------------------------
# Volumes and densities
# ----------------------------
def _component(space: ModelSpace, part: int) -> ModelSpace:
    if isinstance(space, DisjointUnion):
        try:
            return _component(space.parts[part], 0)
        except IndexError:
            raise InputError(f"Union has {len(space.parts)} parts, no part {part}") from None
    return space


def ball_volume(space: ModelSpace, r: float, part: int = 0) -> float:
    """Measure of the ball of radius r about the distinguished point (of `part` for unions)."""
    if r < 0:
        raise DomainError(f"Radius must be >= 0, got {r}")
    s = _component(space, part)
    if isinstance(s, SpaceForm):
        return model_ball_volume(s.N, s.K, r)
    if isinstance(s, Cone):
        return s.theta * unit_ball_volume(s.N) * r ** s.N
    if isinstance(s, WeightedHalfLine):
        return unit_ball_volume(s.N) * min(r, s.r_max) ** s.N
    raise InputError(f"{type(s).__name__} has no distinguished ball")


def ball_perimeter(space: ModelSpace, r: float, part: int = 0) -> float:
    if r < 0:
        raise DomainError(f"Radius must be >= 0, got {r}")
    s = _component(space, part)
    if isinstance(s, SpaceForm):
        return model_sphere_area(s.N, s.K, r)
    if isinstance(s, Cone):
        return s.N * s.theta * unit_ball_volume(s.N) * r ** (s.N - 1)
    if isinstance(s, WeightedHalfLine):
        if r >= s.r_max:
            return 0.0
        return s.N * unit_ball_volume(s.N) * r ** (s.N - 1)
    raise InputError(f"{type(s).__name__} has no distinguished ball")


def volume_samples(space: ModelSpace, radii: Iterable[float], part: int = 0) -> pd.DataFrame:
    rows = [
        {"r": float(r), "volume": ball_volume(space, r, part), "perimeter": ball_perimeter(space, r, part)}
        for r in radii
    ]
    return pd.DataFrame(rows, columns=["r", "volume", "perimeter"])


def avr(space: ModelSpace) -> float:
    """Asymptotic volume ratio lim vol(B_r)/(omega_N r^N)."""
    if isinstance(space, Cone):
        return space.theta
    if isinstance(space, SpaceForm):
        if space.K == 0:
            return 1.0
        if space.K > 0:
            return 0.0
        logger.warning("AVR of the hyperbolic space form K=%s is unbounded", space.K)
        return math.inf
    if isinstance(space, WeightedHalfLine):
        return 1.0 if math.isinf(space.r_max) else 0.0
    if isinstance(space, WarpedExample):
        if space.sigma.limit_density is None:
            raise InputError(f"AVR of warped field {space.sigma.name!r} is not known")
        return space.sigma.limit_density
    raise InputError("AVR is not defined for a disjoint union")


def density(space: ModelSpace, at_tip: bool = False) -> float:
    """Volume density; tips of cones carry theta, every regular point carries 1."""
    if isinstance(space, Cone):
        return space.theta if at_tip else 1.0
    if isinstance(space, DisjointUnion) and at_tip:
        return min(density(p, at_tip=True) for p in space.parts)
    return 1.0


def min_density_at_infinity(space: ModelSpace) -> float:
    if isinstance(space, Cone):
        return min(space.theta, 1.0)
    if isinstance(space, (SpaceForm, WeightedHalfLine)):
        return 1.0
    if isinstance(space, DisjointUnion):
        return min(min_density_at_infinity(p) for p in space.parts)
    if space.sigma.limit_density is None:
        raise InputError(f"Density at infinity of warped field {space.sigma.name!r} is not known")
    return min(space.sigma.limit_density, 1.0)


# ----------------------------
# Warped products
# ----------------------------
def _dyadic(h: float) -> float:
    step = 2.0 ** round(math.log2(h))
    if step != h:
        logger.debug("finite-difference step %g rounded to the dyadic step %g", h, step)
    return step


def _second_derivatives(f: Callable[[float, float], float], t: float, r: float, h: float):
    f0 = f(t, r)
    stt = (f(t + h, r) - 2 * f0 + f(t - h, r)) / (h * h)
    srr = (f(t, r + h) - 2 * f0 + f(t, r - h)) / (h * h)
    str_ = (f(t + h, r + h) - f(t + h, r - h) - f(t - h, r + h) + f(t - h, r - h)) / (4 * h * h)
    return np.array([stt, srr, str_])


def ricci_warped(sigma: ScalarField, t: float, r: float, h: float = 1e-4) -> RicciComponents:
    """
    Ricci components of dt^2 + dr^2 + sigma^2 dtheta^2 in an orthonormal frame.
    Uses the analytic Hessian of sigma when available, otherwise centred
    differences with one Richardson step; h is rounded to a power of two.
    """
    s0 = sigma.value(t, r)
    if not s0 > 0:
        raise DomainError(f"sigma({t}, {r}) = {s0} is not positive")
    if sigma.hessian is not None:
        stt, srr, str_ = sigma.hessian(t, r)
    else:
        if not h > 0:
            raise InputError(f"Step h must be positive, got {h}")
        h = _dyadic(h)
        coarse = _second_derivatives(sigma.value, t, r, h)
        fine = _second_derivatives(sigma.value, t, r, h / 2)
        stt, srr, str_ = (4 * fine - coarse) / 3
    return RicciComponents(
        Ric_tt=-stt / s0,
        Ric_rr=-srr / s0,
        Ric_thth=-(stt + srr) / s0,
        Ric_tr=-str_ / s0,
    )


def ricci_lower_bound_sweep(
    space: WarpedExample | ScalarField,
    t_values: Sequence[float],
    r_values: Sequence[float],
    K: float = 0.0,
    h: float = 1e-4,
    tol: float = 1e-6,
) -> VerificationReport:
    """Grid sweep of min(eig of the (t,r) block, Ric_thth) >= K. A heuristic, not a certificate."""
    sigma = space.sigma if isinstance(space, WarpedExample) else space
    ts, rs, deficits = [], [], []
    for t in t_values:
        for r in r_values:
            ric = ricci_warped(sigma, t, r, h)
            ts.append(float(t))
            rs.append(float(r))
            deficits.append(K - ric.min_eigenvalue())
    rep = report_from_deficits("ricci_lower_bound", rs, deficits, tol, details={"K": K, "heuristic": True})
    j = int(np.argmax(deficits)) if deficits else 0
    if deficits:
        rep.details["t_at"] = ts[j]
        rep.details["min_eigenvalue"] = K - deficits[j]
    return rep


def _flat() -> ScalarField:
    return ScalarField("flat", lambda t, r: r, lambda t, r: (0.0, 0.0, 0.0), limit_density=1.0)


def _sphere() -> ScalarField:
    return ScalarField("sphere", lambda t, r: math.sin(r), lambda t, r: (0.0, -math.sin(r), 0.0))


def _exp() -> ScalarField:
    return ScalarField(
        "exp",
        lambda t, r: math.exp(t) * r,
        lambda t, r: (math.exp(t) * r, 0.0, math.exp(t)),
    )


def _smoothed_cone(eps0: float = 0.5) -> ScalarField:
    """Concave-in-r smoothing of sigma = r/2 whose scale eps0/(1+t^2) shrinks in |t|."""
    if not eps0 > 0:
        raise InputError(f"eps0 must be positive, got {eps0}")

    def value(t: float, r: float) -> float:
        eps = eps0 / (1 + t * t)
        return 0.5 * r + 0.5 * eps * (-math.expm1(-r / eps))

    return ScalarField("smoothed_cone", value, None, limit_density=0.5, params=(("eps0", eps0),))


SIGMA_FIELDS: Dict[str, Callable[..., ScalarField]] = {
    "flat": _flat,
    "sphere": _sphere,
    "exp": _exp,
    "smoothedcone": _smoothed_cone,
}


def sigma_field(name: str, **params: float) -> ScalarField:
    key = _normalize_key(name)
    if key not in SIGMA_FIELDS:
        raise InputError(f"Unknown sigma field {name!r}; expected one of {sorted(SIGMA_FIELDS)}")
    try:
        return SIGMA_FIELDS[key](**params)
    except TypeError as exc:
        raise InputError(f"Bad parameters {sorted(params)} for sigma field {name!r}: {exc}") from exc


# ----------------------------
# JSON
# ----------------------------
def _normalize_key(name: str) -> str:
    """Lower-case, strip accents and keep only [a-z0-9]."""
    if name is None:
        return ""
    s = unicodedata.normalize("NFKD", str(name).strip().lower())
    s = "".join(c for c in s if not unicodedata.combining(c))
    return re.sub(r"[^a-z0-9]+", "", s)


_TYPE_ALIASES = {
    "cone": "cone",
    "spaceform": "space_form",
    "halfline": "half_line",
    "weightedhalfline": "half_line",
    "warped": "warped",
    "warpedexample": "warped",
    "union": "union",
    "disjointunion": "union",
}


def _number(obj: Dict[str, Any], *keys: str, default: Any = None) -> float:
    for k in keys:
        if k in obj and obj[k] is not None:
            v = obj[k]
            if isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
                return math.inf
            try:
                return float(v)
            except (TypeError, ValueError):
                raise InputError(f"Field {k!r} must be numeric, got {v!r}") from None
    if default is None:
        raise InputError(f"Space spec is missing {' or '.join(repr(k) for k in keys)}")
    return default


def space_from_json(spec: str | Dict[str, Any]) -> ModelSpace:
    """
    Parse {"type": "cone"|"space_form"|"half_line"|"warped"|"union", ...}.
    The dimension may be given as "N" or "dim".
    """
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise InputError(f"Space spec is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise InputError(f"Space spec must be a JSON object, got {spec!r}")

    kind = _TYPE_ALIASES.get(_normalize_key(spec.get("type", "")))
    if kind is None:
        raise InputError(f"Unknown space type {spec.get('type')!r}")
    if kind == "cone":
        return Cone(theta=_number(spec, "theta"), N=_number(spec, "N", "dim"))
    if kind == "space_form":
        return SpaceForm(K=_number(spec, "K", default=0.0), N=_number(spec, "N", "dim"))
    if kind == "half_line":
        return WeightedHalfLine(N=_number(spec, "N", "dim"), r_max=_number(spec, "r_max", default=math.inf))
    if kind == "warped":
        raw = spec.get("sigma", "flat")
        if isinstance(raw, dict):
            try:
                params = {k: float(v) for k, v in raw.items() if k != "name"}
            except (TypeError, ValueError) as exc:
                raise InputError(f"sigma parameters must be numeric, got {raw!r}") from exc
            sigma = sigma_field(raw.get("name", ""), **params)
        else:
            sigma = sigma_field(str(raw))
        return WarpedExample(sigma=sigma, N=_number(spec, "N", "dim", default=3.0))
    parts = spec.get("parts")
    if not isinstance(parts, list) or not parts:
        raise InputError("Union spec needs a nonempty 'parts' list")
    return DisjointUnion(tuple(space_from_json(p) for p in parts))


def space_to_json(space: ModelSpace) -> Dict[str, Any]:
    if isinstance(space, Cone):
        return {"type": "cone", "theta": space.theta, "dim": space.N}
    if isinstance(space, SpaceForm):
        return {"type": "space_form", "K": space.K, "dim": space.N}
    if isinstance(space, WeightedHalfLine):
        r_max = space.r_max if math.isfinite(space.r_max) else None
        return {"type": "half_line", "dim": space.N, "r_max": r_max}
    if isinstance(space, WarpedExample):
        sigma: Dict[str, Any] = {"name": space.sigma.name, **dict(space.sigma.params)}
        return {"type": "warped", "dim": space.N, "sigma": sigma}
    return {"type": "union", "parts": [space_to_json(p) for p in space.parts]}


__all__ = [
    "SpaceForm",
    "Cone",
    "WeightedHalfLine",
    "ScalarField",
    "WarpedExample",
    "DisjointUnion",
    "ModelSpace",
    "RicciComponents",
    "dimension",
    "ball_volume",
    "ball_perimeter",
    "volume_samples",
    "avr",
    "density",
    "min_density_at_infinity",
    "ricci_warped",
    "ricci_lower_bound_sweep",
    "sigma_field",
    "space_from_json",
    "space_to_json",
]
