"""
Isoperimetric profiles of model spaces and the profile-level checks.

A ProfileCurve is either the closed form of a Euclidean cone,
I(v) = N (omega_N theta)^(1/N) v^((N-1)/N), or a sampled table (v_i, I_i).
Sampled curves are interpolated with a monotone cubic (PCHIP) between nodes,
extended by I(0) = 0 and by the Euclidean power law below the first node.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, interpolate, optimize

from comparison import diameter, model_ball_volume, model_sphere_area, sn, unit_ball_volume
from errors import CurvatureError, DomainError, InputError
from reports import VerificationReport, report_from_deficits
from spaces import Cone, DisjointUnion, ModelSpace, SpaceForm, WeightedHalfLine

logger = logging.getLogger(__name__)

DEFAULT_VOLUMES = np.geomspace(0.1, 10.0, 201)
MAX_SPLIT_GRID = 20000
# cells per band of the split table
BAND_CELLS = 1 << 20


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    N: float
    K: float
    v0: float
    total_mass: float = math.inf
    theta: Optional[float] = None
    grid: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    _interp: Any = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.N > 1:
            raise InputError(f"Profiles need N > 1, got {self.N}")
        if not self.v0 > 0:
            raise InputError(f"v0 must be positive, got {self.v0}")
        if self.theta is not None:
            if not 0 < self.theta <= 1:
                raise InputError(f"Cone opening theta must lie in (0, 1], got {self.theta}")
            return
        if self.grid is None or self.values is None:
            raise InputError("A sampled profile needs both grid and values")
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise InputError("Profile grid and values must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise InputError("Profile grid must be nonnegative and strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InputError("Profile values must be finite and nonnegative")
        if grid[-1] > self.total_mass * (1 + 1e-12):
            raise InputError(f"Profile grid ends at {grid[-1]} beyond the total mass {self.total_mass}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_interp", interpolate.PchipInterpolator(grid, values, extrapolate=False))

    @property
    def is_closed_form(self) -> bool:
        return self.theta is not None

    @property
    def exponent(self) -> float:
        return (self.N - 1) / self.N

    @property
    def constant(self) -> float:
        """Cone constant N (omega_N theta)^(1/N); only for closed forms."""
        if self.theta is None:
            raise InputError("Sampled profiles have no closed-form constant")
        return self.N * (unit_ball_volume(self.N) * self.theta) ** (1 / self.N)

    @property
    def v_max(self) -> float:
        if self.theta is not None:
            return self.total_mass
        return float(self.grid[-1])

    def _raw(self, v: np.ndarray) -> np.ndarray:
        """Evaluate without range checks; NaN outside the represented range."""
        out = np.full(v.shape, np.nan)
        if self.theta is not None:
            ok = (v >= 0) & (v <= self.total_mass)
            out[ok] = self.constant * v[ok] ** self.exponent
            return out
        g0 = self.grid[0]
        inside = (v >= g0) & (v <= self.grid[-1])
        out[inside] = self._interp(v[inside])
        below = (v >= 0) & (v < g0)
        if np.any(below):
            if g0 > 0:
                out[below] = self.values[0] * (v[below] / g0) ** self.exponent
            else:
                out[below] = 0.0
        out[v == 0] = 0.0
        return out

    def evaluate(self, v):
        """I(v), with I(0) = 0."""
        arr = np.asarray(v, dtype=float)
        flat = np.atleast_1d(arr)
        out = self._raw(flat)
        bad = np.isnan(out)
        if np.any(bad):
            raise DomainError(
                f"Volume {flat[bad][0]!r} outside the profile range [0, {self.v_max}]"
            )
        return float(out[0]) if arr.ndim == 0 else out

    __call__ = evaluate

    def psi(self, v):
        return np.power(self.evaluate(v), self.N / (self.N - 1))

    def sample(self, volumes: Sequence[float]) -> "ProfileCurve":
        vols = np.asarray(volumes, dtype=float)
        return ProfileCurve(self.N, self.K, self.v0, self.total_mass, None, vols, self.evaluate(vols))

    def to_frame(self, volumes: Optional[Sequence[float]] = None) -> pd.DataFrame:
        vols = np.asarray(volumes, dtype=float) if volumes is not None else _volumes(self, None)
        return pd.DataFrame({"v": vols, "I": self.evaluate(vols)})

    def to_json(self, volumes: Optional[Sequence[float]] = None) -> Dict[str, Any]:
        df = self.to_frame(volumes)
        return {
            "N": self.N,
            "K": self.K,
            "v0": self.v0,
            "total_mass": self.total_mass,
            "theta": self.theta,
            "grid": df["v"].tolist(),
            "values": df["I"].tolist(),
        }


@dataclass(frozen=True)
class SplitResult:
    value: float
    allocation: List[Tuple[int, float]]


@dataclass(frozen=True)
class Asymptotics:
    small_limit: float
    large_limit: Optional[float] = None
    derivative_limit: Optional[float] = None


# ----------------------------
# Constructors
# ----------------------------
def cone_profile(theta: float, N: float, total_mass: float = math.inf) -> ProfileCurve:
    if not 0 < theta <= 1:
        raise InputError(f"Cone opening theta must lie in (0, 1], got {theta}")
    if not N >= 2:
        raise InputError(f"Cone profiles need N >= 2, got {N}")
    if not total_mass > 0:
        raise InputError(f"total_mass must be positive, got {total_mass}")
    return ProfileCurve(N=N, K=0.0, v0=theta * unit_ball_volume(N), total_mass=total_mass, theta=theta)


def truncate(curve: ProfileCurve, total_mass: float) -> ProfileCurve:
    if curve.is_closed_form:
        return cone_profile(curve.theta, curve.N, total_mass)
    keep = curve.grid <= total_mass
    return ProfileCurve(curve.N, curve.K, curve.v0, total_mass, None, curve.grid[keep], curve.values[keep])


def euclidean_profile(N: float, v):
    """I_N(v) = N omega_N^(1/N) v^((N-1)/N)."""
    return N * unit_ball_volume(N) ** (1 / N) * np.power(v, (N - 1) / N)


def sharp_lower_bound(N: float, avr: float, v):
    """N omega_N^(1/N) AVR^(1/N) v^((N-1)/N)."""
    if avr < 0:
        raise InputError(f"AVR must be nonnegative, got {avr}")
    return euclidean_profile(N, v) * avr ** (1 / N)


def _cap_radii(K: float, N: float, samples: int, r_min: Optional[float], r_max: Optional[float]) -> np.ndarray:
    if samples < 2:
        raise InputError(f"Need at least 2 samples, got {samples}")
    if K > 0:
        lo = 0.0 if r_min is None else r_min
        hi = diameter(K) if r_max is None else min(r_max, diameter(K))
        # Chebyshev nodes without the endpoints: clustered where the profile is steep
        j = np.arange(1, samples + 1)
        return lo + (hi - lo) * 0.5 * (1 - np.cos(np.pi * j / (samples + 1)))
    lo = 1e-3 if r_min is None else r_min
    hi = 10.0 if r_max is None else r_max
    if not 0 < lo < hi:
        raise InputError(f"Need 0 < r_min < r_max, got {lo}, {hi}")
    return np.geomspace(lo, hi, samples)


def _cumulative_volumes(N: float, K: float, radii: np.ndarray) -> np.ndarray:
    omega = unit_ball_volume(N)
    edges = np.concatenate([[0.0], radii])
    pieces = [
        integrate.quad(lambda s: max(sn(K, s), 0.0) ** (N - 1), a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
        for a, b in zip(edges[:-1], edges[1:])
    ]
    return N * omega * np.cumsum(pieces)


def space_form_profile(
    K: float,
    N: float,
    samples: int = 200,
    r_min: Optional[float] = None,
    r_max: Optional[float] = None,
    volumes: Optional[Sequence[float]] = None,
) -> ProfileCurve:
    """Profile of the simply connected space form, sampled from geodesic balls (caps for K > 0)."""
    if not N > 1:
        raise InputError(f"Profiles need N > 1, got {N}")
    if K == 0 and volumes is None:
        return cone_profile(1.0, N)
    mass = model_ball_volume(N, K, diameter(K)) if K > 0 else math.inf
    if volumes is not None:
        vols = np.asarray(volumes, dtype=float)
        if np.any(vols <= 0) or np.any(vols >= mass):
            raise DomainError(f"Volumes must lie in (0, {mass})")
        hi = diameter(K) if K > 0 else None
        radii = np.array([_radius_for_volume(N, K, v, hi) for v in vols])
    else:
        radii = _cap_radii(K, N, samples, r_min, r_max)
        vols = _cumulative_volumes(N, K, radii)
    perims = np.array([model_sphere_area(N, K, r) for r in radii])
    v0 = model_ball_volume(N, K, min(1.0, diameter(K)))
    logger.debug("space_form_profile K=%s N=%s: %d caps, mass=%s", K, N, len(radii), mass)
    return ProfileCurve(N=N, K=K, v0=v0, total_mass=mass, grid=vols, values=perims)


def _radius_for_volume(N: float, K: float, v: float, hi: Optional[float]) -> float:
    if hi is None:
        hi = (v / unit_ball_volume(N)) ** (1 / N)
        while model_ball_volume(N, K, hi) < v:
            hi *= 2
    return optimize.brentq(lambda r: model_ball_volume(N, K, r) - v, 0.0, hi, xtol=1e-14, rtol=1e-14)


def half_line_profile(N: float, r_max: float = math.inf, volumes: Optional[Sequence[float]] = None) -> ProfileCurve:
    """Weighted half-line: I(v) = N omega_N^(1/N) min(v, M - v)^((N-1)/N)."""
    if math.isinf(r_max):
        return cone_profile(1.0, N)
    mass = unit_ball_volume(N) * r_max ** N
    vols = np.asarray(volumes, dtype=float) if volumes is not None else np.linspace(0, mass, 201)[1:-1]
    values = euclidean_profile(N, np.minimum(vols, mass - vols))
    return ProfileCurve(N=N, K=0.0, v0=min(unit_ball_volume(N), mass), total_mass=mass, grid=vols, values=values)


def union_profile(parts: Sequence[ProfileCurve], volumes: Sequence[float], split_grid: int = 200) -> ProfileCurve:
    """Generalized profile of a disjoint union tabulated on `volumes`."""
    _common_dimension(parts)
    vols = np.asarray(volumes, dtype=float)
    values = np.array([generalized_profile(parts, v, split_grid).value for v in vols])
    return ProfileCurve(
        N=parts[0].N,
        K=min(p.K for p in parts),
        v0=min(p.v0 for p in parts),
        total_mass=sum(p.total_mass for p in parts),
        grid=vols,
        values=values,
    )


def profile_for_space(space: ModelSpace, volumes: Sequence[float], split_grid: int = 200) -> ProfileCurve:
    if isinstance(space, Cone):
        return cone_profile(space.theta, space.N)
    if isinstance(space, SpaceForm):
        if space.K == 0:
            return cone_profile(1.0, space.N)
        return space_form_profile(space.K, space.N, volumes=volumes)
    if isinstance(space, WeightedHalfLine):
        return half_line_profile(space.N, space.r_max, volumes)
    if isinstance(space, DisjointUnion):
        parts = [profile_for_space(p, volumes, split_grid) for p in space.parts]
        return union_profile(parts, volumes, split_grid)
    raise InputError(f"No isoperimetric profile is available for {type(space).__name__}")


# ----------------------------
# Grids
# ----------------------------
def _volumes(curve: ProfileCurve, volumes: Optional[Sequence[float]]) -> np.ndarray:
    if volumes is not None:
        vols = np.asarray(volumes, dtype=float)
        if vols.ndim != 1 or np.any(vols <= 0) or np.any(np.diff(vols) <= 0):
            raise InputError("Volumes must be positive and strictly increasing")
        return vols
    if not curve.is_closed_form:
        return curve.grid[curve.grid > 0]
    if math.isinf(curve.total_mass):
        return DEFAULT_VOLUMES
    return np.geomspace(1e-3, 0.999, 201) * curve.total_mass


def _values(curve: ProfileCurve, volumes: Optional[Sequence[float]]) -> Tuple[np.ndarray, np.ndarray]:
    vols = _volumes(curve, volumes)
    if volumes is None and not curve.is_closed_form:
        return vols, curve.values[curve.grid > 0]
    return vols, curve.evaluate(vols)


def _require_nonnegative_curvature(curve: ProfileCurve, check: str) -> None:
    if curve.K < 0:
        raise CurvatureError(f"{check} needs a curvature bound K >= 0, got K={curve.K}")


def _require_flat(curve: ProfileCurve, check: str) -> None:
    if curve.K != 0:
        raise CurvatureError(f"{check} holds for K = 0 only, got K={curve.K}")


# ----------------------------
# Checks
# ----------------------------
def check_sharp_inequality(
    curve: ProfileCurve,
    avr: float,
    tol: float = 1e-10,
    volumes: Optional[Sequence[float]] = None,
) -> VerificationReport:
    """
    I(v) >= N omega_N^(1/N) AVR^(1/N) v^((N-1)/N) with relative tolerance.
    Volumes where equality holds within tol are recorded and raise the rigidity flag.
    """
    _require_flat(curve, "check_sharp_inequality")
    vols, vals = _values(curve, volumes)
    bound = sharp_lower_bound(curve.N, avr, vols)
    scale = np.maximum(1.0, bound)
    deficits = (bound - vals) / scale
    equal = np.abs(deficits) <= tol
    return report_from_deficits(
        "sharp_inequality",
        vols,
        deficits,
        tol,
        details={
            "avr": avr,
            "equality_volumes": vols[equal].tolist(),
            "rigid": bool(np.any(equal)),
        },
    )


def rigidity_scan(
    curve: ProfileCurve,
    avr: float,
    tol: float = 1e-8,
    volumes: Optional[Sequence[float]] = None,
) -> List[float]:
    """Volumes where the profile meets the cone value N (omega_N AVR)^(1/N) v^((N-1)/N)."""
    _require_flat(curve, "rigidity_scan")
    vols, vals = _values(curve, volumes)
    bound = sharp_lower_bound(curve.N, avr, vols)
    hit = np.abs(vals - bound) <= tol * np.maximum(1.0, bound)
    return vols[hit].tolist()


def _d1_d2(v: np.ndarray, f: np.ndarray, stride: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Three-point nonuniform first and second differences at nodes stride..n-1-stride."""
    i = np.arange(stride, v.size - stride)
    h1 = v[i] - v[i - stride]
    h2 = v[i + stride] - v[i]
    fm, f0, fp = f[i - stride], f[i], f[i + stride]
    d1 = (-h2 / (h1 * (h1 + h2))) * fm + ((h2 - h1) / (h1 * h2)) * f0 + (h1 / (h2 * (h1 + h2))) * fp
    d2 = 2.0 * (h2 * fm - (h1 + h2) * f0 + h1 * fp) / (h1 * h2 * (h1 + h2))
    return i, d1, d2


def viscosity_residuals(grid: Sequence[float], values: Sequence[float], N: float, K: float, stride: int = 1):
    """
    Node indices and the residuals of both differential inequalities,
    rhs - lhs for -I''I >= K + I'^2/(N-1) and -psi'' >= KN/(N-1) psi^((2-N)/N),
    together with the magnitude of the terms compared.
    """
    v = np.asarray(grid, dtype=float)
    I = np.asarray(values, dtype=float)
    psi = I ** (N / (N - 1))
    idx, d1, d2 = _d1_d2(v, I, stride)
    lhs = -d2 * I[idx]
    rhs = K + d1 ** 2 / (N - 1)
    _, _, p2 = _d1_d2(v, psi, stride)
    with np.errstate(divide="ignore"):
        plhs = -p2
        prhs = K * N / (N - 1) * psi[idx] ** ((2 - N) / N)
    floor_i = (I[idx] / v[idx]) ** 2
    floor_p = psi[idx] / v[idx] ** 2
    scale_i = np.maximum.reduce([np.abs(lhs), np.abs(rhs), floor_i])
    scale_p = np.maximum.reduce([np.abs(plhs), np.abs(prhs), floor_p])
    return idx, rhs - lhs, prhs - plhs, scale_i, scale_p


def check_viscosity_inequality(
    curve: ProfileCurve,
    tol: float = 1e-6,
    volumes: Optional[Sequence[float]] = None,
) -> VerificationReport:
    """
    Finite-difference form of -I''I >= K + I'^2/(N-1) and of the psi-form.

    Deficits are relative to the size of the compared terms. Each node gets a
    truncation allowance of twice the Richardson estimate |r_1 - r_2|/3 from the
    stride-1 and stride-2 residuals, so nodes 2..n-3 are checked.
    """
    vols, vals = _values(curve, volumes)
    if vols.size < 5:
        raise InputError(f"Viscosity check needs at least 5 grid points, got {vols.size}")
    N, K = curve.N, curve.K
    idx1, ri1, rp1, si1, sp1 = viscosity_residuals(vols, vals, N, K, stride=1)
    idx2, ri2, rp2, _, _ = viscosity_residuals(vols, vals, N, K, stride=2)
    inner = slice(1, idx1.size - 1)  # stride-1 nodes that also have a stride-2 residual
    nodes = idx1[inner]
    est_i = np.abs(ri1[inner] - ri2) / 3.0
    est_p = np.abs(rp1[inner] - rp2) / 3.0
    deficit_i = (ri1[inner] - 2.0 * est_i) / si1[inner]
    deficit_p = (rp1[inner] - 2.0 * est_p) / sp1[inner]

    rep_i = report_from_deficits("viscosity_I", vols[nodes], deficit_i, tol)
    rep_p = report_from_deficits("viscosity_psi", vols[nodes], deficit_p, tol)
    worst = rep_i if (rep_i.worst_violation - rep_i.tol) >= (rep_p.worst_violation - rep_p.tol) else rep_p

    nonsmooth = _oscillates(_d1_d2(vols, vals, 1)[2], si1 / np.maximum(vals[idx1], 1e-300), tol)
    if nonsmooth:
        logger.warning("Second differences oscillate beyond 10x tolerance; viscosity check is not conclusive")
    return VerificationReport(
        check="viscosity_inequality",
        passed=rep_i.passed and rep_p.passed,
        worst_violation=worst.worst_violation,
        at=worst.at,
        tol=tol,
        details={
            "I_form_worst": rep_i.worst_violation,
            "I_form_at": rep_i.at,
            "psi_form_worst": rep_p.worst_violation,
            "psi_form_at": rep_p.at,
            "nonsmooth": nonsmooth,
        },
    )


def _oscillates(d2: np.ndarray, scale: np.ndarray, tol: float) -> bool:
    if d2.size < 3:
        return False
    jumps = np.diff(d2)
    big = np.abs(jumps) > 10 * tol * scale[1:]
    alternating = (jumps[:-1] * jumps[1:] < 0) & big[:-1] & big[1:]
    return int(np.count_nonzero(alternating)) > 2


def check_concavity_and_monotonicity(
    curve: ProfileCurve,
    tol: float = 1e-9,
    volumes: Optional[Sequence[float]] = None,
) -> VerificationReport:
    """
    psi = I^(N/(N-1)) concave, I(v)/v^((N-1)/N) nonincreasing, and for infinite
    total mass I nondecreasing.
    """
    _require_nonnegative_curvature(curve, "check_concavity_and_monotonicity")
    vols, vals = _values(curve, volumes)
    if vols.size < 3:
        raise InputError(f"Concavity check needs at least 3 grid points, got {vols.size}")
    N = curve.N
    psi = vals ** (N / (N - 1))

    h1 = vols[1:-1] - vols[:-2]
    h2 = vols[2:] - vols[1:-1]
    chord = (h2 * psi[:-2] + h1 * psi[2:]) / (h1 + h2)
    concavity = (chord - psi[1:-1]) / np.maximum(1.0, np.abs(psi[1:-1]))

    ratio = vals / vols ** ((N - 1) / N)
    ratio_def = np.diff(ratio) / np.maximum(1.0, ratio[:-1])

    locations = [vols[1:-1], vols[1:]]
    deficits = [concavity, ratio_def]
    details: Dict[str, Any] = {
        "concavity_worst": float(np.max(concavity)),
        "ratio_worst": float(np.max(ratio_def)),
    }
    if math.isinf(curve.total_mass):
        incr = -np.diff(vals) / np.maximum(1.0, vals[:-1])
        locations.append(vols[1:])
        deficits.append(incr)
        details["nondecreasing_worst"] = float(np.max(incr))
    return report_from_deficits(
        "concavity_monotonicity",
        np.concatenate(locations),
        np.concatenate(deficits),
        tol,
        details=details,
    )


def check_strict_monotonicity(
    curve: ProfileCurve,
    avr: float,
    margin: float = 0.0,
    volumes: Optional[Sequence[float]] = None,
) -> VerificationReport:
    """
    With AVR > 0 and infinite mass, I is strictly increasing and strictly concave:
    every step and every chord deficit must be below -margin.
    """
    _require_flat(curve, "check_strict_monotonicity")
    if not avr > 0 or not math.isinf(curve.total_mass):
        raise InputError("Strict monotonicity needs AVR > 0 and infinite total mass")
    vols, vals = _values(curve, volumes)
    h1 = vols[1:-1] - vols[:-2]
    h2 = vols[2:] - vols[1:-1]
    chord = (h2 * vals[:-2] + h1 * vals[2:]) / (h1 + h2)
    increase = vals[:-1] - vals[1:]
    concave = chord - vals[1:-1]
    return report_from_deficits(
        "strict_monotonicity",
        np.concatenate([vols[1:], vols[1:-1]]),
        np.concatenate([increase, concave]),
        -margin if margin > 0 else -np.finfo(float).tiny,
        details={"avr": avr},
    )


def check_subadditivity(
    curve: ProfileCurve,
    tol: float = 1e-9,
    volumes: Optional[Sequence[float]] = None,
) -> VerificationReport:
    """I(a+b) <= I(a) + I(b) on grid pairs whose sum stays in range; `strict` if always < ."""
    vols, vals = _values(curve, volumes)
    a, b = np.meshgrid(np.arange(vols.size), np.arange(vols.size), indexing="ij")
    keep = (a <= b) & (vols[a] + vols[b] <= curve.v_max)
    a, b = a[keep], b[keep]
    total = vols[a] + vols[b]
    lhs = curve.evaluate(total)
    rhs = vals[a] + vals[b]
    deficits = (lhs - rhs) / np.maximum(1.0, rhs)
    rep = report_from_deficits("subadditivity", total, deficits, tol, details={"pairs": int(total.size)})
    rep.details["strict"] = bool(total.size and np.all(deficits < 0))
    return rep


def _aitken(s: Sequence[float]) -> float:
    s0, s1, s2 = (float(x) for x in s)
    denom = s2 - 2 * s1 + s0
    if abs(denom) <= 1e-14 * max(abs(s0), abs(s1), abs(s2), 1e-300):
        return s2
    est = s2 - (s2 - s1) ** 2 / denom
    if abs(est - s2) > 10 * abs(s2 - s1):
        return s2
    return est


def asymptotics(curve: ProfileCurve, volumes: Optional[Sequence[float]] = None) -> Asymptotics:
    """
    Extrapolated limits of I/v^((N-1)/N) at 0 and infinity and of v^(1/N) I'(v)
    at infinity; the large-volume entries are None for finite total mass.
    """
    N = curve.N
    e = (N - 1) / N
    infinite = math.isinf(curve.total_mass)
    if curve.is_closed_form and volumes is None:
        small_v = np.array([1e-6, 1e-7, 1e-8])
        small = _aitken(curve.evaluate(small_v) / small_v ** e)
        if not infinite:
            return Asymptotics(small)
        big_v = np.array([1e6, 1e7, 1e8])
        large = _aitken(curve.evaluate(big_v) / big_v ** e)
        dv = 1e-5 * big_v
        deriv = (curve.evaluate(big_v + dv) - curve.evaluate(big_v - dv)) / (2 * dv)
        return Asymptotics(small, large, _aitken(big_v ** (1 / N) * deriv))

    vols, vals = _values(curve, volumes)
    if vols[-1] / vols[0] < 100 or vols.size < 5:
        raise InputError(
            f"Asymptotics need a grid spanning two decades, got [{vols[0]}, {vols[-1]}] with {vols.size} points"
        )
    ratio = vals / vols ** e
    lo = [min(int(np.searchsorted(vols, vols[0] * f)), vols.size - 1) for f in (100.0, 10.0)] + [0]
    small = _aitken(ratio[lo])
    if not infinite:
        return Asymptotics(small)

    hi = [int(np.searchsorted(vols, vols[-1] / f)) for f in (100.0, 10.0)] + [vols.size - 1]
    large = _aitken(ratio[hi])

    i1, d1, _ = _d1_d2(vols, vals, 1)
    i2, d2s, _ = _d1_d2(vols, vals, 2)
    # Richardson combination of stride-1 and stride-2 derivatives at shared nodes
    d1_shared = d1[1:-1]
    rich = (4 * d1_shared - d2s) / 3
    nodes = i2
    picks = [int(np.clip(np.searchsorted(vols[nodes], vols[k]), 0, nodes.size - 1)) for k in hi]
    deriv = _aitken(vols[nodes][picks] ** (1 / N) * rich[picks])
    return Asymptotics(small, large, deriv)


# ----------------------------
# Disjoint unions
# ----------------------------
def _common_dimension(parts: Sequence[ProfileCurve]) -> None:
    if not parts:
        raise InputError("Need at least one part")
    dims = {p.N for p in parts}
    if len(dims) != 1:
        raise InputError(f"Dimension mismatch between parts: {sorted(dims)}")


def _part_table(curve: ProfileCurve, x: np.ndarray) -> np.ndarray:
    out = curve._raw(x)
    return np.where(np.isnan(out), np.inf, out)


def generalized_profile(parts: Sequence[ProfileCurve], v: float, split_grid: int = 200) -> SplitResult:
    """
    inf sum_j I_j(v_j) over allocations sum v_j = v.

    Parts are merged one at a time by an infimal convolution on the lattice
    m v / split_grid (exhaustive over the lattice), then each pair of parts is
    refined with a bounded scalar minimisation.
    """
    _common_dimension(parts)
    if not v > 0:
        raise InputError(f"Volume must be positive, got {v}")
    if not 1 <= split_grid <= MAX_SPLIT_GRID:
        raise InputError(f"split_grid must lie in [1, {MAX_SPLIT_GRID}], got {split_grid}")
    if len(parts) == 1:
        return SplitResult(float(parts[0].evaluate(v)), [(0, float(v))])
    if sum(p.total_mass for p in parts) < v:
        raise DomainError(f"Volume {v} exceeds the total mass of the union")

    G = int(split_grid)
    x = v * np.arange(G + 1) / G
    best = _part_table(parts[0], x)
    choices: List[np.ndarray] = []
    for part in parts[1:]:
        best, k_best = _infimal_convolution(best, _part_table(part, x))
        choices.append(k_best)
    if not np.isfinite(best[G]):
        raise DomainError(f"No feasible allocation of volume {v} on split_grid={G}")

    alloc = np.zeros(len(parts))
    rest = G
    for j in range(len(parts) - 1, 0, -1):
        k = int(choices[j - 1][rest])
        alloc[j] = x[k]
        rest -= k
    alloc[0] = x[rest]
    alloc = _refine(parts, alloc, v)
    value = float(sum(float(_part_table(p, np.array([a]))[0]) for p, a in zip(parts, alloc)))
    logger.debug("generalized_profile v=%s allocation=%s value=%s", v, alloc, value)
    return SplitResult(value, [(j, float(a)) for j, a in enumerate(alloc)])


def _infimal_convolution(best: np.ndarray, f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """out[m] = min_k best[m - k] + f[k] with its argmin, one band of rows at a time."""
    size = best.size
    out = np.empty(size)
    arg = np.empty(size, dtype=np.intp)
    k = np.arange(size)
    band = max(1, BAND_CELLS // size)
    for start in range(0, size, band):
        rows = np.arange(start, min(start + band, size))
        diff = rows[:, None] - k[None, :]
        # cand[m, k] = best[m - k] + f[k] for k <= m
        cand = np.where(diff >= 0, best[np.clip(diff, 0, size - 1)] + f[None, :], np.inf)
        j = np.argmin(cand, axis=1)
        arg[rows] = j
        out[rows] = cand[np.arange(rows.size), j]
    return out, arg


def _refine(parts: Sequence[ProfileCurve], alloc: np.ndarray, v: float, sweeps: int = 3) -> np.ndarray:
    def cost(j: int, a: float) -> float:
        return float(_part_table(parts[j], np.array([a]))[0])

    alloc = alloc.copy()
    for _ in range(sweeps):
        improved = False
        for i in range(len(parts)):
            for j in range(i + 1, len(parts)):
                s = alloc[i] + alloc[j]
                if s <= 0:
                    continue
                lo = max(0.0, s - parts[j].v_max)
                hi = min(s, parts[i].v_max)
                if hi <= lo:
                    continue
                current = cost(i, alloc[i]) + cost(j, alloc[j])
                g = lambda a: cost(i, a) + cost(j, s - a)
                res = optimize.minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * v})
                candidates = [(g(lo), lo), (g(hi), hi), (float(res.fun), float(res.x))]
                val, a = min(candidates)
                if val < current - 1e-15 * max(1.0, abs(current)):
                    alloc[i], alloc[j] = a, s - a
                    improved = True
        if not improved:
            break
    # exact conservation of the requested volume
    alloc[np.argmax(alloc)] += v - alloc.sum()
    return alloc


# ----------------------------
# Normalized profiles
# ----------------------------
def normalized_profile_ratio(
    curve_a: ProfileCurve,
    curve_b: ProfileCurve,
    margin: float = 0.01,
    samples: int = 200,
) -> float:
    """sup over normalized volumes s in [margin, 1 - margin] of |I_a(M_a s)/I_b(M_b s) - 1|."""
    ma, mb = curve_a.total_mass, curve_b.total_mass
    if math.isinf(ma) or math.isinf(mb):
        raise InputError("Normalized profiles need finite total mass")
    if not 0 <= margin < 0.5:
        raise InputError(f"margin must lie in [0, 0.5), got {margin}")
    if not curve_b.is_closed_form:
        s = curve_b.grid / mb
    elif not curve_a.is_closed_form:
        s = curve_a.grid / ma
    else:
        s = np.linspace(margin, 1 - margin, samples)
    s = s[(s >= margin) & (s <= 1 - margin)]
    s = s[(s * ma <= curve_a.v_max) & (s * ma >= 0)]
    ib = curve_b.evaluate(s * mb)
    keep = ib > 0
    if not np.any(keep):
        raise InputError("No normalized volumes left after applying the margin")
    ia = curve_a.evaluate(s[keep] * ma)
    return float(np.max(np.abs(ia / ib[keep] - 1.0)))


__all__ = [
    "ProfileCurve",
    "SplitResult",
    "Asymptotics",
    "cone_profile",
    "truncate",
    "euclidean_profile",
    "sharp_lower_bound",
    "space_form_profile",
    "half_line_profile",
    "union_profile",
    "profile_for_space",
    "check_sharp_inequality",
    "rigidity_scan",
    "viscosity_residuals",
    "check_viscosity_inequality",
    "check_concavity_and_monotonicity",
    "check_strict_monotonicity",
    "check_subadditivity",
    "asymptotics",
    "generalized_profile",
    "normalized_profile_ratio",
]
