"""
Model comparison functions of constant-curvature geometry.

Conventions: `K` is always the Ricci-type lower bound passed by the caller and
`k` the sectional parameter of the trigonometric pair (cos_k, sin_k). Where a
formula uses K/(N-1) the call site performs the rescaling.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from errors import DomainError, InputError
from reports import VerificationReport, report_from_deficits

logger = logging.getLogger(__name__)

# |K| r^2 below this switches sn / cos_k / sin_k to their Taylor series.
SERIES_THRESHOLD = 1e-6
QUAD_EPS = 1e-12


@dataclass(frozen=True)
class CurvatureParams:
    K: float
    N: float
    k: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.N >= 1:
            raise InputError(f"Dimension N must be >= 1, got {self.N}")
        if self.k is None:
            object.__setattr__(self, "k", self.K / (self.N - 1) if self.N > 1 else self.K)


@dataclass(frozen=True)
class ComparisonValue:
    value: float
    derivative: Optional[float] = None


def _scalar(x):
    arr = np.asarray(x, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def _trig_pair(k: float, r):
    r = np.asarray(r, dtype=float)
    x = k * r * r
    with np.errstate(over="ignore", invalid="ignore"):
        if k > 0:
            q = math.sqrt(k)
            c = np.cos(q * r)
            s = np.sin(q * r) / q
        elif k < 0:
            q = math.sqrt(-k)
            c = np.cosh(q * r)
            s = np.sinh(q * r) / q
        else:
            c = np.ones_like(r)
            s = r.copy()
    small = np.abs(x) < SERIES_THRESHOLD
    if np.any(small):
        c = np.where(small, 1.0 - x / 2.0 + x * x / 24.0, c)
        s = np.where(small, r * (1.0 - x / 6.0 + x * x / 120.0), s)
    return c, s


def sn(K: float, r):
    """Generalized sine: sinh for K<0, identity for K=0, sine for K>0."""
    if np.any(np.asarray(r) < 0):
        raise DomainError(f"sn requires r >= 0, got {r!r}")
    _, s = _trig_pair(float(K), r)
    return _scalar(s)


def cos_sin_k(k: float, r) -> Tuple[float, float]:
    c, s = _trig_pair(float(k), r)
    return _scalar(c), _scalar(s)


def s_lambda(k: float, lam: float, r) -> ComparisonValue:
    """s_{k,lam} = cos_k - lam sin_k together with its r-derivative."""
    c, s = _trig_pair(float(k), r)
    value = c - lam * s
    # cos_k' = -k sin_k, sin_k' = cos_k
    derivative = -k * s - lam * c
    return ComparisonValue(_scalar(value), _scalar(derivative))


def jacobian_support(H: float, K: float, N: float) -> float:
    """First zero of cos_k + H/(N-1) sin_k with k = K/(N-1); +inf when it never vanishes."""
    if not N > 1:
        raise InputError(f"jacobian requires N > 1, got {N}")
    k = K / (N - 1)
    h = H / (N - 1)
    if k > 0:
        q = math.sqrt(k)
        beta = h / q
        if beta > 0:
            x0 = math.pi - math.atan(1.0 / beta)
        elif beta < 0:
            x0 = math.atan(-1.0 / beta)
        else:
            x0 = math.pi / 2
        return x0 / q
    if k < 0:
        q = math.sqrt(-k)
        beta = h / q
        if beta < -1:
            return math.atanh(-1.0 / beta) / q
        return math.inf
    if h < 0:
        return -1.0 / h
    return math.inf


def jacobian(H: float, K: float, N: float, r):
    """J_{H,K,N}(r) = (cos_k + H/(N-1) sin_k)_+^(N-1), k = K/(N-1), cut at the first zero."""
    if not N > 1:
        raise InputError(f"jacobian requires N > 1, got {N}")
    r = np.asarray(r, dtype=float)
    c, s = _trig_pair(K / (N - 1), r)
    bracket = np.maximum(c + H / (N - 1) * s, 0.0)
    bracket = np.where(r >= jacobian_support(H, K, N), 0.0, bracket)
    return _scalar(bracket ** (N - 1))


def unit_ball_volume(N: float) -> float:
    """omega_N = pi^(N/2) / Gamma(N/2 + 1), valid for real N >= 1."""
    if not N >= 1:
        raise InputError(f"Dimension N must be >= 1, got {N}")
    if N < 150:
        return float(math.pi ** (N / 2) / special.gamma(N / 2 + 1))
    return float(math.exp(N / 2 * math.log(math.pi) - special.gammaln(N / 2 + 1)))


def diameter(K: float) -> float:
    return math.pi / math.sqrt(K) if K > 0 else math.inf


def _check_radius(K: float, r: float) -> None:
    if r < 0:
        raise DomainError(f"Radius must be >= 0, got {r}")
    if K > 0 and r > diameter(K) * (1 + 1e-14):
        raise DomainError(f"Radius {r} exceeds the diameter pi/sqrt(K) = {diameter(K)} for K={K}")


def model_ball_volume(N: float, K: float, r: float) -> float:
    """v(N,K,r) = int_0^r N omega_N sn_K(s)^(N-1) ds."""
    _check_radius(K, r)
    omega = unit_ball_volume(N)
    if r == 0:
        return 0.0
    if K == 0:
        return omega * r ** N
    r = min(r, diameter(K))
    value, err = integrate.quad(
        lambda s: max(sn(K, s), 0.0) ** (N - 1), 0.0, r,
        epsabs=QUAD_EPS, epsrel=QUAD_EPS, limit=200,
    )
    logger.debug("v(N=%s,K=%s,r=%s) quad=%r err=%.3g", N, K, r, value, err)
    return N * omega * value


def model_sphere_area(N: float, K: float, r: float) -> float:
    """s(N,K,r) = N omega_N sn_K(r)^(N-1), the r-derivative of v(N,K,r)."""
    _check_radius(K, r)
    return N * unit_ball_volume(N) * max(sn(K, min(r, diameter(K))), 0.0) ** (N - 1)


def _as_pairs(samples: Iterable[Sequence[float]]) -> Tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise InputError("Volume samples must be at least two (r, volume) pairs")
    return arr[:, 0], arr[:, 1]


def bishop_gromov_report(
    volume_samples: Iterable[Sequence[float]],
    N: float,
    K: float,
    perimeter_samples: Optional[Sequence[float]] = None,
    tol: float = 1e-9,
) -> VerificationReport:
    """
    Check that r -> vol(r)/v(N,K,r) is nonincreasing on the samples, and when
    perimeters are given that Per(r)/s(N,K,r) <= vol(r)/v(N,K,r).

    The local tolerance is max(tol, 1e-6 * ratio).
    """
    radii, vols = _as_pairs(volume_samples)
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise InputError("Radii of volume samples must be positive and strictly increasing")
    if np.any(np.diff(vols) < 0):
        raise InputError("Volumes of volume samples must be nondecreasing")

    model = np.array([model_ball_volume(N, K, r) for r in radii])
    ratio = vols / model
    locations = list(radii[1:])
    deficits = list(np.diff(ratio))
    tols = list(np.maximum(tol, 1e-6 * ratio[:-1]))

    if perimeter_samples is not None:
        per = np.asarray(perimeter_samples, dtype=float)
        if per.shape != radii.shape:
            raise InputError(f"Expected {len(radii)} perimeter samples, got {per.size}")
        per_ratio = per / np.array([model_sphere_area(N, K, r) for r in radii])
        locations += list(radii)
        deficits += list(per_ratio - ratio)
        tols += list(np.maximum(tol, 1e-6 * ratio))

    return report_from_deficits(
        "bishop_gromov",
        locations,
        deficits,
        np.asarray(tols),
        details={
            "min_ratio": float(ratio.min()),
            "max_ratio": float(ratio.max()),
            "perimeter_checked": perimeter_samples is not None,
        },
    )


__all__ = [
    "CurvatureParams",
    "ComparisonValue",
    "sn",
    "cos_sin_k",
    "s_lambda",
    "jacobian",
    "jacobian_support",
    "unit_ball_volume",
    "diameter",
    "model_ball_volume",
    "model_sphere_area",
    "bishop_gromov_report",
]
