"""
Constructive half of isoperimetric epsilon-regularity, K = 0 only:
a profile bound I(v)/v^((N-1)/N) >= N omega_N^(1/N) - delta on volumes up to v
gives vol(B_r)/(omega_N r^N) >= (1 - delta/(N omega_N^(1/N)))^N for r below
C(0,N) v^(1/N), C(0,N) = omega_N^(1/N)/2.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import integrate

from comparison import unit_ball_volume
from errors import ConvergenceError, CurvatureError, DomainError, InputError
from isoprofile import cone_profile
from reports import VerificationReport, report_from_deficits

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpsRegResult:
    delta: float
    N: float
    radius_cap: float
    ratio_bound: float
    integrated_ratio: Optional[float] = None

    @property
    def epsilon(self) -> float:
        return 1.0 - self.ratio_bound


def euclidean_constant(N: float) -> float:
    """N omega_N^(1/N), the profile constant of R^N."""
    return N * unit_ball_volume(N) ** (1 / N)


def gronwall_closed_form(c: float, exponent: float, r: float) -> float:
    """Maximal solution of F' = c F^exponent, F(0) = 0: ((1-exponent) c r)^(1/(1-exponent))."""
    return ((1 - exponent) * c * r) ** (1 / (1 - exponent))


def gronwall_integrate(c: float, exponent: float, r: float, steps: int = 64) -> float:
    """
    Integrate F' = c F^exponent along the positive branch from F(0) = 0.
    The start r * 1e-8 is seeded by the self-similar solution; log F is integrated.
    """
    if not c > 0:
        raise InputError(f"c must be positive, got {c}")
    if not 0 < exponent < 1:
        raise InputError(f"exponent must lie in (0, 1), got {exponent}")
    if r < 0:
        raise InputError(f"r must be >= 0, got {r}")
    if steps < 1:
        raise InputError(f"steps must be >= 1, got {steps}")
    if r == 0:
        return 0.0
    r0 = r * 1e-8
    y0 = math.log(gronwall_closed_form(c, exponent, r0))
    sol = integrate.solve_ivp(
        lambda s, y: [c * math.exp((exponent - 1) * y[0])],
        (r0, r),
        [y0],
        method="DOP853",
        rtol=1e-13,
        atol=1e-13,
        max_step=(r - r0) / steps,
    )
    if not sol.success:
        raise ConvergenceError(f"Gronwall integration failed: {sol.message}")
    logger.debug("gronwall c=%s a=%s r=%s: %d evaluations", c, exponent, r, sol.nfev)
    return math.exp(sol.y[0, -1])


def radius_cap(N: float, v: float) -> float:
    return 0.5 * unit_ball_volume(N) ** (1 / N) * v ** (1 / N)


def volume_lower_bound_from_profile(delta: float, N: float, v: float, r: float, K: float = 0.0) -> EpsRegResult:
    if K != 0:
        raise CurvatureError(f"Only K = 0 has explicit constants, got K={K}")
    if not N >= 2:
        raise InputError(f"N must be >= 2, got {N}")
    if delta < 0:
        raise InputError(f"delta must be >= 0, got {delta}")
    A = euclidean_constant(N)
    if delta >= A:
        raise DomainError(f"delta={delta} must be below N omega_N^(1/N) = {A}")
    if not v > 0 or not r > 0:
        raise InputError("v and r must be positive")
    cap = radius_cap(N, v)
    if r > cap:
        raise DomainError(f"Radius {r} exceeds the admissible cap {cap} for volume {v}")
    ratio = (1 - delta / A) ** N
    integrated = gronwall_integrate(A - delta, (N - 1) / N, r) / (unit_ball_volume(N) * r ** N)
    return EpsRegResult(delta=delta, N=N, radius_cap=cap, ratio_bound=ratio, integrated_ratio=integrated)


def delta_for_epsilon(epsilon: float, N: float) -> float:
    """delta = N omega_N^(1/N) (1 - (1-epsilon)^(1/N))."""
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not N >= 2:
        raise InputError(f"N must be >= 2, got {N}")
    return euclidean_constant(N) * (1 - (1 - epsilon) ** (1 / N))


def cone_consistency_check(theta: float, N: float, tol: float = 1e-12) -> VerificationReport:
    """
    On a cone the tip volume ratio is theta and the small-volume profile constant
    is N (omega_N theta)^(1/N); with delta = 1 - theta the profile deficit must be
    N omega_N^(1/N) (1 - (1-delta)^(1/N)) and (constant / N omega_N^(1/N))^N = theta.
    """
    A = euclidean_constant(N)
    constant = cone_profile(theta, N).constant
    delta = 1 - theta
    profile_deficit = A - constant
    predicted = A * (1 - (1 - delta) ** (1 / N))
    floor = (constant / A) ** N
    deficits = [abs(profile_deficit - predicted) / A, abs(floor - theta)]
    return report_from_deficits(
        "cone_consistency",
        [theta, theta],
        deficits,
        tol,
        details={"profile_deficit": profile_deficit, "volume_floor": floor, "delta": delta},
    )


def epsilon_table(
    N: float,
    epsilons: Optional[Sequence[float]] = None,
    deltas: Optional[Sequence[float]] = None,
) -> pd.DataFrame:
    """delta <-> epsilon table with the radius constant C(0,N)."""
    rows = []
    for eps in epsilons or []:
        d = delta_for_epsilon(eps, N)
        rows.append({"epsilon": eps, "delta": d, "ratio_bound": (1 - d / euclidean_constant(N)) ** N})
    for d in deltas or []:
        res = volume_lower_bound_from_profile(d, N, 1.0, radius_cap(N, 1.0))
        rows.append({"epsilon": res.epsilon, "delta": d, "ratio_bound": res.ratio_bound})
    df = pd.DataFrame(rows, columns=["epsilon", "delta", "ratio_bound"])
    df.insert(0, "N", float(N))
    df["radius_constant"] = radius_cap(N, 1.0)
    return df


__all__ = [
    "EpsRegResult",
    "euclidean_constant",
    "gronwall_closed_form",
    "gronwall_integrate",
    "radius_cap",
    "volume_lower_bound_from_profile",
    "delta_for_epsilon",
    "cone_consistency_check",
    "epsilon_table",
]
