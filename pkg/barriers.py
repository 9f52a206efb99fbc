"""
Mean-curvature barrier certificates of isoperimetric sets.

Certificates are data: (c, perimeter, volume, AVR) are checked against the
barrier inequalities, c is never derived from geometry. The barrier interval
is the K = 0 one; the equidistant (Heintze-Karcher) bounds accept any K.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import integrate

from comparison import jacobian, jacobian_support, unit_ball_volume
from errors import InconsistentCertificateError, InputError
from reports import VerificationReport, report_from_deficits

logger = logging.getLogger(__name__)

SIDES = ("outward", "inward")


@dataclass(frozen=True)
class BarrierCertificate:
    c: float
    N: float
    K: float
    perimeter: float
    volume: float
    avr: Optional[float]
    c_interval: Tuple[float, float]
    inscribed_radius_bound: float
    rigid: bool

    @property
    def c_lo(self) -> float:
        return self.c_interval[0]

    @property
    def c_hi(self) -> float:
        return self.c_interval[1]

    def to_json(self) -> Dict[str, Any]:
        out = asdict(self)
        out.pop("c_interval")
        out["c_lo"], out["c_hi"] = self.c_interval
        return out


def _positive(name: str, x: float) -> None:
    if not x > 0:
        raise InputError(f"{name} must be positive, got {x}")


def barrier_bounds(
    N: float,
    perimeter: float,
    volume: float,
    avr: Optional[float] = None,
    c: Optional[float] = None,
    tol: float = 1e-8,
) -> BarrierCertificate:
    """
    c_hi = (N-1)/N * P/V and, with AVR, c_lo = (N-1) (N omega_N AVR / P)^(1/(N-1)).
    Without AVR only c >= 0 is known. When `c` is omitted the certificate carries c_lo.
    """
    if not N >= 2:
        raise InputError(f"Barrier bounds need N >= 2, got {N}")
    _positive("perimeter", perimeter)
    _positive("volume", volume)
    c_hi = (N - 1) / N * perimeter / volume
    if avr is None:
        c_lo = 0.0
    else:
        if avr < 0:
            raise InputError(f"AVR must be nonnegative, got {avr}")
        c_lo = (N - 1) * (N * unit_ball_volume(N) * avr / perimeter) ** (1 / (N - 1))
    rigid = avr is not None and abs(c_hi - c_lo) <= tol * max(1.0, c_hi)
    if c is None:
        c = c_lo
    radius = (N - 1) / c if c > 0 else math.inf
    if avr is not None and c_lo > c_hi * (1 + tol):
        logger.warning("Barrier interval is empty: c_lo=%s > c_hi=%s", c_lo, c_hi)
    return BarrierCertificate(
        c=float(c),
        N=float(N),
        K=0.0,
        perimeter=float(perimeter),
        volume=float(volume),
        avr=None if avr is None else float(avr),
        c_interval=(float(c_lo), float(c_hi)),
        inscribed_radius_bound=float(radius),
        rigid=bool(rigid),
    )


def cone_ball_certificate(theta: float, N: float, R: float, tol: float = 1e-8) -> BarrierCertificate:
    """Certificate of the ball of radius R about the tip of a cone of opening theta."""
    _positive("R", R)
    omega = unit_ball_volume(N)
    return barrier_bounds(N, N * theta * omega * R ** (N - 1), theta * omega * R ** N, avr=theta, tol=tol)


def inscribed_radius_bound(N: float, c: float) -> float:
    """sup_E d(x, X \\ E) <= (N-1)/c."""
    if not c > 0:
        raise InputError(f"Inscribed radius bound needs c > 0, got {c}")
    return (N - 1) / c


def _signed(c: float, side: str) -> float:
    side = str(side).strip().lower()
    if side not in SIDES:
        raise InputError(f"side must be one of {SIDES}, got {side!r}")
    return c if side == "outward" else -c


def equidistant_perimeter_bound(perE: float, c: float, K: float, N: float, t: float, side: str = "outward") -> float:
    """Per of the t-equidistant set <= J_{+-c,K,N}(t) Per(E)."""
    _positive("perE", perE)
    if t < 0:
        raise InputError(f"t must be >= 0, got {t}")
    return perE * jacobian(_signed(c, side), K, N, t)


def equidistant_volume_bound(perE: float, c: float, K: float, N: float, t: float, side: str = "outward") -> float:
    """Volume of the t-equidistant shell <= Per(E) int_0^t J_{+-c,K,N}(r) dr."""
    _positive("perE", perE)
    if t < 0:
        raise InputError(f"t must be >= 0, got {t}")
    H = _signed(c, side)
    t = min(t, jacobian_support(H, K, N))
    if t == 0:
        return 0.0
    if K == 0:
        if H == 0:
            return perE * t
        return perE * (N - 1) / (N * H) * ((1 + H * t / (N - 1)) ** N - 1)
    value, err = integrate.quad(lambda r: jacobian(H, K, N, r), 0.0, t, epsabs=1e-14, epsrel=1e-12, limit=200)
    logger.debug("equidistant volume quad H=%s K=%s N=%s t=%s: %r (err %.2g)", H, K, N, t, value, err)
    return perE * value


def barrier_rigidity_check(cert: BarrierCertificate, tol: float = 1e-8) -> bool:
    """
    True iff c saturates c_hi (the set is then a ball). Raises when c < 0 or
    c lies outside [c_lo - tol, c_hi + tol].
    """
    scale = max(1.0, cert.c_hi)
    if cert.c < 0:
        raise InconsistentCertificateError(f"Barrier c={cert.c} is negative")
    if cert.c > cert.c_hi + tol * scale:
        raise InconsistentCertificateError(f"Barrier c={cert.c} exceeds (N-1)/N * P/V = {cert.c_hi}")
    if cert.avr is not None and cert.c < cert.c_lo - tol * scale:
        raise InconsistentCertificateError(
            f"Barrier c={cert.c} is below the AVR bound {cert.c_lo} (AVR={cert.avr})"
        )
    return abs(cert.c - cert.c_hi) <= tol * scale


def barrier_isoperimetric_check(cert: BarrierCertificate, tol: float = 1e-8, samples: int = 11) -> VerificationReport:
    """
    P >= (N V c/(N-1))^((N-1)/N) * (AVR omega_N N (N-1)^(N-1) / c^(N-1))^(1/N)
    for c across the certificate interval and at cert.c.
    """
    if cert.avr is None:
        raise InputError("The isoperimetric step needs the AVR of the certificate")
    N, P, V = cert.N, cert.perimeter, cert.volume
    lo, hi = cert.c_interval
    cs = np.unique(np.concatenate([np.linspace(lo, hi, samples), [cert.c]]))
    cs = cs[cs > 0]
    first = (N * V * cs / (N - 1)) ** ((N - 1) / N)
    second = (cert.avr * unit_ball_volume(N) * N * (N - 1) ** (N - 1) / cs ** (N - 1)) ** (1 / N)
    deficits = (first * second - P) / max(1.0, P)
    return report_from_deficits("barrier_isoperimetric", cs, deficits, tol, details={"perimeter": P})


__all__ = [
    "BarrierCertificate",
    "barrier_bounds",
    "cone_ball_certificate",
    "inscribed_radius_bound",
    "equidistant_perimeter_bound",
    "equidistant_volume_bound",
    "barrier_rigidity_check",
    "barrier_isoperimetric_check",
]
