"""
Monotone rearrangement onto the weighted half-line ([0, r], N omega_N r^(N-1) dr),
Polya-Szego comparisons and first Dirichlet eigenvalues of the radial p-Laplacian.

Radial data is sampled on cells: `weights[i]` is the measure of cell i and
`nodes[i]` a point inside it (the mass midpoint for radially reduced data).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, linalg, optimize

from comparison import unit_ball_volume
from config import SolverOptions
from errors import ConvergenceError, CurvatureError, DomainError, InputError
from isoprofile import ProfileCurve, euclidean_profile
from reports import VerificationReport, report_from_deficits

logger = logging.getLogger(__name__)

# L-BFGS-B restarts after an abnormal line-search stop
RESTARTS = 3


@dataclass(frozen=True, eq=False)
class SampledFunction:
    nodes: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    N: float

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.size == 0 or nodes.shape != values.shape or nodes.shape != weights.shape:
            raise InputError("nodes, values and weights must be 1-D arrays of equal nonzero length")
        if np.any(np.diff(nodes) <= 0):
            raise InputError("nodes must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InputError("values must be finite and nonnegative")
        if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
            raise InputError("weights must be finite and positive")
        if not self.N >= 1:
            raise InputError(f"N must be >= 1, got {self.N}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"node": self.nodes, "value": self.values, "weight": self.weights})


def radial_function(
    f: Callable[[np.ndarray], np.ndarray],
    N: float,
    radius: float = 1.0,
    cells: int = 1000,
    density: float = 1.0,
) -> SampledFunction:
    """
    Sample a radial profile f on the ball of `radius` about the tip of a cone of
    the given density (1 for Euclidean space), one node per cell at its mass midpoint.
    """
    if cells < 1 or not radius > 0 or not density > 0:
        raise InputError("Need cells >= 1, radius > 0 and density > 0")
    edges = np.linspace(0.0, radius, cells + 1)
    omega = unit_ball_volume(N)
    weights = density * omega * np.diff(edges ** N)
    nodes = (0.5 * (edges[:-1] ** N + edges[1:] ** N)) ** (1 / N)
    return SampledFunction(nodes, np.asarray(f(nodes), dtype=float), weights, N)


# ----------------------------
# Distribution functions
# ----------------------------
def _level_masses(values: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    levels, inverse = np.unique(values, return_inverse=True)
    return levels, np.bincount(inverse, weights=weights, minlength=levels.size)


@dataclass(frozen=True, eq=False)
class Distribution:
    """mu(t) = m({u > t}) as a right-continuous step function of t."""

    levels: np.ndarray
    masses: np.ndarray
    total_mass: float

    @property
    def suffix(self) -> np.ndarray:
        # suffix[i] = sum of masses at levels i, i+1, ...
        return np.concatenate([np.cumsum(self.masses[::-1])[::-1], [0.0]])

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.levels, arr, side="right")
        out = self.suffix[idx]
        return float(out) if arr.ndim == 0 else out

    def pairs(self, levels: Optional[Sequence[float]] = None) -> list:
        ts = self.levels if levels is None else np.asarray(levels, dtype=float)
        return list(zip(ts.tolist(), np.atleast_1d(self(ts)).tolist()))

    def __iter__(self) -> Iterator[Tuple[float, float]]:
        return iter(self.pairs())


def distribution(u: SampledFunction) -> Distribution:
    levels, masses = _level_masses(u.values, u.weights)
    return Distribution(levels, masses, u.total_mass)


def distribution_function(u: SampledFunction, levels: Sequence[float]) -> list:
    """[(t, mu(t))] for the sorted `levels`."""
    ts = np.asarray(levels, dtype=float)
    if np.any(np.diff(ts) < 0):
        raise InputError("levels must be sorted")
    return distribution(u).pairs(ts)


class GeneralizedInverse:
    """u#(s) = inf{t : mu(t) <= s}; 0 for s >= total mass."""

    def __init__(self, levels: np.ndarray, tail: np.ndarray, total_mass: float):
        self.levels = levels
        self.tail = tail  # mu at each level, nonincreasing
        self.total_mass = total_mass

    @classmethod
    def of(cls, mu: Distribution) -> "GeneralizedInverse":
        return cls(mu.levels, mu.suffix[1:], mu.total_mass)

    def __call__(self, s):
        arr = np.asarray(s, dtype=float)
        if np.any(arr < 0):
            raise InputError("u# is defined for s >= 0")
        idx = np.searchsorted(-self.tail, -arr, side="left")
        idx = np.minimum(idx, self.levels.size - 1)
        out = np.where(arr >= self.total_mass, 0.0, self.levels[idx])
        return float(out) if arr.ndim == 0 else out


def generalized_inverse(mu, total_mass: Optional[float] = None) -> GeneralizedInverse:
    """
    Accepts a Distribution, or a sequence of (t, mu(t)) pairs with ascending t
    together with the total mass, below which u# never drops to 0.
    """
    if isinstance(mu, Distribution):
        return GeneralizedInverse.of(mu)
    arr = np.asarray(list(mu), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise InputError("mu must be a nonempty sequence of (t, mu(t)) pairs")
    levels, measures = arr[:, 0], arr[:, 1]
    if np.any(np.diff(levels) <= 0) or np.any(np.diff(measures) > 0):
        raise InputError("mu must have ascending levels and nonincreasing measures")
    if total_mass is None:
        raise InputError("Pairs do not determine the total mass; pass total_mass")
    if not total_mass >= measures[0]:
        raise InputError(f"total_mass {total_mass} is below mu({levels[0]}) = {measures[0]}")
    return GeneralizedInverse(levels, measures, float(total_mass))


# ----------------------------
# Rearrangement
# ----------------------------
@dataclass(frozen=True, eq=False)
class RearrangedFunction:
    """u*(x) = u#(omega_N x^N): exact step data, levels descending with their masses."""

    N: float
    levels: np.ndarray
    masses: np.ndarray
    total_mass: float

    @property
    def omega(self) -> float:
        return unit_ball_volume(self.N)

    @property
    def r_max(self) -> float:
        return (self.total_mass / self.omega) ** (1 / self.N)

    @property
    def boundaries(self) -> np.ndarray:
        """Outer radius of each step."""
        return (np.cumsum(self.masses) / self.omega) ** (1 / self.N)

    def distribution(self) -> Distribution:
        lv, ms = _level_masses(self.levels, self.masses)
        return Distribution(lv, ms, self.total_mass)

    def distribution_function(self, levels: Sequence[float]) -> list:
        return self.distribution().pairs(np.asarray(levels, dtype=float))

    def evaluate(self, x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0):
            raise InputError("u* is defined on [0, r_max]")
        return GeneralizedInverse.of(self.distribution())(self.omega * arr ** self.N)

    __call__ = evaluate

    def nodes(self) -> np.ndarray:
        """Mass midpoint of every step."""
        inner = np.cumsum(self.masses) - 0.5 * self.masses
        return (inner / self.omega) ** (1 / self.N)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """int f(u*) dm_N, exact on the step data."""
        return math.fsum(np.asarray(f(self.levels), dtype=float) * self.masses)

    def to_frame(self, samples: Optional[int] = None) -> pd.DataFrame:
        x = self.nodes() if samples is None else np.linspace(0.0, self.r_max, samples)
        return pd.DataFrame({"x": x, "u_star": self.evaluate(x)})


def monotone_rearrangement(u: SampledFunction) -> RearrangedFunction:
    mu = distribution(u)
    if not math.isfinite(mu.total_mass):
        raise InputError("Rearrangement needs finite mass")
    # descending levels; the mass of each step is the measure of its level set
    return RearrangedFunction(u.N, mu.levels[::-1].copy(), mu.masses[::-1].copy(), mu.total_mass)


# ----------------------------
# Energies
# ----------------------------
def dirichlet_energy_p(x: Sequence[float], f: Sequence[float], N: float, p: float, density: float = 1.0) -> float:
    """sum |df/dx|^p m_N(cell) over consecutive samples, m_N = density N omega_N r^(N-1) dr."""
    if not p > 1:
        raise InputError(f"p must be > 1, got {p}")
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if x.shape != f.shape or x.size < 2 or np.any(np.diff(x) <= 0):
        raise InputError("Energy needs at least two samples on a strictly increasing grid")
    slopes = np.diff(f) / np.diff(x)
    cells = density * unit_ball_volume(N) * np.diff(x ** N)
    return math.fsum(np.abs(slopes) ** p * cells)


def radial_energy(u: SampledFunction, p: float) -> float:
    """
    p-energy of radially reduced data between consecutive mass-midpoint nodes;
    the measure between two such nodes is half of each adjacent cell.
    """
    if not p > 1:
        raise InputError(f"p must be > 1, got {p}")
    if u.nodes.size < 2:
        return 0.0
    slopes = np.diff(u.values) / np.diff(u.nodes)
    between = 0.5 * (u.weights[:-1] + u.weights[1:])
    return math.fsum(np.abs(slopes) ** p * between)


def rearranged_energy(ustar: RearrangedFunction, p: float) -> float:
    return dirichlet_energy_p(ustar.nodes(), ustar.levels, ustar.N, p)


def coarea_energy(x: Sequence[float], f: Sequence[float], N: float, p: float, order: int = 8) -> float:
    """
    int_0^sup f_u(t) dt with f_u(t) = |grad u*|^(p-1) Per({u* > t}) for the
    piecewise-linear interpolant; integrated over levels with Gauss-Legendre per cell.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if x.shape != f.shape or x.size < 2:
        raise InputError("Coarea energy needs at least two samples")
    omega = unit_ball_volume(N)
    gx, gw = np.polynomial.legendre.leggauss(order)
    total = []
    for x0, x1, f0, f1 in zip(x[:-1], x[1:], f[:-1], f[1:]):
        dt = abs(f1 - f0)
        if dt == 0:
            continue
        slope = dt / (x1 - x0)
        # level t in (min, max) is reached at radius rho(t), linear in t
        s = 0.5 * (gx + 1.0)
        rho = x0 + s * (x1 - x0)
        per = N * omega * rho ** (N - 1)
        total.append(0.5 * dt * float(np.dot(gw, slope ** (p - 1) * per)))
    return math.fsum(total)


def polya_szego_check(
    u: SampledFunction,
    energy: float,
    profile: ProfileCurve,
    p: float,
    avr: Optional[float] = None,
    tol: float = 1e-3,
) -> VerificationReport:
    """
    energy(u) >= (I(V)/I_N(V))^p * E(u*) and, with AVR, energy(u) >= AVR^(p/N) E(u*).
    Deficits are relative to max(1, energy).
    """
    if profile.K != 0:
        raise CurvatureError(f"Polya-Szego comparison holds for K = 0 only, got K={profile.K}")
    if not p > 1:
        raise InputError(f"p must be > 1, got {p}")
    ustar = monotone_rearrangement(u)
    e_star = rearranged_energy(ustar, p)
    vol = ustar.total_mass
    if vol > profile.v_max:
        raise DomainError(f"Mass {vol} of u lies beyond the profile range [0, {profile.v_max}]")
    N = u.N
    factor = (profile.evaluate(vol) / euclidean_profile(N, vol)) ** p
    scale = max(1.0, energy)
    locations = [vol]
    deficits = [(factor * e_star - energy) / scale]
    details = {"profile_factor": factor, "rearranged_energy": e_star, "energy": energy, "p": p}
    details["profile_margin"] = -deficits[0]
    if avr is not None:
        avr_factor = avr ** (p / N)
        locations.append(vol)
        deficits.append((avr_factor * e_star - energy) / scale)
        details["avr_factor"] = avr_factor
        details["avr_margin"] = -deficits[1]
    return report_from_deficits("polya_szego", locations, deficits, tol, details=details)


# ----------------------------
# Eigenvalues
# ----------------------------
def _cells(N: float, radius: float, n: int, weight: float):
    x = np.linspace(0.0, radius, n + 1)
    omega = weight * unit_ball_volume(N)
    cell = omega * np.diff(x ** N)
    lo = np.maximum(x[:-1] - 0.5 * (x[1] - x[0]), 0.0)
    hi = np.minimum(x[:-1] + 0.5 * (x[1] - x[0]), radius)
    dual = omega * (hi ** N - lo ** N)
    return x, cell, dual


def _eigen_p2(N: float, radius: float, n: int, weight: float) -> Tuple[float, np.ndarray]:
    x, cell, dual = _cells(N, radius, n, weight)
    h = x[1] - x[0]
    c = cell / h ** 2
    # unknowns f_0..f_{n-1}; f_n = 0
    diag = (np.concatenate([[0.0], c[:-1]]) + c) / dual
    off = -c[:-1] / np.sqrt(dual[:-1] * dual[1:])
    w, v = linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    vec = np.abs(v[:, 0] / np.sqrt(dual))
    return float(w[0]), vec


def _eigen_p(N: float, p: float, radius: float, weight: float, options: SolverOptions) -> float:
    n = options.grid_points
    x, cell, dual = _cells(N, radius, n, weight)
    h = x[1] - x[0]
    c = cell / h ** p
    _, start = _eigen_p2(N, radius, n, weight)
    start = start / start.max()

    def quotient(f: np.ndarray):
        full = np.append(f, 0.0)
        d = np.diff(full)
        energy = np.sum(c * np.abs(d) ** p)
        mass = np.sum(dual * np.abs(f) ** p)
        g = p * c * np.abs(d) ** (p - 1) * np.sign(d)
        grad_e = np.zeros_like(full)
        grad_e[1:] += g
        grad_e[:-1] -= g
        grad_m = p * dual * np.abs(f) ** (p - 1) * np.sign(f)
        q = energy / mass
        return q, (grad_e[:-1] - q * grad_m) / mass

    budget = options.max_iters
    previous = math.inf
    for attempt in range(RESTARTS + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            res = optimize.minimize(
                quotient,
                start,
                jac=True,
                method="L-BFGS-B",
                bounds=[(0.0, None)] * n,
                options={"maxiter": budget, "ftol": options.tol, "gtol": 1e-10},
            )
        budget -= res.nit
        if res.success:
            break
        if budget <= 0:
            raise ConvergenceError(f"Rayleigh minimisation stopped after {options.max_iters} iterations: {res.message}")
        # a restart that no longer lowers the quotient is stationary
        if abs(previous - res.fun) <= options.tol * abs(res.fun):
            break
        logger.debug("Rayleigh minimisation restart %d after: %s", attempt + 1, res.message)
        previous = float(res.fun)
        start = res.x
    else:
        raise ConvergenceError(f"Rayleigh minimisation did not converge after {RESTARTS} restarts: {res.message}")
    logger.debug("p=%s Rayleigh quotient %.12g after %d iterations", p, res.fun, res.nit)
    return float(res.fun)


@lru_cache(maxsize=64)
def _rayleigh(N: float, p: float, radius: float, weight: float, options: SolverOptions) -> float:
    if p == 2:
        return _eigen_p2(N, radius, options.grid_points, weight)[0]
    return _eigen_p(N, p, radius, weight, options)


def rayleigh_eigenvalue(
    N: float,
    p: float,
    radius: float = 1.0,
    weight: float = 1.0,
    options: Optional[SolverOptions] = None,
) -> float:
    """
    min int |f'|^p dm / int |f|^p dm over f with f(radius) = 0, dm = weight N omega_N r^(N-1) dr.
    p = 2 is solved as a tridiagonal eigenproblem, other p by bounded L-BFGS.
    """
    if not N >= 1:
        raise InputError(f"N must be >= 1, got {N}")
    if not p > 1:
        raise InputError(f"p must be > 1, got {p}")
    if not radius > 0 or not weight > 0:
        raise InputError("radius and weight must be positive")
    return _rayleigh(float(N), float(p), float(radius), float(weight), options or SolverOptions())


def p_eigenvalue_model(N: float, p: float, v: float, options: Optional[SolverOptions] = None) -> float:
    """First Dirichlet p-eigenvalue of the Euclidean ball of volume v: C_{p,N} v^(-p/N) scaling."""
    if not v > 0:
        raise InputError(f"Volume must be positive, got {v}")
    reference = rayleigh_eigenvalue(N, p, 1.0, 1.0, options)
    radius = (v / unit_ball_volume(N)) ** (1 / N)
    return reference * radius ** (-p)


def cone_tip_ball_eigenvalue(
    theta: float, N: float, p: float, v: float, options: Optional[SolverOptions] = None
) -> float:
    """Eigenvalue of the ball of volume v about the tip of a cone of opening theta."""
    if not 0 < theta <= 1:
        raise InputError(f"Cone opening theta must lie in (0, 1], got {theta}")
    radius = (v / (theta * unit_ball_volume(N))) ** (1 / N)
    return rayleigh_eigenvalue(N, p, radius, theta, options)


def shooting_eigenvalue(N: float, radius: float = 1.0, rtol: float = 1e-12) -> float:
    """
    First root in lambda of f(radius) for -f'' - (N-1)/r f' = lambda f, f(0) = 1, f'(0) = 0.
    Independent p = 2 oracle.
    """
    r0 = 1e-6 * radius

    def endpoint(lam: float) -> float:
        f0 = 1.0 - lam * r0 ** 2 / (2 * N)
        g0 = -lam * r0 / N
        sol = integrate.solve_ivp(
            lambda r, y: [y[1], -(N - 1) / r * y[1] - lam * y[0]],
            (r0, radius),
            [f0, g0],
            method="DOP853",
            rtol=rtol,
            atol=1e-14,
        )
        return float(sol.y[0, -1])

    lo = 0.1 / radius ** 2
    if endpoint(lo) <= 0:
        raise ConvergenceError("Shooting scan started beyond the first eigenvalue")
    hi = lo
    for _ in range(200):
        hi = lo * 1.2
        if endpoint(hi) < 0:
            break
        lo = hi
    else:
        raise ConvergenceError("Shooting scan found no sign change")
    return optimize.brentq(endpoint, lo, hi, xtol=1e-14, rtol=1e-13)


def p_spectral_comparison(
    lam: float,
    N: float,
    avr: float,
    v: float,
    p: float,
    profile: Optional[ProfileCurve] = None,
    tol: float = 1e-4,
    options: Optional[SolverOptions] = None,
) -> VerificationReport:
    """
    lambda >= (I(v)/I_N(v))^p I_{p,N}(v) >= AVR^(p/N) I_{p,N}(v); `rigid` when the
    AVR bound is attained within tol.
    """
    if not lam > 0 or not v > 0 or not p > 1 or avr < 0:
        raise InputError("lambda, v must be positive, p > 1 and AVR >= 0")
    model = p_eigenvalue_model(N, p, v, options)
    avr_bound = avr ** (p / N) * model
    bounds = [avr_bound]
    details = {"model_eigenvalue": model, "avr_bound": avr_bound, "lambda": lam}
    if profile is not None:
        profile_bound = (profile.evaluate(v) / euclidean_profile(N, v)) ** p * model
        bounds.append(profile_bound)
        details["profile_bound"] = profile_bound
    bounds_arr = np.asarray(bounds)
    deficits = (bounds_arr - lam) / np.maximum(1.0, bounds_arr)
    rep = report_from_deficits("p_spectral", [v] * len(bounds), deficits, tol, details=details)
    rep.details["rigid"] = bool(abs(lam - avr_bound) <= tol * max(1.0, avr_bound))
    return rep


__all__ = [
    "SampledFunction",
    "radial_function",
    "Distribution",
    "distribution",
    "distribution_function",
    "GeneralizedInverse",
    "generalized_inverse",
    "RearrangedFunction",
    "monotone_rearrangement",
    "dirichlet_energy_p",
    "radial_energy",
    "rearranged_energy",
    "coarea_energy",
    "polya_szego_check",
    "rayleigh_eigenvalue",
    "p_eigenvalue_model",
    "cone_tip_ball_eigenvalue",
    "shooting_eigenvalue",
    "p_spectral_comparison",
]
