"""
Command-line interface for the isoperimetry toolkit.

Usage:
    isoperimetry profile --space '{"type":"cone","theta":0.5,"dim":2}' --vmin 0.1 --vmax 10 --samples 64
    isoperimetry verify --curve cone.csv --N 2 --K 0 --avr 0.5
    isoperimetry barriers --theta 0.5 --N 3 --R 2
    isoperimetry rearrange --input u.csv --N 3 --p 2
    isoperimetry spectral --N 3 --p 2 --v 4.18879
    isoperimetry epsreg --N 2 --epsilon 0.19

Exit codes: 0 success, 1 a check failed (the report is still written),
2 bad input or usage.
"""
from __future__ import annotations

import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
import numpy as np
import pandas as pd

import comparison
from barriers import (
    barrier_bounds,
    barrier_isoperimetric_check,
    barrier_rigidity_check,
    cone_ball_certificate,
    equidistant_perimeter_bound,
    equidistant_volume_bound,
)
from config import Settings, SolverOptions, load_settings
from epsreg import epsilon_table
from errors import InconsistentCertificateError, InputError, IsoperimetryError
from ingest import read_curve, read_sampled_function, read_space_spec
from isoprofile import (
    ProfileCurve,
    asymptotics,
    check_concavity_and_monotonicity,
    check_sharp_inequality,
    check_viscosity_inequality,
    cone_profile,
    profile_for_space,
)
from rearrangement import (
    cone_tip_ball_eigenvalue,
    monotone_rearrangement,
    p_eigenvalue_model,
    p_spectral_comparison,
    polya_szego_check,
    radial_energy,
    shooting_eigenvalue,
)
from reports import VerificationReport, report_from_deficits, reports_frame, to_csv, to_json, write_workbook
from spaces import dimension, space_to_json

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json", "xlsx")

__all__ = ["cli", "run"]


class BadInput(click.ClickException):
    exit_code = 2


class _Group(click.Group):
    """Maps library errors onto exit codes."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except InputError as exc:
            raise BadInput(str(exc)) from exc
        except IsoperimetryError as exc:
            raise click.ClickException(str(exc)) from exc


# ----------------------------
# Helpers
# ----------------------------
def _settings(ctx: click.Context) -> Settings:
    return ctx.obj if isinstance(ctx.obj, Settings) else load_settings()


def _volumes(settings: Settings, vmin: Optional[float], vmax: Optional[float], samples: Optional[int]) -> np.ndarray:
    lo = settings.grids.vmin if vmin is None else vmin
    hi = settings.grids.vmax if vmax is None else vmax
    n = settings.grids.samples if samples is None else samples
    if not 0 < lo < hi or n < 2:
        raise InputError(f"Need 0 < vmin < vmax and samples >= 2, got vmin={lo}, vmax={hi}, samples={n}")
    return np.geomspace(lo, hi, n)


def _emit(tables: Dict[str, pd.DataFrame], doc: Any, fmt: str, out: Optional[str]) -> None:
    if fmt == "xlsx":
        if out is None:
            raise click.UsageError("--format xlsx needs --out")
        write_workbook(out, tables)
        logger.info("Wrote %s", out)
        return
    text = to_csv(next(iter(tables.values()))) if fmt == "csv" else to_json(doc)
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
        logger.info("Wrote %s", out)


def _finish(ctx: click.Context, reports: Sequence[VerificationReport]) -> None:
    failed = [r.check for r in reports if not r.passed]
    if failed:
        logger.warning("Failed checks: %s", ", ".join(failed))
        ctx.exit(1)


def _require(value: Optional[float], flag: str, what: str) -> float:
    if value is None:
        raise InputError(f"{flag} is required for {what}")
    return value


def output_options(f):
    f = click.option("--format", "fmt", type=click.Choice(FORMATS), default=None, help="Output format")(f)
    f = click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default stdout)")(f)
    return f


def volume_options(f):
    f = click.option("--samples", type=int, default=None, help="Number of volumes (geometric grid)")(f)
    f = click.option("--vmax", type=float, default=None, help="Largest volume")(f)
    f = click.option("--vmin", type=float, default=None, help="Smallest volume")(f)
    return f


# ----------------------------
# Group
# ----------------------------
@click.group(cls=_Group)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="TOML settings file")
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG on stderr")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], verbose: int) -> None:
    """Isoperimetric profiles, comparison bounds and their numerical checks."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)
    ctx.obj = load_settings(config_path)


# ----------------------------
# eval
# ----------------------------
EVAL_FUNCTIONS = (
    "sn",
    "cos_sin",
    "s_lambda",
    "jacobian",
    "jacobian_support",
    "model_ball_volume",
    "model_sphere_area",
    "unit_ball_volume",
)


@cli.command("eval")
@click.option("--fn", type=click.Choice(EVAL_FUNCTIONS), required=True, help="Comparison function")
@click.option("--K", "K", type=float, default=0.0, help="Curvature lower bound")
@click.option("--N", "N", type=float, default=None, help="Dimension upper bound")
@click.option("--H", "H", type=float, default=0.0, help="Mean curvature for the Jacobian")
@click.option("--lam", type=float, default=0.0, help="lambda for s_lambda")
@click.option("--r", "radii", type=float, multiple=True, help="Evaluation radius (repeatable)")
@output_options
def eval_cmd(fn, K, N, H, lam, radii, out, fmt):
    """Comparison functions evaluated pointwise.

    cos_sin and s_lambda use k = K/(N-1) when --N is given, k = K otherwise.
    """
    r = np.asarray(radii if radii else np.linspace(0.0, 1.0, 11), dtype=float)
    if fn == "unit_ball_volume":
        table = pd.DataFrame({"N": [_require(N, "--N", fn)], "value": [comparison.unit_ball_volume(N)]})
    elif fn == "jacobian_support":
        table = pd.DataFrame({"H": [H], "value": [comparison.jacobian_support(H, K, _require(N, "--N", fn))]})
    elif fn == "sn":
        table = pd.DataFrame({"r": r, "value": np.atleast_1d(comparison.sn(K, r))})
    elif fn in ("cos_sin", "s_lambda"):
        k = comparison.CurvatureParams(K, N).k if N is not None else K
        if fn == "cos_sin":
            c, s = comparison.cos_sin_k(k, r)
            table = pd.DataFrame({"r": r, "cos": np.atleast_1d(c), "sin": np.atleast_1d(s)})
        else:
            sv = comparison.s_lambda(k, lam, r)
            table = pd.DataFrame({"r": r, "value": np.atleast_1d(sv.value), "derivative": np.atleast_1d(sv.derivative)})
    elif fn == "jacobian":
        table = pd.DataFrame({"r": r, "value": np.atleast_1d(comparison.jacobian(H, K, _require(N, "--N", fn), r))})
    else:
        f = comparison.model_ball_volume if fn == "model_ball_volume" else comparison.model_sphere_area
        dim = _require(N, "--N", fn)
        table = pd.DataFrame({"r": r, "value": [f(dim, K, float(x)) for x in r]})
    _emit({fn: table}, {"function": fn, "K": K, "N": N, "rows": table.to_dict(orient="records")}, fmt or "csv", out)


# ----------------------------
# profile
# ----------------------------
@cli.command()
@click.option("--space", "space_spec", required=True, help="Space spec as JSON or a path to a JSON file")
@volume_options
@click.option("--split-grid", type=int, default=None, help="Lattice size for disjoint unions")
@output_options
@click.pass_context
def profile(ctx, space_spec, vmin, vmax, samples, split_grid, out, fmt):
    """Isoperimetric profile of a model space as a `v,I` table."""
    settings = _settings(ctx)
    space = read_space_spec(space_spec)
    vols = _volumes(settings, vmin, vmax, samples)
    curve = profile_for_space(space, vols, split_grid or settings.grids.split_grid)
    table = curve.to_frame(vols)
    doc = {"space": space_to_json(space), **curve.to_json(vols)}
    _emit({"profile": table}, doc, fmt or "csv", out)


# ----------------------------
# verify
# ----------------------------
def _load_curve(settings: Settings, curve_path, space_spec, N, K, vols, total_mass=None) -> ProfileCurve:
    if (curve_path is None) == (space_spec is None):
        raise InputError("Give exactly one of --curve or --space")
    if curve_path is not None:
        return read_curve(curve_path, _require(N, "--N", "--curve"), K, total_mass=total_mass)
    if total_mass is not None:
        raise InputError("--total-mass applies to --curve only")
    space = read_space_spec(space_spec)
    return profile_for_space(space, vols, settings.grids.split_grid)


@cli.command()
@click.option("--curve", "curve_path", type=click.Path(dir_okay=False), default=None, help="Profile CSV (v,I) or JSON")
@click.option("--space", "space_spec", default=None, help="Space spec instead of a curve file")
@click.option("--N", "N", type=float, default=None, help="Dimension upper bound")
@click.option("--K", "K", type=float, default=0.0, help="Curvature lower bound")
@click.option("--avr", type=float, default=None, help="Asymptotic volume ratio for the sharp inequality")
@click.option("--total-mass", type=float, default=None, help="Total mass of the space (default: infinite)")
@click.option("--tol", type=float, default=None, help="Override every check tolerance")
@volume_options
@output_options
@click.pass_context
def verify(ctx, curve_path, space_spec, N, K, total_mass, avr, tol, vmin, vmax, samples, out, fmt):
    """Sharp inequality, viscosity inequality, concavity/monotonicity and asymptotics of a profile."""
    settings = _settings(ctx)
    tols = settings.tolerances
    use_grid = curve_path is None and (vmin, vmax, samples) != (None, None, None)
    vols = _volumes(settings, vmin, vmax, samples) if use_grid else None
    curve = _load_curve(settings, curve_path, space_spec, N, K, _volumes(settings, vmin, vmax, samples), total_mass)

    reports: List[VerificationReport] = []
    if avr is not None:
        reports.append(check_sharp_inequality(curve, avr, tol if tol is not None else tols.sharp, vols))
    reports.append(check_viscosity_inequality(curve, tol if tol is not None else tols.viscosity, vols))
    reports.append(check_concavity_and_monotonicity(curve, tol if tol is not None else tols.concavity, vols))
    try:
        asym: Optional[Dict[str, Any]] = asdict(asymptotics(curve, vols))
    except InputError as exc:
        logger.warning("Skipping asymptotics: %s", exc)
        asym = None

    doc = {"N": curve.N, "K": curve.K, "avr": avr, "checks": [r.to_dict() for r in reports], "asymptotics": asym}
    tables = {"checks": reports_frame(reports)}
    if asym is not None:
        tables["asymptotics"] = pd.DataFrame([asym])
    _emit(tables, doc, fmt or "json", out)
    _finish(ctx, reports)


# ----------------------------
# barriers
# ----------------------------
def _consistency_report(cert, tol: float) -> VerificationReport:
    scale = max(1.0, cert.c_hi)
    deficits = [(cert.c - cert.c_hi) / scale, -cert.c / scale]
    if cert.avr is not None:
        deficits.append((cert.c_lo - cert.c) / scale)
    return report_from_deficits("barrier_consistency", [cert.c] * len(deficits), deficits, tol)


@cli.command()
@click.option("--N", "N", type=float, required=True, help="Dimension upper bound")
@click.option("--perimeter", type=float, default=None, help="Perimeter of the set")
@click.option("--volume", type=float, default=None, help="Volume of the set")
@click.option("--avr", type=float, default=None, help="Asymptotic volume ratio")
@click.option("--c", "c", type=float, default=None, help="Barrier constant (default: the lower bound)")
@click.option("--theta", type=float, default=None, help="Cone opening for a tip-ball certificate")
@click.option("--R", "R", type=float, default=None, help="Tip-ball radius")
@click.option("--K", "K", type=float, default=0.0, help="Curvature for equidistant bounds")
@click.option("--t", "distances", type=float, multiple=True, help="Equidistant distance (repeatable)")
@click.option("--tol", type=float, default=None, help="Tolerance")
@output_options
@click.pass_context
def barriers(ctx, N, perimeter, volume, avr, c, theta, R, K, distances, tol, out, fmt):
    """Mean-curvature barrier certificate and its consistency checks."""
    tol = _settings(ctx).tolerances.barrier if tol is None else tol
    if theta is not None:
        cert = cone_ball_certificate(theta, N, _require(R, "--R", "a tip-ball certificate"), tol)
    else:
        cert = barrier_bounds(
            N, _require(perimeter, "--perimeter", "barriers"), _require(volume, "--volume", "barriers"), avr, c, tol
        )

    reports = [_consistency_report(cert, tol)]
    try:
        saturated = barrier_rigidity_check(cert, tol)
    except InconsistentCertificateError as exc:
        logger.warning("%s", exc)
        saturated = False
    if cert.avr is not None and cert.c_hi > 0:
        reports.append(barrier_isoperimetric_check(cert, tol))

    rows = []
    for t in distances:
        for side in ("outward", "inward"):
            rows.append({
                "t": t,
                "side": side,
                "perimeter_bound": equidistant_perimeter_bound(cert.perimeter, cert.c, K, N, t, side),
                "volume_bound": equidistant_volume_bound(cert.perimeter, cert.c, K, N, t, side),
            })
    shells = pd.DataFrame(rows, columns=["t", "side", "perimeter_bound", "volume_bound"])
    doc = {
        "certificate": cert.to_json(),
        "saturated": saturated,
        "checks": [r.to_dict() for r in reports],
        "equidistant": shells.to_dict(orient="records"),
    }
    tables = {"checks": reports_frame(reports), "certificate": pd.DataFrame([cert.to_json()])}
    if rows:
        tables["equidistant"] = shells
    _emit(tables, doc, fmt or "json", out)
    _finish(ctx, reports)


# ----------------------------
# rearrange
# ----------------------------
@cli.command()
@click.option("--input", "input_path", type=click.Path(dir_okay=False), required=True, help="CSV node,value[,weight]")
@click.option("--N", "N", type=float, required=True, help="Dimension of the model half-line")
@click.option("--samples", type=int, default=None, help="Resample u* on a uniform radius grid")
@click.option("--p", "p", type=float, default=None, help="Run the Polya-Szego check with this exponent")
@click.option("--avr", type=float, default=None, help="AVR of the ambient cone for the Polya-Szego factor")
@click.option("--tol", type=float, default=None, help="Tolerance of the Polya-Szego check")
@output_options
@click.pass_context
def rearrange(ctx, input_path, N, samples, p, avr, tol, out, fmt):
    """Monotone rearrangement u -> u* on the weighted half-line."""
    settings = _settings(ctx)
    u = read_sampled_function(input_path, N)
    ustar = monotone_rearrangement(u)
    table = ustar.to_frame(samples)
    doc: Dict[str, Any] = {"N": N, "total_mass": ustar.total_mass, "rows": table.to_dict(orient="records")}
    reports: List[VerificationReport] = []
    if p is not None:
        theta = 1.0 if avr is None else avr
        rep = polya_szego_check(
            u, radial_energy(u, p), cone_profile(theta, N), p, avr, settings.tolerances.polya_szego if tol is None else tol
        )
        reports.append(rep)
        doc["checks"] = [rep.to_dict()]
    tables = {"rearranged": table}
    if reports:
        tables["checks"] = reports_frame(reports)
    _emit(tables, doc, fmt or "csv", out)
    _finish(ctx, reports)


# ----------------------------
# spectral
# ----------------------------
@cli.command()
@click.option("--N", "N", type=float, required=True, help="Dimension upper bound")
@click.option("--p", "p", type=float, default=2.0, show_default=True, help="Exponent of the p-Laplacian")
@click.option("--v", "v", type=float, required=True, help="Volume of the domain")
@click.option("--lambda", "--lam", "lam", type=float, default=None, help="Eigenvalue to compare")
@click.option("--avr", type=float, default=None, help="Asymptotic volume ratio")
@click.option("--theta", type=float, default=None, help="Use the tip ball of a cone of this opening")
@click.option("--space", "space_spec", default=None, help="Space whose profile sharpens the bound")
@click.option("--options", "options_json", default=None, help='Solver options {"grid_points", "max_iters", "tol"}')
@click.option("--tol", type=float, default=None, help="Tolerance")
@output_options
@click.pass_context
def spectral(ctx, N, p, v, lam, avr, theta, space_spec, options_json, tol, out, fmt):
    """First Dirichlet p-eigenvalue of model balls and the spectral comparison."""
    settings = _settings(ctx)
    options = SolverOptions.from_json(options_json) if options_json else settings.solver
    tol = settings.tolerances.spectral if tol is None else tol
    model = p_eigenvalue_model(N, p, v, options)
    result: Dict[str, Any] = {"N": N, "p": p, "v": v, "model_eigenvalue": model}
    if p == 2:
        radius = (v / comparison.unit_ball_volume(N)) ** (1 / N)
        result["shooting_eigenvalue"] = shooting_eigenvalue(N, radius)
    if theta is not None:
        result["tip_eigenvalue"] = cone_tip_ball_eigenvalue(theta, N, p, v, options)
        lam = result["tip_eigenvalue"] if lam is None else lam
        avr = theta if avr is None else avr

    reports: List[VerificationReport] = []
    if lam is not None:
        profile_curve = None
        if space_spec is not None:
            space = read_space_spec(space_spec)
            if dimension(space) != N:
                raise InputError(f"Space dimension {dimension(space)} does not match --N {N}")
            profile_curve = profile_for_space(space, np.geomspace(v / 10, v * 10, 41), settings.grids.split_grid)
        rep = p_spectral_comparison(lam, N, 0.0 if avr is None else avr, v, p, profile_curve, tol, options)
        reports.append(rep)
        result["checks"] = [rep.to_dict()]
    table = pd.DataFrame([{k: val for k, val in result.items() if k != "checks"}])
    tables = {"spectral": table}
    if reports:
        tables["checks"] = reports_frame(reports)
    _emit(tables, result, fmt or "json", out)
    _finish(ctx, reports)


# ----------------------------
# epsreg
# ----------------------------
@cli.command()
@click.option("--N", "N", type=float, required=True, help="Dimension")
@click.option("--epsilon", "epsilons", type=float, multiple=True, help="Target volume deficit (repeatable)")
@click.option("--delta", "deltas", type=float, multiple=True, help="Profile deficit (repeatable)")
@output_options
def epsreg(N, epsilons, deltas, out, fmt):
    """delta <-> epsilon table for K = 0."""
    if not epsilons and not deltas:
        raise InputError("Give at least one --epsilon or --delta")
    table = epsilon_table(N, list(epsilons), list(deltas))
    _emit({"epsreg": table}, {"rows": table.to_dict(orient="records")}, fmt or "csv", out)


# ----------------------------
# Driver
# ----------------------------
def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        rv = cli.main(args=list(argv) if argv is not None else None, prog_name="isoperimetry", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return rv if isinstance(rv, int) else 0
