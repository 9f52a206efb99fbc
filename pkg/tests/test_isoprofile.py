import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import isoprofile

from comparison import unit_ball_volume
from errors import CurvatureError, DomainError, InputError
from isoprofile import (
    DEFAULT_VOLUMES,
    ProfileCurve,
    asymptotics,
    check_concavity_and_monotonicity,
    check_sharp_inequality,
    check_strict_monotonicity,
    check_subadditivity,
    check_viscosity_inequality,
    cone_profile,
    euclidean_profile,
    generalized_profile,
    half_line_profile,
    normalized_profile_ratio,
    profile_for_space,
    rigidity_scan,
    sharp_lower_bound,
    space_form_profile,
    truncate,
    union_profile,
    viscosity_residuals,
)
from spaces import Cone, DisjointUnion, SpaceForm, WeightedHalfLine

THETAS = [round(0.1 * k, 1) for k in range(1, 11)]
DIMS = [2, 3, 4, 5.5, 7, 10]


def cone_constant(theta, N):
    return N * (unit_ball_volume(N) * theta) ** (1 / N)


def sampled(grid, values, N=2.0, K=0.0, total_mass=math.inf):
    return ProfileCurve(N=N, K=K, v0=1.0, total_mass=total_mass, grid=np.asarray(grid), values=np.asarray(values))


# ----------------------------
# Closed forms
# ----------------------------
def test_cone_profile_examples():
    assert cone_profile(1, 2)(math.pi) == pytest.approx(2 * math.pi)
    assert cone_profile(0.5, 2)(1.0) == pytest.approx(2.5066283, rel=1e-7)
    assert cone_profile(0.5, 2)(0.0) == 0.0


@given(st.sampled_from(THETAS), st.sampled_from(DIMS), st.floats(min_value=1e-8, max_value=1e-2))
def test_cone_profile_homogeneity(theta, N, v):
    curve = cone_profile(theta, N)
    assert curve(v) / v ** ((N - 1) / N) == pytest.approx(cone_constant(theta, N), rel=1e-12)


def test_sharp_lower_bound():
    assert sharp_lower_bound(2, 1, math.pi) == pytest.approx(2 * math.pi)
    assert sharp_lower_bound(4, 0, 3.0) == 0.0
    assert sharp_lower_bound(3, 1 / 8, 1) == pytest.approx(3 * (4 * math.pi / 3) ** (1 / 3) / 2)
    with pytest.raises(InputError):
        sharp_lower_bound(3, -0.1, 1.0)


def test_euclidean_profile_is_unit_cone():
    v = np.geomspace(0.01, 100, 7)
    np.testing.assert_allclose(euclidean_profile(3, v), cone_profile(1.0, 3)(v), rtol=1e-14)


def test_profile_curve_validation():
    with pytest.raises(InputError):
        sampled([1.0, 0.5], [1.0, 1.0])
    with pytest.raises(InputError):
        sampled([0.5, 1.0], [1.0, -1.0])
    with pytest.raises(InputError):
        ProfileCurve(N=2, K=0, v0=1.0, theta=1.5)
    with pytest.raises(InputError):
        ProfileCurve(N=2, K=0, v0=1.0)


def test_evaluate_outside_range():
    curve = cone_profile(0.5, 3, total_mass=2.0)
    with pytest.raises(DomainError):
        curve(2.5)
    table = sampled([1.0, 2.0, 3.0], [1.0, 1.5, 1.8])
    with pytest.raises(DomainError):
        table(3.5)
    # power law below the first node, I(0) = 0
    assert table(0.25) == pytest.approx(0.5)
    assert table(0.0) == 0.0


def test_sample_and_frames():
    curve = cone_profile(0.5, 2)
    vols = np.geomspace(0.1, 10, 5)
    table = curve.sample(vols)
    np.testing.assert_allclose(table.values, curve(vols))
    df = curve.to_frame(vols)
    assert list(df.columns) == ["v", "I"]
    doc = table.to_json()
    assert set(doc) >= {"N", "K", "v0", "grid", "values"}
    assert doc["grid"] == pytest.approx(list(vols))


def test_truncate():
    curve = truncate(cone_profile(0.4, 2), 3.0)
    assert curve.total_mass == 3.0 and curve.is_closed_form
    table = truncate(sampled([1.0, 2.0, 3.0, 4.0], [1.0, 1.4, 1.7, 2.0]), 2.5)
    assert table.v_max == 2.0


def test_half_line_profile():
    curve = half_line_profile(2, r_max=1.0)
    M = math.pi
    assert curve.total_mass == pytest.approx(M)
    v = np.array([0.5, 1.0, M - 1.0])
    np.testing.assert_allclose(curve(v), euclidean_profile(2, np.minimum(v, M - v)), rtol=1e-4)
    assert half_line_profile(3).is_closed_form


def test_space_form_profile_sphere():
    curve = space_form_profile(1.0, 2)
    assert curve.total_mass == pytest.approx(4 * math.pi, rel=1e-12)
    # cap of the unit sphere: I^2 = v (4 pi - v)
    inner = curve.grid < 10.0
    v = curve.grid[inner]
    np.testing.assert_allclose(curve.values[inner] ** 2, v * (4 * math.pi - v), rtol=1e-9)


def test_space_form_profile_given_volumes():
    vols = np.linspace(1.0, 4 * math.pi - 1.0, 9)
    curve = space_form_profile(1.0, 2, volumes=vols)
    np.testing.assert_allclose(curve.values, np.sqrt(vols * (4 * math.pi - vols)), rtol=1e-10)
    with pytest.raises(DomainError):
        space_form_profile(1.0, 2, volumes=[13.0])


def test_profile_for_space_dispatch():
    vols = np.geomspace(0.1, 10, 5)
    assert profile_for_space(Cone(0.5, 2), vols).theta == 0.5
    assert profile_for_space(SpaceForm(0, 3), vols).theta == 1.0
    assert profile_for_space(WeightedHalfLine(2, 3.0), vols).total_mass == pytest.approx(9 * math.pi)
    union = profile_for_space(DisjointUnion((Cone(0.2, 2), Cone(0.8, 2))), vols, split_grid=50)
    np.testing.assert_allclose(union.values, cone_profile(0.2, 2)(vols), rtol=1e-8)


# ----------------------------
# Sharp inequality
# ----------------------------
@pytest.mark.parametrize("theta, N", list(itertools.product(THETAS, DIMS)))
def test_sharp_inequality_saturated_by_cones(theta, N):
    rep = check_sharp_inequality(cone_profile(theta, N), avr=theta)
    assert rep.passed
    assert abs(rep.worst_violation) <= 1e-10
    assert rep.details["rigid"]
    assert len(rep.details["equality_volumes"]) == DEFAULT_VOLUMES.size


def test_sharp_inequality_strict_for_smaller_avr():
    rep = check_sharp_inequality(cone_profile(0.6, 3), avr=0.3)
    assert rep.passed
    assert rep.worst_violation < 0
    assert not rep.details["rigid"]


def test_sharp_inequality_detects_dip():
    vols = np.geomspace(0.1, 10, 21)
    values = cone_profile(0.5, 2)(vols) * 1.05
    values[7] = 0.9 * cone_profile(0.5, 2)(vols[7])
    rep = check_sharp_inequality(sampled(vols, values), avr=0.5)
    assert not rep.passed
    assert rep.at == pytest.approx(vols[7])


def test_sharp_inequality_rejects_negative_curvature():
    with pytest.raises(CurvatureError):
        check_sharp_inequality(space_form_profile(-1.0, 3, samples=20), avr=1.0)


@pytest.mark.parametrize("K", [1.0, -0.5])
def test_flat_only_checks_reject_curvature(K):
    vols = np.geomspace(0.1, 10, 11)
    curve = sampled(vols, cone_profile(0.5, 2)(vols), K=K)
    with pytest.raises(CurvatureError):
        check_sharp_inequality(curve, avr=0.5)
    with pytest.raises(CurvatureError):
        rigidity_scan(curve, 0.5)
    with pytest.raises(CurvatureError):
        check_strict_monotonicity(curve, avr=0.5)


def test_sphere_rejected_by_sharp_inequality():
    with pytest.raises(CurvatureError, match="K = 0"):
        check_sharp_inequality(space_form_profile(1.0, 2), avr=0.0)


def test_rigidity_scan():
    assert len(rigidity_scan(cone_profile(0.3, 3), 0.3)) == DEFAULT_VOLUMES.size
    vols = np.geomspace(0.1, 10, 11)
    assert rigidity_scan(cone_profile(0.3, 3), 0.1, volumes=vols) == []
    values = 1.1 * cone_profile(0.5, 2)(vols)
    values[5] = cone_profile(0.5, 2)(vols[5])
    assert rigidity_scan(sampled(vols, values), 0.5) == [pytest.approx(vols[5])]


# ----------------------------
# Viscosity inequality
# ----------------------------
@pytest.mark.parametrize("theta, N", [(0.5, 3), (1.0, 2), (0.2, 5.5)])
def test_viscosity_cone_equality(theta, N):
    rep = check_viscosity_inequality(cone_profile(theta, N), tol=1e-6, volumes=np.geomspace(0.1, 10, 200))
    assert rep.passed
    assert not rep.details["nonsmooth"]


def test_viscosity_second_order_convergence():
    curve = cone_profile(0.5, 3)
    errors = []
    for h in (1e-2, 5e-3, 2.5e-3, 1.25e-3):
        v = np.arange(0.5, 1.5 + h / 2, h)
        _, r_i, _, _, _ = viscosity_residuals(v, curve(v), 3, 0.0)
        errors.append(np.max(np.abs(r_i)))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders >= 1.9)


def test_viscosity_sphere_caps():
    vols = np.linspace(1.0, 4 * math.pi - 1.0, 121)
    assert check_viscosity_inequality(space_form_profile(1.0, 2, volumes=vols)).passed


def test_viscosity_linear_profile_fails():
    v = np.linspace(0.5, 3.0, 26)
    rep = check_viscosity_inequality(sampled(v, v, N=2, K=1.0))
    assert not rep.passed
    assert rep.details["I_form_worst"] > 0


def test_viscosity_needs_five_points():
    with pytest.raises(InputError):
        check_viscosity_inequality(sampled([1, 2, 3, 4], [1, 1.4, 1.7, 2]))


# ----------------------------
# Concavity and monotonicity
# ----------------------------
@pytest.mark.parametrize("theta, N", [(0.3, 2), (1.0, 3), (0.7, 7)])
def test_concavity_cones(theta, N):
    rep = check_concavity_and_monotonicity(cone_profile(theta, N))
    assert rep.passed
    psi = cone_profile(theta, N).psi(DEFAULT_VOLUMES)
    np.testing.assert_allclose(psi / DEFAULT_VOLUMES, psi[0] / DEFAULT_VOLUMES[0], rtol=1e-12)


def test_concavity_spherical_caps():
    assert check_concavity_and_monotonicity(space_form_profile(1.0, 2)).passed


def test_convex_psi_fails():
    v = np.linspace(0.5, 5.0, 20)
    rep = check_concavity_and_monotonicity(sampled(v, v, N=2))
    assert not rep.passed
    assert rep.details["concavity_worst"] > 0


def test_strict_monotonicity():
    assert check_strict_monotonicity(cone_profile(0.5, 3), avr=0.5).passed
    flat = sampled(np.linspace(1, 5, 9), np.full(9, 2.0))
    assert not check_strict_monotonicity(flat, avr=0.5).passed
    with pytest.raises(InputError):
        check_strict_monotonicity(cone_profile(0.5, 3, total_mass=10.0), avr=0.5)


def test_subadditivity():
    rep = check_subadditivity(cone_profile(1.0, 2), volumes=np.geomspace(0.1, 10, 20))
    assert rep.passed and rep.details["strict"]
    assert rep.details["pairs"] == 210
    sphere = space_form_profile(1.0, 2)
    assert check_subadditivity(sphere, volumes=np.linspace(0.5, 6.0, 12)).passed


# ----------------------------
# Asymptotics
# ----------------------------
@pytest.mark.parametrize("theta, N", [(0.5, 2), (1.0, 3), (0.25, 4)])
def test_asymptotics_closed_form(theta, N):
    a = asymptotics(cone_profile(theta, N))
    A = cone_constant(theta, N)
    assert a.small_limit == pytest.approx(A, rel=1e-10)
    assert a.large_limit == pytest.approx(A, rel=1e-10)
    assert a.derivative_limit == pytest.approx((N - 1) * (unit_ball_volume(N) * theta) ** (1 / N), rel=1e-6)


def test_asymptotics_sampled_cone():
    vols = np.geomspace(1e-3, 1e3, 61)
    a = asymptotics(cone_profile(0.5, 2).sample(vols))
    assert a.small_limit == pytest.approx(math.sqrt(2 * math.pi), rel=1e-10)
    assert a.large_limit == pytest.approx(math.sqrt(2 * math.pi), rel=1e-10)
    assert a.derivative_limit == pytest.approx(math.sqrt(math.pi / 2), rel=1e-2)


def test_asymptotics_finite_mass_has_no_large_limit():
    a = asymptotics(cone_profile(0.5, 2, total_mass=5.0))
    assert a.large_limit is None and a.derivative_limit is None


def test_asymptotics_needs_two_decades():
    with pytest.raises(InputError):
        asymptotics(cone_profile(0.5, 2).sample(np.geomspace(1, 50, 20)))


# ----------------------------
# Disjoint unions
# ----------------------------
def test_two_euclidean_planes():
    parts = [cone_profile(1, 2), cone_profile(1, 2)]
    res = generalized_profile(parts, 4.0)
    assert res.value == pytest.approx(4 * math.sqrt(math.pi), rel=1e-12)
    masses = sorted(a for _, a in res.allocation)
    assert masses[0] == pytest.approx(0.0, abs=1e-12)
    assert masses[1] == pytest.approx(4.0)


def test_single_part_is_identity():
    curve = cone_profile(0.3, 3)
    assert generalized_profile([curve], 2.5).value == pytest.approx(curve(2.5))


@pytest.mark.parametrize("v", [0.3, 1.0, 7.5])
def test_concentration_two_parts_brute_force(v):
    a, b = cone_profile(0.2, 2), cone_profile(0.8, 2)
    s = np.linspace(0.0, v, 10_000)
    brute = np.min(a(s) + b(v - s))
    res = generalized_profile([a, b], v)
    assert res.value == pytest.approx(min(a(v), b(v)), abs=1e-8)
    assert res.value <= brute + 1e-8
    assert dict(res.allocation)[0] == pytest.approx(v)


@pytest.mark.parametrize("v", [0.5, 4.0])
def test_concentration_three_parts_brute_force(v):
    parts = [cone_profile(0.9, 3), cone_profile(0.15, 3), cone_profile(0.5, 3)]
    grid = np.linspace(0.0, v, 100)
    x, y = np.meshgrid(grid, grid, indexing="ij")
    ok = x + y <= v
    brute = np.min((parts[0](x[ok]) + parts[1](y[ok]) + parts[2](v - x[ok] - y[ok])))
    res = generalized_profile(parts, v)
    assert res.value == pytest.approx(parts[1](v), abs=1e-8)
    assert res.value <= brute + 1e-8
    assert dict(res.allocation)[1] == pytest.approx(v)


def test_union_mass_exceeded():
    parts = [cone_profile(0.5, 2, total_mass=1.0), cone_profile(0.5, 2, total_mass=1.0)]
    with pytest.raises(DomainError):
        generalized_profile(parts, 3.0)


def test_split_grid_bounds():
    parts = [cone_profile(0.5, 2), cone_profile(0.5, 2)]
    for grid in (0, isoprofile.MAX_SPLIT_GRID + 1):
        with pytest.raises(InputError, match="split_grid"):
            generalized_profile(parts, 1.0, split_grid=grid)


def test_split_table_banding_matches_single_band(monkeypatch):
    parts = [cone_profile(0.9, 3), cone_profile(0.15, 3), cone_profile(0.5, 3)]
    whole = generalized_profile(parts, 2.0, split_grid=60)
    monkeypatch.setattr(isoprofile, "BAND_CELLS", 7)
    banded = generalized_profile(parts, 2.0, split_grid=60)
    assert banded.value == whole.value
    assert banded.allocation == whole.allocation


def test_union_dimension_mismatch():
    with pytest.raises(InputError):
        generalized_profile([cone_profile(0.5, 2), cone_profile(0.5, 3)], 1.0)


def test_union_small_volume_asymptotics():
    parts = [cone_profile(0.2, 2), cone_profile(0.8, 2)]
    curve = union_profile(parts, np.geomspace(1e-3, 10, 40))
    assert asymptotics(curve).small_limit == pytest.approx(cone_constant(0.2, 2), abs=1e-4)


# ----------------------------
# Normalized profiles
# ----------------------------
def test_normalized_ratio_identical():
    curve = cone_profile(0.5, 2, total_mass=1.0)
    assert normalized_profile_ratio(curve, curve) == 0.0


def test_normalized_ratio_resolution_independent():
    fine = space_form_profile(1.0, 2, samples=400)
    coarse = space_form_profile(1.0, 2, samples=200)
    assert normalized_profile_ratio(fine, coarse) < 1e-3


def test_normalized_ratio_scaled_sphere():
    unit = space_form_profile(1.0, 2)
    big = space_form_profile(0.25, 2)
    assert normalized_profile_ratio(unit, big) == pytest.approx(0.5, abs=1e-6)


def test_normalized_ratio_sphere_rescaled_in_mass():
    caps = space_form_profile(1.0, 2)
    assert caps.total_mass == pytest.approx(4 * math.pi)
    lam = 4.0
    rescaled = ProfileCurve(N=2, K=1.0, v0=caps.v0, total_mass=lam * caps.total_mass, grid=lam * caps.grid, values=caps.values)
    assert normalized_profile_ratio(caps, rescaled) == pytest.approx(0.0, abs=1e-12)
    assert normalized_profile_ratio(rescaled, caps) == pytest.approx(0.0, abs=1e-12)


def test_normalized_ratio_truncated_cones():
    a = cone_profile(0.5, 2, total_mass=1.0)
    b = cone_profile(0.6, 2, total_mass=1.0)
    assert normalized_profile_ratio(a, b) == pytest.approx(1 - math.sqrt(0.5 / 0.6), abs=1e-12)
    assert normalized_profile_ratio(a, b) == pytest.approx(0.0871, abs=1e-4)


def test_normalized_ratio_needs_finite_mass():
    with pytest.raises(InputError):
        normalized_profile_ratio(cone_profile(0.5, 2), cone_profile(0.5, 2, total_mass=1.0))
