import itertools
import math

import numpy as np
import pytest

from barriers import (
    BarrierCertificate,
    barrier_bounds,
    barrier_isoperimetric_check,
    barrier_rigidity_check,
    cone_ball_certificate,
    equidistant_perimeter_bound,
    equidistant_volume_bound,
    inscribed_radius_bound,
)
from comparison import unit_ball_volume
from errors import InconsistentCertificateError, InputError


def test_unit_disc_certificate():
    cert = barrier_bounds(2, 2 * math.pi, math.pi, avr=1)
    assert cert.c_interval == pytest.approx((1.0, 1.0))
    assert cert.rigid
    assert cert.inscribed_radius_bound == pytest.approx(1.0)


def test_certificate_without_avr():
    cert = barrier_bounds(2, 10, math.pi)
    assert cert.c_lo == 0.0
    assert cert.c_hi == pytest.approx(5 / math.pi)
    assert not cert.rigid
    assert cert.inscribed_radius_bound == math.inf


@pytest.mark.parametrize(
    "theta, R, N",
    list(itertools.product([0.2, 0.5, 1.0], [0.5, 2.0, 7.0], [2, 3, 4.5, 8])),
)
def test_cone_tip_balls_saturate_both_bounds(theta, R, N):
    cert = cone_ball_certificate(theta, N, R)
    assert cert.c_lo == pytest.approx((N - 1) / R, rel=1e-10)
    assert cert.c_hi == pytest.approx((N - 1) / R, rel=1e-10)
    assert cert.rigid
    assert barrier_rigidity_check(cert, tol=1e-10)
    assert barrier_isoperimetric_check(cert, tol=1e-10).passed


def test_certificate_json():
    doc = cone_ball_certificate(0.5, 3, 2.0).to_json()
    assert doc["c_lo"] == pytest.approx(1.0)
    assert doc["c_hi"] == pytest.approx(1.0)
    assert "c_interval" not in doc


def test_inscribed_radius_bound():
    assert inscribed_radius_bound(2, 1) == 1
    assert inscribed_radius_bound(5, 0.5) == 8
    assert inscribed_radius_bound(4, 2.6) == pytest.approx(inscribed_radius_bound(4, 1.3) / 2)
    with pytest.raises(InputError):
        inscribed_radius_bound(3, 0.0)


def test_equidistant_perimeter_bound():
    assert equidistant_perimeter_bound(2 * math.pi, 1, 0, 2, 1, "outward") == pytest.approx(4 * math.pi)
    assert equidistant_perimeter_bound(2 * math.pi, 1, 0, 2, 1, "inward") == 0.0
    for side in ("outward", "inward"):
        assert equidistant_perimeter_bound(3.3, 0.7, -1.0, 3, 0.0, side) == pytest.approx(3.3)
    with pytest.raises(InputError):
        equidistant_perimeter_bound(1.0, 1.0, 0, 2, 1.0, "sideways")


def test_equidistant_volume_bound():
    assert equidistant_volume_bound(2 * math.pi, 1, 0, 2, 1, "outward") == pytest.approx(3 * math.pi)
    assert equidistant_volume_bound(5.0, 0.4, 1.0, 3, 0.0, "inward") == 0.0
    P, c, N = 7.0, 0.8, 4
    full = equidistant_volume_bound(P, c, 0, N, (N - 1) / c, "inward")
    assert full == pytest.approx(P * (N - 1) / (N * c))
    # past the first zero of the Jacobian nothing more is added
    assert equidistant_volume_bound(P, c, 0, N, 10.0, "inward") == pytest.approx(full)


@pytest.mark.parametrize("N, R, t", [(2, 1.0, 1.0), (3, 2.0, 0.5), (5, 0.7, 3.0)])
def test_euclidean_annuli_are_exact(N, R, t):
    omega = unit_ball_volume(N)
    P = N * omega * R ** (N - 1)
    c = (N - 1) / R
    outer = equidistant_volume_bound(P, c, 0, N, t, "outward")
    assert outer == pytest.approx(omega * ((R + t) ** N - R ** N), rel=1e-10)
    s = min(t, R) / 2
    inner = equidistant_volume_bound(P, c, 0, N, s, "inward")
    assert inner == pytest.approx(omega * (R ** N - (R - s) ** N), rel=1e-10)


def test_curved_volume_bound_matches_derivative():
    P, c, K, N, t = 2.0, 0.5, -1.0, 3, 0.8
    h = 1e-5
    fd = (equidistant_volume_bound(P, c, K, N, t + h) - equidistant_volume_bound(P, c, K, N, t - h)) / (2 * h)
    assert fd == pytest.approx(equidistant_perimeter_bound(P, c, K, N, t), rel=1e-6)


def test_outward_volume_growth():
    P, c, N = 3.0, 0.6, 3
    ts = np.array([1e5, 1e6, 1e7])
    vols = np.array([equidistant_volume_bound(P, c, 0, N, t) for t in ts])
    limit = P * c ** (N - 1) / (N * (N - 1) ** (N - 1))
    ratios = vols / ts ** N
    assert np.all(np.diff(np.abs(ratios - limit)) < 0)
    assert ratios[-1] == pytest.approx(limit, rel=1e-5)


def test_rigidity_check():
    disc = barrier_bounds(2, 2 * math.pi, math.pi, avr=1)
    assert barrier_rigidity_check(disc)
    inside = barrier_bounds(3, 20.0, 6.0, avr=0.5, c=None)
    middle = BarrierCertificate(
        c=0.5 * (inside.c_lo + inside.c_hi),
        N=3,
        K=0.0,
        perimeter=20.0,
        volume=6.0,
        avr=0.5,
        c_interval=inside.c_interval,
        inscribed_radius_bound=inscribed_radius_bound(3, 0.5 * (inside.c_lo + inside.c_hi)),
        rigid=False,
    )
    assert not barrier_rigidity_check(middle)


def test_zero_barrier_with_positive_avr_is_inconsistent():
    cert = barrier_bounds(2, 2 * math.pi, math.pi, avr=0.5, c=0.0)
    with pytest.raises(InconsistentCertificateError):
        barrier_rigidity_check(cert)


def test_barrier_above_upper_bound_is_inconsistent():
    cert = barrier_bounds(2, 2 * math.pi, math.pi, c=3.0)
    with pytest.raises(InconsistentCertificateError):
        barrier_rigidity_check(cert)


def test_isoperimetric_step_fails_for_small_perimeter():
    # a perimeter below the sharp bound for AVR = 1 is caught
    cert = barrier_bounds(2, 0.9 * 2 * math.pi, math.pi, avr=1.0)
    rep = barrier_isoperimetric_check(cert)
    assert not rep.passed


def test_isoperimetric_step_needs_avr():
    with pytest.raises(InputError):
        barrier_isoperimetric_check(barrier_bounds(2, 10, math.pi))


def test_barrier_bounds_validation():
    with pytest.raises(InputError):
        barrier_bounds(1.5, 1.0, 1.0)
    with pytest.raises(InputError):
        barrier_bounds(2, -1.0, 1.0)
