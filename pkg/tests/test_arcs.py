import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isoflow.arcs import (arc_outside, arc_with_area, find_critical, gradient_bound,
                          gradient_from_arc, grad_L_eta, hessian_L_eta, refine_critical,
                          solve_radius_for_area)
from isoflow.curve import OpenCurve, report
from isoflow.errors import GeometryError, NumericalError
from isoflow.obstacle import circle, ellipse
from strategies import arcs

SQ2 = math.sqrt(2.0)
ETA = 1.0 + 0.5 * math.pi


@pytest.fixture(scope="module")
def ellipse_critical():
    return find_critical(ellipse(2.0, 1.0), 0.05)


@given(arcs())
def test_arc_invariants(case):
    body, arc = case
    assert np.linalg.norm(body.points(arc.theta1) - arc.x1) <= 1e-10
    assert np.linalg.norm(body.points(arc.theta2) - arc.x2) <= 1e-10
    assert math.sin(arc.alpha1) >= 1e-6 and math.sin(arc.alpha2) >= 1e-6
    assert np.allclose(np.linalg.norm(arc.sample(64) - arc.center, axis=1), arc.radius)


@given(arcs())
def test_gradient_bound_everywhere(case):
    _, arc = case
    assert np.linalg.norm(gradient_from_arc(arc)) <= gradient_bound(arc) * (1 + 1e-12) + 1e-15


@given(arcs(names=("unit", "ellipse")))
def test_arc_agrees_with_dense_polyline(case):
    body, arc = case
    # chordal area defect is r^2 phi^3 / (12 n^2), below 1e-8 at this density
    c = OpenCurve(arc.sample(1 << 17))
    rep = report(c, body)
    assert rep.length == pytest.approx(arc.length, abs=1e-8)
    assert rep.turning_angle == pytest.approx(arc.turning_angle, abs=1e-8)
    assert rep.area == pytest.approx(arc.area, abs=1e-8)
    # polyline end tangents are extrapolated, so angles agree to second order
    assert rep.alpha1 == pytest.approx(arc.alpha1, abs=1e-7)
    assert rep.alpha2 == pytest.approx(arc.alpha2, abs=1e-7)


@given(st.floats(1.2, 1.8), st.floats(-3.0, 3.0))
def test_criticality_characterisation_unit_circle(d, phi):
    b = circle(1.0)
    z = d * np.array([math.cos(phi), math.sin(phi)])
    arc = arc_with_area(b, z, ETA)
    g = np.linalg.norm(gradient_from_arc(arc))
    defect = arc.angle_defect()
    if abs(d - SQ2) < 1e-9:
        assert g < 1e-8 and defect < 1e-8
    else:
        assert g > 0 and defect > 0


def test_lojasiewicz_2d_constant_stable():
    # distance to the critical orbit against the angle defect, shrinking neighbourhoods
    b = circle(1.0)
    ratios = []
    for h in (0.1, 0.03, 0.01, 0.003):
        worst = 0.0
        for s in (-1, 1):
            arc = arc_with_area(b, [SQ2 + s * h, 0.0], ETA)
            worst = max(worst, h / arc.angle_defect())
        ratios.append(worst)
    assert max(ratios) / min(ratios) < 1.5


@pytest.mark.parametrize("R,eta", [(1.0, ETA), (100.0, 1.0), (3.0, 0.4)])
def test_critical_arc_curvature_range(R, eta):
    c = find_critical(circle(R), eta)[0]
    arc = c.arc
    k = 1.0 / arc.radius
    assert math.sqrt(math.pi / (2 * eta)) * (1 - 1e-9) <= k <= math.sqrt(math.pi / eta) * (1 + 1e-9)
    assert math.pi - 1e-9 <= arc.turning_angle < 2 * math.pi
    assert arc.angle_defect() < 1e-6
    lam = np.sort(np.abs(c.spectrum.eigenvalues))
    assert lam[0] < 1e-5 * max(1.0, lam[1]) and lam[1] > 1e-3 * lam[1] > 0


def test_ellipse_critical_levels_and_order(ellipse_critical):
    crit = ellipse_critical
    keys = [(round(c.length, 9), c.arc.center[0], c.arc.center[1]) for c in crit]
    assert keys == sorted(keys)
    assert len({round(c.length, 8) for c in crit}) >= 2
    for c in crit:
        assert c.arc.angle_defect() < 1e-6
        assert np.min(np.abs(c.spectrum.eigenvalues)) > 1e-6


def test_refine_from_perturbed_center(ellipse_critical):
    target = ellipse_critical[0]
    e = ellipse(2.0, 1.0)
    c = refine_critical(e, target.arc.center + [1e-3, -1e-3], 0.05, with_spectrum=False)
    assert np.linalg.norm(c.arc.center - target.arc.center) < 1e-8


def test_family_errors():
    b = circle(1.0)
    with pytest.raises(GeometryError, match="not in family"):
        arc_outside(b, [3.0, 0.0], 1.0)
    with pytest.raises(GeometryError, match="not in family"):
        arc_outside(b, [0.1, 0.0], 0.2)
    with pytest.raises(GeometryError, match="transversality|not in family"):
        arc_outside(b, [2.0, 0.0], 1.0 + 1e-13)
    with pytest.raises(GeometryError, match="unreachable"):
        solve_radius_for_area(b, [SQ2, 0.0], 0.0)
    with pytest.raises(GeometryError):
        find_critical(b, -1.0)


def test_orientation_flip_reverses_arc():
    b = circle(1.0)
    a = arc_outside(b, [SQ2, 0.0], 1.0)
    r = arc_outside(b, [SQ2, 0.0], 1.0, orientation=-1)
    assert r.length == pytest.approx(a.length, rel=1e-14)
    assert r.area == pytest.approx(-a.area, rel=1e-12)
    assert np.allclose(r.x1, a.x2) and np.allclose(r.x2, a.x1)


def test_gradient_consistent_with_hessian_direction():
    b = circle(1.0)
    g = grad_L_eta(b, [SQ2 + 0.01, 0.0], ETA)
    s = hessian_L_eta(b, [SQ2, 0.0], ETA)
    pred = s.hessian @ np.array([0.01, 0.0])
    assert g == pytest.approx(pred, rel=0.05, abs=1e-6)
    assert s.asymmetry < 1e-5


def test_unreachable_search_reports_failure():
    with pytest.raises((GeometryError, NumericalError)):
        find_critical(circle(1.0), ETA, seed_grid=[[0.0, 0.0]])
