import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isoflow.curve import (OpenCurve, c1_distance, closing_arc, enclosed_area, hausdorff_distance,
                           read_curve_csv, region_polygon, report, resample_constant_speed,
                           symmetric_difference_area, validate)
from isoflow.errors import GeometryError
from isoflow.obstacle import circle
from strategies import arcs


@given(arcs())
def test_report_identities(case):
    body, arc = case
    rep = report(arc.to_curve(256), body)
    assert rep.mean_curvature * rep.length == pytest.approx(rep.turning_angle, rel=1e-14)
    assert rep.eps == pytest.approx(rep.eps_kappa + rep.eps_alpha, rel=1e-14)
    assert rep.eps >= 0
    # a sampled circle has constant discrete curvature
    assert rep.eps_kappa < 1e-9


@given(arcs())
def test_reversal(case):
    body, arc = case
    c = arc.to_curve(128)
    a, b = report(c, body), report(c.reversed(), body)
    assert b.turning_angle == pytest.approx(-a.turning_angle, abs=1e-12)
    assert b.mean_curvature == pytest.approx(-a.mean_curvature, abs=1e-12)
    assert b.area == pytest.approx(-a.area, abs=1e-12 * (1 + abs(a.area)))
    assert b.length == pytest.approx(a.length, rel=1e-14)
    assert b.eps == pytest.approx(a.eps, abs=1e-12)


@given(arcs(), st.floats(-3.0, 3.0), st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))
def test_rigid_motion_invariance(case, angle, sx, sy):
    body, arc = case
    c = arc.to_curve(128)
    moved_body = body.moved(shift=(sx, sy), angle=angle)
    moved = c.moved((sx, sy), angle)
    a, b = report(c, body), report(moved, moved_body)
    for k in ("length", "turning_angle", "area", "eps"):
        assert getattr(b, k) == pytest.approx(getattr(a, k), rel=1e-8, abs=1e-8)


@given(arcs())
def test_area_matches_arc_and_lower_length_bound(case):
    body, arc = case
    c = arc.to_curve(2048)
    area = enclosed_area(c, body)
    assert area == pytest.approx(arc.area, rel=1e-5)
    # half-plane lower bound of the profile holds for every curve in the class
    assert arc.length >= math.sqrt(2 * math.pi * arc.area) * (1 - 1e-12)


@given(arcs())
def test_turning_angle_lower_bound(case):
    body, arc = case
    beta = max(abs(arc.alpha1 - 0.5 * math.pi), abs(arc.alpha2 - 0.5 * math.pi))
    if beta < 0.5 * math.pi:
        assert abs(report(arc.to_curve(256), body).turning_angle) >= math.pi - 2 * beta - 1e-9


@given(arcs(), st.floats(-1.0, 1.0))
def test_area_first_variation(case, sign):
    body, arc = case
    c = arc.to_curve(512)
    g = c.geometry
    n = c.n_nodes
    p = np.arange(n) / (n - 1)
    bump = np.sin(np.pi * p) ** 4
    x = np.zeros_like(c.nodes)
    x[1:-1] = (sign * bump[1:-1])[:, None] * g.node_normals
    t = 1e-6
    moved = OpenCurve(c.nodes + t * x)
    fd = (enclosed_area(moved, body) - enclosed_area(c, body)) / t
    exact = -float(np.dot(sign * bump, g.weights))
    assert fd == pytest.approx(exact, rel=1e-4, abs=1e-9)


def test_opencurve_validation():
    with pytest.raises(GeometryError):
        OpenCurve(np.zeros((5, 2)))
    with pytest.raises(GeometryError):
        OpenCurve(np.zeros((10, 3)))
    x = np.column_stack([np.linspace(1, 2, 10), np.zeros(10)])
    x[4] = x[3]
    with pytest.raises(GeometryError, match="coincide"):
        OpenCurve(x)


def test_validate_endpoint_and_exterior():
    b = circle(1.0)
    t = np.linspace(-0.5, 0.5, 20)
    inside = OpenCurve(np.column_stack([np.cos(t) * 0.9, np.sin(t) * 0.9]))
    with pytest.raises(GeometryError, match="endpoint"):
        validate(inside, b)
    x = np.column_stack([np.cos(t), np.sin(t)])
    x[1:-1] *= 0.95
    with pytest.raises(GeometryError, match="inside"):
        validate(OpenCurve(x), b)
    x = np.column_stack([np.cos(t), np.sin(t)])
    x[1:-1] *= 1.05
    validate(OpenCurve(x), b)


def test_multi_wrap_rejected():
    b = circle(1.0)
    s = np.linspace(0.0, 1.0, 200)
    ang = 2.2 * 2 * math.pi * s
    rad = 1.0 + np.sin(np.pi * s) * 0.5
    x = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    x[-1] = [math.cos(ang[-1]), math.sin(ang[-1])]
    with pytest.raises(GeometryError, match="multi-wrap"):
        closing_arc(OpenCurve(x), b)


def test_resample_rejects_small_n_and_reprojects():
    b = circle(1.0)
    t = np.linspace(-0.5, 0.5, 30)
    c = OpenCurve(np.column_stack([1 + np.sin(np.pi * (t + 0.5)), t]))
    with pytest.raises(GeometryError):
        resample_constant_speed(c, 4)
    out = resample_constant_speed(c, 40, b)
    assert np.allclose(np.linalg.norm(out.nodes[[0, -1]], axis=1), 1.0, atol=1e-14)


def test_c1_translation_and_symmetry():
    b = circle(1.0)
    x = np.column_stack([np.linspace(1, 2, 50), np.linspace(0, 0.3, 50) ** 2])
    assert c1_distance(x, x + [0.2, 0.0]) == pytest.approx(0.2, abs=1e-12)
    y = x * [1.0, 1.1]
    assert c1_distance(x, y) == pytest.approx(c1_distance(y, x), rel=0.05)


def test_hausdorff_and_symdiff_identical():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
    assert hausdorff_distance(sq, sq) == 0.0
    assert symmetric_difference_area(sq, sq) == 0.0
    bow = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
    with pytest.raises(GeometryError, match="self-intersecting"):
        symmetric_difference_area(bow, sq)


def test_region_polygon_area_matches_enclosed_area():
    b = circle(1.0)
    from isoflow.arcs import arc_outside
    arc = arc_outside(b, [math.sqrt(2), 0.0], 1.0)
    c = arc.to_curve(1024)
    poly = region_polygon(c, b)
    assert poly.area == pytest.approx(enclosed_area(c, b), rel=1e-5)


def test_read_curve_csv(tmp_path):
    p = tmp_path / "c.csv"
    x = np.column_stack([np.linspace(1, 2, 12), np.linspace(0, 1, 12)])
    p.write_text("# comment\nx,y\n" + "\n".join(f"{float(a)!r},{float(b)!r}" for a, b in x))
    assert np.array_equal(read_curve_csv(p).nodes, x)
