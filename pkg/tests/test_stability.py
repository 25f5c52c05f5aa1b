import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from shapely.geometry import Point, Polygon, box

from isoflow.arcs import isoperimetric_profile
from isoflow.errors import GeometryError
from isoflow.flow import C_BAR, C_BAR_FORMULA, C_BAR_QUOTED
from isoflow.obstacle import circle
from isoflow.stability import (PolygonSet, deficit, profile_bounds, reduce, region_area,
                               relative_boundary, relative_perimeter,
                               select_component_fill_holes, stability_experiment,
                               sublinearity_constant)
from battery import _box, _dome, _flare, attached, far_square

UNIT = circle(1.0)


def test_c_bar_constants():
    # 4/(25 pi) asin(1/(4 pi))^2 evaluated independently
    s = math.asin(1.0 / (4.0 * math.pi))
    assert C_BAR_FORMULA == pytest.approx(4.0 * s * s / (25.0 * math.pi), rel=1e-15)
    assert C_BAR_FORMULA == pytest.approx(3.2320e-4, rel=1e-4)
    assert C_BAR_QUOTED == 0.0415
    assert C_BAR == C_BAR_FORMULA


@given(st.floats(0.0, 2 * math.pi), st.floats(0.05, 0.6), st.floats(0.1, 1.0))
def test_region_area_replaces_chords_by_the_boundary(mid, half, h):
    poly = attached(UNIT, mid, half, _box(h), sigma_nodes=16)
    dth = 2 * half / 16
    segments = 16 * 0.5 * (dth - math.sin(dth))
    assert region_area(poly, UNIT) == pytest.approx(poly.area - segments, rel=1e-10)
    # the boundary stretch is excluded from the perimeter
    assert relative_perimeter(poly, UNIT) == pytest.approx(poly.length - 16 * 2 * math.sin(dth / 2),
                                                           rel=1e-10)


@given(st.floats(0.0, 2 * math.pi), st.floats(0.1, 0.5), st.floats(0.2, 1.0),
       st.sampled_from(["box", "dome", "flare"]))
def test_attached_regions_are_above_the_profile(mid, half, h, shape):
    free = {"box": _box(h), "dome": _dome(h), "flare": _flare(h, 1.5)}[shape]
    poly = attached(UNIT, mid, half, free)
    eta = region_area(poly, UNIT)
    assert deficit(PolygonSet([poly], eta), UNIT, eta) > 0


@settings(max_examples=6)
@given(st.floats(0.0, 2 * math.pi), st.floats(0.15, 0.4), st.floats(0.3, 0.8))
def test_reduce_contracts_on_random_boxes(mid, half, h):
    poly = attached(UNIT, mid, half, _box(h))
    eta = region_area(poly, UNIT)
    curve, rep = reduce(PolygonSet([poly], eta), UNIT, eta, n=128)
    c = rep.contracts(eta)
    assert c["all"], c
    assert curve.length <= relative_perimeter(poly, UNIT) + rep.stages[-1]["eps_budget"]
    assert rep.deficit_out >= -1e-3


@given(st.floats(0.003, 0.05))
def test_speck_selection_accounts_for_dropped_area(side):
    main = attached(UNIT, 0.0, 0.3, _box(0.6))
    sq = far_square(UNIT, side)
    eta = region_area(main, UNIT) + sq.area
    F, info = select_component_fill_holes(PolygonSet([main, sq], eta), UNIT, eta)
    assert info["dropped_components"] == 1
    assert info["far_ball_area"] == pytest.approx(side * side, rel=1e-9)
    assert info["perimeter_out"] < info["perimeter_in"]


def test_profile_bound_ordering():
    for eta in (0.01, 0.3, 1.0, 5.0):
        for k in (0.01, 1.0, 10.0):
            lo, up, imp = profile_bounds(eta, k)
            assert lo <= imp <= up
            assert 0 < sublinearity_constant(eta, k) < math.sqrt(2 / math.pi) * math.pi / 2
    for eta in (0.3, 1.0, 3.0):
        lo, up, imp = profile_bounds(eta, UNIT.kappa_max)
        assert lo <= isoperimetric_profile(UNIT, eta) <= imp


def test_deficit_monotone_along_family():
    r = stability_experiment(circle(100.0), 1.0, "dent", [0.01, 0.02, 0.04], n=128)
    assert r["monotone"]
    d = [row["deficit"] for row in r["rows"]]
    assert all(v > 0 for v in d)


# -- errors --------------------------------------------------------------------

def test_empty_set():
    with pytest.raises(GeometryError):
        PolygonSet([])


def test_invalid_polygon():
    bow = Polygon([(2, 0), (3, 1), (3, 0), (2, 1)])
    with pytest.raises(GeometryError):
        PolygonSet([bow])


def test_vertex_inside_body():
    with pytest.raises(GeometryError, match="inside"):
        PolygonSet([box(0.5, -0.2, 1.5, 0.2)]).check_outside(UNIT)


def test_no_boundary_contact():
    sq = far_square(UNIT, 0.5)
    with pytest.raises(GeometryError, match="no boundary contact"):
        relative_boundary(sq, UNIT)
    with pytest.raises(GeometryError):
        reduce(PolygonSet([sq], sq.area), UNIT, sq.area, n=64)


def test_hole_containing_body():
    ring = Point(0, 0).buffer(3.0, 128).difference(Point(0, 0).buffer(2.0, 128))
    with pytest.raises(GeometryError, match="hole contains the body"):
        select_component_fill_holes(PolygonSet([ring]), UNIT, ring.area)


def test_large_dropped_component_exceeds_offset_bound():
    # two comparable components: the offset restoring the dropped area is not small
    a = attached(UNIT, 0.0, 0.3, _box(0.6))
    b = attached(UNIT, math.pi, 0.3, _box(0.6))
    eta = region_area(a, UNIT) + region_area(b, UNIT)
    with pytest.raises(GeometryError, match="offset exceeds"):
        reduce(PolygonSet([a, b], eta), UNIT, eta, n=128)
