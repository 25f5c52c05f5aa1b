import math
import pickle

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isoflow.errors import ConfigError, GeometryError
from isoflow.obstacle import (body_config, body_from_config, boundary_at, circle, ellipse,
                              fourier_body, global_quantities, is_outside, nearest_params,
                              perturbed_circle, project_to_boundary, signed_distance,
                              subarc_between, subarc_quantities)

angles = st.floats(0.0, 2 * math.pi, allow_nan=False)


def bodies():
    return st.one_of(
        st.floats(0.2, 50.0).map(circle),
        st.tuples(st.floats(0.5, 3.0), st.floats(0.5, 3.0)).map(lambda ab: ellipse(*ab)),
        st.tuples(st.floats(1.0, 3.0), st.integers(2, 6), st.floats(0.0, 0.02))
        .map(lambda t: perturbed_circle(t[0], t[1], t[2] * t[0])),
    )


@given(bodies(), angles)
def test_frame_identities(body, th):
    bp = boundary_at(body, th)
    assert abs(np.linalg.norm(bp.tangent) - 1) < 1e-14
    assert np.allclose(bp.normal, [-bp.tangent[1], bp.tangent[0]], atol=1e-15)
    assert bp.curvature > 0
    # speed of the support parametrisation is h + h''
    h, _, h2 = body.support(th)
    d = 1e-6
    speed = np.linalg.norm(body.points(th + d) - body.points(th - d)) / (2 * d)
    assert abs(speed - (h + h2)) <= 1e-6 * (h + h2)
    assert abs(1.0 / bp.curvature - (h + h2)) <= 1e-12 * (h + h2)


@given(bodies(), angles)
def test_projection_idempotent(body, th):
    p = boundary_at(body, th).position
    q = project_to_boundary(body, p).position
    assert np.linalg.norm(p - q) <= 1e-12 * (1 + np.linalg.norm(p))


@given(bodies(), angles, st.floats(1e-3, 5.0))
def test_projection_of_offset_point(body, th, d):
    bp = boundary_at(body, th)
    p = bp.position - d * bp.normal
    q = project_to_boundary(body, p)
    assert np.linalg.norm(q.position - bp.position) <= 1e-9 * (1 + d)
    assert abs(signed_distance(body, p[None, :])[0] - d) <= 1e-9 * (1 + d)
    assert is_outside(body, p[None, :])[0]


@given(bodies())
def test_width_curvature_bound(body):
    g = global_quantities(body)
    assert 1.0 / g["kappa_max"] <= 0.5 * g["width"] * (1 + 1e-9)


def test_convexity_violation_rejected():
    with pytest.raises(GeometryError, match="convexity"):
        perturbed_circle(1.0, 3, 0.2)


def test_subarc_orientation_and_periodicity():
    b = ellipse(2.0, 1.0)
    q = subarc_quantities(b, 0.3, 1.3)
    r = subarc_quantities(b, 1.3, 0.3, orientation=-1)
    assert q["length"] > 0 and q["turning_angle"] == pytest.approx(1.0, abs=1e-12)
    assert r["length"] == pytest.approx(q["length"], rel=1e-13)
    assert r["turning_angle"] == pytest.approx(-1.0, abs=1e-12)
    assert r["shoelace"] == pytest.approx(-q["shoelace"], rel=1e-12)
    assert subarc_quantities(b, 0.0, 2 * math.pi)["length"] == 0.0
    full = subarc_between(b, 0.0, 2 * math.pi)
    assert full["length"] == pytest.approx(b.boundary_length, rel=1e-12)
    assert full["shoelace"] == pytest.approx(b.area, rel=1e-10)


def test_nearest_params_batch():
    b = circle(2.0)
    pts = np.array([[3.0, 0.0], [0.0, -5.0], [1.0, 1.0]])
    th, d = nearest_params(b, pts)
    assert np.allclose(np.cos(th), [1.0, 0.0, math.sqrt(0.5)], atol=1e-12)
    assert np.allclose(d, [1.0, 3.0, math.sqrt(2) - 2.0], atol=1e-12)


@pytest.mark.parametrize("text", ["circle:2.5", "ellipse:2,1", '{"shape": "circle", "radius": 3}',
                                  {"shape": "fourier", "coeffs": [2.0, 0.0, 0.0, 0.05, 0.0]},
                                  {"shape": "ellipse", "a": 2, "b": 1, "center": [5, 1],
                                   "rotation": 0.4}])
def test_config_roundtrip_and_pickle(text):
    b = body_from_config(text)
    again = body_from_config(body_config(b))
    th = np.linspace(0, 2 * math.pi, 17)
    assert np.array_equal(b.points(th), again.points(th))
    clone = pickle.loads(pickle.dumps(b))
    assert np.array_equal(b.points(th), clone.points(th))


@pytest.mark.parametrize("text", ["square:1", "circle:x", "circle:-1", '{"radius": 1}', "{bad json",
                                  {"shape": "ellipse", "a": 1}, {"shape": "blob"}])
def test_bad_configs(text):
    with pytest.raises((ConfigError, GeometryError)):
        body_from_config(text)


def test_moved_body_is_rigid_image():
    b = ellipse(2.0, 1.0)
    m = b.moved(shift=(3.0, -1.0), angle=0.7)
    g0, g1 = global_quantities(b), global_quantities(m)
    for k in g0:
        assert g1[k] == pytest.approx(g0[k], rel=1e-9)
    c, s = math.cos(0.7), math.sin(0.7)
    p = b.points(0.2) @ np.array([[c, -s], [s, c]]).T + [3.0, -1.0]
    assert np.allclose(m.points(0.9), p, atol=1e-12)


def test_fourier_requires_positive_mean():
    with pytest.raises(ConfigError):
        fourier_body([-1.0, 0.0, 0.0])
