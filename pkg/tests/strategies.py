"""Shared hypothesis strategies: arcs of the circle family on a few obstacles."""

import math

from hypothesis import assume, strategies as st

from isoflow.arcs import arc_outside
from isoflow.errors import GeometryError
from isoflow.obstacle import boundary_at, circle, ellipse

BODIES = {"unit": circle(1.0), "big": circle(10.0), "ellipse": ellipse(2.0, 1.0)}


def make_arc(body, theta, d, frac):
    """Arc centred a distance ``d`` off the boundary point at ``theta`` with a
    radius between ``d`` and ``d + 1``."""
    bp = boundary_at(body, theta)
    z = bp.position - d * bp.normal
    r = d + frac
    try:
        return arc_outside(body, z, r)
    except GeometryError:
        assume(False)


@st.composite
def arcs(draw, names=tuple(BODIES)):
    name = draw(st.sampled_from(names))
    body = BODIES[name]
    th = draw(st.floats(0.0, 2 * math.pi))
    d = draw(st.floats(0.1, 1.0))
    frac = draw(st.floats(0.1, 0.9))
    return body, make_arc(body, th, d, frac)
