"""Discrete open curves outside a convex body.

Curvature is the exterior turning angle at a node divided by the average of
the two adjacent segment lengths.  The endpoint nodes carry half a segment of
arclength each and inherit the curvature of their neighbour, which makes the
identity ``mean_curvature * length == turning_angle`` exact and gives
second-order endpoint tangents for curves sampled from smooth arcs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from shapely.geometry import LineString, Polygon
from shapely.geometry.base import BaseGeometry
from shapely.geometry.polygon import orient
from shapely.validation import explain_validity

from .errors import GeometryError
from .obstacle import ConvexBody, TWO_PI, nearest_params, rot90, subarc_between, subarc_shoelace

ENDPOINT_TOL = 1e-10


def _rotate(v: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def signed_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Counterclockwise angle from ``a`` to ``b`` in ``(-pi, pi]``."""
    return math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])


@dataclass(frozen=True, eq=False)
class OpenCurve:
    """Ordered polyline; the first and last node are meant to lie on the boundary."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise GeometryError("nodes must be an (n, 2) array")
        if nodes.shape[0] < 8:
            raise GeometryError("a curve needs at least 8 nodes", count=int(nodes.shape[0]))
        seg = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
        if np.any(seg <= 0):
            raise GeometryError("consecutive nodes coincide")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @cached_property
    def geometry(self) -> "PolylineGeometry":
        return PolylineGeometry(self.nodes)

    @property
    def length(self) -> float:
        return self.geometry.length

    def reversed(self) -> "OpenCurve":
        return OpenCurve(self.nodes[::-1].copy())

    def moved(self, shift=(0.0, 0.0), angle: float = 0.0) -> "OpenCurve":
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return OpenCurve(self.nodes @ rot.T + np.asarray(shift, dtype=float))


class PolylineGeometry:
    """Discrete differential geometry of a polyline (no obstacle needed)."""

    def __init__(self, nodes: np.ndarray):
        x = np.asarray(nodes, dtype=float)
        e = np.diff(x, axis=0)
        seg = np.hypot(e[:, 0], e[:, 1])
        unit = e / seg[:, None]
        cross = unit[:-1, 0] * unit[1:, 1] - unit[:-1, 1] * unit[1:, 0]
        dot = np.einsum("ij,ij->i", unit[:-1], unit[1:])
        turn = np.arctan2(cross, dot)
        w = np.empty(x.shape[0])
        w[1:-1] = 0.5 * (seg[:-1] + seg[1:])
        w[0] = 0.5 * seg[0]
        w[-1] = 0.5 * seg[-1]
        kappa = np.empty(x.shape[0])
        kappa[1:-1] = turn / w[1:-1]
        kappa[0] = kappa[1]
        kappa[-1] = kappa[-2]
        self.nodes = x
        self.edges = e
        self.segment_lengths = seg
        self.unit = unit
        self.turn = turn
        self.weights = w
        self.kappa = kappa
        self.length = float(seg.sum())
        self.turning_angle = float(np.dot(kappa, w))
        self.mean_curvature = self.turning_angle / self.length
        # bisector normals J tau at interior nodes
        bis = unit[:-1] + unit[1:]
        bis /= np.linalg.norm(bis, axis=1)[:, None]
        self.node_normals = rot90(bis)

    @property
    def start_tangent(self) -> np.ndarray:
        return _rotate(self.unit[0], -0.5 * self.kappa[0] * self.segment_lengths[0])

    @property
    def end_tangent(self) -> np.ndarray:
        return _rotate(self.unit[-1], 0.5 * self.kappa[-1] * self.segment_lengths[-1])

    def curvature_deviation(self) -> float:
        v = self.kappa - self.mean_curvature
        return float(math.sqrt(np.dot(v * v, self.weights)))

    def shoelace(self) -> float:
        x = self.nodes
        return 0.5 * float(np.sum(x[:-1, 0] * x[1:, 1] - x[1:, 0] * x[:-1, 1]))


@dataclass(frozen=True)
class ClosingArc:
    """Boundary subarc from the curve's last node back to its first node."""

    theta_start: float
    theta_end: float
    orientation: int
    length: float
    turning_angle: float
    shoelace: float

    def sample(self, body: ConvexBody, n: int) -> np.ndarray:
        """``n + 1`` boundary points including both ends."""
        if self.length == 0.0:
            return body.points(np.array([self.theta_start, self.theta_start]))
        t = np.linspace(self.theta_start, self.theta_end, n + 1)
        return body.points(t)


@dataclass(frozen=True)
class CurveReport:
    length: float
    turning_angle: float
    mean_curvature: float
    alpha1: float
    alpha2: float
    area: float
    eps_kappa: float
    eps_alpha: float
    eps: float


def endpoint_params(curve: OpenCurve, body: ConvexBody, tol: float = ENDPOINT_TOL):
    """Support angles of the two endpoints; raises if they are off the boundary."""
    ends = curve.nodes[[0, -1]]
    th, dist = nearest_params(body, ends)
    scale = 1.0 + np.linalg.norm(ends, axis=1)
    if np.any(np.abs(dist) > tol * scale):
        raise GeometryError("endpoint not on boundary", distance=dist)
    return float(th[0]), float(th[1])


def validate(curve: OpenCurve, body: ConvexBody, tol: float = ENDPOINT_TOL) -> None:
    """Check the endpoint and exterior invariants."""
    endpoint_params(curve, body, tol)
    d = nearest_params(body, curve.nodes[1:-1])[1]
    if np.any(d <= 0):
        raise GeometryError("interior node inside the body", index=int(np.argmin(d)) + 1)


def resample_constant_speed(curve: OpenCurve, n: int, body: ConvexBody | None = None) -> OpenCurve:
    """``n + 1`` nodes equally spaced in polyline arclength."""
    if n < 8:
        raise GeometryError("resampling needs at least 8 segments", n=n)
    x = curve.nodes
    s = np.concatenate([[0.0], np.cumsum(curve.geometry.segment_lengths)])
    t = np.linspace(0.0, s[-1], n + 1)
    out = np.column_stack([np.interp(t, s, x[:, 0]), np.interp(t, s, x[:, 1])])
    out[0], out[-1] = x[0], x[-1]
    if body is not None:
        th, _ = nearest_params(body, out[[0, -1]])
        out[[0, -1]] = body.points(th)
    return OpenCurve(out)


def winding_sweep(nodes: np.ndarray, center: np.ndarray) -> float:
    """Total polar angle swept by a polyline around ``center``."""
    rel = nodes - center
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    return float(np.sum(np.angle(np.exp(1j * np.diff(ang)))))


def closing_orientation(body: ConvexBody, th1: float, th2: float, sweep: float) -> tuple[int, float]:
    """Orientation and signed parameter span of the closing arc from ``th2``
    back to ``th1`` for a path sweeping ``sweep`` radians around the body's
    interior point."""
    c = body.interior_point
    dtheta = (th1 - th2) % TWO_PI
    if dtheta > TWO_PI - 1e-12:
        dtheta = 0.0
    p1, p2 = body.points(np.array([th1, th2])) - c
    s_ccw = (math.atan2(p1[1], p1[0]) - math.atan2(p2[1], p2[0])) % TWO_PI
    if dtheta == 0.0:
        s_ccw = 0.0
    candidates = [(1, s_ccw, dtheta)]
    if dtheta > 0.0:
        candidates.append((-1, s_ccw - TWO_PI, dtheta - TWO_PI))
    for orient_, s, span in candidates:
        if abs(sweep + s) < 1e-6:
            return orient_, span
    raise GeometryError("multi-wrap unsupported", sweep=sweep)


def closing_arc_between(body: ConvexBody, th1: float, th2: float, sweep: float) -> ClosingArc:
    """Closing arc from ``th2`` back to ``th1`` for a path sweeping ``sweep``
    radians around the body's interior point."""
    orient_, span = closing_orientation(body, th1, th2, sweep)
    q = subarc_between(body, th2, th2 + span)
    return ClosingArc(theta_start=q["theta_start"], theta_end=q["theta_end"],
                      orientation=orient_, length=q["length"],
                      turning_angle=q["turning_angle"], shoelace=q["shoelace"])


def closing_arc(curve: OpenCurve, body: ConvexBody) -> ClosingArc:
    """The boundary subarc that closes ``curve`` with winding number zero."""
    th1, th2 = endpoint_params(curve, body)
    return closing_arc_between(body, th1, th2, winding_sweep(curve.nodes, body.interior_point))


def enclosed_area(curve: OpenCurve, body: ConvexBody, sigma: ClosingArc | None = None) -> float:
    if sigma is None:
        sigma = closing_arc(curve, body)
    return curve.geometry.shoelace() + sigma.shoelace


def area_with_params(body: ConvexBody, x: np.ndarray, theta, orientation: int | None = None):
    """Enclosed area and the orientation of the closing arc.

    Passing the orientation skips the winding computation, which is safe while
    the endpoints move by much less than the closing arc itself.
    """
    if orientation is None:
        orientation = closing_orientation(body, theta[0], theta[1],
                                          winding_sweep(x, body.interior_point))[0]
    # both parts about the first node, which sits on the boundary
    o = x[0]
    rel = x - o
    shoe = 0.5 * float(np.sum(rel[:-1, 0] * rel[1:, 1] - rel[1:, 0] * rel[:-1, 1]))
    dtheta = (theta[0] - theta[1]) % TWO_PI
    if dtheta > TWO_PI - 1e-12:
        dtheta = 0.0
    if orientation < 0 and dtheta > 0:
        dtheta -= TWO_PI
    return shoe + subarc_shoelace(body, theta[1], theta[1] + dtheta, o), orientation


def endpoint_angles(curve: OpenCurve, body: ConvexBody) -> tuple[float, float]:
    """Contact angles in the convention ``tau_body(x1) = R(alpha1) tau(x1)`` and
    ``tau_body(x2) = R(-alpha2) tau(x2)``."""
    th1, th2 = endpoint_params(curve, body)
    _, tan, _, _ = body.frame(np.array([th1, th2]))
    g = curve.geometry
    a1 = signed_angle(g.start_tangent, tan[0])
    a2 = signed_angle(tan[1], g.end_tangent)
    return a1, a2


def report(curve: OpenCurve, body: ConvexBody) -> CurveReport:
    g = curve.geometry
    a1, a2 = endpoint_angles(curve, body)
    eps_k = g.curvature_deviation()
    eps_a = abs(a1 - 0.5 * math.pi) + abs(a2 - 0.5 * math.pi)
    return CurveReport(length=g.length, turning_angle=g.turning_angle,
                       mean_curvature=g.mean_curvature, alpha1=a1, alpha2=a2,
                       area=enclosed_area(curve, body), eps_kappa=eps_k,
                       eps_alpha=eps_a, eps=eps_k + eps_a)


# -- metrics -------------------------------------------------------------------

def _unit_speed_samples(nodes: np.ndarray, m: int) -> np.ndarray:
    e = np.diff(nodes, axis=0)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(e[:, 0], e[:, 1]))])
    t = np.linspace(0.0, s[-1], m + 1)
    return np.column_stack([np.interp(t, s, nodes[:, 0]), np.interp(t, s, nodes[:, 1])])


def c1_distance(a, b) -> float:
    """Sup distance of positions plus sup distance of velocities.

    Both curves are parametrised with constant speed over ``[0, L(a)]``.
    Velocities are compared segment by segment, so the endpoint mismatch is
    measured one-sidedly.
    """
    na = np.asarray(a.nodes if isinstance(a, OpenCurve) else a, dtype=float)
    nb = np.asarray(b.nodes if isinstance(b, OpenCurve) else b, dtype=float)
    m = max(na.shape[0], nb.shape[0]) - 1
    pa = _unit_speed_samples(na, m)
    pb = _unit_speed_samples(nb, m)
    la = float(np.sum(np.linalg.norm(np.diff(na, axis=0), axis=1)))
    dp = la / m
    va = np.diff(pa, axis=0) / dp
    vb = np.diff(pb, axis=0) / dp
    return float(np.max(np.linalg.norm(pa - pb, axis=1))
                 + np.max(np.linalg.norm(va - vb, axis=1)))


def _as_points(a) -> np.ndarray:
    if isinstance(a, OpenCurve):
        return a.nodes
    if isinstance(a, BaseGeometry):
        if isinstance(a, Polygon):
            return np.asarray(a.exterior.coords)
        return np.asarray(a.coords)
    return np.asarray(a, dtype=float)


def _densify(p: np.ndarray, spacing: float) -> np.ndarray:
    e = np.diff(p, axis=0)
    seg = np.hypot(e[:, 0], e[:, 1])
    k = np.maximum(1, np.ceil(seg / spacing).astype(int))
    out = [p[:-1].repeat(k, axis=0) + (np.concatenate([np.arange(kk) / kk for kk in k])[:, None]
                                       * e.repeat(k, axis=0))]
    out.append(p[-1:])
    return np.concatenate(out)


def point_segment_distance(points: np.ndarray, poly: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Distance from each point to the polyline ``poly``."""
    a = poly[:-1]
    e = np.diff(poly, axis=0)
    ee = np.einsum("ij,ij->i", e, e)
    ee = np.where(ee > 0, ee, 1.0)
    out = np.empty(points.shape[0])
    for i in range(0, points.shape[0], chunk):
        p = points[i:i + chunk]
        d = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("ijk,jk->ij", d, e) / ee[None, :], 0.0, 1.0)
        r = d - t[:, :, None] * e[None, :, :]
        out[i:i + chunk] = np.sqrt(np.min(np.einsum("ijk,ijk->ij", r, r), axis=1))
    return out


def hausdorff_distance(a, b, spacing: float | None = None) -> float:
    """Symmetric Hausdorff distance between two polylines.

    Each polyline is densified to ``spacing`` and the dense points are measured
    exactly against the other polyline's segments, so the error is at most
    ``spacing / 2``.
    """
    pa, pb = _as_points(a), _as_points(b)
    if spacing is None:
        diam = max(np.ptp(pa, axis=0).max(), np.ptp(pb, axis=0).max(), 1e-300)
        spacing = 2e-4 * diam
    da = point_segment_distance(_densify(pa, spacing), pb)
    db = point_segment_distance(_densify(pb, spacing), pa)
    return float(max(da.max(), db.max()))


def as_geometry(region) -> BaseGeometry:
    if isinstance(region, BaseGeometry):
        geom = region
    else:
        geom = Polygon(np.asarray(region, dtype=float))
    if not geom.is_valid:
        raise GeometryError("self-intersecting region polygon",
                            reason=explain_validity(geom))
    return geom


def symmetric_difference_area(a, b) -> float:
    return float(as_geometry(a).symmetric_difference(as_geometry(b)).area)


def region_polygon(curve: OpenCurve, body: ConvexBody, spacing: float | None = None) -> Polygon:
    """Polygon bounded by the curve and its closing arc.

    The arc is sampled on a global grid of support angles (plus its two ends),
    so regions that share a stretch of boundary share the same vertices there.
    The grid spacing defaults to the curve's mean segment length.
    """
    sigma = closing_arc(curve, body)
    if spacing is None:
        spacing = curve.length / (curve.n_nodes - 1)
    ring = curve.nodes
    if sigma.length > 0:
        ring = np.concatenate([ring, boundary_samples(body, sigma, spacing)])
    poly = Polygon(ring)
    if not poly.is_valid:
        raise GeometryError("self-intersecting region polygon",
                            reason=explain_validity(poly))
    return orient(poly, 1.0)


def boundary_samples(body: ConvexBody, sigma: ClosingArc, spacing: float) -> np.ndarray:
    """Interior sample points of a closing arc on a fixed global angle grid."""
    rho_max = float(np.max(body.table["h"] + body.table["h2"]))
    dth = spacing / rho_max
    m = int(math.ceil(TWO_PI / dth))
    dth = TWO_PI / m
    a, b = sigma.theta_start, sigma.theta_end
    lo, hi = min(a, b), max(a, b)
    k = np.arange(math.floor(lo / dth) + 1, math.ceil(hi / dth))
    th = k * dth
    th = th[(th > lo + 1e-3 * dth) & (th < hi - 1e-3 * dth)]
    if b < a:
        th = th[::-1]
    return body.points(th)


def is_simple(curve: OpenCurve) -> bool:
    return bool(LineString(curve.nodes).is_simple)


def read_curve_csv(path) -> OpenCurve:
    """Nodes from a CSV of ``x,y`` rows; ``#`` comment lines and a header row are skipped."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            if not rows and not _is_number(rec[0]):
                continue
            rows.append([float(v) for v in rec[:2]])
    return OpenCurve(np.array(rows, dtype=float).reshape(-1, 2))


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False
