"""Reduction of arbitrary regions to smooth convex competitors, and the
stability measurements built on top of it.

Regions are shapely polygons lying outside the body; an edge whose two ends
sit on the boundary curve is treated as a stretch of that curve (for a convex
body such a chord cannot bound anything outside it).  Areas are exact: every
boundary chord is replaced by the arc it subtends.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import MultiPoint, MultiPolygon, Polygon
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

from .arcs import find_critical, isoperimetric_profile
from .curve import (OpenCurve, PolylineGeometry, area_with_params, hausdorff_distance,
                    region_polygon, signed_angle, symmetric_difference_area)
from .errors import GeometryError, IsoflowError, NumericalError
from .flow import (FlowConfig, _with_area, bump_profile, check_preconditions, discrete_critical,
                   perturbed_nodes, prepare, prepare_with_offset, run)
from .obstacle import ConvexBody, TWO_PI, nearest_params, subarc_shoelace

SIGMA_TOL = 1e-9
ANGLE_TOL = 1e-6


# -- regions ---------------------------------------------------------------------

@dataclass
class PolygonSet:
    """Finite union of polygons (with holes) outside a convex body."""

    polygons: list
    eta: float | None = None

    def __post_init__(self):
        polys = []
        for p in self.polygons:
            if isinstance(p, MultiPolygon):
                polys.extend(p.geoms)
            else:
                polys.append(p)
        if not polys:
            raise GeometryError("empty polygon set")
        for p in polys:
            if not isinstance(p, Polygon) or not p.is_valid or p.is_empty:
                raise GeometryError("invalid polygon in set")
        self.polygons = [orient(p, 1.0) for p in polys]

    @property
    def geometry(self):
        return unary_union(self.polygons)

    def components(self) -> list[Polygon]:
        g = self.geometry
        return list(g.geoms) if isinstance(g, MultiPolygon) else [g]

    def check_outside(self, body: ConvexBody) -> None:
        for p in self.components():
            for ring in [p.exterior, *p.interiors]:
                pts = np.asarray(ring.coords)
                d = nearest_params(body, pts)[1]
                if np.any(d < -SIGMA_TOL * (1 + np.linalg.norm(pts, axis=1))):
                    raise GeometryError("polygon vertex inside the body")

    @classmethod
    def from_curve(cls, curve, body: ConvexBody, eta: float | None = None, extra=()):
        c = curve if isinstance(curve, OpenCurve) else OpenCurve(curve)
        return cls([region_polygon(c, body), *extra], eta)


def _as_geometry(region, body: ConvexBody):
    if isinstance(region, PolygonSet):
        return region.geometry
    if isinstance(region, OpenCurve):
        return region_polygon(region, body)
    if isinstance(region, (Polygon, MultiPolygon)):
        return region
    return region_polygon(OpenCurve(region), body)


def _polys(geom) -> list[Polygon]:
    return list(geom.geoms) if isinstance(geom, MultiPolygon) else [geom]


def _on_sigma(body: ConvexBody, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    th, d = nearest_params(body, pts)
    scale = 1.0 + np.linalg.norm(pts, axis=1)
    return np.abs(d) <= SIGMA_TOL * scale, th


def _ring_terms(body: ConvexBody, coords: np.ndarray) -> tuple[float, float]:
    """Signed exact area and relative length of a closed ring."""
    pts = coords[:-1] if np.allclose(coords[0], coords[-1]) else coords
    nxt = np.roll(pts, -1, axis=0)
    flags, th = _on_sigma(body, pts)
    sig = flags & np.roll(flags, -1)
    o = pts[0]
    a, b = pts - o, nxt - o
    area = 0.5 * float(np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]))
    for i in np.flatnonzero(sig):
        ta = float(th[i])
        dth = (float(th[(i + 1) % len(pts)]) - ta + math.pi) % TWO_PI - math.pi
        chord = 0.5 * float((pts[i] - o) @ np.array([nxt[i][1] - o[1], -(nxt[i][0] - o[0])]))
        area += subarc_shoelace(body, ta, ta + dth, o) - chord
    seg = np.linalg.norm(nxt - pts, axis=1)
    return area, float(np.sum(seg[~sig]))


def region_area(region, body: ConvexBody) -> float:
    total = 0.0
    for p in _polys(_as_geometry(region, body)):
        a, _ = _ring_terms(body, np.asarray(p.exterior.coords))
        total += abs(a)
        for h in p.interiors:
            total -= abs(_ring_terms(body, np.asarray(h.coords))[0])
    return total


def relative_perimeter(region, body: ConvexBody) -> float:
    """Boundary length not lying on the body's boundary."""
    total = 0.0
    for p in _polys(_as_geometry(region, body)):
        for ring in [p.exterior, *p.interiors]:
            total += _ring_terms(body, np.asarray(ring.coords))[1]
    return total


def deficit(region, body: ConvexBody, eta: float, profile: float | None = None) -> float:
    """Relative perimeter minus the isoperimetric profile at ``eta``."""
    area = region_area(region, body)
    if abs(area - eta) > 1e-6 * eta:
        raise GeometryError("area mismatch", area=area, eta=eta)
    if profile is None:
        profile = isoperimetric_profile(body, eta)
    return relative_perimeter(region, body) - profile


def boundary_hausdorff(a, b, body: ConvexBody) -> float:
    """Hausdorff distance between the full boundaries of two regions."""
    def rings(g):
        out = []
        for p in _polys(_as_geometry(g, body)):
            out.extend(np.asarray(r.coords) for r in [p.exterior, *p.interiors])
        return out

    ra, rb = rings(a), rings(b)
    pa = np.concatenate(ra)
    pb = np.concatenate(rb)
    if len(ra) == 1 and len(rb) == 1:
        return hausdorff_distance(pa, pb)
    # several rings: compare every ring against the union of the other side
    from .curve import _densify, point_segment_distance
    spacing = 2e-4 * max(np.ptp(np.concatenate([pa, pb]), axis=0))

    def one_sided(src, dst):
        best = 0.0
        for r in src:
            q = _densify(r, spacing)
            d = np.min(np.stack([point_segment_distance(q, s) for s in dst]), axis=0)
            best = max(best, float(d.max()))
        return best

    return max(one_sided(ra, rb), one_sided(rb, ra))


def relative_boundary(poly: Polygon, body: ConvexBody) -> np.ndarray:
    """Nodes of the part of a polygon's outer boundary off the body, ordered so
    that the polygon lies to the left."""
    if len(poly.interiors):
        raise GeometryError("region has holes")
    pts = np.asarray(orient(poly, 1.0).exterior.coords)[:-1]
    flags, _ = _on_sigma(body, pts)
    sig = flags & np.roll(flags, -1)
    if not np.any(sig):
        raise GeometryError("no boundary contact")
    if np.all(sig):
        raise GeometryError("region has no free boundary")
    starts = np.flatnonzero(sig & ~np.roll(sig, 1))
    if starts.size != 1:
        raise GeometryError("boundary contact is not connected", runs=int(starts.size))
    # the free part runs from the end of the boundary stretch to its start
    ends = np.flatnonzero(sig & ~np.roll(sig, -1))
    first = (int(ends[0]) + 1) % len(pts)
    last = int(starts[0])
    idx = np.arange(first, first + (last - first) % len(pts) + 1) % len(pts)
    return pts[idx]


def _ensure_nodes(x: np.ndarray, m: int = 8) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    while x.shape[0] < m:
        seg = np.linalg.norm(np.diff(x, axis=0), axis=1)
        i = int(np.argmax(seg))
        x = np.insert(x, i + 1, 0.5 * (x[i] + x[i + 1]), axis=0)
    return x


def _dedupe(x: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    keep = [0]
    scale = 1.0 + float(np.max(np.abs(x)))
    for i in range(1, len(x)):
        if np.linalg.norm(x[i] - x[keep[-1]]) > tol * scale:
            keep.append(i)
    return x[keep]


def _length(x: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(x, axis=0), axis=1)))


def curve_area(body: ConvexBody, x: np.ndarray) -> float:
    """Exact enclosed area of an open polyline with both ends on the boundary."""
    th = nearest_params(body, np.asarray(x)[[0, -1]])[0]
    return area_with_params(body, np.asarray(x, dtype=float), (float(th[0]), float(th[1])))[0]


def chord_bound(path: np.ndarray, lbar: float) -> dict:
    """``d_H(path, chord)^2`` against ``lbar * (L(path) - |chord|)``."""
    chord = np.array([path[0], path[-1]])
    d = hausdorff_distance(path, chord)
    drop = _length(path) - float(np.linalg.norm(path[-1] - path[0]))
    rhs = lbar * max(drop, 0.0)
    return {"hausdorff": d, "length_drop": drop, "bound": rhs,
            "holds": bool(d * d <= rhs * (1 + 1e-9) + 1e-14 * lbar * lbar)}


def contact_angles(body: ConvexBody, x: np.ndarray) -> tuple[float, float]:
    """Interior angles of the enclosed region at the two ends, measured from the
    first and last edge against the boundary tangent."""
    th = nearest_params(body, np.asarray(x)[[0, -1]])[0]
    _, tan, _, _ = body.frame(th)
    d0 = x[1] - x[0]
    d1 = x[-1] - x[-2]
    return signed_angle(d0, tan[0]), signed_angle(tan[1], d1)


# -- stage 1 ---------------------------------------------------------------------

def select_component_fill_holes(E: PolygonSet, body: ConvexBody, eta: float | None = None):
    """Largest component with its holes filled.

    When dropping components leaves the area short, the far-away ball that
    would make it up is only accounted for (its area and perimeter are
    reported); the area itself is restored later by the offset in
    :func:`mollify`.
    """
    comps = E.components()
    if not comps:
        raise GeometryError("empty input")
    eta = E.eta if eta is None else eta
    areas = [region_area(c, body) for c in comps]
    k = int(np.argmax(areas))
    main = comps[k]
    filled = Polygon(main.exterior)
    if filled.contains(body_polygon(body, 64).centroid):
        raise GeometryError("hole contains the body")
    area_in = region_area(E, body)
    area_out = region_area(filled, body)
    short = 0.0 if eta is None else max(eta - area_out, 0.0)
    info = {"perimeter_in": relative_perimeter(E, body),
            "perimeter_out": relative_perimeter(filled, body),
            "area_in": area_in, "area_out": area_out,
            "dropped_components": len(comps) - 1,
            "dropped_area": float(sum(a for i, a in enumerate(areas) if i != k)),
            "filled_area": area_out - areas[k],
            "sym_diff": symmetric_difference_area(E.geometry, filled),
            "far_ball_area": short,
            "far_ball_perimeter": 2.0 * math.sqrt(math.pi * short)}
    return filled, info


def body_polygon(body: ConvexBody, n: int = 4096) -> Polygon:
    th = np.arange(n) * (TWO_PI / n)
    return Polygon(body.points(th))


# -- stage 2 ---------------------------------------------------------------------

def _unwrapped_theta(body: ConvexBody, pts: np.ndarray, ref: float) -> np.ndarray:
    th = nearest_params(body, pts)[0]
    return ref + (th - ref + math.pi) % TWO_PI - math.pi


def _dense_params(x: np.ndarray, per_edge: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points along the polyline with their edge index and edge parameter."""
    m = x.shape[0] - 1
    t = np.arange(per_edge) / per_edge
    edge = np.repeat(np.arange(m), per_edge)
    tt = np.tile(t, m)
    pts = x[edge] + tt[:, None] * (x[edge + 1] - x[edge])
    pts = np.concatenate([pts, x[-1:]])
    edge = np.concatenate([edge, [m - 1]])
    tt = np.concatenate([tt, [1.0]])
    return pts, edge, tt


def clip_and_hull(region, body: ConvexBody, samples_per_edge: int | None = None):
    """Replace the tails outside the normal-ray strip by segments to the
    extreme normal feet, then take the convex hull.

    Returns the nodes of the new free boundary and a report including the
    chord-bound checks for every replaced tail and hull edge.
    """
    if isinstance(region, (Polygon, MultiPolygon, PolygonSet)):
        g = _as_geometry(region, body)
        if isinstance(g, MultiPolygon):
            raise GeometryError("region is not connected")
        gamma = relative_boundary(g, body)
    else:
        gamma = np.asarray(region.nodes if isinstance(region, OpenCurve) else region, dtype=float)
    gamma = _dedupe(gamma)
    lbar = _length(gamma)
    if samples_per_edge is None:
        samples_per_edge = max(4, int(math.ceil(4000 / max(len(gamma) - 1, 1))))
    dense, edge, tt = _dense_params(gamma, samples_per_edge)
    ref = float(nearest_params(body, gamma[:1])[0][0])
    th = _unwrapped_theta(body, dense, ref)
    sgn = 1.0 if th[-1] >= th[0] else -1.0
    s = sgn * th
    tol = 1e-12
    s0, s1 = float(s.min()), float(s.max())
    i_lo = int(np.flatnonzero(s <= s0 + tol)[-1])
    i_hi = int(np.flatnonzero(s >= s1 - tol)[0])
    if i_lo >= i_hi:
        raise GeometryError("normal-ray strip is degenerate")
    j0, j1 = sgn * s0, sgn * s1
    x0, x1 = body.points(np.array([j0, j1]))
    p_lo, p_hi = dense[i_lo], dense[i_hi]
    e_lo, e_hi = int(edge[i_lo]), int(edge[i_hi])
    mid = gamma[e_lo + 1:e_hi + 1]
    hat = _dedupe(np.concatenate([[x0, p_lo], mid, [p_hi, x1]]))
    checks = []
    tail0 = _dedupe(np.concatenate([gamma[:e_lo + 1], [p_lo]]))
    tail1 = _dedupe(np.concatenate([[p_hi], gamma[e_hi + 1:]]))
    for tail in (tail0, tail1):
        if len(tail) >= 2 and _length(tail) > 0:
            checks.append(dict(kind="tail", **chord_bound(tail, lbar)))
    # the region lies to the left of a counterclockwise-turning free boundary
    ccw = sgn > 0
    hull = orient(MultiPoint([tuple(p) for p in hat]).convex_hull, 1.0 if ccw else -1.0)
    ring = np.asarray(hull.exterior.coords)[:-1]
    k0 = int(np.argmin(np.linalg.norm(ring - x0, axis=1)))
    k1 = int(np.argmin(np.linalg.norm(ring - x1, axis=1)))
    if np.linalg.norm(ring[k0] - x0) > 1e-12 * (1 + lbar) or \
            np.linalg.norm(ring[k1] - x1) > 1e-12 * (1 + lbar):
        raise GeometryError("contact points are not hull vertices")
    n = len(ring)
    chain = ring[(k0 + np.arange((k1 - k0) % n + 1)) % n]
    chain[0], chain[-1] = x0, x1
    index = {tuple(p): i for i, p in enumerate(hat)}
    pos = [index.get(tuple(p)) for p in chain]
    for a, b, pa, pb in zip(pos[:-1], pos[1:], chain[:-1], chain[1:]):
        if a is not None and b is not None and b > a + 1:
            checks.append(dict(kind="hull", **chord_bound(hat[a:b + 1], lbar)))
    chain = _ensure_nodes(chain)
    a1, a2 = contact_angles(body, chain)
    info = {"perimeter_in": lbar, "perimeter_clipped": _length(hat),
            "perimeter_out": _length(chain), "theta_range": (j0, j1),
            "tails_replaced": int(i_lo > 0) + int(i_hi < len(dense) - 1),
            "chord_checks": checks, "contact_angles": (a1, a2),
            "hausdorff": hausdorff_distance(gamma, chain)}
    info["perimeter_drop"] = lbar - info["perimeter_out"]
    if info["perimeter_out"] > lbar * (1 + 1e-12) or info["perimeter_clipped"] > lbar * (1 + 1e-12):
        raise NumericalError("perimeter increased in clip_and_hull", **info)
    if max(a1, a2) > 0.5 * math.pi + ANGLE_TOL:
        raise NumericalError("contact angle above a right angle", angles=(a1, a2))
    return chain, info


# -- stage 3 ---------------------------------------------------------------------

def _ray_hit(p: np.ndarray, d: np.ndarray, x: np.ndarray) -> tuple[float, int]:
    """First crossing of the ray ``p + t d`` (t > 0) with the polyline ``x``."""
    a = x[:-1]
    e = x[1:] - a
    w = a - p
    den = d[0] * e[:, 1] - d[1] * e[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]) / den
        s = (w[:, 0] * d[1] - w[:, 1] * d[0]) / den
    ok = np.isfinite(t) & (t > 1e-14) & (s >= -1e-12) & (s <= 1 + 1e-12)
    if not np.any(ok):
        raise GeometryError("normal ray misses the curve")
    i = int(np.flatnonzero(ok)[np.argmin(t[ok])])
    return float(t[i]), i


def _cut(body: ConvexBody, x: np.ndarray, j: float) -> np.ndarray:
    _, _, nrm, _ = body.frame(np.array(j))
    p = body.points(np.array(j))
    d = -nrm
    t, i = _ray_hit(p, d, x)
    hit = p + t * d
    return _dedupe(np.concatenate([[p, hit], x[i + 1:]]))


def area_correct_down(x, body: ConvexBody, eta: float, tol: float = 1e-10):
    """Cut the region with a normal ray swept from the first contact point
    until the enclosed area is ``eta``."""
    x = np.asarray(x.nodes if isinstance(x, OpenCurve) else x, dtype=float)
    a0 = curve_area(body, x)
    info = {"area_in": a0, "perimeter_in": _length(x)}
    if a0 <= eta * (1 + tol):
        info.update(area_out=a0, perimeter_out=info["perimeter_in"], cut=None,
                    removed_area=0.0, hausdorff=0.0, removed_diameter=0.0)
        return x, info
    th = nearest_params(body, x[[0, -1]])[0]
    _, orientation = area_with_params(body, x, (float(th[0]), float(th[1])))
    span = (float(th[0]) - float(th[1])) % TWO_PI
    if orientation < 0:
        span -= TWO_PI
    # contact stretch from the first end: theta0 - s * span, s in [0, 1]
    lo = float(th[0])
    hi = lo - span
    f_lo = a0 - eta
    best = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        y = _cut(body, x, mid)
        f = curve_area(body, y) - eta
        if best is None or abs(f) < abs(best[1]):
            best = (mid, f, y)
        if abs(f) <= 0.01 * tol * eta:
            break
        if (f > 0) == (f_lo > 0):
            lo, f_lo = mid, f
        else:
            hi = mid
        if abs(hi - lo) <= 1e-16 * (1 + abs(mid)):
            break
    j, f, y = best
    if abs(f) > tol * eta:
        raise NumericalError("area correction did not converge", error=f)
    y = _ensure_nodes(y)
    removed = Polygon(np.concatenate([x, y[::-1]])).buffer(0)
    info.update(area_out=f + eta, perimeter_out=_length(y), cut=j, removed_area=a0 - eta - f,
                hausdorff=hausdorff_distance(x, y),
                removed_diameter=float(max(np.ptp(np.asarray(removed.convex_hull.exterior.coords),
                                                  axis=0) @ [1, 1], 0.0))
                if not removed.is_empty else 0.0)
    if info["perimeter_out"] > info["perimeter_in"] * (1 + 1e-12):
        raise NumericalError("perimeter increased in the area cut", **info)
    return y, info


# -- stage 4 ---------------------------------------------------------------------

def bezier_corner(prev: np.ndarray, corner: np.ndarray, nxt: np.ndarray, fraction: float = 0.45):
    """Cubic control points rounding ``corner``; both inner controls sit on the
    corner, so the patch starts and ends with zero curvature."""
    din = corner - prev
    dout = nxt - corner
    r = fraction * min(np.linalg.norm(din), np.linalg.norm(dout))
    p0 = corner - r * din / np.linalg.norm(din)
    p3 = corner + r * dout / np.linalg.norm(dout)
    return np.array([p0, corner, corner, p3])


def bezier_eval(ctrl: np.ndarray, t, order: int = 0) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
    p0, p1, p2, p3 = ctrl
    if order == 0:
        return ((1 - t) ** 3 * p0 + 3 * (1 - t) ** 2 * t * p1 + 3 * (1 - t) * t ** 2 * p2
                + t ** 3 * p3)
    if order == 1:
        return 3 * (1 - t) ** 2 * (p1 - p0) + 6 * (1 - t) * t * (p2 - p1) + 3 * t ** 2 * (p3 - p2)
    if order == 2:
        return 6 * (1 - t) * (p2 - 2 * p1 + p0) + 6 * t * (p3 - 2 * p2 + p1)
    raise ValueError("order must be 0, 1 or 2")


def bezier_curvature(ctrl: np.ndarray, t) -> np.ndarray:
    d1 = bezier_eval(ctrl, t, 1)
    d2 = bezier_eval(ctrl, t, 2)
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return cross / np.linalg.norm(d1, axis=1) ** 3


def smooth_corners(x: np.ndarray, fraction: float = 0.45, samples: int = 8,
                   min_turn: float = 1e-9) -> np.ndarray:
    """Round every interior corner of a polyline with a cubic patch."""
    x = np.asarray(x, dtype=float)
    out = [x[0]]
    for i in range(1, len(x) - 1):
        turn = signed_angle(x[i] - x[i - 1], x[i + 1] - x[i])
        if abs(turn) <= min_turn:
            out.append(x[i])
            continue
        ctrl = bezier_corner(x[i - 1], x[i], x[i + 1], fraction)
        out.extend(bezier_eval(ctrl, np.linspace(0.0, 1.0, samples + 1)))
    out.append(x[-1])
    return _dedupe(np.asarray(out))


def mollify(x, body: ConvexBody, eta: float, n: int = 512, fraction: float = 0.45,
            eps_budget: float | None = None, config: FlowConfig | None = None):
    """Smooth the corners, resample, attach the ends orthogonally and offset
    along the normals so the enclosed area is ``eta``."""
    x = np.asarray(x.nodes if isinstance(x, OpenCurve) else x, dtype=float)
    cfg = config if config is not None else FlowConfig(n=n)
    a_in, l_in = curve_area(body, x), _length(x)
    smooth = smooth_corners(x, fraction)
    state, rho = prepare_with_offset(smooth, body, eta, cfg)
    kmax = float(np.max(np.abs(PolylineGeometry(state.nodes).kappa)))
    rho_bar = 0.5 * min(1.0 / kmax if kmax > 0 else math.inf, 0.5 * l_in)
    curve = state.curve
    info = {"area_in": a_in, "perimeter_in": l_in, "perimeter_out": curve.length,
            "rho": rho, "rho_bar": rho_bar, "rho_input_rule": -(eta - a_in) / l_in,
            "rho_first_order": -(eta - curve_area(body, smooth)) / _length(smooth),
            "area_out": area_with_params(body, state.nodes, state.theta)[0],
            "hausdorff": hausdorff_distance(x, state.nodes),
            "c1_distance": _c1(x, state.nodes), "theta": state.theta,
            "contact_angles": contact_angles(body, state.nodes)}
    info["perimeter_increase"] = info["perimeter_out"] - l_in
    info["eps_budget"] = eps_budget if eps_budget is not None else 1e-3 * l_in + abs(rho) * 2 * math.pi
    if abs(rho) > rho_bar:
        raise GeometryError("offset exceeds the safe bound", rho=rho, rho_bar=rho_bar)
    from shapely.geometry import LineString
    from .flow import exterior_ok
    if not LineString(state.nodes).is_simple or not exterior_ok(body, state.nodes):
        raise GeometryError("mollified curve leaves the admissible class", rho=rho)
    return curve, info


def _c1(a: np.ndarray, b: np.ndarray) -> float:
    from .curve import c1_distance
    return c1_distance(a, b)


# -- the pipeline ----------------------------------------------------------------

@dataclass
class ReductionReport:
    stages: list = field(default_factory=list)
    deficit_in: float = math.nan
    deficit_out: float = math.nan
    sym_diff: float = math.nan
    hausdorff: float = math.nan
    contact_angles: tuple = (math.nan, math.nan)
    area_error: float = math.nan
    relatively_convex: bool = False
    chord_checks: list = field(default_factory=list)
    trivial_regime: bool = False
    delta1: float = math.nan
    c1_candidate: float = math.nan
    hausdorff_candidate: float = math.nan

    def contracts(self, eta: float) -> dict:
        """Stagewise perimeter and area contracts."""
        per = {}
        for st in self.stages:
            if st["name"] == "mollify":
                per[st["name"]] = st["perimeter_out"] - st["perimeter_in"] <= st["eps_budget"]
            else:
                per[st["name"]] = st["perimeter_out"] <= st["perimeter_in"] * (1 + 1e-12) + 1e-14
        out = {"perimeter": per,
               "area": abs(self.area_error) <= 1e-10 * eta,
               "angles": max(self.contact_angles) <= 0.5 * math.pi + ANGLE_TOL,
               "convex": self.relatively_convex,
               "chords": all(c["holds"] for c in self.chord_checks)}
        out["all"] = bool(all(per.values()) and out["area"] and out["angles"]
                          and out["convex"] and out["chords"])
        return out


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except IsoflowError as exc:
        raise type(exc)(exc.message, stage=name, **exc.details) from exc


def smallness_threshold(body: ConvexBody, eta: float, critical=None) -> float:
    """Second critical level minus the first when it exists, else the margin
    of the global existence condition.  ``critical`` reuses a previous
    :func:`find_critical` result."""
    crit = find_critical(body, eta, with_spectrum=False) if critical is None else critical
    if len(crit) > 1:
        return crit[1].length - crit[0].length
    c = crit[0].arc.to_curve(256)
    return check_preconditions(body, c, eta, profile=crit[0].length).get("delta0", 0.0)


def reduce(E, body: ConvexBody, eta: float, n: int = 512, profile: float | None = None,
           delta1: float | None = None):
    """Full reduction: component selection, clipping and hull, area cut, mollification."""
    if not isinstance(E, PolygonSet):
        E = PolygonSet([_as_geometry(E, body)], eta)
    crit = None
    if profile is None or delta1 is None:
        crit = find_critical(body, eta, with_spectrum=False)
    if profile is None:
        profile = crit[0].length
    rep = ReductionReport()
    rep.deficit_in = relative_perimeter(E, body) - profile
    rep.delta1 = smallness_threshold(body, eta, crit) if delta1 is None else delta1
    rep.trivial_regime = bool(rep.deficit_in >= rep.delta1)
    f1, i1 = _stage("select", select_component_fill_holes, E, body, eta)
    rep.stages.append(dict(name="select", **i1))
    x2, i2 = _stage("hull", clip_and_hull, f1, body)
    rep.stages.append(dict(name="hull", **i2))
    rep.chord_checks.extend(i2["chord_checks"])
    x3, i3 = _stage("cut", area_correct_down, x2, body, eta)
    rep.stages.append(dict(name="cut", **i3))
    curve, i4 = _stage("mollify", mollify, x3, body, eta, n)
    rep.stages.append(dict(name="mollify", **i4))
    F = region_polygon(curve, body)
    rep.area_error = area_with_params(body, curve.nodes, i4["theta"])[0] - eta
    rep.deficit_out = curve.length - profile
    rep.sym_diff = symmetric_difference_area(E.geometry, F)
    rep.hausdorff = boundary_hausdorff(E.geometry, F, body)
    rep.contact_angles = i4["contact_angles"]
    g = curve.geometry
    rep.relatively_convex = bool(np.all(np.sign(g.turning_angle) * g.turn >= -1e-10))
    if rep.deficit_in > 0:
        rep.c1_candidate = (max(rep.deficit_out, 0.0) + rep.sym_diff ** 2) / rep.deficit_in
        rep.hausdorff_candidate = rep.hausdorff ** 2 / rep.deficit_in
    return curve, rep


# -- experiments -----------------------------------------------------------------

FAMILIES = ("radial-bump", "dent", "speck", "tilt")


def dent_profile(p: np.ndarray) -> np.ndarray:
    return -np.exp(-((p - 0.5) / 0.08) ** 2) * np.sin(np.pi * p) ** 2


def tilt_profile(p: np.ndarray) -> np.ndarray:
    return np.sin(np.pi * p) * (1.0 - p) ** 2


def family_input(family: str, base, body: ConvexBody, eta: float, amplitude: float) -> PolygonSet:
    """Perturbed copy of the equilibrium ``base`` (a flow state) as a region of area ``eta``."""
    x = base.nodes
    # node normals point into the region; perturb along the outward side
    normals = -PolylineGeometry(x).node_normals
    if family == "radial-bump":
        y = perturbed_nodes(x, amplitude, bump_profile, normals)
    elif family == "dent":
        y = perturbed_nodes(x, amplitude, dent_profile, normals)
    elif family == "tilt":
        y = perturbed_nodes(x, amplitude, tilt_profile, normals)
    elif family == "speck":
        y = x.copy()
    else:
        raise GeometryError("unknown perturbation family", family=family)
    extra = []
    target = eta
    if family == "speck" and amplitude > 0:
        side = amplitude
        far = x[len(x) // 2] + 4.0 * math.sqrt(eta) * (x[len(x) // 2] - body.interior_point) / \
            np.linalg.norm(x[len(x) // 2] - body.interior_point)
        sq = Polygon([far, far + [side, 0], far + [side, side], far + [0, side]])
        extra.append(sq)
        target = eta - sq.area
    if amplitude > 0:
        y = _with_area(body, y, base.theta, target, normals)
    return PolygonSet.from_curve(OpenCurve(y), body, eta, extra)


def _slope(xs, ys) -> float:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    ok = (xs > 0) & (ys > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])


def _experiment_row(body: ConvexBody, eta: float, family: str, amplitude: float,
                    cfg: FlowConfig, base, l0: float, delta1: float) -> dict | None:
    E = family_input(family, base, body, eta, amplitude)
    curve, rep = reduce(E, body, eta, n=cfg.n, profile=l0, delta1=delta1)
    state = prepare(curve, body, eta, cfg)
    trace = run(state, cfg, body, preconditions=False)
    if not trace.converged:
        return None
    star = region_polygon(trace.final.curve, body)
    F = region_polygon(curve, body)
    iv, _ = trace.cumulative()
    perim = relative_perimeter(E, body)
    return {
        "amplitude": amplitude,
        "deficit": perim - l0,
        "sym_diff": symmetric_difference_area(F, star),
        "sym_diff_flow_bound": math.sqrt(max(trace.L)) * float(iv[-1]),
        "sym_diff_input": symmetric_difference_area(E.geometry, star),
        "hausdorff": boundary_hausdorff(E.geometry, star, body),
        "perimeter_gap_sq": perim ** 2 - l0 ** 2,
        "reduction_ok": rep.contracts(eta)["all"],
        "trivial_regime": rep.trivial_regime,
        "reduction_constant": rep.c1_candidate,
        "flow_steps": trace.steps,
    }


def stability_experiment(body: ConvexBody, eta: float, family: str, amplitudes,
                         n: int = 256, config: FlowConfig | None = None, base=None,
                         workers: int = 1) -> dict:
    """Reduce, flow to a minimiser and measure deficit against distances.

    The profile value used for deficits is the length of the scheme's own
    equilibrium at resolution ``n``; the continuous value is reported too.
    ``|F - E*|`` is measured both directly and through the flow's bound
    ``sqrt(max L) * int ||V|| dt``.
    """
    if family not in FAMILIES:
        raise GeometryError("unknown perturbation family", family=family)
    cfg = config if config is not None else FlowConfig(n=n)
    crit = find_critical(body, eta, with_spectrum=False)[0]
    if base is None:
        base = discrete_critical(crit.arc, body, eta, cfg)
    l0 = PolylineGeometry(base.nodes).length
    delta1 = smallness_threshold(body, eta)
    args = [(body, eta, family, float(a), cfg, base, l0, delta1) for a in amplitudes]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_experiment_row, *zip(*args)))
    else:
        results = [_experiment_row(*a) for a in args]
    rows = [r for r in results if r is not None]
    excluded = len(results) - len(rows)
    pos = [r for r in rows if r["amplitude"] > 0]
    fits = {
        "deficit_vs_sym_diff": _slope([r["sym_diff"] for r in pos], [r["deficit"] for r in pos]),
        "deficit_vs_sym_diff_input": _slope([r["sym_diff_input"] for r in pos],
                                            [r["deficit"] for r in pos]),
        "perimeter_gap_vs_hausdorff_sq": _slope([r["hausdorff"] ** 2 for r in pos],
                                                [r["perimeter_gap_sq"] for r in pos]),
    }
    d = [r["deficit"] for r in sorted(rows, key=lambda r: r["amplitude"])]
    return {"rows": rows, "fits": fits, "excluded": excluded, "profile_discrete": l0,
            "profile": crit.length, "delta1": delta1,
            "monotone": bool(np.all(np.diff(d) >= -1e-12)), "family": family, "eta": eta}


# -- profile ---------------------------------------------------------------------

def profile_bounds(eta: float, kmax: float) -> tuple[float, float, float]:
    """Half-plane lower bound, disjoint-ball upper bound and the improved upper bound."""
    lower = math.sqrt(2.0 * math.pi * eta)
    upper = 2.0 * math.sqrt(math.pi * eta)
    improved = upper * math.sqrt(1.0 - math.atan(math.sqrt(math.pi / (2 * eta)) / kmax) / math.pi)
    return lower, upper, improved


def sublinearity_constant(eta: float, kmax: float) -> float:
    return math.sqrt(2.0 / math.pi) * math.atan(math.sqrt(math.pi / (2.0 * eta)) / kmax)


def profile_and_sublinearity(body: ConvexBody, eta_list, partitions: int = 50, seed: int = 0,
                             max_parts: int = 4) -> dict:
    etas = sorted(float(e) for e in eta_list)
    if not etas or etas[0] <= 0:
        raise GeometryError("areas must be positive")
    kmax = body.kappa_max
    prof = {e: isoperimetric_profile(body, e) for e in etas}
    rows = []
    for e in etas:
        lo, up, imp = profile_bounds(e, kmax)
        rows.append({"eta": e, "profile": prof[e], "lower": lo, "upper": up, "improved": imp,
                     "bounds_ok": bool(lo <= prof[e] <= up and prof[e] <= imp)})
    lips = []
    for e1, e2 in zip(etas[:-1], etas[1:]):
        diff = prof[e2] - prof[e1]
        lo = math.sqrt(math.pi / (2 * e2)) * (e2 - e1)
        hi = math.sqrt(math.pi / e1) * (e2 - e1)
        lips.append({"eta1": e1, "eta2": e2, "difference": diff, "lower": lo, "upper": hi,
                     "ok": bool(lo <= diff <= hi)})
    rng = np.random.default_rng(seed)
    parts = []
    for _ in range(partitions):
        e = float(rng.choice(etas))
        k = int(rng.integers(2, max_parts + 1))
        w = np.sort(rng.dirichlet(np.ones(k)))[::-1]
        pieces = [float(v) for v in w * e]
        lhs = sum(isoperimetric_profile(body, p) for p in pieces) - prof[e]
        c0 = sublinearity_constant(e, kmax)
        rhs = c0 * sum(math.sqrt(p) for p in pieces[1:])
        parts.append({"eta": e, "pieces": pieces, "lhs": lhs, "rhs": rhs, "c0": c0,
                      "ok": bool(lhs >= rhs)})
    return {"profile": rows, "lipschitz": lips, "partitions": parts,
            "ok": bool(all(r["bounds_ok"] for r in rows) and all(r["ok"] for r in lips)
                       and all(r["ok"] for r in parts))}
