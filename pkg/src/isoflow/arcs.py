"""Circular arcs cut off by the obstacle and the reduced length functional.

For a centre ``z`` and radius ``r`` the circle ``|x - z| = r`` meets the
boundary in two points when it belongs to the family; the part of the circle
outside the body is the arc.  Fixing the enclosed area ``eta`` determines the
radius from the centre, and ``L_eta(z)`` is the length of that arc.  Critical
centres of ``L_eta`` are exactly the arcs meeting the boundary orthogonally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .curve import (OpenCurve, c1_distance, closing_arc_between, closing_orientation,
                    signed_angle, winding_sweep)
from .errors import GeometryError, NumericalError
from .obstacle import ConvexBody, TWO_PI, is_outside, nearest_params, rot90, subarc_shoelace

SIN_TOL = 1e-6


@dataclass(frozen=True)
class CircArc:
    center: np.ndarray
    radius: float
    theta1: float
    theta2: float
    orientation: int
    phi1: float
    phi2: float
    x1: np.ndarray
    x2: np.ndarray
    alpha1: float
    alpha2: float
    length: float
    area: float

    @property
    def curvature(self) -> float:
        return self.orientation / self.radius

    @property
    def turning_angle(self) -> float:
        return self.phi2 - self.phi1

    def inner_normal(self, x) -> np.ndarray:
        """``J tau`` of the arc at the point ``x``."""
        return -self.orientation * (np.asarray(x, dtype=float) - self.center) / self.radius

    def angle_defect(self) -> float:
        return abs(self.alpha1 - 0.5 * math.pi) + abs(self.alpha2 - 0.5 * math.pi)

    def sample(self, n: int) -> np.ndarray:
        phi = np.linspace(self.phi1, self.phi2, n + 1)
        pts = self.center + self.radius * np.column_stack([np.cos(phi), np.sin(phi)])
        pts[0], pts[-1] = self.x1, self.x2
        return pts

    def to_curve(self, n: int = 512) -> OpenCurve:
        return OpenCurve(self.sample(n))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    hessian: np.ndarray
    asymmetry: float
    gap: float
    degenerate: bool


@dataclass(frozen=True)
class CriticalArc:
    arc: CircArc
    spectrum: Spectrum
    gradient: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def length(self) -> float:
        return self.arc.length


# -- the family ----------------------------------------------------------------

def _crossing_cells(body: ConvexBody, z: np.ndarray, r: float) -> tuple[np.ndarray, float]:
    """Left ends of the parameter cells where ``|x(theta) - z| = r`` changes sign,
    and the cell width."""
    t = body.table
    m = t["theta"].size
    step = TWO_PI / m
    rho_max = float(np.max(t["h"] + t["h2"]))
    if r > 8.0 * rho_max * step:
        d = t["pos"] - z
        sgn = np.einsum("ij,ij->i", d, d) > r * r
        return t["theta"][np.nonzero(sgn != np.roll(sgn, -1))[0]], step
    # small circles: the crossings can share a table cell, so sample around the
    # nearest boundary point; the part of a convex curve inside a disc of
    # radius r is shorter than 2 pi r
    th0 = float(nearest_params(body, z[None, :])[0][0])
    half = min(math.pi, 2.0 * math.pi * r * body.kappa_max + 8.0 * step)
    k = 2048
    th = th0 + half * np.linspace(-1.0, 1.0, k + 1)
    d = body.points(th) - z
    sgn = np.einsum("ij,ij->i", d, d) > r * r
    cells = th[np.nonzero(sgn[:-1] != sgn[1:])[0]]
    return cells, 2.0 * half / k


def _intersections(body: ConvexBody, z: np.ndarray, r: float) -> list[float]:
    cells, step = _crossing_cells(body, z, r)
    if cells.size != 2:
        raise GeometryError("not in family", intersections=int(cells.size), center=z, radius=r)

    def gfun(th):
        p = body.points(np.array(th)) - z
        return float(p @ p - r * r)

    roots = []
    for a in cells:
        # safeguarded Newton on the bracketing cell, exact derivative
        lo, hi = float(a), float(a) + step
        f_lo, f_hi = gfun(lo), gfun(hi)
        if f_lo == 0.0:
            roots.append(lo % TWO_PI)
            continue
        if f_lo * f_hi > 0:
            raise GeometryError("not in family", center=z, radius=r)
        th = 0.5 * (lo + hi)
        for _ in range(100):
            h, h1, h2 = body.support(np.array(th))
            c, s = math.cos(th), math.sin(th)
            p = np.array([float(h) * c - float(h1) * s - z[0], float(h) * s + float(h1) * c - z[1]])
            f = float(p @ p - r * r)
            if f == 0.0:
                break
            if (f > 0) == (f_lo > 0):
                lo = th
            else:
                hi = th
            der = 2.0 * float(h + h2) * (-p[0] * s + p[1] * c)
            if der != 0.0 and abs(f / der) <= 1e-16 * (1.0 + abs(th)):
                break
            new = th - f / der if der != 0.0 else 0.5 * (lo + hi)
            if not lo < new < hi:
                new = 0.5 * (lo + hi)
            if hi - lo <= 4e-16 * (1.0 + abs(th)):
                th = new
                break
            th = new
        roots.append(th % TWO_PI)
    return roots


def arc_outside(body: ConvexBody, z, r: float, orientation: int = 1,
                check_exterior: bool = True) -> CircArc:
    """The arc of ``|x - z| = r`` lying outside the body."""
    z = np.asarray(z, dtype=float)
    r = float(r)
    if not r > 0:
        raise GeometryError("not in family", radius=r)
    ta, tb = _intersections(body, z, r)
    pa, pb = body.points(np.array([ta, tb]))
    psi_a = math.atan2(pa[1] - z[1], pa[0] - z[0])
    psi_b = math.atan2(pb[1] - z[1], pb[0] - z[0])
    span_ab = (psi_b - psi_a) % TWO_PI
    mid = psi_a + 0.5 * span_ab
    probe = z + r * np.array([math.cos(mid), math.sin(mid)])
    if is_outside(body, probe)[0]:
        start = (ta, pa, psi_a)
        end = (tb, pb, psi_a + span_ab)
    else:
        span = (psi_a - psi_b) % TWO_PI
        start = (tb, pb, psi_b)
        end = (ta, pa, psi_b + span)
    if orientation < 0:
        start, end = end, start
    th1, x1, phi1 = start
    th2, x2, phi2 = end
    span = phi2 - phi1
    if check_exterior:
        phis = phi1 + span * (np.arange(1, 64) / 64.0)
        pts = z + r * np.column_stack([np.cos(phis), np.sin(phis)])
        if not np.all(is_outside(body, pts)):
            raise GeometryError("not in family", reason="arc re-enters the body")
    sgn = 1.0 if orientation >= 0 else -1.0
    tau1 = sgn * rot90((x1 - z) / r)
    tau2 = sgn * rot90((x2 - z) / r)
    _, tb_tan, _, _ = body.frame(np.array([th1, th2]))
    a1 = signed_angle(tau1, tb_tan[0])
    a2 = signed_angle(tb_tan[1], tau2)
    if min(math.sin(a1), math.sin(a2)) < SIN_TOL:
        raise GeometryError("transversality failure", alpha1=a1, alpha2=a2)
    length = r * abs(span)
    phis = np.linspace(phi1, phi2, 257)
    pts = z + r * np.column_stack([np.cos(phis), np.sin(phis)])
    _, closing_span = closing_orientation(body, th1, th2, winding_sweep(pts, body.interior_point))
    # both shoelace parts about x1 (on the boundary) to avoid cancellation
    w = z - x1
    shoe = 0.5 * (r * r * span + r * (w[0] * (math.sin(phi2) - math.sin(phi1))
                                      - w[1] * (math.cos(phi2) - math.cos(phi1))))
    area = shoe + subarc_shoelace(body, th2, th2 + closing_span, x1)
    return CircArc(center=z, radius=r, theta1=th1, theta2=th2, orientation=int(sgn),
                   phi1=phi1, phi2=phi2, x1=x1, x2=x2, alpha1=a1, alpha2=a2,
                   length=length, area=area)


def _radius_range(body: ConvexBody, z: np.ndarray) -> tuple[float, float]:
    d = abs(float(nearest_params(body, z[None, :])[1][0]))
    far = float(np.max(np.linalg.norm(body.table["pos"] - z, axis=1)))
    return d, far


def solve_radius_for_area(body: ConvexBody, z, eta: float, r_guess: float | None = None,
                          orientation: int = 1, rtol: float = 1e-13) -> float:
    """Radius of the arc centred at ``z`` whose enclosed area is ``eta``.

    Newton on ``r`` using ``dA/dr = L``, safeguarded by a bracket obtained
    from a scan of the admissible radius interval.
    """
    z = np.asarray(z, dtype=float)
    target = abs(float(eta))
    if not target > 0:
        raise GeometryError("area unreachable from this center", eta=eta)

    def area_len(r):
        arc = arc_outside(body, z, r, orientation, check_exterior=False)
        return abs(arc.area), arc.length

    r = r_guess
    if r is not None:
        try:
            for _ in range(30):
                a, ln = area_len(r)
                dr = (a - target) / ln
                r_new = r - dr
                if not r_new > 0:
                    raise GeometryError("newton left the admissible range")
                r = r_new
                if abs(dr) <= 1e-15 * r or abs(a - target) <= rtol * target:
                    a, _ = area_len(r)
                    if abs(a - target) <= 1e-10 * target:
                        return r
                    break
        except GeometryError:
            pass
    lo, hi = _radius_range(body, z)
    # just above ``lo`` the circle barely touches the body and the outside
    # arc is nearly the whole circle, so the area starts near pi lo^2
    floor = math.pi * lo * lo
    if target <= floor:
        raise GeometryError("area unreachable from this center", center=z, eta=eta,
                            minimum=floor)
    grid = lo + (hi - lo) * np.linspace(0.0, 1.0, 41)[1:-1] ** 2
    prev = (lo, floor)
    bracket = None
    for rr in grid:
        try:
            a, _ = area_len(rr)
        except GeometryError:
            continue
        if a >= target:
            bracket = (prev[0], rr)
            break
        prev = (rr, a)
    if bracket is None:
        raise GeometryError("area unreachable from this center", center=z, eta=eta)
    a0, b0 = bracket

    def f(rr):
        try:
            return area_len(rr)[0] - target
        except GeometryError:
            return floor - target if rr < 0.5 * (a0 + b0) else 1.0

    r = brentq(f, a0, b0, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    for _ in range(3):
        a, ln = area_len(r)
        if abs(a - target) <= rtol * target:
            break
        r -= (a - target) / ln
    a, _ = area_len(r)
    if abs(a - target) > 1e-10 * target:
        raise NumericalError("radius solve did not reach the area tolerance",
                             residual=a - target)
    return r


def arc_with_area(body: ConvexBody, z, eta: float, r_guess: float | None = None,
                  orientation: int = 1) -> CircArc:
    r = solve_radius_for_area(body, z, eta, r_guess=r_guess, orientation=orientation)
    return arc_outside(body, z, r, orientation)


def area_preserving_directions(arc: CircArc) -> tuple[np.ndarray, np.ndarray]:
    """The vectors ``nu_c(x_i) - J(x2 - x1)/L`` for i = 1, 2."""
    chord = rot90(arc.x2 - arc.x1) / arc.length
    return arc.inner_normal(arc.x1) - chord, arc.inner_normal(arc.x2) - chord


def L_eta(body: ConvexBody, z, eta: float, r_guess: float | None = None) -> float:
    return arc_with_area(body, z, eta, r_guess).length


def gradient_from_arc(arc: CircArc) -> np.ndarray:
    y1, y2 = area_preserving_directions(arc)
    return -(y1 / math.tan(arc.alpha1) + y2 / math.tan(arc.alpha2))


def grad_L_eta(body: ConvexBody, z, eta: float, r_guess: float | None = None) -> np.ndarray:
    return gradient_from_arc(arc_with_area(body, z, eta, r_guess))


def gradient_bound(arc: CircArc) -> float:
    """Right-hand side of the gradient estimate ``2/sin(delta) * angle defect``."""
    s = min(math.sin(arc.alpha1), math.sin(arc.alpha2))
    return 2.0 / s * arc.angle_defect()


def hessian_L_eta(body: ConvexBody, z, eta: float, step: float | None = None,
                  r_guess: float | None = None) -> Spectrum:
    """Finite-difference Hessian of ``L_eta`` from the analytic gradient.

    Central differences at steps ``h`` and ``h/2`` are combined by Richardson
    extrapolation; the result is symmetrised and diagonalised.
    """
    z = np.asarray(z, dtype=float)
    base = arc_with_area(body, z, eta, r_guess)
    if step is None:
        step = 1e-3 * base.radius
    r0 = base.radius

    def grad(p):
        return grad_L_eta(body, p, eta, r_guess=r0)

    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1.0

        def d(h):
            return (grad(z + h * e) - grad(z - h * e)) / (2 * h)

        cols.append((4 * d(0.5 * step) - d(step)) / 3)
    hmat = np.column_stack(cols)
    asym = float(abs(hmat[0, 1] - hmat[1, 0]))
    sym = 0.5 * (hmat + hmat.T)
    lam, vec = np.linalg.eigh(sym)
    scale = float(np.max(np.abs(lam)))
    gap = 1e-6 * scale + 1e-9
    if asym > 1e-4 * scale + 1e-8:
        raise NumericalError("finite-difference Hessian is not symmetric", asymmetry=asym)
    return Spectrum(eigenvalues=lam, eigenvectors=vec, hessian=sym, asymmetry=asym,
                    gap=gap, degenerate=bool(np.min(np.abs(lam)) <= gap))


# -- critical points -----------------------------------------------------------

def _newton_critical(body, z, eta, tol, max_iter=40):
    z = np.asarray(z, dtype=float)
    arc = arc_with_area(body, z, eta)
    g = gradient_from_arc(arc)
    hm = None
    norms = []
    for _ in range(max_iter):
        norms.append(float(np.linalg.norm(g)))
        if norms[-1] <= tol:
            return z, arc, g
        # a seed creeping along a valley of |grad| is abandoned
        if len(norms) > 5 and norms[-1] > 0.5 * norms[-6]:
            break
        if hm is None:
            # the Hessian is kept while steps keep cutting the gradient well
            h = 1e-4 * arc.radius
            hm = np.empty((2, 2))
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                hm[:, j] = (grad_L_eta(body, z + e, eta, arc.radius)
                            - grad_L_eta(body, z - e, eta, arc.radius)) / (2 * h)
            hm = 0.5 * (hm + hm.T)
        lam, vec = np.linalg.eigh(hm)
        floor = 1e-8 * max(1.0, float(np.max(np.abs(lam))))
        inv = np.where(np.abs(lam) > floor, 1.0 / np.where(np.abs(lam) > floor, lam, 1.0), 0.0)
        dz = -vec @ (inv * (vec.T @ g))
        cap = 0.25 * arc.radius
        nd = np.linalg.norm(dz)
        if nd > cap:
            dz *= cap / nd
        t = 1.0
        while t > 1e-4:
            try:
                cand_arc = arc_with_area(body, z + t * dz, eta, arc.radius)
                cand_g = gradient_from_arc(cand_arc)
                if np.linalg.norm(cand_g) < np.linalg.norm(g):
                    if t < 1.0 or np.linalg.norm(cand_g) > 0.25 * np.linalg.norm(g):
                        hm = None
                    z, arc, g = z + t * dz, cand_arc, cand_g
                    break
            except (GeometryError, NumericalError):
                pass
            t *= 0.5
        else:
            if hm is not None and t <= 1e-4:
                hm = None
                continue
            break
    if np.linalg.norm(g) <= tol:
        return z, arc, g
    raise NumericalError("critical point search did not converge", center=z,
                         gradient=np.linalg.norm(g))


def _orthogonal_lens_radius(R: float, eta: float) -> float:
    """Radius of the arc orthogonal to a circle of radius ``R`` enclosing ``eta``
    (used only to seed the bracket of the radial search)."""
    def area(r):
        return (math.pi * r * r - r * r * math.atan(R / r) - R * R * math.atan(r / R)
                + r * R - eta)

    hi = math.sqrt(2.0 * eta / math.pi) * 2.0 + 1e-12
    while area(hi) < 0:
        hi *= 2.0
    return brentq(area, 1e-15 * hi, hi, xtol=1e-15, rtol=8.9e-16)


def _radial_critical(body: ConvexBody, eta: float, tol: float) -> list[np.ndarray]:
    """Critical centres of a circular obstacle on the ray through +x.

    The gradient's x-component is bracketed around a seed distance and the
    root is found by Brent's method; a coarse scan is the fallback.
    """
    c = body.shift
    R = body.params["radius"]
    e = np.array([1.0, 0.0])
    r_last = [None]

    def gx(d):
        arc = arc_with_area(body, c + d * e, eta, r_last[0])
        r_last[0] = arc.radius
        return float(gradient_from_arc(arc)[0])

    d_hi = math.sqrt(R * R + 4.0 * eta / math.pi)
    r0 = _orthogonal_lens_radius(R, eta)
    d0 = math.sqrt(R * R + r0 * r0)
    width = 1e-3 * r0
    for _ in range(12):
        lo, hi = max(d0 - width, R * (1 + 1e-12)), min(d0 + width, d_hi)
        try:
            g_lo, g_hi = gx(lo), gx(hi)
        except (GeometryError, NumericalError):
            break
        if g_lo * g_hi < 0:
            return [c + brentq(gx, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200) * e]
        width *= 4.0
    r_last[0] = None
    ds = R + (d_hi - R) * np.linspace(0.0, 1.0, 33)[1:] ** 2
    vals = []
    for d in ds:
        try:
            vals.append((d, gx(d)))
        except (GeometryError, NumericalError):
            r_last[0] = None
            continue
    roots = []
    for (d0_, g0), (d1, g1) in zip(vals[:-1], vals[1:]):
        if g0 == 0.0:
            roots.append(d0_)
        elif g0 * g1 < 0:
            roots.append(brentq(gx, d0_, d1, xtol=1e-15, rtol=8.9e-16, maxiter=200))
    return [c + d * e for d in roots]


def default_seeds(body: ConvexBody, eta: float, n_theta: int = 24,
                  offsets=(0.05, 0.3)) -> np.ndarray:
    r_est = math.sqrt(2.0 * eta / math.pi)
    th = np.arange(n_theta) * (TWO_PI / n_theta)
    pos = body.points(th)
    u = np.column_stack([np.cos(th), np.sin(th)])
    return np.concatenate([pos + t * r_est * u for t in offsets])


def find_critical(body: ConvexBody, eta: float, seed_grid=None, tol: float | None = None,
                  with_spectrum: bool = True) -> list[CriticalArc]:
    """Critical arcs of enclosed area ``eta`` sorted by length.

    Circular obstacles are searched along one ray (the critical set is a
    rotation orbit and one representative is returned).  Other bodies use
    damped Newton from ``seed_grid`` (default: offsets along outer normals).
    """
    if not eta > 0:
        raise GeometryError("area must be positive", eta=eta)
    if tol is None:
        tol = 1e-11
    found: list[tuple[np.ndarray, CircArc, np.ndarray]] = []
    if body.shape == "circle" and seed_grid is None:
        for z in _radial_critical(body, eta, tol):
            arc = arc_with_area(body, z, eta)
            found.append((z, arc, gradient_from_arc(arc)))
    else:
        seeds = default_seeds(body, eta) if seed_grid is None else np.atleast_2d(seed_grid)
        for z0 in seeds:
            try:
                found.append(_newton_critical(body, z0, eta, tol))
            except (GeometryError, NumericalError):
                continue
    if not found:
        raise NumericalError("no critical point found", eta=eta)
    radius = 1e-6 * body.width
    unique: list[tuple[np.ndarray, CircArc, np.ndarray]] = []
    for item in found:
        if all(np.linalg.norm(item[0] - u[0]) > radius for u in unique):
            unique.append(item)
    out = []
    for z, arc, g in unique:
        spectrum = hessian_L_eta(body, z, eta, r_guess=arc.radius) if with_spectrum else None
        out.append(CriticalArc(arc=arc, spectrum=spectrum, gradient=g))
    out.sort(key=lambda c: (round(c.length, 9), c.arc.center[0], c.arc.center[1]))
    return out


def refine_critical(body: ConvexBody, z0, eta: float, tol: float = 1e-11,
                    with_spectrum: bool = True) -> CriticalArc:
    """Critical arc reached by damped Newton from the centre ``z0``."""
    z, arc, g = _newton_critical(body, z0, eta, tol)
    spectrum = hessian_L_eta(body, z, eta, r_guess=arc.radius) if with_spectrum else None
    return CriticalArc(arc=arc, spectrum=spectrum, gradient=g)


_PROFILE_CACHE: dict = {}


def isoperimetric_profile(body: ConvexBody, eta: float) -> float:
    """Smallest critical length, the numerical value of the profile at ``eta``."""
    key = (repr(body), float(eta))
    if key not in _PROFILE_CACHE:
        _PROFILE_CACHE[key] = find_critical(body, eta, with_spectrum=False)[0].length
    return _PROFILE_CACHE[key]


# -- arcs built from curves ----------------------------------------------------

def companion_arc(curve: OpenCurve, body: ConvexBody) -> tuple[CircArc, float]:
    """Arc of curvature ``mean_curvature`` leaving the curve's first node with
    the curve's initial tangent; returns it with its C1 distance to the curve."""
    g = curve.geometry
    kbar = g.mean_curvature
    if kbar == 0.0 or not math.isfinite(kbar):
        raise GeometryError("mean curvature vanishes", mean_curvature=kbar)
    rbar = 1.0 / abs(kbar)
    sgn = 1 if kbar > 0 else -1
    x1 = curve.nodes[0]
    z = x1 + sgn * rbar * rot90(g.start_tangent)
    arc = arc_outside(body, z, rbar, sgn)
    if np.linalg.norm(arc.x1 - x1) > 1e-8 * (1 + rbar):
        raise GeometryError("companion arc does not start at the curve's first node")
    dist = c1_distance(curve, arc.sample(curve.n_nodes - 1))
    return arc, dist


def corrected_arc(curve: OpenCurve, body: ConvexBody, eta: float) -> tuple[CircArc, dict]:
    """Companion arc with its radius adjusted so the enclosed area is ``eta``."""
    comp, dist = companion_arc(curve, body)
    r_hat = solve_radius_for_area(body, comp.center, eta, r_guess=comp.radius,
                                  orientation=comp.orientation)
    arc = arc_outside(body, comp.center, r_hat, comp.orientation)
    area_gap = abs(abs(comp.area) - abs(eta))
    bound = area_gap / math.sqrt(math.pi * abs(eta))
    info = {"companion": comp, "c1_distance": dist, "radius_shift": abs(r_hat - comp.radius),
            "area_gap": area_gap, "radius_bound": bound,
            "bound_ratio": abs(r_hat - comp.radius) / bound if bound > 0 else 0.0}
    return arc, info


# -- variation formulas --------------------------------------------------------

def endpoint_speeds(arc: CircArc, dr: float, dz) -> tuple[float, float]:
    dz = np.asarray(dz, dtype=float)
    mu1 = (-dr + float(arc.inner_normal(arc.x1) @ dz)) / math.sin(arc.alpha1)
    mu2 = (-dr + float(arc.inner_normal(arc.x2) @ dz)) / math.sin(arc.alpha2)
    return mu1, mu2


def area_variation(arc: CircArc, dr: float, dz) -> float:
    return dr * arc.length + float(np.asarray(dz) @ -rot90(arc.x2 - arc.x1))


def variation_check(body: ConvexBody, r0: float, z0, dr: float | None, dz, h: float = 1e-5) -> dict:
    """Compare first-variation formulas with central differences.

    The family is ``z(e) = z0 + e dz`` with ``r(e) = r0 + e dr``; when ``dr`` is
    None the radius is instead solved so the area stays fixed, and the
    area-preserving length formula is checked as well.
    """
    z0 = np.asarray(z0, dtype=float)
    dz = np.asarray(dz, dtype=float)
    base = arc_outside(body, z0, r0)
    preserving = dr is None
    eta = base.area

    def member(e):
        z = z0 + e * dz
        if preserving:
            return arc_with_area(body, z, eta, r_guess=r0)
        return arc_outside(body, z, r0 + e * dr)

    ap, am = member(h), member(-h)
    if preserving:
        dr_eff = (ap.radius - am.radius) / (2 * h)
        dr_formula = float(dz @ rot90(base.x2 - base.x1)) / base.length
    else:
        dr_eff = dr
        dr_formula = dr
    mu1, mu2 = endpoint_speeds(base, dr_formula, dz)
    _, tan, _, _ = body.frame(np.array([base.theta1, base.theta2]))
    out = {}
    fd_a = (ap.area - am.area) / (2 * h)
    an_a = area_variation(base, dr_formula, dz)
    out["area"] = (an_a, fd_a)
    fd_x1 = (ap.x1 - am.x1) / (2 * h)
    fd_x2 = (ap.x2 - am.x2) / (2 * h)
    out["x1"] = (mu1 * tan[0], fd_x1)
    out["x2"] = (-mu2 * tan[1], fd_x2)
    fd_l = (ap.length - am.length) / (2 * h)
    if preserving:
        y1, y2 = area_preserving_directions(base)
        an_l = -(float(dz @ y1) / math.tan(base.alpha1) + float(dz @ y2) / math.tan(base.alpha2))
        out["radius"] = (dr_formula, dr_eff)
    else:
        an_l = (base.curvature * an_a - mu1 * math.cos(base.alpha1)
                - mu2 * math.cos(base.alpha2))
    out["length"] = (an_l, fd_l)
    # a natural size for each derivative keeps near-zero values meaningful
    speed = abs(dr_formula) + float(np.linalg.norm(dz))
    ref = {"area": speed * base.length, "x1": speed, "x2": speed, "length": speed,
           "radius": speed}
    errs = {}
    for k, (a, b) in out.items():
        a = np.atleast_1d(a)
        b = np.atleast_1d(b)
        scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), ref[k])
        errs[k] = float(np.max(np.abs(a - b))) / scale
    return {"values": out, "relative_errors": errs, "max_relative_error": max(errs.values()),
            "area_preserving": preserving}
