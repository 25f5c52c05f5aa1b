"""Built-in example checks run by ``isoflow selftest``.

Each check returns ``(passed, detail)``.  The default set runs in well under a
minute; ``full=True`` adds the flow, gradient-inequality and stability
experiments.
"""

from __future__ import annotations

import math
import time

import numpy as np
from shapely.geometry import Point, Polygon, box

from .arcs import (L_eta, arc_outside, companion_arc, corrected_arc, find_critical,
                   grad_L_eta, hessian_L_eta, solve_radius_for_area, variation_check)
from .curve import (OpenCurve, PolylineGeometry, area_with_params, c1_distance, closing_arc,
                    enclosed_area, hausdorff_distance,
                    report, resample_constant_speed, symmetric_difference_area)
from .errors import GeometryError
from .flow import (FlowConfig, check_preconditions, dissipation_check, fit_rate, perturbed_arc,
                   prepare, run, step)
from .obstacle import boundary_at, circle, ellipse, global_quantities, project_to_boundary, \
    subarc_quantities

SQ2 = math.sqrt(2.0)
ETA_LUNE = 1.0 + 0.5 * math.pi


def lune_area(r: float) -> float:
    """Area outside the unit disc enclosed by the orthogonal circle of radius r."""
    return math.pi * r * r - math.atan(r) - r * r * math.atan(1.0 / r) + r


def _close(a, b, tol) -> bool:
    return bool(np.all(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) <= tol))


# -- obstacle ------------------------------------------------------------------

def check_boundary_points():
    b = circle(1.0)
    p0, p1 = boundary_at(b, 0.0), boundary_at(b, 0.5 * math.pi)
    ok = (_close(p0.position, [1, 0], 1e-14) and _close(p0.tangent, [0, 1], 1e-14)
          and _close(p0.normal, [-1, 0], 1e-14) and abs(p0.curvature - 1) < 1e-12
          and _close(p1.position, [0, 1], 1e-14))
    e = ellipse(2.0, 1.0)
    k = boundary_at(e, 0.0).curvature  # vertex on the major axis
    return ok and abs(k - 2.0) < 1e-9, f"ellipse vertex curvature {k:.12f}"


def check_projection():
    b = circle(1.0)
    ok = (_close(project_to_boundary(b, [2, 0]).position, [1, 0], 1e-12)
          and _close(project_to_boundary(b, [0, 3]).position, [0, 1], 1e-12))
    e = ellipse(2.0, 1.0)
    bp = project_to_boundary(e, [3.0, 1.0])
    res = abs(float((np.array([3.0, 1.0]) - bp.position) @ bp.tangent))
    return ok and res <= 1e-10, f"orthogonality residual {res:.2e}"


def check_subarcs():
    b = circle(1.0)
    q = subarc_quantities(b, 0.0, math.pi)
    z = subarc_quantities(b, 0.3, 0.3)
    e = ellipse(2.0, 1.0)
    quarter = subarc_quantities(e, 0.0, 0.5 * math.pi)["length"]
    t = np.linspace(0.0, 0.5 * math.pi, 200001)
    dense = float(np.sum(np.linalg.norm(np.diff(e.points(t), axis=0), axis=1)))
    ok = (abs(q["length"] - math.pi) < 1e-12 and abs(q["turning_angle"] - math.pi) < 1e-12
          and z["length"] == 0.0 and abs(quarter - dense) < 1e-8)
    return ok, f"quarter ellipse {quarter:.12f} vs polyline {dense:.12f}"


def check_global():
    g1, g100, ge = (global_quantities(b) for b in (circle(1.0), circle(100.0), ellipse(2, 1)))
    ok = (abs(g1["kappa_max"] - 1) < 1e-9 and abs(g1["width"] - 2) < 1e-9
          and abs(g1["boundary_length"] - 2 * math.pi) < 1e-9 and abs(g1["area"] - math.pi) < 1e-9
          and abs(g100["kappa_max"] - 0.01) < 1e-11 and abs(g100["width"] - 200) < 1e-7
          and abs(ge["kappa_max"] - 2) < 1e-9 and abs(ge["width"] - 2) < 1e-9
          and abs(ge["area"] - 2 * math.pi) < 1e-9)
    return ok, "circle, scaled circle and ellipse global quantities"


# -- curve ---------------------------------------------------------------------

def _lune_arc(n=512, r=1.0):
    return arc_outside(circle(1.0), np.array([math.sqrt(1 + r * r), 0.0]), r)


def check_lune_report():
    b = circle(1.0)
    c = OpenCurve(_lune_arc().sample(512))
    rep = report(c, b)
    rev = report(c.reversed(), b)
    ok = (abs(rep.length - 1.5 * math.pi) < 1e-4 and abs(rep.turning_angle - 1.5 * math.pi) < 1e-9
          and abs(rep.mean_curvature - 1.0) < 1e-4 and rep.eps < 1e-4
          and abs(rev.turning_angle + rep.turning_angle) < 1e-12
          and abs(rev.area + rep.area) < 1e-12 and abs(rev.length - rep.length) < 1e-12)
    return ok, f"L={rep.length:.9f} eps={rep.eps:.2e} area={rep.area:.9f}"


def check_closing_arc():
    b = circle(1.0)
    s = closing_arc(OpenCurve(_lune_arc().sample(512)), b)
    tiny = closing_arc(OpenCurve(_lune_arc(r=0.05).sample(256)), b)
    ok = abs(s.length - 0.5 * math.pi) < 1e-9 and abs(tiny.length - 0.1) / 0.1 < 0.05
    return ok, f"closing lengths {s.length:.9f}, {tiny.length:.6f}"


def check_lune_areas():
    b = circle(1.0)
    a1 = _lune_arc().area
    a2 = _lune_arc(r=0.2).area
    poly = enclosed_area(OpenCurve(_lune_arc().sample(100000)), b)
    ok = (abs(a1 - ETA_LUNE) < 1e-12 and abs(a2 - lune_area(0.2)) < 1e-12
          and abs(lune_area(0.2) - 0.073331) < 2e-6 and abs(poly - ETA_LUNE) < 1e-8)
    return ok, f"arc area {a1:.12f}, polyline {poly:.12f}, r=0.2 {a2:.6f}"


def polyline_abscissa(poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Arclength coordinate along ``poly`` of points lying on it."""
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(poly, axis=0), axis=1))])
    a, d = poly[:-1], np.diff(poly, axis=0)
    out = np.empty(len(pts))
    for k, p in enumerate(pts):
        t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
        gap = np.linalg.norm(a + t[:, None] * d - p, axis=1)
        i = int(np.argmin(gap))
        out[k] = s[i] + t[i] * np.linalg.norm(d[i])
    return out


def check_resample():
    phi = np.pi * np.linspace(0.0, 1.0, 101) ** 1.5
    semi = np.column_stack([np.cos(phi), np.sin(phi)])
    out = resample_constant_speed(OpenCurve(semi), 64)
    gaps = np.diff(polyline_abscissa(semi, out.nodes))
    spread = float(np.ptp(gaps) / gaps.mean())
    lengths = [resample_constant_speed(OpenCurve(_lune_arc().sample(n)), n).length
               for n in (256, 512, 1024)]
    ratio = (lengths[1] - lengths[0]) / (lengths[2] - lengths[1])
    richardson = (4 * lengths[1] - lengths[0]) / 3
    ok = (out.n_nodes == 65 and spread < 1e-12 and abs(ratio - 4) < 0.01
          and abs(richardson - 1.5 * math.pi) < 1e-5)
    return ok, f"spacing spread {spread:.1e}, refinement ratio {ratio:.4f}, extrapolated {richardson:.9f}"


def check_distances():
    a = _lune_arc().sample(512)
    t = 0.037
    c1 = c1_distance(a, a + [t, 0.0])
    sq = box(0, 0, 1, 1)
    sh = box(0.1, 0, 1.1, 1)
    ring = np.asarray(sq.exterior.coords)
    ring_s = np.asarray(sh.exterior.coords)
    dh = hausdorff_distance(ring, ring_s)
    sd = symmetric_difference_area(sq, sh)
    ok = (c1_distance(a, a) == 0.0 and abs(c1 - t) < 1e-12 and abs(dh - 0.1) < 1e-9
          and abs(sd - 0.2) < 1e-12)
    return ok, f"c1 translate {c1:.3e}, d_H {dh:.6f}, sym diff {sd:.6f}"


# -- arcs ----------------------------------------------------------------------

def check_arc_family():
    b = circle(1.0)
    a = arc_outside(b, [SQ2, 0.0], 1.0)
    ok = (abs(a.length - 1.5 * math.pi) < 1e-12 and abs(a.area - ETA_LUNE) < 1e-12
          and abs(a.alpha1 - 0.5 * math.pi) < 1e-12 and abs(a.alpha2 - 0.5 * math.pi) < 1e-12)
    try:
        arc_outside(b, [3.0, 0.0], 1.0)
        ok = False
    except GeometryError:
        pass
    t = arc_outside(b, [1.6, 0.0], 0.9)
    # angle between the circles from the cosine law at an intersection point
    gamma = math.acos((1.0 + 0.81 - 1.6 ** 2) / (2 * 0.9))
    ok = ok and abs(t.alpha1 - gamma) < 1e-9 and abs(t.alpha2 - gamma) < 1e-9
    return ok, f"transversal angles {t.alpha1:.12f} vs {gamma:.12f}"


def check_radius_solve():
    b = circle(1.0)
    z = np.array([SQ2, 0.0])
    r = solve_radius_for_area(b, z, ETA_LUNE)
    # the smallest area reachable from this centre is pi (sqrt 2 - 1)^2 ~ 0.539
    try:
        solve_radius_for_area(b, z, 0.5)
        ok = False
    except GeometryError:
        ok = True
    r6 = solve_radius_for_area(b, z, 0.6)
    a6 = arc_outside(b, z, r6).area
    d = 1e-5
    fd = (arc_outside(b, z, 1.0 + d).area - arc_outside(b, z, 1.0).area) / d
    ok = (ok and abs(r - 1) < 1e-8 and abs(a6 - 0.6) <= 1e-10 * 0.6
          and abs(fd - 1.5 * math.pi) / (1.5 * math.pi) < 1e-4)
    return ok, f"r={r:.12f}, eta=0.6 radius {r6:.9f}, dA/dr fd {fd:.8f}"


def check_gradient():
    b = circle(1.0)
    g0 = grad_L_eta(b, [SQ2, 0.0], ETA_LUNE)
    z = np.array([SQ2 + 0.05, 0.0])
    g = grad_L_eta(b, z, ETA_LUNE)
    h = 1e-5
    fd = np.array([(L_eta(b, z + h * e, ETA_LUNE) - L_eta(b, z - h * e, ETA_LUNE)) / (2 * h)
                   for e in np.eye(2)])
    rel = float(np.max(np.abs(g - fd)) / np.max(np.abs(fd)))
    ok = np.linalg.norm(g0) < 1e-9 and rel < 1e-6
    return ok, f"gradient vs differences {rel:.1e}"


def check_hessian():
    b = circle(1.0)
    s = hessian_L_eta(b, [SQ2, 0.0], ETA_LUNE)
    lam = np.sort(np.abs(s.eigenvalues))
    b10 = circle(10.0)
    s10 = hessian_L_eta(b10, [10 * SQ2, 0.0], 100 * ETA_LUNE)
    scale = np.sort(np.abs(s10.eigenvalues))[1] * 10.0
    ok = lam[0] <= 1e-5 and abs(lam[1] - 3.4535) < 1e-3 and abs(scale - lam[1]) < 1e-5 * lam[1]
    return ok, f"eigenvalues {lam[0]:.1e}, {lam[1]:.6f}; scaled {scale:.6f}"


def check_find_critical():
    c = find_critical(circle(1.0), ETA_LUNE)
    a = c[0].arc
    big = find_critical(circle(100.0), 1.0, with_spectrum=False)[0].length
    upper = 2 * math.sqrt(math.pi) * math.sqrt(1 - math.atan(math.sqrt(math.pi / 2) * 100) / math.pi)
    ok = (len(c) == 1 and abs(a.radius - 1) < 1e-6 and abs(np.linalg.norm(a.center) - SQ2) < 1e-6
          and abs(a.length - 1.5 * math.pi) < 1e-6 and math.sqrt(2 * math.pi) <= big <= upper)
    return ok, f"unit lune r={a.radius:.9f}; R=100 profile {big:.9f} <= {upper:.9f}"


def check_companion():
    b = circle(1.0)
    arc = _lune_arc()
    comp, d0 = companion_arc(OpenCurve(arc.sample(512)), b)
    ratios = []
    for amp in (1e-2, 5e-3):
        c = OpenCurve(perturbed_arc(arc, 512, amp))
        _, d = companion_arc(c, b)
        ratios.append(d / c.geometry.curvature_deviation())
    rev, _ = companion_arc(OpenCurve(arc.sample(512)[::-1].copy()), b)
    ok = (d0 < 1e-2 and abs(ratios[0] / ratios[1] - 1) < 0.2
          and comp.orientation == -rev.orientation)
    return ok, f"fixed point distance {d0:.1e}; ratio {ratios[0]:.3f} vs {ratios[1]:.3f}"


def check_corrected():
    b = circle(1.0)
    arc = _lune_arc()
    same, _ = corrected_arc(OpenCurve(arc.sample(512)), b, ETA_LUNE)
    c = OpenCurve(perturbed_arc(arc, 512, 1e-2))
    fixed, info = corrected_arc(c, b, ETA_LUNE)
    ok = (abs(same.radius - 1) < 1e-3 and abs(fixed.area - ETA_LUNE) <= 1e-10 * ETA_LUNE
          and info["bound_ratio"] <= 1.1)
    return ok, f"radius bound ratio {info['bound_ratio']:.4f}"


def check_variations():
    b = circle(1.0)
    pure_r = variation_check(b, 1.0, [SQ2, 0.0], 1.0, [0.0, 0.0])
    trans = variation_check(b, 1.0, [SQ2, 0.0], None, [1.0, 0.0])
    tilted = variation_check(b, 0.8, [1.5, 0.3], 0.4, [0.3, -0.7])
    fd_l = trans["values"]["length"][1]
    ok = (pure_r["max_relative_error"] < 1e-6 and abs(fd_l) < 1e-6
          and tilted["max_relative_error"] < 1e-6)
    return ok, f"tilted family max error {tilted['max_relative_error']:.1e}"


# -- flow ----------------------------------------------------------------------

def check_preconditions_examples():
    big = circle(100.0)
    arc = find_critical(big, 1.0, with_spectrum=False)[0].arc
    p = check_preconditions(big, arc.to_curve(256), 1.0)
    unit = check_preconditions(circle(1.0), _lune_arc().to_curve(256), ETA_LUNE)
    zero = check_preconditions(circle(1.0), _lune_arc().to_curve(256), 0.0)
    L = p["length"]
    flat = 80.0 * math.asin(1.0 / 2.507 ** 2)
    ok = (p["ok"] and abs(p["smallness_value"] - 80.0 * math.asin(1.0 / L ** 2)) < 1e-9
          and abs(flat - 12.78) < 0.005 and not unit["ok"]
          and abs(unit["smallness_value"] - 0.0928) < 1e-3 and not zero["ok"]
          and "vacuous" in zero["message"])
    return ok, f"values {p['smallness_value']:.4f}, {unit['smallness_value']:.4f}"


def check_stationary_and_dissipation():
    big = circle(100.0)
    arc = find_critical(big, 1.0, with_spectrum=False)[0].arc
    cfg = FlowConfig(n=512)
    st = prepare(arc.sample(512), big, 1.0, cfg)
    new, _ = step(st, cfg, big)
    move = float(np.max(np.linalg.norm(new.nodes - st.nodes, axis=1)))
    pert = prepare(perturbed_arc(arc, 512, 0.05), big, 1.0, cfg)
    d = dissipation_check(pert, big, cfg)
    d2 = dissipation_check(pert, big, cfg, dt=0.5 * d["dt"])
    ok = move <= 1e-4 and d["relative_error"] < 0.05 and d2["relative_error"] < d["relative_error"]
    return ok, (f"stationary move {move:.1e}; dissipation error {d['relative_error']:.1e} -> "
                f"{d2['relative_error']:.1e}")


def check_fit_selftest():
    t = np.linspace(0.0, 10.0, 400)
    L = 2.0 + 0.3 * np.exp(-1.7 * t)
    r = fit_rate(t, L, l_inf=2.0)
    return abs(r["c_rate"] - 1.7) < 1e-6, f"recovered rate {r['c_rate']:.9f}"


def check_flow_run():
    big = circle(100.0)
    crit = find_critical(big, 1.0, with_spectrum=False)[0]
    cfg = FlowConfig(n=256)
    st = prepare(perturbed_arc(crit.arc, 256, 0.05), big, 1.0, cfg)
    tr = run(st, cfg, big)
    ok = tr.converged and abs(tr.L[-1] - crit.length) < 1e-4
    return ok, f"steps {tr.steps}, terminal gap {tr.L[-1] - crit.length:.2e}"


# -- stability -----------------------------------------------------------------

def check_deficit_examples():
    from .stability import PolygonSet, deficit
    b = circle(100.0)
    eta = 1.0
    l0 = find_critical(b, eta, with_spectrum=False)[0].length
    r = math.sqrt(eta / math.pi)
    far = Point(300.0, 0.0).buffer(r, 256)
    disk_eta = far.area
    d = deficit(PolygonSet([far], disk_eta), b, disk_eta, profile=l0)
    expect = far.length - l0
    ok = abs(d - expect) < 1e-9 and d > 0
    return ok, f"far disc deficit {d:.6f}"


def check_component_selection():
    from .stability import PolygonSet, select_component_fill_holes
    b = circle(1.0)
    disc = Polygon(b.points(np.linspace(0.0, 2 * math.pi, 4097)[:-1]))
    main = box(0.5, -0.5, 1.6, 0.5).difference(disc)
    speck = box(5.0, 5.0, 5.01, 5.01)
    _, info = select_component_fill_holes(PolygonSet([main, speck], 1.0), b, 1.0)
    hole = Point(1.3, 0.0).buffer(0.05, 64)
    _, info2 = select_component_fill_holes(PolygonSet([main.difference(hole)], 1.0), b, 1.0)
    ok = (abs(info["sym_diff"] - 1e-4) < 1e-12 and info2["perimeter_out"] < info2["perimeter_in"]
          and abs(info2["area_out"] - info2["area_in"] - hole.area) < 1e-12)
    return ok, f"speck {info['sym_diff']:.2e}, hole {info2['area_out'] - info2['area_in']:.6f}"


def check_reduction_minimizer():
    from .stability import PolygonSet, reduce
    b = circle(100.0)
    crit = find_critical(b, 1.0, with_spectrum=False)[0]
    E = PolygonSet.from_curve(crit.arc.to_curve(256), b, 1.0)
    F, rep = reduce(E, b, 1.0, n=256)
    c = rep.contracts(1.0)
    ok = c["all"] and rep.sym_diff < 1e-4 and abs(rep.deficit_out) < 1e-4
    return ok, f"sym diff {rep.sym_diff:.1e}, contracts {c['all']}"


def check_profile_example():
    from .stability import profile_and_sublinearity
    rep = profile_and_sublinearity(circle(100.0), [0.5, 1.0], partitions=5, seed=0)
    return rep["ok"], "bounds, Lipschitz sandwich and sublinearity"


def check_stability_slopes():
    from .stability import stability_experiment
    r = stability_experiment(circle(100.0), 1.0, "radial-bump", [0.01, 0.02, 0.04, 0.08], n=256)
    f = r["fits"]
    ok = abs(f["deficit_vs_sym_diff"] - 2) <= 0.15 and abs(f["perimeter_gap_vs_hausdorff_sq"] - 1) <= 0.15
    return ok, f"slopes {f['deficit_vs_sym_diff']:.3f}, {f['perimeter_gap_vs_hausdorff_sq']:.3f}"


def check_loj_slopes():
    from .flow import lojasiewicz_scan
    r = lojasiewicz_scan(circle(100.0), 1.0, list(np.geomspace(1e-3, 1e-1, 5)), FlowConfig(n=256))
    ok = abs(r["distance_slope"] - 1) <= 0.1 and abs(r["length_slope_vs_eps"] - 2) <= 0.1
    return ok, f"slopes {r['distance_slope']:.3f}, {r['length_slope_vs_eps']:.3f}"


# -- further examples ------------------------------------------------------------

def check_projection_interior():
    try:
        project_to_boundary(circle(1.0), [0.2, 0.1])
    except GeometryError as exc:
        return "interior" in exc.message, exc.message
    return False, "no error for an interior point"


def check_closing_degenerate():
    b = circle(1.0)
    # teardrop loop leaving and returning to (1, 0)
    s = np.linspace(0.0, 1.0, 65)
    loop = np.column_stack([1.0 + 0.5 * np.sin(np.pi * s) ** 2, 0.3 * np.sin(2 * np.pi * s)])
    loop[[0, -1]] = [1.0, 0.0]
    sig = closing_arc(OpenCurve(loop), b)
    return sig.length == 0.0 and sig.shoelace == 0.0, f"length {sig.length}, shoelace {sig.shoelace}"


def check_c1_radius_slope():
    b = circle(1.0)
    z = np.array([SQ2, 0.0])
    base = arc_outside(b, z, 1.0).sample(512)
    d = [c1_distance(base, arc_outside(b, z, 1.0 + h).sample(512)) for h in (1e-3, 5e-4)]
    ratio = d[0] / d[1]
    return abs(ratio - 2.0) < 0.05, f"distance ratio under halving {ratio:.4f}"


def check_rotated_arcs_raster():
    b = circle(1.0)
    rot = math.radians(5.0)
    z1 = np.array([SQ2, 0.0])
    z2 = SQ2 * np.array([math.cos(rot), math.sin(rot)])
    a1, a2 = arc_outside(b, z1, 1.0), arc_outside(b, z2, 1.0)
    from .curve import region_polygon
    sd = symmetric_difference_area(region_polygon(a1.to_curve(2048), b),
                                   region_polygon(a2.to_curve(2048), b))
    dh = hausdorff_distance(a1.sample(2048), a2.sample(2048))
    # rasterized oracle on a 2000 x 2000 grid over the union's bounding box
    lo, hi = np.array([-0.1, -1.1]), np.array([2.6, 1.3])
    m = 2000
    gx = lo[0] + (np.arange(m) + 0.5) * (hi[0] - lo[0]) / m
    gy = lo[1] + (np.arange(m) + 0.5) * (hi[1] - lo[1]) / m
    X, Y = np.meshgrid(gx, gy)
    out = X * X + Y * Y > 1.0
    in1 = out & ((X - z1[0]) ** 2 + (Y - z1[1]) ** 2 < 1.0)
    in2 = out & ((X - z2[0]) ** 2 + (Y - z2[1]) ** 2 < 1.0)
    cell = float(np.prod((hi - lo) / m))
    sd_raster = float(np.count_nonzero(in1 ^ in2)) * cell
    # brute-force point-cloud Hausdorff between dense samples
    p, q = a1.sample(2000), a2.sample(2000)
    dist = np.sqrt(((p[:, None, :] - q[None, :, :]) ** 2).sum(axis=2))
    dh_raster = max(dist.min(axis=1).max(), dist.min(axis=0).max())
    ok = abs(sd - sd_raster) / sd_raster < 0.01 and abs(dh - dh_raster) / dh_raster < 0.01
    return ok, f"sym diff {sd:.6f} vs {sd_raster:.6f}; d_H {dh:.6f} vs {dh_raster:.6f}"


def check_area_preserving_directions():
    from .arcs import area_preserving_directions, gradient_bound, gradient_from_arc
    b = circle(1.0)
    rng = np.random.default_rng(3)
    worst_y, worst_g = 0.0, 0.0
    for _ in range(20):
        d = rng.uniform(1.1, 2.0)
        r = rng.uniform(d - 0.9, d + 0.9)
        arc = arc_outside(b, [d, 0.0], r)
        y1, y2 = area_preserving_directions(arc)
        worst_y = max(worst_y, np.linalg.norm(y1), np.linalg.norm(y2))
        g = np.linalg.norm(gradient_from_arc(arc))
        worst_g = max(worst_g, g - gradient_bound(arc))
    return worst_y <= 2.0 and worst_g <= 1e-12, f"max |Y_i| {worst_y:.6f}"


def check_ellipse_critical():
    e = ellipse(2.0, 1.0)
    crit = find_critical(e, 0.05)
    levels = sorted({round(c.length, 8) for c in crit})
    nondeg = all(np.min(np.abs(c.spectrum.eigenvalues)) > 1e-6 for c in crit)
    ok = len(levels) >= 2 and nondeg and all(c.arc.angle_defect() < 1e-6 for c in crit)
    return ok, f"{len(crit)} critical arcs, levels {levels}"


def check_renormalization():
    big = circle(100.0)
    arc = find_critical(big, 1.0, with_spectrum=False)[0].arc
    cfg = FlowConfig(n=512)
    drift = []
    for amp in (0.05, 0.025):
        st = prepare(perturbed_arc(arc, 512, amp), big, 1.0, cfg)
        new, info = step(st, cfg, big)
        drift.append(abs(info.area_before - 1.0) / info.dt)
        after = abs(area_with_params(big, new.nodes, new.theta)[0] - 1.0)
    ratio = drift[0] / drift[1]
    return after <= 1e-10 and abs(ratio - 2.0) < 0.2, f"drift/dt ratio {ratio:.3f}, after {after:.1e}"


def check_stationary_run():
    from .flow import displacement_bounds
    big = circle(100.0)
    arc = find_critical(big, 1.0, with_spectrum=False)[0].arc
    cfg = FlowConfig(n=512)
    tr = run(prepare(arc.sample(512), big, 1.0, cfg), cfg, big)
    d = displacement_bounds(tr)
    ok = tr.steps == 0 and tr.converged and d["normal_integral"] == 0.0 and d["ratio"] == 0.0
    return ok, f"steps {tr.steps}"


def check_straight_segment_equivalence():
    from .flow import l2_equivalence
    n, dt, w = 64, 1e-3, np.array([0.3, 0.8])
    s = np.linspace(0.0, 1.0, n + 1)
    x0 = np.column_stack([2.0 * s, 0.5 * s])
    vel = ((x0 + dt * w) - x0) / dt
    g = PolylineGeometry(x0)
    sq = np.einsum("ij,ij->i", vel, vel)
    v_l2 = math.sqrt(float(np.dot(sq, g.weights)))
    vt_l2 = math.sqrt(float(np.mean(sq)))
    r = l2_equivalence([g.length], [v_l2], [vt_l2], [0.0])
    return float(r["lhs"][0]) <= 1e-12, f"|L v~^2 - v^2| = {float(r['lhs'][0]):.1e}"


def check_h1_upgrade():
    from .flow import _with_area, discrete_critical, h1_upgrade_check, perturbed_nodes
    big = circle(100.0)
    arc = find_critical(big, 1.0, with_spectrum=False)[0].arc
    base = discrete_critical(arc, big, 1.0, FlowConfig(n=256))
    ref = base.nodes
    normals = -PolylineGeometry(ref).node_normals
    same = h1_upgrade_check(ref, ref)
    consts = []
    for a in (1e-2, 5e-3):
        x = _with_area(big, perturbed_nodes(ref, a, normals=normals), base.theta, 1.0, normals)
        consts.append(h1_upgrade_check(x, ref)["constant"])
    phi = 0.01
    c, s_ = math.cos(phi), math.sin(phi)
    rotated = ref @ np.array([[c, -s_], [s_, c]]).T
    rot = h1_upgrade_check(rotated, ref)
    ok = (same["lhs"] == 0.0 and abs(consts[0] / consts[1] - 1) < 0.1
          and abs(rot["length_gap"]) < 1e-10 and rot["constant"] <= max(consts))
    return ok, f"constants {consts[0]:.4f}, {consts[1]:.4f}; rotated {rot['constant']:.4f}"


def _lune_region(b, z, r, n=4096):
    from .curve import region_polygon
    return region_polygon(arc_outside(b, z, r).to_curve(n), b)


def check_deficit_shifted():
    from scipy.optimize import brentq
    from .stability import PolygonSet, deficit
    b = circle(1.0)
    d = brentq(lambda t: arc_outside(b, [t, 0.0], 1.05).area - ETA_LUNE, 1.2, 1.6, xtol=1e-15)
    arc = arc_outside(b, [d, 0.0], 1.05)
    poly = _lune_region(b, [d, 0.0], 1.05, 8192)
    val = deficit(PolygonSet([poly], ETA_LUNE), b, ETA_LUNE, profile=1.5 * math.pi)
    oracle = L_eta(b, [d, 0.0], ETA_LUNE) - 1.5 * math.pi
    zero = deficit(PolygonSet([_lune_region(b, [SQ2, 0.0], 1.0, 8192)], ETA_LUNE), b, ETA_LUNE,
                   profile=1.5 * math.pi)
    ok = val > 0 and abs(val - oracle) < 1e-6 and abs(zero) < 1e-6 and abs(arc.radius - 1.05) == 0
    return ok, f"deficit {val:.9f} vs {oracle:.9f}; minimizer {zero:.1e}"


def _half_lens(b, depth=0.0, n=512):
    """Free boundary of the unit lune, optionally with a notch at its middle."""
    x = arc_outside(b, [SQ2, 0.0], 1.0).sample(n)
    if depth > 0:
        k = n // 2
        c = x[k] - np.array([SQ2, 0.0])
        x[k] = x[k] - depth * c / np.linalg.norm(c)
    return x


def check_clip_examples():
    from .stability import clip_and_hull
    b = circle(1.0)
    x = _half_lens(b)
    y, info = clip_and_hull(x, b)
    same = info["hausdorff"] < 1e-9 and abs(info["perimeter_drop"]) < 1e-9
    xd = _half_lens(b, 0.05)
    yd, infod = clip_and_hull(xd, b)
    dent = infod["perimeter_drop"] > 0 and infod["chord_checks"] and \
        all(c["holds"] for c in infod["chord_checks"])
    # obtuse contact: flare out from the body before turning up
    t = np.linspace(-0.3, 0.3, 33)
    sig = b.points(t)
    free = np.array([sig[-1], [1.2, 0.55], [1.6, 0.6], [1.6, -0.6], [1.2, -0.55], sig[0]])
    poly = Polygon(np.vstack([sig, free[1:-1]]))
    yo, infoo = clip_and_hull(poly, b)
    obtuse = max(infoo["contact_angles"]) <= 0.5 * math.pi + 1e-6
    return same and dent and obtuse, (f"dent drop {infod['perimeter_drop']:.2e}; contact "
                                      f"{max(infoo['contact_angles']):.6f}")


def check_area_cut_examples():
    from .stability import area_correct_down, curve_area
    b = circle(1.0)
    x = _half_lens(b)
    a0 = curve_area(b, x)
    same, i0 = area_correct_down(x, b, a0)
    y, i1 = area_correct_down(x, b, a0 - 0.01)
    z, i2 = area_correct_down(x, b, 0.5 * a0)
    ok = (same is x or np.array_equal(same, x)) and abs(i1["removed_area"] - 0.01) <= 1e-10 * a0 \
        and i1["perimeter_out"] < i1["perimeter_in"] \
        and abs(curve_area(b, z) - 0.5 * a0) <= 1e-10 * a0 and i2["hausdorff"] <= i2["removed_diameter"]
    return ok, f"removed {i1['removed_area']:.12f}; half cut d_H {i2['hausdorff']:.4f}"


def check_mollify_examples():
    from .stability import bezier_corner, bezier_curvature, bezier_eval, curve_area, mollify
    b = circle(1.0)
    x = _half_lens(b, n=256)
    c, info = mollify(x, b, ETA_LUNE, n=256)
    near = info["hausdorff"] < 1e-3 and abs(info["rho"]) < 1e-4
    # convex polygon short of area by one percent
    p = b.points(np.array([-0.4, 0.4]))
    poly = np.array([p[0], [1.5, -0.55], [1.8, 0.0], [1.5, 0.55], p[1]])
    a = curve_area(b, poly)
    _, i2 = mollify(poly, b, a / 0.99, n=256)
    first = abs(i2["rho"] - i2["rho_first_order"]) <= 0.1 * abs(i2["rho_first_order"])
    # on a finely subdivided polygon corner rounding is negligible and the
    # rule holds against the input area itself
    fine = np.concatenate([np.linspace(poly[i], poly[i + 1], 40, endpoint=False)
                           for i in range(len(poly) - 1)] + [poly[-1:]])
    _, i3 = mollify(fine, b, a / 0.99, n=256)
    first = first and abs(i3["rho"] - i3["rho_input_rule"]) <= 0.1 * abs(i3["rho_input_rule"])
    ctrl = bezier_corner(np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([1.3, 0.8]))
    k = np.abs(bezier_curvature(ctrl, [0.0, 1.0]))
    d = bezier_eval(ctrl, [0.0, 1.0], 1)
    tang = max(abs(d[0, 1] / np.linalg.norm(d[0])),
               np.linalg.norm(d[1] / np.linalg.norm(d[1]) - np.array([0.3, 0.8]) / math.hypot(0.3, 0.8)))
    ok = near and first and float(k.max()) <= 1e-6 and tang <= 1e-10
    return ok, (f"rho {i2['rho']:.5f} vs first order {i2['rho_first_order']:.5f}, "
                f"fine {i3['rho']:.5f} vs {i3['rho_input_rule']:.5f}; "
                f"end curvature {k.max():.1e}")


def check_reduce_speck_dent():
    from .stability import PolygonSet, reduce
    from .curve import region_polygon
    b = circle(100.0)
    crit = find_critical(b, 1.0, with_spectrum=False)[0]
    x = crit.arc.sample(256)
    k = 128
    c = x[k] - crit.arc.center
    x[k] = x[k] - 0.03 * c / np.linalg.norm(c)
    far = crit.arc.center + 10 * c / np.linalg.norm(c)
    speck = box(far[0], far[1], far[0] + 0.02, far[1] + 0.02)
    E = PolygonSet([region_polygon(OpenCurve(x), b), speck], 1.0)
    F, rep = reduce(E, b, 1.0, n=256)
    ct = rep.contracts(1.0)
    ok = ct["all"] and rep.deficit_in > 0 and math.isfinite(rep.c1_candidate) \
        and math.isfinite(rep.hausdorff_candidate)
    return ok, f"C1 candidate {rep.c1_candidate:.3f}, d_H candidate {rep.hausdorff_candidate:.3f}"


def check_stability_zero():
    from .stability import stability_experiment
    r = stability_experiment(circle(100.0), 1.0, "radial-bump", [0.0], n=256)
    row = r["rows"][0]
    ok = row["sym_diff"] < 1e-9 and row["hausdorff"] < 1e-9
    return ok, f"sym diff {row['sym_diff']:.1e}, d_H {row['hausdorff']:.1e}"


def check_half_plane_limit():
    from .arcs import isoperimetric_profile
    from .stability import sublinearity_constant
    radii = (1.0, 10.0, 100.0, 1000.0)
    ratios = [isoperimetric_profile(circle(R), 1.0) / math.sqrt(2 * math.pi) for R in radii]
    mono = all(a > b for a, b in zip(ratios[:-1], ratios[1:])) and ratios[-1] - 1 < 1e-3
    R = 1000.0
    gap = 2 * isoperimetric_profile(circle(R), 0.5) - isoperimetric_profile(circle(R), 1.0)
    limit = (SQ2 - 1) * math.sqrt(2 * math.pi)
    c0 = sublinearity_constant(1.0, 1.0 / R)
    ok = mono and gap >= c0 * math.sqrt(0.5) and abs(gap - limit) < 1e-2
    return ok, f"ratios {['%.5f' % v for v in ratios]}; gap {gap:.5f} vs {limit:.5f}"


def check_svg_contracts():
    import os
    import tempfile
    from .cli import render_svg
    b = circle(1.0)
    arc = _lune_arc()
    with tempfile.TemporaryDirectory() as d:
        p0, p1, p2 = (os.path.join(d, f) for f in ("empty.svg", "a.svg", "b.svg"))
        render_svg([], b, p0)
        render_svg([arc.sample(64)], b, p1, arcs=[arc])
        render_svg([arc.sample(64)], b, p2, arcs=[arc])
        empty = open(p0).read()
        same = open(p1, "rb").read() == open(p2, "rb").read()
    ok = same and empty.count("<polygon") == 1 and "<polyline" not in empty
    return ok, "sigma-only empty render; byte-identical repeats"


QUICK = [check_boundary_points, check_projection, check_subarcs, check_global,
         check_lune_report, check_closing_arc, check_lune_areas, check_resample,
         check_distances, check_arc_family, check_radius_solve, check_gradient, check_hessian,
         check_find_critical, check_companion, check_corrected, check_variations,
         check_preconditions_examples, check_fit_selftest, check_deficit_examples,
         check_component_selection, check_projection_interior, check_closing_degenerate,
         check_c1_radius_slope, check_rotated_arcs_raster, check_area_preserving_directions,
         check_deficit_shifted, check_clip_examples, check_area_cut_examples,
         check_mollify_examples, check_svg_contracts]
FULL = [check_stationary_and_dissipation, check_renormalization, check_stationary_run,
        check_straight_segment_equivalence, check_h1_upgrade, check_flow_run,
        check_reduction_minimizer, check_reduce_speck_dent, check_ellipse_critical,
        check_profile_example, check_half_plane_limit, check_loj_slopes, check_stability_zero,
        check_stability_slopes]


def run_all(full: bool = False, verbose: bool = False) -> list[dict]:
    out = []
    for fn in QUICK + (FULL if full else []):
        name = fn.__name__.removeprefix("check_")
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failed check, reported with its message
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        row = {"name": name, "passed": bool(passed), "detail": detail,
               "seconds": round(time.perf_counter() - t0, 3)}
        out.append(row)
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return out
