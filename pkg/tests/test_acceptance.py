"""Acceptance gate: one test per criterion, each at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from isoflow.arcs import find_critical, hessian_L_eta, variation_check
from isoflow.curve import OpenCurve, enclosed_area
from isoflow.flow import (FlowConfig, dissipation_check, displacement_bounds, fit_rate,
                          l2_equivalence_check, lojasiewicz_scan, perturbed_arc, prepare,
                          region_displacement_pairs, run)
from isoflow.obstacle import boundary_at, circle, ellipse
from isoflow.stability import PolygonSet, profile_and_sublinearity, reduce, stability_experiment
from battery import battery

SQ2 = math.sqrt(2.0)
LUNE_ETA = 1.0 + 0.5 * math.pi
# second derivative of the reduced length along the radial direction at the
# unit-circle lune, from the lens-formula oracle below (frozen)
RADIAL_EIGENVALUE = 3.453366


def _lens_lune(d, r):
    """Area and length of the part of the circle (centre distance d, radius r)
    outside the unit disc, from the two-disc lens formulas."""
    c1 = (d * d + r * r - 1.0) / (2.0 * d * r)
    c0 = (d * d + 1.0 - r * r) / (2.0 * d)
    a1, a0 = math.acos(c1), math.acos(c0)
    lens = r * r * a1 + a0 - 0.5 * math.sqrt((-d + r + 1) * (d + r - 1) * (d - r + 1) * (d + r + 1))
    return math.pi * r * r - lens, r * (2.0 * math.pi - 2.0 * a1)


def _oracle_length(d, eta):
    r = brentq(lambda r: _lens_lune(d, r)[0] - eta, abs(d - 1.0) + 1e-12, d + 1.0 - 1e-12,
               xtol=1e-15, rtol=1e-15)
    return _lens_lune(d, r)[1]


def _chain_radial_second_derivative():
    """Closed-form radial second derivative at the unit-circle lune
    (boundary curvature 1, offset radius 1, half-angle pi/4)."""
    q = 2.0 / (1.5 * math.pi)
    b = 0.25 * math.pi
    dalpha = (1.0 + q) * math.sin(b) + math.cos(b)
    return (2.0 + 2.0 * q) * math.sin(b) * dalpha


def _oracle_radial_second_derivative(h=1e-3):
    f = [_oracle_length(SQ2 + k * h, LUNE_ETA) for k in (-2, -1, 0, 1, 2)]
    return (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)


# -- shared runs -----------------------------------------------------------------

@pytest.fixture(scope="module")
def big():
    b = circle(100.0)
    return b, find_critical(b, 1.0, with_spectrum=False)[0]


@pytest.fixture(scope="module")
def flow_runs(big):
    """Convergence runs (amplitude 0.05 at N=256, 512) and the displacement sweep."""
    b, crit = big
    runs = {}
    for n, amp in [(256, 0.05), (512, 0.05), (256, 1e-3), (256, 1e-2), (256, 1e-1)]:
        cfg = FlowConfig(n=n)
        st = prepare(perturbed_arc(crit.arc, n, amp), b, 1.0, cfg)
        runs[(n, amp)] = (cfg, st, run(st, cfg, b))
    return runs


# -- criteria --------------------------------------------------------------------

def test_criterion_01_closed_form_critical_arc():
    area, length = _lens_lune(SQ2, 1.0)
    assert area == pytest.approx(LUNE_ETA, abs=1e-14)
    assert length == pytest.approx(1.5 * math.pi, abs=1e-14)
    crit = find_critical(circle(1.0), LUNE_ETA)
    arc = crit[0].arc
    assert abs(arc.radius - 1.0) <= 1e-6
    assert abs(np.linalg.norm(arc.center) - SQ2) <= 1e-6
    assert abs(arc.length - 1.5 * math.pi) <= 1e-6
    poly = OpenCurve(arc.sample(100_000))
    assert abs(enclosed_area(poly, circle(1.0)) - LUNE_ETA) <= 1e-8


def test_criterion_02_variation_formulas():
    rng = np.random.default_rng(7)
    worst = 0.0
    for k in range(20):
        body = circle(1.0) if k % 2 == 0 else ellipse(2.0, 1.0)
        bp = boundary_at(body, rng.uniform(0.0, 2 * math.pi))
        d = rng.uniform(0.2, 1.0)
        z = bp.position - d * bp.normal
        r = d + rng.uniform(0.1, 0.6)
        dz = rng.normal(size=2)
        for dr in (float(rng.normal()), None):
            worst = max(worst, variation_check(body, r, z, dr, dz)["max_relative_error"])
    print(f"worst relative error {worst:.2e}")
    assert worst <= 1e-6


def test_criterion_03_hessian_benchmark():
    oracle = _oracle_radial_second_derivative()
    assert oracle == pytest.approx(RADIAL_EIGENVALUE, abs=1e-5)
    assert _chain_radial_second_derivative() == pytest.approx(oracle, abs=1e-6)
    s = hessian_L_eta(circle(1.0), [SQ2, 0.0], LUNE_ETA)
    lam = sorted(np.abs(s.eigenvalues))
    print(f"eigenvalues {lam[0]:.2e}, {lam[1]:.6f}; oracle {oracle:.6f}")
    assert lam[0] <= 1e-5
    assert abs(lam[1] - RADIAL_EIGENVALUE) <= 1e-3
    assert abs(RADIAL_EIGENVALUE - 3.4535) <= 1e-3


def test_criterion_04_profile_bounds():
    grids = {1.0: [0.25, 0.5, 1.0, 2.0], 10.0: [0.5, 1.0, 2.0, 4.0], 100.0: [0.5, 1.0, 2.0]}
    for R, etas in grids.items():
        rep = profile_and_sublinearity(circle(R), etas, partitions=50, seed=0)
        assert len(rep["partitions"]) == 50
        assert all(r["bounds_ok"] for r in rep["profile"]), R
        assert all(r["ok"] for r in rep["lipschitz"]), R
        assert all(p["ok"] for p in rep["partitions"]), R


def test_criterion_05_conservation_and_dissipation(big, flow_runs):
    b, _ = big
    for key, (cfg, st, tr) in flow_runs.items():
        a = tr.arrays()
        assert np.max(np.abs(a["A"] - 1.0)) <= 1e-10, key
        assert np.max(np.diff(a["L"])) <= 1e-10, key
        d1 = dissipation_check(st, b, cfg)
        d2 = dissipation_check(st, b, cfg, dt=0.5 * d1["dt"])
        print(f"{key}: dissipation error {d1['relative_error']:.2e} -> {d2['relative_error']:.2e}")
        assert d1["relative_error"] <= 0.05, key
        assert d2["relative_error"] <= 0.025, key


def test_criterion_06_exponential_convergence(flow_runs):
    rates = {}
    for n in (256, 512):
        _, _, tr = flow_runs[(n, 0.05)]
        assert tr.converged and tr.eps[-1] < 1e-6
        f = fit_rate(tr.t, tr.L)
        print(f"N={n}: rate {f['c_rate']:.4f}, r2 {f['r2']:.6f}")
        assert f["r2"] >= 0.99 and f["c_rate"] > 0
        rates[n] = f["c_rate"]
    assert abs(rates[256] - rates[512]) <= 0.1 * rates[512]


def test_criterion_07_displacement_bound(big, flow_runs):
    b, _ = big
    ratios = []
    for amp in (1e-3, 1e-2, 1e-1):
        _, _, tr = flow_runs[(256, amp)]
        assert tr.converged
        f = fit_rate(tr.t, tr.L)
        ratios.append(displacement_bounds(tr, f["L_infinity"])["ratio"])
        assert l2_equivalence_check(tr)["violations"] == 0
        pairs = region_displacement_pairs(tr, b, pairs=10)
        assert len(pairs) == 10 and all(p["holds"] for p in pairs)
    print("ratios", ", ".join(f"{r:.4f}" for r in ratios))
    assert max(ratios) / min(ratios) < 3.0


def test_criterion_08_lojasiewicz_exponents():
    r = lojasiewicz_scan(circle(100.0), 1.0, list(np.geomspace(1e-3, 1e-1, 7)), FlowConfig(n=512))
    print(f"C1 distance slope {r['distance_slope']:.4f}, length slope vs eps^2 {r['length_slope']:.4f}")
    assert abs(r["distance_slope"] - 1.0) <= 0.1
    assert abs(r["length_slope"] - 1.0) <= 0.1


def test_criterion_09_stability_exponent():
    r = stability_experiment(circle(100.0), 1.0, "radial-bump", [0.01, 0.02, 0.04, 0.08], n=256)
    f = r["fits"]
    print(f"slopes {f['deficit_vs_sym_diff']:.4f}, {f['perimeter_gap_vs_hausdorff_sq']:.4f}")
    assert len(r["rows"]) == 4
    assert abs(f["deficit_vs_sym_diff"] - 2.0) <= 0.15
    assert abs(f["perimeter_gap_vs_hausdorff_sq"] - 1.0) <= 0.15
    assert all(row["reduction_ok"] for row in r["rows"])


def test_criterion_10_reduction_correctness():
    cases = battery()
    assert len(cases) == 20
    failures = []
    for name, body, polys in cases:
        E = PolygonSet(polys)
        eta = E.geometry.area
        _, rep = reduce(E, body, eta, n=256)
        ok = (rep.relatively_convex
              and max(rep.contact_angles) <= 0.5 * math.pi + 1e-6
              and abs(rep.area_error) <= 1e-10 * eta
              and all(c["holds"] for c in rep.chord_checks)
              and rep.contracts(eta)["all"])
        if not ok:
            failures.append(name)
    assert not failures, failures
