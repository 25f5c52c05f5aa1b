import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isoflow.arcs import arc_with_area, find_critical
from isoflow.curve import PolylineGeometry, area_with_params
from isoflow.errors import ConfigError
from isoflow.flow import (FlowConfig, check_preconditions, displacement_bounds, fit_rate,
                          l2_equivalence_check, perturbed_arc, prepare, run, step)
from isoflow.obstacle import circle, ellipse

ETA = 1.0 + 0.5 * math.pi


@pytest.fixture(scope="module")
def unit_run():
    """Perturbed off-centre lune on the unit disc, flowed to convergence."""
    b = circle(1.0)
    arc = arc_with_area(b, [1.6, 0.2], ETA)
    cfg = FlowConfig(n=128, snapshot_every=25)
    st0 = prepare(perturbed_arc(arc, 128, 0.1), b, ETA, cfg)
    states = [st0]
    s = st0
    for _ in range(300):
        s, _ = step(s, cfg, b)
        states.append(s)
    return b, cfg, states, run(st0, cfg, b)


@pytest.mark.parametrize("kw", [dict(n=8), dict(scheme="rk4"), dict(boundary_rule="free"),
                                dict(c_cfl=0.0), dict(tol=-1.0), dict(t_max=0.0),
                                dict(max_steps=-1), dict(snapshot_every=0)])
def test_config_rejects(kw):
    with pytest.raises(ConfigError):
        FlowConfig(**kw)


def test_prepare_rejects_nonpositive_area():
    arc = arc_with_area(circle(1.0), [1.5, 0.0], 1.0)
    with pytest.raises(ConfigError):
        prepare(arc.sample(64), circle(1.0), 0.0, FlowConfig(n=64))


def test_step_invariants(unit_run):
    b, cfg, states, _ = unit_run
    lower = math.sqrt(2 * math.pi * ETA)
    lengths = []
    for s in states:
        x = s.nodes
        g = PolylineGeometry(x)
        ends = b.points(np.asarray(s.theta))
        assert np.max(np.linalg.norm(ends - x[[0, -1]], axis=1)) <= 1e-10
        assert area_with_params(b, x, s.theta)[0] == pytest.approx(ETA, abs=cfg.area_tol * ETA)
        _, _, inward, _ = b.frame(np.asarray(s.theta))
        e0 = (x[1] - x[0]) / np.linalg.norm(x[1] - x[0])
        e1 = (x[-2] - x[-1]) / np.linalg.norm(x[-2] - x[-1])
        bound = 2 * g.segment_lengths.max() * max(b.kappa_max, np.abs(g.kappa).max())
        assert np.linalg.norm(e0 + inward[0]) <= bound
        assert np.linalg.norm(e1 + inward[1]) <= bound
        assert g.length >= lower
        lengths.append(g.length)
    assert np.all(np.diff(lengths) <= 1e-12)


def test_run_converges_and_snaps(unit_run):
    b, cfg, _, tr = unit_run
    assert tr.converged and tr.halted is None
    assert tr.eps[-1] < cfg.tol
    assert tr.snapped is not None
    arc = tr.snapped.arc
    assert abs(arc.alpha1 - 0.5 * math.pi) <= 1e-6 and abs(arc.alpha2 - 0.5 * math.pi) <= 1e-6
    best = find_critical(b, ETA, with_spectrum=False)[0].length
    assert tr.L[-1] == pytest.approx(best, abs=5e-3)
    assert all(tr.embedded) and all(tr.exterior) and tr.turning_excursions == 0
    steps = [s for s, _, _ in tr.snapshots]
    assert steps == sorted(steps) and steps[-1] == tr.steps


def test_trace_inequalities(unit_run):
    _, _, _, tr = unit_run
    assert l2_equivalence_check(tr)["violations"] == 0
    d = displacement_bounds(tr)
    assert d["normal_integral"] > 0 and math.isfinite(d["ratio"])


def test_unstable_explicit_step_halts():
    b = circle(1.0)
    arc = arc_with_area(b, [1.6, 0.2], ETA)
    cfg = FlowConfig(n=64, scheme="explicit", c_cfl=3.0, max_steps=500)
    tr = run(prepare(arc.sample(64), b, ETA, cfg), cfg, b)
    assert tr.halted is not None and not tr.converged
    assert tr.final.steps == tr.steps


def test_semi_implicit_matches_explicit_for_small_steps():
    b = circle(1.0)
    arc = arc_with_area(b, [1.6, 0.2], ETA)
    cfg = FlowConfig(n=64)
    s0 = prepare(perturbed_arc(arc, 64, 0.05), b, ETA, cfg)
    dt = 1e-7
    a, _ = step(s0, cfg, b, dt=dt)
    e, _ = step(s0, FlowConfig(n=64, scheme="explicit"), b, dt=dt)
    move = np.max(np.linalg.norm(a.nodes - s0.nodes, axis=1))
    assert np.max(np.linalg.norm(a.nodes - e.nodes, axis=1)) <= 1e-3 * move


def test_large_circle_run_reaches_the_profile():
    b = circle(100.0)
    crit = find_critical(b, 1.0, with_spectrum=False)[0]
    cfg = FlowConfig(n=512)
    tr = run(prepare(perturbed_arc(crit.arc, 512, 0.05), b, 1.0, cfg), cfg, b)
    assert tr.converged
    assert abs(tr.L[-1] - crit.length) <= 1e-5
    assert tr.snapped.length == pytest.approx(crit.length, abs=1e-12)


@pytest.mark.parametrize("k", [0, 2])
def test_ellipse_near_critical_start(k):
    e = ellipse(2.0, 1.0)
    eta = 0.05
    crit = find_critical(e, eta, with_spectrum=False)
    cfg = FlowConfig(n=256)
    tr = run(prepare(perturbed_arc(crit[k].arc, 256, 0.005), e, eta, cfg), cfg, e)
    assert tr.converged
    assert abs(tr.L[-1] - crit[k].length) <= 1e-5
    assert np.linalg.norm(tr.snapped.arc.center - crit[k].arc.center) < 1e-8


def test_preconditions_flag_without_enforcing():
    b = circle(1.0)
    arc = arc_with_area(b, [1.6, 0.2], ETA)
    p = check_preconditions(b, arc.to_curve(128), ETA)
    assert p["embedded"] and p["convex"] and not p["smallness"] and not p["ok"]
    assert p["c_bar"] == min(p["c_bar_formula"], p["c_bar_quoted"])


@given(st.floats(0.2, 5.0), st.floats(0.5, 3.0), st.floats(1e-3, 1.0))
def test_fit_rate_recovers_exponential(rate, linf, amp):
    t = np.linspace(0.0, 6.0 / rate, 300)
    L = linf + amp * np.exp(-rate * t)
    r = fit_rate(t, L, l_inf=linf)
    assert r["c_rate"] == pytest.approx(rate, rel=1e-6)
    free = fit_rate(t, L)
    assert free["c_rate"] == pytest.approx(rate, rel=1e-3)
    assert free["L_infinity"] == pytest.approx(linf, abs=1e-6 * amp + 1e-12)
