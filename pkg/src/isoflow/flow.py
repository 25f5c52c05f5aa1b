"""Area-preserving curve shortening flow with free endpoints on a convex body.

Interior nodes move with normal speed ``kappa - mean curvature``.  After every
step the polyline is resampled at constant speed, its endpoints are re-attached
to the boundary and a uniform normal offset of the interior nodes restores the
enclosed area.  The endpoint rule places the first node so that the
extrapolated end tangent of the polyline is normal to the boundary; plain
nearest-point projection of the neighbouring node is available as
``boundary_rule="projection"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded
from shapely.geometry import LineString

from .arcs import CircArc, CriticalArc, companion_arc, refine_critical
from .curve import (OpenCurve, PolylineGeometry, area_with_params, c1_distance, region_polygon,
                    signed_angle, symmetric_difference_area)
from .errors import ConfigError, FlowHalted, GeometryError, NumericalError
from .obstacle import ConvexBody, TWO_PI, is_outside, nearest_params

# universal constant of the small-area regime: the printed formula and the
# value quoted next to it disagree, so both are kept and the smaller one gates
C_BAR_FORMULA = 4.0 / (25.0 * math.pi) * math.asin(1.0 / (4.0 * math.pi)) ** 2
C_BAR_QUOTED = 0.0415
C_BAR = min(C_BAR_FORMULA, C_BAR_QUOTED)

SCHEMES = ("explicit", "semiimplicit")
RULES = ("corrected", "projection")


@dataclass(frozen=True)
class FlowConfig:
    n: int = 512
    scheme: str = "semiimplicit"
    c_cfl: float = 0.2
    c_si: float = 0.25
    area_tol: float = 1e-10
    tol: float = 1e-6
    t_max: float = 20.0
    max_steps: int = 200_000
    snapshot_every: int = 50
    boundary_rule: str = "corrected"
    turning_bound: float = TWO_PI
    levels: tuple = ()
    snap: bool = True

    def __post_init__(self):
        if self.n < 32:
            raise ConfigError("node count must be at least 32", n=self.n)
        if self.scheme not in SCHEMES:
            raise ConfigError("unknown scheme", scheme=self.scheme)
        if self.boundary_rule not in RULES:
            raise ConfigError("unknown boundary rule", rule=self.boundary_rule)
        for name in ("c_cfl", "c_si", "area_tol", "tol", "t_max", "turning_bound"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive", value=getattr(self, name))
        if self.max_steps < 0 or self.snapshot_every < 1:
            raise ConfigError("bad step counts")


@dataclass(frozen=True)
class FlowState:
    nodes: np.ndarray
    theta: tuple[float, float]
    eta: float
    t: float = 0.0
    steps: int = 0

    @property
    def curve(self) -> OpenCurve:
        return OpenCurve(self.nodes)


@dataclass
class StepInfo:
    dt: float
    v_l2: float
    vtilde_l2: float
    kv_l1: float
    area_before: float
    offset: float


@dataclass
class FlowTrace:
    eta: float
    config: FlowConfig
    t: list = field(default_factory=list)
    L: list = field(default_factory=list)
    A: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    eps_kappa: list = field(default_factory=list)
    phi_turn: list = field(default_factory=list)
    v_l2: list = field(default_factory=list)
    vtilde_l2: list = field(default_factory=list)
    kv_l1: list = field(default_factory=list)
    embedded: list = field(default_factory=list)
    exterior: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    converged: bool = False
    halted: str | None = None
    turning_excursions: int = 0
    level_crossings: list = field(default_factory=list)
    final: FlowState | None = None
    snapped: CriticalArc | None = None
    preconditions: dict | None = None

    def arrays(self) -> dict:
        keys = ("t", "L", "A", "eps", "eps_kappa", "phi_turn", "v_l2", "vtilde_l2",
                "kv_l1", "embedded", "exterior")
        return {k: np.asarray(getattr(self, k)) for k in keys}

    @property
    def steps(self) -> int:
        return len(self.t) - 1

    def cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        """Running integrals of the normal speed and of the constant-speed
        velocity, indexed like the records."""
        t = np.asarray(self.t)
        dt = np.diff(t)
        iv = np.concatenate([[0.0], np.cumsum(np.asarray(self.v_l2[:-1]) * dt)])
        ivt = np.concatenate([[0.0], np.cumsum(np.asarray(self.vtilde_l2[1:]) * dt)])
        return iv, ivt


# -- preconditions ---------------------------------------------------------------

def _smallness_margin(length: float, eta: float, kmax: float) -> float:
    """``(4 / (5 kmax)) asin(eta / L^2) - L``; positive when the condition holds."""
    ratio = eta / (length * length)
    if ratio > 1.0:
        return -math.inf
    return 4.0 / (5.0 * kmax) * math.asin(ratio) - length


def check_preconditions(body: ConvexBody, curve: OpenCurve, eta: float,
                        profile: float | None = None) -> dict:
    """Report (never enforce) the hypotheses of the global existence result."""
    out: dict = {"eta": float(eta), "c_bar_formula": C_BAR_FORMULA,
                 "c_bar_quoted": C_BAR_QUOTED, "c_bar": C_BAR}
    if not eta > 0:
        out.update(ok=False, message="vacuous: the area must be positive",
                   embedded=False, convex=False, smallness=False, small_area=False)
        return out
    kmax = body.kappa_max
    g = curve.geometry
    embedded = LineString(curve.nodes).is_simple
    orient_ = 1.0 if g.turning_angle >= 0 else -1.0
    convex = bool(np.all(orient_ * g.turn >= -1e-12))
    length = g.length
    margin = _smallness_margin(length, eta, kmax)
    out.update(embedded=bool(embedded), convex=convex, length=length,
               smallness=bool(margin > 0), smallness_margin=margin,
               smallness_value=margin + length)
    small = eta * kmax * kmax
    out["small_area"] = bool(small < C_BAR)
    out["eta_kappa2"] = small
    if profile is None:
        from .arcs import isoperimetric_profile
        try:
            profile = isoperimetric_profile(body, eta)
        except (GeometryError, NumericalError):
            profile = None
    if profile is not None:
        m0 = _smallness_margin(profile, eta, kmax)
        out["profile"] = profile
        out["profile_margin"] = m0
        out["delta0"] = _largest_delta(profile, eta, kmax) if m0 > 0 else 0.0
    out["ok"] = bool(embedded and convex and margin > 0)
    out["message"] = "ok" if out["ok"] else "hypotheses not met; flow runnable but flagged"
    return out


def _largest_delta(profile: float, eta: float, kmax: float) -> float:
    """Largest ``delta`` with ``I + delta`` still satisfying the smallness condition."""
    lo, hi = 0.0, profile
    while _smallness_margin(profile + hi, eta, kmax) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _smallness_margin(profile + mid, eta, kmax) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * profile:
            break
    return lo


# -- endpoint rule ---------------------------------------------------------------

def attach_endpoint(body: ConvexBody, p1: np.ndarray, p2: np.ndarray, theta: float | None,
                    rule: str = "corrected") -> float:
    """Support angle of the endpoint next to the node ``p1`` (``p2`` is the node
    after it).

    With the corrected rule the first segment points along the outer normal
    rotated by half of the turning angle at ``p1``, so the extrapolated end
    tangent is exactly normal to the boundary.
    """
    if theta is None or rule == "projection":
        theta = float(nearest_params(body, p1[None, :])[0][0])
        if rule == "projection":
            return theta
    e = p2 - p1
    l1 = math.hypot(e[0], e[1])
    e = e / l1

    def residual(th):
        h, h1, h2 = body.support(th)
        c, s = math.cos(th), math.sin(th)
        d0 = p1[0] - (h * c - h1 * s)
        d1 = p1[1] - (h * s + h1 * c)
        l0 = math.hypot(d0, d1)
        turn = math.atan2(d0 * e[1] - d1 * e[0], d0 * e[0] + d1 * e[1])
        beta = turn * l0 / (l0 + l1)
        cb, sb = math.cos(th + beta), math.sin(th + beta)
        f = -d0 * sb + d1 * cb
        df = -(h + h2) * math.cos(beta) - (d0 * cb + d1 * sb)
        return f, df

    # Newton on the first step, secant afterwards (beta depends on theta)
    th = float(theta)
    f, df = residual(th)
    slope = df
    for _ in range(60):
        if f == 0.0:
            break
        step = -f / slope
        if abs(step) > 0.5:
            step = math.copysign(0.5, step)
        th_new = th + step
        f_new, df_new = residual(th_new)
        slope = (f_new - f) / (th_new - th) if f_new != f else df_new
        th, f = th_new, f_new
        if abs(step) <= 1e-15 * (1.0 + abs(th)):
            break
    else:
        raise NumericalError("endpoint rule did not converge", theta=th)
    return th


def _attach(body: ConvexBody, x: np.ndarray, theta, rule: str) -> tuple[float, float]:
    t0 = attach_endpoint(body, x[1], x[2], theta[0], rule)
    t1 = attach_endpoint(body, x[-2], x[-3], theta[1], rule)
    x[[0, -1]] = body.points(np.array([t0, t1]))
    return t0, t1


def _renormalize(body, x, theta, eta, tol, rule):
    """Uniform normal offset of the interior nodes so the enclosed area is ``eta``."""
    g = PolylineGeometry(x)
    nu = g.node_normals
    base = x.copy()
    orient_ = None

    def place(delta, th):
        nonlocal orient_
        y = base.copy()
        y[1:-1] += delta * nu
        th = _attach(body, y, th, rule)
        a, orient_ = area_with_params(body, y, th, orient_)
        return y, th, a

    delta = 0.0
    y, theta, a = place(0.0, theta)
    a0 = a
    slope = -g.length
    best = (abs(a - eta), y, theta, a, delta)
    for _ in range(40):
        f = a - eta
        if abs(f) <= 1e-3 * tol:
            break
        new = delta - f / slope
        if abs(new - delta) <= 1e-16 * g.length:
            break
        y2, th2, a2 = place(new, theta)
        if a2 != a:
            slope = (a2 - a) / (new - delta)
        delta, y, theta, a = new, y2, th2, a2
        if abs(a - eta) < best[0]:
            best = (abs(a - eta), y, theta, a, delta)
    err, y, theta, a, delta = best
    if err > tol:
        raise NumericalError("area renormalization failed", error=err, tol=tol)
    return y, theta, a, delta, a0


def _resample(x: np.ndarray, n: int) -> np.ndarray:
    e = np.diff(x, axis=0)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(e[:, 0], e[:, 1]))])
    t = np.linspace(0.0, s[-1], n + 1)
    out = np.column_stack([np.interp(t, s, x[:, 0]), np.interp(t, s, x[:, 1])])
    out[0], out[-1] = x[0], x[-1]
    return out


def prepare(curve, body: ConvexBody, eta: float, config: FlowConfig = FlowConfig()) -> FlowState:
    """Resample, attach the endpoints and fix the area of an initial curve."""
    return prepare_with_offset(curve, body, eta, config)[0]


def prepare_with_offset(curve, body: ConvexBody, eta: float,
                        config: FlowConfig = FlowConfig()) -> tuple[FlowState, float]:
    """:func:`prepare` that also returns the total normal offset applied."""
    if not eta > 0:
        raise ConfigError("area must be positive", eta=eta)
    nodes = curve.nodes if isinstance(curve, OpenCurve) else np.asarray(curve, dtype=float)
    x = np.array(nodes, dtype=float)
    theta = tuple(nearest_params(body, x[[0, -1]])[0])
    total = 0.0
    # alternate until resampling no longer moves the nodes
    for _ in range(50):
        y = _resample(x, config.n)
        y, theta, _, delta, _ = _renormalize(body, y, theta, eta, config.area_tol * eta,
                                             config.boundary_rule)
        total += delta
        seg = np.linalg.norm(np.diff(y, axis=0), axis=1)
        done = x.shape == y.shape and np.ptp(seg) <= 1e-13 * seg.mean()
        x = y
        if done:
            break
    return FlowState(nodes=x, theta=theta, eta=float(eta)), total


# -- one step --------------------------------------------------------------------

def _outer_radius(body: ConvexBody) -> float:
    pos = body.table["pos"] - body.interior_point
    return float(np.max(np.hypot(pos[:, 0], pos[:, 1])))


def exterior_ok(body: ConvexBody, x: np.ndarray) -> bool:
    """True when every interior node lies strictly outside the body."""
    inner = x[1:-1]
    rel = inner - body.interior_point
    near = np.hypot(rel[:, 0], rel[:, 1]) <= _outer_radius(body) * (1 + 1e-12)
    if not np.any(near):
        return True
    return bool(np.all(is_outside(body, inner[near])))


def time_step(x: np.ndarray, config: FlowConfig) -> float:
    seg = np.linalg.norm(np.diff(x, axis=0), axis=1)
    h = float(seg.min())
    return config.c_cfl * h * h if config.scheme == "explicit" else config.c_si * h


def _implicit_solve(seg: np.ndarray, rhs: np.ndarray, dt: float) -> np.ndarray:
    """Solve ``(I - dt Laplacian) d = rhs`` on interior nodes, ``d = 0`` at the ends."""
    lm, lp = seg[:-1], seg[1:]
    c = 2.0 / (lm + lp)
    lower = -dt * c / lm
    upper = -dt * c / lp
    diag = 1.0 + dt * c * (1.0 / lm + 1.0 / lp)
    m = diag.size
    ab = np.zeros((3, m))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)


def step(state: FlowState, config: FlowConfig, body: ConvexBody,
         dt: float | None = None, check: bool = True) -> tuple[FlowState, StepInfo]:
    x = state.nodes
    g = PolylineGeometry(x)
    v = g.kappa - g.mean_curvature
    if dt is None:
        dt = time_step(x, config)
    move = v[1:-1, None] * g.node_normals
    if config.scheme == "explicit":
        d = dt * move
    else:
        d = _implicit_solve(g.segment_lengths, dt * move, dt)
    y = x.copy()
    y[1:-1] += d
    y = _resample(y, config.n)
    y, theta, area, offset, a0 = _renormalize(body, y, state.theta, state.eta,
                                              config.area_tol * state.eta,
                                              config.boundary_rule)
    if check:
        if not LineString(y).is_simple:
            raise FlowHalted("embeddedness lost", t=state.t + dt, step=state.steps + 1)
        if not exterior_ok(body, y):
            raise FlowHalted("exterior violated", t=state.t + dt, step=state.steps + 1)
    w = np.full(config.n + 1, 1.0 / config.n)
    w[[0, -1]] *= 0.5
    vel = (y - x) / dt
    info = StepInfo(dt=dt, v_l2=g.curvature_deviation(),
                    vtilde_l2=math.sqrt(float(np.dot(w, np.einsum("ij,ij->i", vel, vel)))),
                    kv_l1=float(np.sum(np.abs(g.kappa * v) * g.weights)),
                    area_before=a0, offset=offset)
    new = FlowState(nodes=y, theta=theta, eta=state.eta, t=state.t + dt, steps=state.steps + 1)
    return new, info


# -- monitors --------------------------------------------------------------------

def contact_angles(body: ConvexBody, x: np.ndarray, theta) -> tuple[float, float]:
    g = PolylineGeometry(x)
    _, tan, _, _ = body.frame(np.asarray(theta, dtype=float))
    return signed_angle(g.start_tangent, tan[0]), signed_angle(tan[1], g.end_tangent)


def deficit(body: ConvexBody, state: FlowState) -> tuple[float, float]:
    """``(eps, eps_kappa)`` of a flow state."""
    g = PolylineGeometry(state.nodes)
    a1, a2 = contact_angles(body, state.nodes, state.theta)
    ek = g.curvature_deviation()
    return ek + abs(a1 - 0.5 * math.pi) + abs(a2 - 0.5 * math.pi), ek


def _record(trace: FlowTrace, body: ConvexBody, state: FlowState, info: StepInfo | None,
            embedded=True, exterior=True):
    g = PolylineGeometry(state.nodes)
    eps, ek = deficit(body, state)
    trace.t.append(state.t)
    trace.L.append(g.length)
    trace.A.append(area_with_params(body, state.nodes, state.theta)[0])
    trace.eps.append(eps)
    trace.eps_kappa.append(ek)
    trace.phi_turn.append(g.turning_angle)
    trace.v_l2.append(ek)
    trace.vtilde_l2.append(0.0 if info is None else info.vtilde_l2)
    trace.kv_l1.append(float(np.sum(np.abs(g.kappa * (g.kappa - g.mean_curvature))
                                    * g.weights)))
    trace.embedded.append(bool(embedded))
    trace.exterior.append(bool(exterior))
    if abs(g.turning_angle) > trace.config.turning_bound:
        trace.turning_excursions += 1
    return eps


def run(state: FlowState, config: FlowConfig, body: ConvexBody,
        preconditions: bool = True) -> FlowTrace:
    """Iterate :func:`step` until the deficit drops below ``config.tol``."""
    trace = FlowTrace(eta=state.eta, config=config)
    if preconditions:
        trace.preconditions = check_preconditions(body, state.curve, state.eta)
    eps = _record(trace, body, state, None)
    trace.snapshots.append((state.steps, state.t, state.nodes.copy()))
    mids = sorted(config.levels)
    mids = [0.5 * (a + b) for a, b in zip(mids[:-1], mids[1:])]
    while eps >= config.tol:
        if state.t >= config.t_max or state.steps >= config.max_steps:
            break
        try:
            new, info = step(state, config, body)
        except FlowHalted as exc:
            trace.halted = exc.message
            break
        l_old = trace.L[-1]
        state = new
        eps = _record(trace, body, state, info)
        for m in mids:
            if (l_old - m) * (trace.L[-1] - m) < 0:
                trace.level_crossings.append((state.steps, m))
        if state.steps % config.snapshot_every == 0:
            trace.snapshots.append((state.steps, state.t, state.nodes.copy()))
    if trace.snapshots[-1][0] != state.steps:
        trace.snapshots.append((state.steps, state.t, state.nodes.copy()))
    trace.final = state
    trace.converged = trace.halted is None and eps < config.tol
    if trace.converged and config.snap:
        trace.snapped = snap_to_critical(body, state)
    return trace


def snap_to_critical(body: ConvexBody, state: FlowState) -> CriticalArc:
    """Critical arc found by Newton from the companion arc of the terminal curve."""
    comp, _ = companion_arc(state.curve, body)
    return refine_critical(body, comp.center, state.eta, with_spectrum=False)


def dissipation_check(state: FlowState, body: ConvexBody, config: FlowConfig,
                      dt: float | None = None) -> dict:
    """One explicit step: compare ``dL/dt`` with ``-||kappa - kbar||^2``."""
    cfg = replace(config, scheme="explicit")
    if dt is None:
        dt = time_step(state.nodes, cfg)
    g = PolylineGeometry(state.nodes)
    new, _ = step(state, cfg, body, dt=dt, check=False)
    rate = (PolylineGeometry(new.nodes).length - g.length) / dt
    target = -g.curvature_deviation() ** 2
    return {"dt": dt, "rate": rate, "target": target,
            "relative_error": abs(rate - target) / abs(target)}


# -- post-processing -------------------------------------------------------------

def fit_rate(t, L, l_inf: float | None = None, tail: float = 0.5,
             floor: float | None = None) -> dict:
    """Least-squares fit of ``log(L - L_inf)`` against ``t`` over the tail.

    Without ``l_inf`` the limit is extrapolated from the trace: start from the
    terminal value and add back the part of the geometric tail that the fit
    predicts beyond the last sample.
    """
    t = np.asarray(t, dtype=float)
    L = np.asarray(L, dtype=float)
    k0 = int(len(t) * (1.0 - tail))
    tt, ll = t[k0:], L[k0:]
    if floor is None:
        floor = 1e-12 * abs(L[-1])
    fixed = l_inf is not None
    linf = float(L[-1]) if l_inf is None else float(l_inf)

    def fit(linf):
        y = ll - linf
        mask = y > floor
        if mask.sum() < 10:
            raise NumericalError("too few samples above the numeric floor", count=int(mask.sum()))
        a, b = np.polyfit(tt[mask], np.log(y[mask]), 1)
        pred = a * tt[mask] + b
        res = np.log(y[mask]) - pred
        tot = np.log(y[mask]) - np.log(y[mask]).mean()
        r2 = 1.0 - float(res @ res) / float(tot @ tot) if float(tot @ tot) > 0 else 1.0
        return -a, b, r2, int(mask.sum())

    rate, b, r2, used = fit(linf)
    if not fixed:
        # fixed-point iteration on the limit; converges linearly
        for _ in range(1000):
            new = float(L[-1]) - math.exp(b - rate * t[-1])
            done = abs(new - linf) <= 1e-15 * max(abs(linf), 1.0)
            linf = new
            rate, b, r2, used = fit(linf)
            if done:
                break
    return {"c_rate": rate, "L_infinity": linf, "r2": r2, "samples": used}


def displacement_bounds(trace: FlowTrace, l_inf: float | None = None) -> dict:
    iv, ivt = trace.cumulative()
    L = np.asarray(trace.L)
    if l_inf is None:
        l_inf = float(L[-1])
    gap = max(float(L[0]) - l_inf, 0.0)
    total = float(iv[-1] + ivt[-1])
    ratio = total / math.sqrt(gap) if gap > 0 else (0.0 if total == 0 else math.inf)
    return {"normal_integral": float(iv[-1]), "reparam_integral": float(ivt[-1]),
            "length_gap": gap, "ratio": ratio}


def l2_equivalence(L, v_l2, vtilde_l2, kv_l1) -> dict:
    """Per-step ``|L ||v~||^2 - ||v||^2|`` against ``4 L (int |kappa v| ds)^2``."""
    L, v, vt, kv = (np.asarray(a, dtype=float) for a in (L, v_l2, vtilde_l2, kv_l1))
    lhs = np.abs(L * vt * vt - v * v)
    rhs = 4.0 * L * kv * kv
    excess = lhs - rhs
    return {"lhs": lhs, "rhs": rhs, "violations": int(np.sum(excess > 0)),
            "max_excess": float(max(excess.max(), 0.0)) if excess.size else 0.0,
            "min_slack": float(np.min(rhs - lhs)) if excess.size else 0.0}


def l2_equivalence_check(trace: FlowTrace) -> dict:
    """Evaluate the reparametrization inequality on every recorded step.

    The normal speed and curvature terms are taken at the start of a step and
    the constant-speed velocity over that step.
    """
    return l2_equivalence(trace.L[:-1], trace.v_l2[:-1], trace.vtilde_l2[1:], trace.kv_l1[:-1])


def region_displacement_pairs(trace: FlowTrace, body: ConvexBody, pairs: int = 10,
                              seed: int = 0) -> list[dict]:
    """Symmetric difference of enclosed regions between snapshot times against
    ``sqrt(max L) * int ||V|| dt``."""
    snaps = trace.snapshots
    if len(snaps) < 2:
        return []
    iv, _ = trace.cumulative()
    lbar = float(np.max(trace.L))
    rng = np.random.default_rng(seed)
    idx = [(0, len(snaps) - 1)]
    idx += [(i, i + 1) for i in range(min(len(snaps) - 1, pairs // 2))]
    while len(idx) < pairs and len(snaps) > 2:
        i, j = sorted(rng.choice(len(snaps), size=2, replace=False))
        idx.append((int(i), int(j)))
    polys = {}
    out = []
    for i, j in idx[:pairs]:
        for k in (i, j):
            if k not in polys:
                polys[k] = region_polygon(OpenCurve(snaps[k][2]), body)
        lhs = symmetric_difference_area(polys[i], polys[j])
        rhs = math.sqrt(lbar) * float(iv[snaps[j][0]] - iv[snaps[i][0]])
        out.append({"t1": snaps[i][1], "t2": snaps[j][1], "sym_diff": lhs, "bound": rhs,
                    "holds": bool(lhs <= rhs * (1 + 1e-9) + 1e-13)})
    return out


def _constant_speed(x: np.ndarray, m: int) -> np.ndarray:
    return _resample(np.asarray(x, dtype=float), m)


def h1_upgrade_check(curve, reference) -> dict:
    """Both sides of ``int |g' - g*'|^2 <= C (L(g) - L(g*)) + C int |g - g*|^2``
    with both curves parametrised at constant speed on [0, 1]."""
    a = curve.nodes if isinstance(curve, OpenCurve) else np.asarray(curve, dtype=float)
    b = reference.nodes if isinstance(reference, OpenCurve) else np.asarray(reference, dtype=float)
    m = max(a.shape[0], b.shape[0]) - 1
    pa, pb = _constant_speed(a, m), _constant_speed(b, m)
    va, vb = np.diff(pa, axis=0) * m, np.diff(pb, axis=0) * m
    lhs = float(np.mean(np.sum((va - vb) ** 2, axis=1)))
    w = np.full(m + 1, 1.0 / m)
    w[[0, -1]] *= 0.5
    l2 = float(np.dot(w, np.sum((pa - pb) ** 2, axis=1)))
    dl = float(np.sum(np.linalg.norm(np.diff(a, axis=0), axis=1))
               - np.sum(np.linalg.norm(np.diff(b, axis=0), axis=1)))
    denom = dl + l2
    if lhs == 0.0:
        c = 0.0
    elif denom <= 0:
        c = math.inf
    else:
        c = lhs / denom
    return {"lhs": lhs, "length_gap": dl, "l2": l2, "constant": c}


# -- initial data ----------------------------------------------------------------

def bump_profile(p: np.ndarray) -> np.ndarray:
    """Smooth bump on [0, 1] vanishing to fourth order at both ends."""
    return np.sin(np.pi * p) ** 4


def perturbed_nodes(base: np.ndarray, amplitude: float, profile=bump_profile,
                    normals: np.ndarray | None = None) -> np.ndarray:
    """Offset the interior nodes of ``base`` along its normals by ``amplitude * profile``."""
    x = np.array(base, dtype=float)
    n = x.shape[0] - 1
    if normals is None:
        normals = PolylineGeometry(x).node_normals
    p = np.arange(1, n) / n
    x[1:-1] += amplitude * profile(p)[:, None] * normals
    return x


def perturbed_arc(arc: CircArc, n: int, amplitude: float, profile=bump_profile) -> np.ndarray:
    x = arc.sample(n)
    normals = np.array([arc.inner_normal(q) for q in x[1:-1]])
    return perturbed_nodes(x, amplitude, profile, normals)


def discrete_critical(arc: CircArc, body: ConvexBody, eta: float,
                      config: FlowConfig = FlowConfig()) -> FlowState:
    """Equilibrium polyline of the scheme obtained by flowing a sampled arc."""
    cfg = replace(config, tol=min(config.tol, 1e-9), snap=False, t_max=max(config.t_max, 50.0))
    state = prepare(arc.sample(cfg.n), body, eta, cfg)
    trace = run(state, cfg, body, preconditions=False)
    if not trace.converged:
        raise NumericalError("discrete equilibrium not reached", eps=trace.eps[-1],
                             halted=trace.halted)
    return trace.final


def _with_area(body: ConvexBody, x: np.ndarray, theta, eta: float, normals: np.ndarray,
               tol: float = 1e-13) -> np.ndarray:
    """Add ``mu * sin(pi p)`` along ``normals`` (ends fixed) so the area is ``eta``."""
    n = x.shape[0] - 1
    m = np.sin(np.pi * np.arange(1, n) / n)[:, None] * normals
    orient_ = area_with_params(body, x, theta)[1]

    def area(mu):
        y = x.copy()
        y[1:-1] += mu * m
        return area_with_params(body, y, theta, orient_)[0] - eta

    length = PolylineGeometry(x).length
    mu0, f0 = 0.0, area(0.0)
    mu1 = -f0 / (-2.0 / math.pi * length)
    f1 = area(mu1)
    for _ in range(50):
        if abs(f1) <= tol * max(eta, 1.0) or f1 == f0:
            break
        mu0, mu1, f0 = mu1, mu1 - f1 * (mu1 - mu0) / (f1 - f0), f1
        f1 = area(mu1)
    y = x.copy()
    y[1:-1] += mu1 * m
    return y


def _rotation_distance(body: ConvexBody, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """C1 distance from ``a`` to the closest rotation of ``b`` about a circular body's centre."""
    from scipy.optimize import minimize_scalar
    c = body.shift

    def dist(phi):
        cs, sn = math.cos(phi), math.sin(phi)
        rel = b - c
        rb = c + np.column_stack([cs * rel[:, 0] - sn * rel[:, 1], sn * rel[:, 0] + cs * rel[:, 1]])
        return c1_distance(a, rb)

    span = 0.5 * float(np.linalg.norm(a[-1] - a[0])) / float(np.linalg.norm(a[0] - c))
    res = minimize_scalar(dist, bounds=(-span, span), method="bounded",
                          options={"xatol": 1e-12})
    d0 = dist(0.0)
    return (float(res.fun), float(res.x)) if res.fun < d0 else (d0, 0.0)


def lojasiewicz_scan(body: ConvexBody, eta: float, amplitudes, config: FlowConfig = FlowConfig(),
                     profile=bump_profile, base: FlowState | None = None) -> dict:
    """Distance and length gap to a critical polyline against the deficit.

    The reference is the scheme's own equilibrium (flowed from the shortest
    critical arc), so discretisation offsets do not enter the length gap.
    Perturbations keep the endpoints and the enclosed area fixed.
    """
    from .arcs import find_critical
    if base is None:
        crit = find_critical(body, eta, with_spectrum=False)[0]
        base = discrete_critical(crit.arc, body, eta, config)
    ref = base.nodes
    g0 = PolylineGeometry(ref)
    normals = g0.node_normals
    rows = []
    for a in amplitudes:
        x = perturbed_nodes(ref, float(a), profile, normals)
        x = _with_area(body, x, base.theta, eta, normals)
        st = FlowState(nodes=x, theta=base.theta, eta=eta)
        eps, _ = deficit(body, st)
        if body.shape == "circle":
            dist, phi = _rotation_distance(body, x, ref)
        else:
            dist, phi = c1_distance(x, ref), 0.0
        gap = PolylineGeometry(x).length - g0.length
        rows.append({"amplitude": float(a), "eps": eps, "c1_distance": dist, "rotation": phi,
                     "length_gap": gap, "area_error": area_with_params(body, x, base.theta)[0] - eta})
    e = np.array([r["eps"] for r in rows])
    d = np.array([r["c1_distance"] for r in rows])
    lg = np.abs(np.array([r["length_gap"] for r in rows]))
    slope_d = float(np.polyfit(np.log(e), np.log(d), 1)[0])
    slope_l = float(np.polyfit(np.log(e * e), np.log(lg), 1)[0])
    return {"rows": rows, "distance_slope": slope_d, "length_slope": slope_l,
            "length_slope_vs_eps": 2.0 * slope_l, "base_eps": deficit(body, base)[0],
            "distance_ratio_max": float(np.max(d / e)),
            "length_ratio_max": float(np.max(lg / (e * e)))}
