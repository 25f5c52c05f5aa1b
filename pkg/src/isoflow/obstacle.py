"""Convex obstacles described by their support function.

A body is stored through ``h(theta)``, the signed distance from the origin to
the supporting line with outer normal ``u(theta) = (cos theta, sin theta)``.
The boundary point with outer normal ``u`` is ``h u + h' u_perp`` and the
boundary is traversed counterclockwise as theta increases, so the unit tangent
is ``u_perp`` and the inner normal is ``-u``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, GeometryError

TWO_PI = 2.0 * math.pi

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def integrate(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
              panels_per_turn: int = 64) -> float:
    """Composite 16-point Gauss-Legendre rule on ``[a, b]`` (signed)."""
    if a == b:
        return 0.0
    n = max(1, int(math.ceil(abs(b - a) / TWO_PI * panels_per_turn)))
    edges = np.linspace(a, b, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    return float(np.sum(f(x) * _GL_W[None, :] * half[:, None]))


def rot90(v: np.ndarray) -> np.ndarray:
    """Counterclockwise rotation by pi/2 (the operator J)."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def _fourier_support(coeffs: np.ndarray):
    """Support function ``a0 + sum_k a_k cos k theta + b_k sin k theta``.

    ``coeffs`` is ``[a0, a1, b1, a2, b2, ...]``.
    """
    a0 = float(coeffs[0])
    rest = np.asarray(coeffs[1:], dtype=float)
    if rest.size % 2:
        rest = np.append(rest, 0.0)
    a = rest[0::2]
    b = rest[1::2]
    k = np.arange(1, a.size + 1, dtype=float)

    def support(theta):
        theta = np.asarray(theta, dtype=float)
        h = np.full(theta.shape, a0)
        h1 = np.zeros(theta.shape)
        h2 = np.zeros(theta.shape)
        for kk, ak, bk in zip(k, a, b):
            if ak == 0.0 and bk == 0.0:
                continue
            c = np.cos(kk * theta)
            s = np.sin(kk * theta)
            h += ak * c + bk * s
            h1 += kk * (bk * c - ak * s)
            h2 -= kk * kk * (ak * c + bk * s)
        return h, h1, h2

    return support


def _ellipse_support(a: float, b: float):
    p = 0.5 * (a * a + b * b)
    q = 0.5 * (a * a - b * b)

    def support(theta):
        theta = np.asarray(theta, dtype=float)
        c2 = np.cos(2 * theta)
        s2 = np.sin(2 * theta)
        g = p + q * c2
        g1 = -2 * q * s2
        g2 = -4 * q * c2
        h = np.sqrt(g)
        h1 = g1 / (2 * h)
        h2 = g2 / (2 * h) - g1 * g1 / (4 * h ** 3)
        return h, h1, h2

    return support


@dataclass(frozen=True)
class BoundaryPoint:
    theta: float
    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: float
    s: float


class ConvexBody:
    """Strictly convex body with a smooth support function.

    Use :func:`circle`, :func:`ellipse`, :func:`fourier_body` or
    :func:`body_from_config` rather than calling the constructor directly.
    Instances are immutable; derived tables are cached on first use.
    """

    def __init__(self, base_support, *, shape: str, params: dict,
                 shift=(0.0, 0.0), angle: float = 0.0,
                 samples_per_period: int = 8192):
        self._base = base_support
        self.shape = shape
        self.params = dict(params)
        self.shift = np.array(shift, dtype=float)
        self.angle = float(angle)
        self.samples_per_period = int(samples_per_period)
        if self.samples_per_period < 256:
            raise ConfigError("samples_per_period must be at least 256")
        rho = self.table["h"] + self.table["h2"]
        if not np.all(rho > 0):
            i = int(np.argmin(rho))
            raise GeometryError("convexity violation: h + h'' <= 0",
                                theta=float(self.table["theta"][i]),
                                value=float(rho[i]))

    # -- support function and frames ------------------------------------
    @property
    def support_coefficients(self):
        return self.params.get("coeffs")

    def support(self, theta):
        """Return ``(h, h', h'')`` at ``theta`` (arrays broadcast)."""
        theta = np.asarray(theta, dtype=float)
        h, h1, h2 = self._base(theta - self.angle)
        if self.shift[0] != 0.0 or self.shift[1] != 0.0:
            c, s = np.cos(theta), np.sin(theta)
            cu = self.shift[0] * c + self.shift[1] * s
            cp = -self.shift[0] * s + self.shift[1] * c
            h = h + cu
            h1 = h1 + cp
            h2 = h2 - cu
        return h, h1, h2

    def points(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        h, h1, _ = self.support(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([h * c - h1 * s, h * s + h1 * c], axis=-1)

    def frame(self, theta):
        """Positions, unit tangents, inner normals and curvatures at ``theta``."""
        theta = np.asarray(theta, dtype=float)
        h, h1, h2 = self.support(theta)
        c, s = np.cos(theta), np.sin(theta)
        pos = np.stack([h * c - h1 * s, h * s + h1 * c], axis=-1)
        tan = np.stack([-s, c], axis=-1)
        nor = np.stack([-c, -s], axis=-1)
        return pos, tan, nor, 1.0 / (h + h2)

    def __reduce__(self):
        # rebuilt from the shape parameters; the support closure is not picklable
        return body_from_config, (body_config(self),)

    def moved(self, shift=(0.0, 0.0), angle: float = 0.0) -> "ConvexBody":
        """Image of the body under ``x -> R_angle x + shift``."""
        ca, sa = math.cos(angle), math.sin(angle)
        old = self.shift
        new_shift = np.array([ca * old[0] - sa * old[1], sa * old[0] + ca * old[1]])
        new_shift += np.asarray(shift, dtype=float)
        return ConvexBody(self._base, shape=self.shape, params=self.params,
                          shift=new_shift, angle=self.angle + angle,
                          samples_per_period=self.samples_per_period)

    # -- cached tables ---------------------------------------------------
    @cached_property
    def table(self) -> dict:
        m = self.samples_per_period
        theta = np.arange(m) * (TWO_PI / m)
        h, h1, h2 = self.support(theta)
        c, s = np.cos(theta), np.sin(theta)
        pos = np.stack([h * c - h1 * s, h * s + h1 * c], axis=-1)
        return {"theta": theta, "h": h, "h1": h1, "h2": h2, "pos": pos}

    @cached_property
    def coarse(self) -> dict:
        m = 512
        theta = np.arange(m) * (TWO_PI / m)
        h, _, _ = self.support(theta)
        return {"theta": theta, "h": h,
                "u": np.stack([np.cos(theta), np.sin(theta)], axis=-1)}

    @cached_property
    def interior_point(self) -> np.ndarray:
        """Steiner point of the body (always interior)."""
        t = self.table
        u = np.stack([np.cos(t["theta"]), np.sin(t["theta"])], axis=-1)
        return (t["h"][:, None] * u).mean(axis=0) * 2.0

    @cached_property
    def kappa_max(self) -> float:
        t = self.table
        rho = t["h"] + t["h2"]
        i = int(np.argmin(rho))
        d = TWO_PI / self.samples_per_period
        th0 = t["theta"][i]

        def f(x):
            h, _, h2 = self.support(x)
            return float(h + h2)

        res = minimize_scalar(f, bounds=(th0 - d, th0 + d), method="bounded",
                              options={"xatol": 1e-12})
        return 1.0 / min(float(rho[i]), float(res.fun))

    @cached_property
    def width(self) -> float:
        t = self.table
        m = self.samples_per_period
        h = t["h"]
        if m % 2 == 0:
            w = h + np.roll(h, -m // 2)
        else:  # pragma: no cover - samples_per_period is normally even
            w = h + self.support(t["theta"] + math.pi)[0]
        i = int(np.argmin(w))
        d = TWO_PI / m
        th0 = t["theta"][i]

        def f(x):
            return float(self.support(x)[0] + self.support(x + math.pi)[0])

        res = minimize_scalar(f, bounds=(th0 - d, th0 + d), method="bounded",
                              options={"xatol": 1e-12})
        return min(float(w[i]), float(res.fun))

    @cached_property
    def boundary_length(self) -> float:
        # periodic trapezoid rule is spectrally accurate here
        return float(np.mean(self.table["h"]) * TWO_PI)

    @cached_property
    def area(self) -> float:
        t = self.table
        return float(0.5 * np.mean(t["h"] ** 2 - t["h1"] ** 2) * TWO_PI)

    @cached_property
    def diameter_bound(self) -> float:
        p = self.table["pos"]
        return float(np.max(np.linalg.norm(p - self.interior_point, axis=1)) * 2)

    def arclength(self, theta: float) -> float:
        """Arclength from theta=0 to ``theta`` taken modulo the period."""
        th = float(theta) % TWO_PI
        hint = integrate(lambda x: self.support(x)[0], 0.0, th)
        h1 = self.support(np.array([0.0, th]))[1]
        return hint + float(h1[1] - h1[0])

    def __repr__(self) -> str:
        return (f"ConvexBody(shape={self.shape!r}, params={self.params!r}, "
                f"shift={self.shift.tolist()}, angle={self.angle})")


# -- constructors ---------------------------------------------------------

def fourier_body(coeffs: Sequence[float], *, samples_per_period: int = 8192) -> ConvexBody:
    coeffs = [float(c) for c in coeffs]
    if not coeffs or coeffs[0] <= 0:
        raise ConfigError("fourier coefficients must start with a positive mean radius")
    return ConvexBody(_fourier_support(np.array(coeffs)), shape="fourier",
                      params={"coeffs": coeffs},
                      samples_per_period=samples_per_period)


def circle(radius: float = 1.0, center=(0.0, 0.0), *,
           samples_per_period: int = 8192) -> ConvexBody:
    if not radius > 0:
        raise ConfigError("radius must be positive")
    body = ConvexBody(_fourier_support(np.array([float(radius)])), shape="circle",
                      params={"radius": float(radius), "coeffs": [float(radius)]},
                      samples_per_period=samples_per_period)
    if center[0] or center[1]:
        body = body.moved(shift=center)
    return body


def ellipse(a: float, b: float, *, samples_per_period: int = 8192) -> ConvexBody:
    if not (a > 0 and b > 0):
        raise ConfigError("semi-axes must be positive")
    return ConvexBody(_ellipse_support(float(a), float(b)), shape="ellipse",
                      params={"a": float(a), "b": float(b)},
                      samples_per_period=samples_per_period)


def perturbed_circle(radius: float, k: int, amplitude: float, *,
                     samples_per_period: int = 8192) -> ConvexBody:
    """Circle with support ``R + amplitude cos(k theta)``; convexity is checked."""
    coeffs = [float(radius)] + [0.0] * (2 * k)
    coeffs[2 * k - 1] = float(amplitude)
    return fourier_body(coeffs, samples_per_period=samples_per_period)


def body_from_config(cfg) -> ConvexBody:
    """Build a body from a dict, a JSON string, or ``circle:R`` / ``ellipse:a,b``."""
    if isinstance(cfg, ConvexBody):
        return cfg
    if isinstance(cfg, str):
        text = cfg.strip()
        if text.startswith("{"):
            try:
                cfg = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"bad body JSON: {exc}") from exc
        else:
            name, _, arg = text.partition(":")
            try:
                vals = [float(v) for v in arg.split(",")] if arg else []
            except ValueError as exc:
                raise ConfigError(f"bad body description {text!r}") from exc
            if name == "circle" and len(vals) == 1:
                return circle(vals[0])
            if name == "ellipse" and len(vals) == 2:
                return ellipse(*vals)
            if name == "fourier" and vals:
                return fourier_body(vals)
            raise ConfigError(f"bad body description {text!r}")
    if not isinstance(cfg, dict) or "shape" not in cfg:
        raise ConfigError("body config needs a 'shape' field")
    shape = cfg["shape"]
    spp = int(cfg.get("samples_per_period", 8192))
    try:
        if shape == "circle":
            body = circle(float(cfg["radius"]), samples_per_period=spp)
        elif shape == "ellipse":
            body = ellipse(float(cfg["a"]), float(cfg["b"]), samples_per_period=spp)
        elif shape == "fourier":
            body = fourier_body(cfg["coeffs"], samples_per_period=spp)
        else:
            raise ConfigError(f"unknown shape {shape!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad body config: {exc}") from exc
    if "center" in cfg or "rotation" in cfg:
        body = body.moved(shift=cfg.get("center", (0.0, 0.0)),
                          angle=float(cfg.get("rotation", 0.0)))
    return body


def body_config(body: ConvexBody) -> dict:
    """Inverse of :func:`body_from_config` for shipped shapes."""
    out = {"shape": body.shape, "samples_per_period": body.samples_per_period}
    if body.shape == "circle":
        out["radius"] = body.params["radius"]
    elif body.shape == "ellipse":
        out["a"], out["b"] = body.params["a"], body.params["b"]
    else:
        out["coeffs"] = list(body.params["coeffs"])
    if body.shift.any() or body.angle:
        out["center"] = body.shift.tolist()
        out["rotation"] = body.angle
    return out


# -- queries ---------------------------------------------------------------

def boundary_at(body: ConvexBody, theta: float) -> BoundaryPoint:
    pos, tan, nor, kap = body.frame(np.array(float(theta)))
    return BoundaryPoint(theta=float(theta), position=pos, tangent=tan,
                         normal=nor, curvature=float(kap),
                         s=body.arclength(theta))


def nearest_params(body: ConvexBody, points) -> tuple[np.ndarray, np.ndarray]:
    """Support angle of the nearest boundary point and the signed distance.

    The signed distance is ``max_theta <p, u> - h``: positive outside the body
    (where it equals the Euclidean distance) and minus the distance to the
    boundary inside.  The maximiser is refined by a safeguarded Newton
    iteration on ``(p - x(theta)) . u_perp = 0``.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    co = body.coarse
    vals = p @ co["u"].T - co["h"][None, :]
    i = np.argmax(vals, axis=1)
    d = TWO_PI / co["theta"].size
    th = co["theta"][i]
    lo = th - 1.5 * d
    hi = th + 1.5 * d

    def parts(t):
        h, h1, h2 = body.support(t)
        c, s = np.cos(t), np.sin(t)
        pu = p[:, 0] * c + p[:, 1] * s
        pp = -p[:, 0] * s + p[:, 1] * c
        return pu - h, pp - h1, -pu - h2

    _, flo, _ = parts(lo)
    _, fhi, _ = parts(hi)
    # the bracket must see the derivative change from + to -
    bad = ~((flo >= 0) & (fhi <= 0))
    if np.any(bad):
        lo = np.where(bad, th - 4 * d, lo)
        hi = np.where(bad, th + 4 * d, hi)
    for _ in range(60):
        _, f1, f2 = parts(th)
        pos = f1 > 0
        lo = np.where(pos, np.maximum(lo, th), lo)
        hi = np.where(~pos, np.minimum(hi, th), hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(f2 < 0, f1 / -f2, np.nan)
        cand = th + step
        ok = np.isfinite(cand) & (cand > lo) & (cand < hi)
        new = np.where(ok, cand, 0.5 * (lo + hi))
        if np.all(np.abs(new - th) <= 1e-14 * (1 + np.abs(th))):
            th = new
            break
        th = new
    f0, _, _ = parts(th)
    return np.mod(th, TWO_PI), f0


def certainly_outside(body: ConvexBody, points) -> np.ndarray:
    """Cheap one-sided test: True where some sampled support line separates the
    point from the body (False means "use the exact test")."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    co = body.coarse
    return np.max(p @ co["u"].T - co["h"][None, :], axis=1) > 0


def is_outside(body: ConvexBody, points) -> np.ndarray:
    """Exact strict exterior test, with the cheap test as a prefilter."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    out = certainly_outside(body, p)
    if not np.all(out):
        out[~out] = nearest_params(body, p[~out])[1] > 0
    return out


def signed_distance(body: ConvexBody, points) -> np.ndarray:
    return nearest_params(body, points)[1]


def project_to_boundary(body: ConvexBody, p, tol: float = 1e-12) -> BoundaryPoint:
    """Nearest boundary point of an exterior (or boundary) point ``p``."""
    p = np.asarray(p, dtype=float)
    th, dist = nearest_params(body, p[None, :])
    scale = 1.0 + float(np.linalg.norm(p))
    if dist[0] < -tol * scale:
        raise GeometryError("interior point", point=p, distance=float(dist[0]))
    return boundary_at(body, float(th[0]))


def subarc_quantities(body: ConvexBody, theta_a: float, theta_b: float,
                      orientation: int = 1) -> dict:
    """Length, turning angle and shoelace term of a boundary subarc.

    The subarc starts at ``theta_a`` and runs counterclockwise (orientation
    +1) or clockwise (-1) to ``theta_b``, wrapping at most once.  The
    shoelace term is ``1/2 * integral (x dy - y dx)`` along the traversal.
    """
    ta = float(theta_a)
    if orientation >= 0:
        tb = ta + (float(theta_b) - ta) % TWO_PI
    else:
        tb = ta - (ta - float(theta_b)) % TWO_PI
    return subarc_between(body, ta, tb)


def subarc_between(body: ConvexBody, ta: float, tb: float) -> dict:
    """Same as :func:`subarc_quantities` with the end angle given unwrapped."""
    if tb == ta:
        return {"length": 0.0, "turning_angle": 0.0, "shoelace": 0.0,
                "theta_start": ta, "theta_end": ta}

    def speed(x):
        h, _, h2 = body.support(x)
        return h + h2

    def shoe(x):
        h, _, h2 = body.support(x)
        return h * (h + h2)

    return {"length": abs(integrate(speed, ta, tb)),
            "turning_angle": tb - ta,
            "shoelace": 0.5 * integrate(shoe, ta, tb),
            "theta_start": ta, "theta_end": tb}


def subarc_shoelace(body: ConvexBody, ta: float, tb: float, origin=None) -> float:
    """Shoelace term of the boundary subarc from ``ta`` to the unwrapped ``tb``,
    taken about ``origin`` (a nearby origin keeps the integrand small)."""
    if tb == ta:
        return 0.0
    o = np.zeros(2) if origin is None else np.asarray(origin, dtype=float)

    def shoe(x):
        h, _, h2 = body.support(x)
        return (h - o[0] * np.cos(x) - o[1] * np.sin(x)) * (h + h2)

    return 0.5 * integrate(shoe, ta, tb)


def global_quantities(body: ConvexBody) -> dict:
    kmax = body.kappa_max
    width = body.width
    if 1.0 / kmax > 0.5 * width * (1 + 1e-9):
        raise GeometryError("curvature/width bound violated",
                            kappa_max=kmax, width=width)
    return {"kappa_max": kmax, "width": width,
            "boundary_length": body.boundary_length, "area": body.area}
