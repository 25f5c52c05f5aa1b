"""Command line entry point: ``isoflow <command> [options]``.

Every CSV starts with a ``#`` line carrying the config hash and seed; every
JSON output has ``config_hash``, ``seed`` and ``config`` keys.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, FlowHalted, IsoflowError
from .obstacle import ConvexBody, TWO_PI, body_config, body_from_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_HALTED = 0, 2, 3, 4


# -- plumbing --------------------------------------------------------------------

def config_hash(config: dict) -> str:
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_plain)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, ConvexBody):
        return body_config(v)
    if isinstance(v, (set, tuple)):
        return list(v)
    return str(v)


def _clean(v):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if v is None or isinstance(v, (bool, int, float, str)):
        return v
    return _plain(v)


def atomic_write(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows, config: dict, seed: int) -> None:
    buf = io.StringIO()
    buf.write(f"# isoflow {__version__} config_hash={config_hash(config)} seed={seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    atomic_write(path, buf.getvalue())


def read_csv(path) -> tuple[dict, list[dict]]:
    """Inverse of :func:`write_csv`: header metadata and rows of floats."""
    meta = {}
    lines = Path(path).read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
        else:
            body.append(line)
    rows = [{k: float(v) for k, v in r.items()} for r in csv.DictReader(body)]
    return meta, rows


def write_json(path, payload: dict, config: dict, seed: int) -> None:
    out = {"config_hash": config_hash(config), "seed": seed, "config": config, **payload}
    atomic_write(path, json.dumps(_clean(out), indent=2, sort_keys=True) + "\n")


def workers() -> int:
    raw = os.environ.get("ISOFLOW_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError("ISOFLOW_THREADS must be an integer", value=raw) from exc
    if n < 1:
        raise ConfigError("ISOFLOW_THREADS must be positive", value=n)
    return n


def parse_values(text: str, count: int = 7) -> list[float]:
    """``a,b,c`` or a log-spaced range ``lo..hi`` (``count`` points, ``lo..hi:count``)."""
    text = text.strip()
    try:
        if ".." in text:
            rng, _, k = text.partition(":")
            lo, hi = (float(v) for v in rng.split(".."))
            k = int(k) if k else count
            if lo <= 0 or hi <= 0 or k < 2:
                raise ConfigError("range needs positive ends and at least two points", value=text)
            return [float(v) for v in np.geomspace(lo, hi, k)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad value list {text!r}") from exc


# -- rendering -------------------------------------------------------------------

def render_svg(curves, body: ConvexBody, path, arcs=(), closing: bool = True,
               width: int = 800) -> None:
    """Deterministic SVG of the body boundary, curves, their closing arcs and
    overlaid critical arcs.  The viewport is the body's bounding box grown to
    contain the curves, plus a 5% margin."""
    from .curve import OpenCurve, closing_arc

    th = np.linspace(0.0, TWO_PI, 721)
    sigma = body.points(th)
    polys = [np.asarray(c.nodes if isinstance(c, OpenCurve) else c, dtype=float) for c in curves]
    arc_pts = [a.sample(256) for a in arcs]
    every = np.concatenate([sigma, *polys, *arc_pts])
    lo, hi = every.min(axis=0), every.max(axis=0)
    span = float(max(hi - lo))
    lo = lo - 0.05 * span
    hi = hi + 0.05 * span
    size = hi - lo
    height = int(round(width * size[1] / size[0]))
    scale = width / size[0]

    def pts(p):
        q = np.column_stack([(p[:, 0] - lo[0]) * scale, (hi[1] - p[:, 1]) * scale])
        return " ".join(f"{x:.3f},{y:.3f}" for x, y in q)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<polygon points="{pts(sigma)}" fill="#dddddd" stroke="black" stroke-width="1"/>']
    for p in polys:
        if closing:
            try:
                s = closing_arc(OpenCurve(p), body).sample(body, 128)
                out.append(f'<polyline points="{pts(s)}" fill="none" stroke="#1f77b4" '
                           'stroke-width="2" stroke-dasharray="4 3"/>')
            except IsoflowError:
                pass
        out.append(f'<polyline points="{pts(p)}" fill="none" stroke="#d62728" stroke-width="1.5"/>')
    for a in arc_pts:
        out.append(f'<polyline points="{pts(a)}" fill="none" stroke="#2ca02c" '
                   'stroke-width="1" stroke-dasharray="2 2"/>')
    out.append("</svg>")
    atomic_write(path, "\n".join(out) + "\n")


# -- commands --------------------------------------------------------------------

def _base_config(args, **extra) -> dict:
    body = body_from_config(args.body)
    return {"command": args.command, "body": body_config(body), "seed": args.seed, **extra}


def cmd_profile(args) -> int:
    from .stability import profile_and_sublinearity
    body = body_from_config(args.body)
    etas = parse_values(args.etas, args.count)
    cfg = _base_config(args, etas=etas, partitions=args.partitions)
    rep = profile_and_sublinearity(body, etas, partitions=args.partitions, seed=args.seed)
    cols = ["eta", "profile", "lower", "upper", "improved", "bounds_ok"]
    if args.out:
        write_csv(args.out, cols, rep["profile"], cfg, args.seed)
    if args.summary:
        write_json(args.summary, rep, cfg, args.seed)
    for r in rep["profile"]:
        print(f"eta={r['eta']:.6g} I={r['profile']:.10f} bounds={'ok' if r['bounds_ok'] else 'FAIL'}")
    print(f"lipschitz and sublinearity: {'ok' if rep['ok'] else 'FAIL'}")
    return EXIT_OK


def critical_rows(body: ConvexBody, eta: float) -> list[dict]:
    from .arcs import find_critical
    rows = []
    for c in find_critical(body, eta):
        a, s = c.arc, c.spectrum
        rows.append({"z_x": float(a.center[0]), "z_y": float(a.center[1]), "r": a.radius,
                     "center_distance": float(np.hypot(*(a.center - body.interior_point))),
                     "L": a.length, "lambda1": float(s.eigenvalues[0]),
                     "lambda2": float(s.eigenvalues[1]), "degenerate_flag": bool(s.degenerate),
                     "alpha1": a.alpha1, "alpha2": a.alpha2, "theta1": a.theta1,
                     "theta2": a.theta2})
    return rows


def cmd_critical(args) -> int:
    body = body_from_config(args.body)
    cfg = _base_config(args, eta=args.eta)
    rows = critical_rows(body, args.eta)
    cols = ["z_x", "z_y", "r", "center_distance", "L", "lambda1", "lambda2", "degenerate_flag",
            "alpha1", "alpha2", "theta1", "theta2"]
    if args.out:
        write_csv(args.out, cols, rows, cfg, args.seed)
    if args.svg:
        from .arcs import find_critical
        render_svg([], body, args.svg, arcs=[c.arc for c in find_critical(body, args.eta, with_spectrum=False)])
    for r in rows:
        print(f"r={r['r']:.6f} |z|={r['center_distance']:.6f} L={r['L']:.6f} "
              f"lambda=({r['lambda1']:.4g}, {r['lambda2']:.4g})")
    return EXIT_OK


def initial_curve(source: str, body: ConvexBody, eta: float, n: int, amplitude: float):
    """``critical`` (shortest critical arc, bumped by ``amplitude``),
    ``arc:zx,zy,r`` or a CSV file of nodes."""
    from .arcs import arc_outside, find_critical
    from .curve import read_curve_csv
    from .flow import perturbed_arc
    if source == "critical":
        arc = find_critical(body, eta, with_spectrum=False)[0].arc
        return perturbed_arc(arc, n, amplitude)
    if source.startswith("arc:"):
        try:
            zx, zy, r = (float(v) for v in source[4:].split(","))
        except ValueError as exc:
            raise ConfigError(f"bad arc description {source!r}") from exc
        return perturbed_arc(arc_outside(body, np.array([zx, zy]), r), n, amplitude)
    if not os.path.exists(source):
        raise ConfigError(f"initial curve file not found: {source}")
    return read_curve_csv(source).nodes


TRACE_COLUMNS = ["t", "L", "A", "eps", "phi_turn", "v_l2", "vtilde_l2", "embedded", "exterior"]


def cmd_flow(args) -> int:
    from .flow import FlowConfig, displacement_bounds, fit_rate, prepare, run
    body = body_from_config(args.body)
    fc = FlowConfig(n=args.n, scheme=args.scheme, t_max=args.tmax, tol=args.tol,
                    boundary_rule=args.rule, snapshot_every=args.snapshot_every)
    cfg = _base_config(args, eta=args.eta, init=args.init, amplitude=args.amplitude,
                       flow={k: getattr(fc, k) for k in fc.__dataclass_fields__})
    x0 = initial_curve(args.init, body, args.eta, args.n, args.amplitude)
    state = prepare(x0, body, args.eta, fc)
    trace = run(state, fc, body)
    arr = trace.arrays()
    rows = [{c: arr[c][i] for c in TRACE_COLUMNS} for i in range(len(trace.t))]
    if args.out_trace:
        write_csv(args.out_trace, TRACE_COLUMNS, rows, cfg, args.seed)
    if args.out_svg:
        d = Path(args.out_svg)
        d.mkdir(parents=True, exist_ok=True)
        for step, _, nodes in trace.snapshots:
            render_svg([nodes], body, d / f"snapshot_{step:08d}.svg")
    summary = {"converged": trace.converged, "halted": trace.halted, "steps": trace.steps,
               "final_length": trace.L[-1], "final_eps": trace.eps[-1],
               "preconditions": trace.preconditions,
               "turning_excursions": trace.turning_excursions,
               "level_crossings": trace.level_crossings,
               "snapped_length": trace.snapped.length if trace.snapped is not None else None}
    if trace.converged and len(trace.t) >= 8:
        summary["rate"] = fit_rate(trace.t, trace.L)
        summary["displacement"] = displacement_bounds(trace, summary["rate"]["L_infinity"])
    if args.summary:
        write_json(args.summary, summary, cfg, args.seed)
    print(f"steps={trace.steps} converged={trace.converged} L={trace.L[-1]:.12f} "
          f"eps={trace.eps[-1]:.3e}")
    if trace.halted:
        print(json.dumps({"error": "FlowHalted", "message": str(trace.halted)}), file=sys.stderr)
        return EXIT_HALTED
    return EXIT_OK


def cmd_loj(args) -> int:
    from .flow import FlowConfig, lojasiewicz_scan
    body = body_from_config(args.body)
    amps = parse_values(args.amplitudes, args.count)
    fc = FlowConfig(n=args.n)
    cfg = _base_config(args, eta=args.eta, amplitudes=amps, n=args.n)
    rep = lojasiewicz_scan(body, args.eta, amps, fc)
    # "length" is the slope against eps, "length_vs_eps_sq" against eps squared
    payload = {"slopes": {"distance": rep["distance_slope"], "length": rep["length_slope_vs_eps"],
                          "length_vs_eps_sq": rep["length_slope"]}, **rep}
    if args.out:
        write_json(args.out, payload, cfg, args.seed)
    print(f"distance slope={rep['distance_slope']:.4f} "
          f"length slope={rep['length_slope_vs_eps']:.4f} (vs eps^2: {rep['length_slope']:.4f})")
    return EXIT_OK


STABILITY_COLUMNS = ["amplitude", "deficit", "sym_diff", "hausdorff", "sym_diff_flow_bound",
                     "sym_diff_input", "perimeter_gap_sq", "reduction_ok", "trivial_regime"]


def cmd_stability(args) -> int:
    from .stability import stability_experiment
    body = body_from_config(args.body)
    amps = parse_values(args.amplitudes, args.count)
    cfg = _base_config(args, eta=args.eta, family=args.family, amplitudes=amps, n=args.n)
    rep = stability_experiment(body, args.eta, args.family, amps, n=args.n, workers=workers())
    if args.out:
        write_csv(args.out, STABILITY_COLUMNS, rep["rows"], cfg, args.seed)
        write_json(Path(args.out).with_suffix(".json"),
                   {k: v for k, v in rep.items() if k != "rows"}, cfg, args.seed)
    for k, v in rep["fits"].items():
        print(f"{k}: {v:.4f}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all
    results = run_all(full=args.full, verbose=True)
    if args.out:
        cfg = {"command": "selftest", "full": args.full, "seed": args.seed}
        write_json(args.out, {"results": results}, cfg, args.seed)
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_NUMERICAL


# -- entry -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isoflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, eta=True):
        sp.add_argument("--body", default="circle:100", help="circle:R, ellipse:a,b or JSON")
        if eta:
            sp.add_argument("--eta", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)
        return sp

    sp = common(sub.add_parser("profile", help="isoperimetric profile and its bounds"), eta=False)
    sp.add_argument("--etas", default="0.25,0.5,1,2")
    sp.add_argument("--count", type=int, default=7)
    sp.add_argument("--partitions", type=int, default=50)
    sp.add_argument("--out")
    sp.add_argument("--summary")

    sp = common(sub.add_parser("critical", help="critical arcs and their Hessian spectra"))
    sp.add_argument("--out")
    sp.add_argument("--svg")

    sp = common(sub.add_parser("flow", help="run the area-preserving flow"))
    sp.add_argument("--init", default="critical")
    sp.add_argument("--amplitude", type=float, default=0.05)
    sp.add_argument("--n", type=int, default=512)
    sp.add_argument("--scheme", choices=("explicit", "semiimplicit"), default="semiimplicit")
    sp.add_argument("--rule", choices=("corrected", "projection"), default="corrected")
    sp.add_argument("--tmax", type=float, default=20.0)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--snapshot-every", type=int, default=50)
    sp.add_argument("--out-trace")
    sp.add_argument("--out-svg")
    sp.add_argument("--summary")

    sp = common(sub.add_parser("loj", help="gradient-inequality exponent scan"))
    sp.add_argument("--amplitudes", default="1e-3..1e-1")
    sp.add_argument("--count", type=int, default=7)
    sp.add_argument("--n", type=int, default=512)
    sp.add_argument("--out")

    sp = common(sub.add_parser("stability", help="reduce, flow and measure stability exponents"))
    sp.add_argument("--family", choices=("radial-bump", "dent", "speck", "tilt"),
                    default="radial-bump")
    sp.add_argument("--amplitudes", default="0.01,0.02,0.04,0.08")
    sp.add_argument("--count", type=int, default=4)
    sp.add_argument("--n", type=int, default=256)
    sp.add_argument("--out")

    sp = sub.add_parser("selftest", help="run the built-in example checks")
    sp.add_argument("--full", action="store_true", help="include the slow experiment checks")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    return p


COMMANDS = {"profile": cmd_profile, "critical": cmd_critical, "flow": cmd_flow,
            "loj": cmd_loj, "stability": cmd_stability, "selftest": cmd_selftest}


def exit_code(exc: IsoflowError) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, FlowHalted):
        return EXIT_HALTED
    return EXIT_NUMERICAL


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except IsoflowError as exc:
        print(json.dumps(_clean({"stage": args.command, **exc.as_dict()})), file=sys.stderr)
        return exit_code(exc)
    except OSError as exc:
        print(json.dumps({"stage": args.command, "error": "OSError", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> None:
    sys.exit(run_command(argv))


if __name__ == "__main__":
    main()
