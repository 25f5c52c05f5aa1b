import json
import math
import re

import numpy as np
import pytest

from isoflow.cli import (EXIT_CONFIG, EXIT_HALTED, EXIT_NUMERICAL, EXIT_OK, parse_values,
                         read_csv, render_svg, run_command)
from isoflow.errors import ConfigError
from isoflow.obstacle import circle

LUNE_ETA = repr(1.0 + 0.5 * math.pi)


def _err(capsys):
    line = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(line)


@pytest.fixture
def loop_csv(tmp_path):
    """Initial curve with a self-crossing loop, attached to the unit circle."""
    c, s = math.cos(0.5), math.sin(0.5)
    p = np.array([[c, -s], [2, -0.6], [3, 0.6], [3, -0.2], [2, 0.6], [c, s]])
    pts = [p[0]] + [a + t * (b - a) for a, b in zip(p[:-1], p[1:]) for t in (0.25, 0.5, 0.75, 1.0)]
    path = tmp_path / "loop.csv"
    np.savetxt(path, np.array(pts), delimiter=",", header="x,y", comments="")
    return path


@pytest.mark.parametrize("argv", [
    ["flow", "--n", "8"],
    ["flow", "--init", "missing.csv"],
    ["critical", "--body", "triangle:1"],
    ["flow", "--scheme", "rk4"],
    ["loj", "--amplitudes", "0..1"],
])
def test_config_errors_exit_2(argv, capsys):
    assert run_command(argv) == EXIT_CONFIG


def test_config_error_json(capsys):
    assert run_command(["flow", "--n", "8"]) == EXIT_CONFIG
    e = _err(capsys)
    assert e["stage"] == "flow" and "message" in e and "error" in e


def test_geometry_error_exit_3(capsys):
    assert run_command(["critical", "--body", "circle:1", "--eta", "-1"]) == EXIT_NUMERICAL
    assert _err(capsys)["stage"] == "critical"


def test_halted_flow_exit_4(loop_csv, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    code = run_command(["flow", "--body", "circle:1", "--eta", "0.5", "--init", str(loop_csv),
                        "--n", "64", "--tmax", "1", "--out-trace", str(out)])
    assert code == EXIT_HALTED
    assert _err(capsys)["error"] == "FlowHalted"
    _, rows = read_csv(out)
    assert len(rows) == 1


def test_critical_csv(tmp_path):
    out = tmp_path / "crit.csv"
    argv = ["critical", "--body", "circle:1", "--eta", LUNE_ETA, "--out", str(out), "--seed", "3"]
    assert run_command(argv) == EXIT_OK
    meta, rows = read_csv(out)
    assert meta["seed"] == "3" and re.fullmatch(r"[0-9a-f]{16}", meta["config_hash"])
    r = rows[0]
    assert r["r"] == pytest.approx(1.0, abs=1e-9)
    assert r["center_distance"] == pytest.approx(math.sqrt(2.0), abs=1e-9)
    assert r["L"] == pytest.approx(1.5 * math.pi, abs=1e-9)
    assert r["alpha1"] == pytest.approx(0.5 * math.pi, abs=1e-9)
    assert r["degenerate_flag"] == 1.0
    first = out.read_bytes()
    assert run_command(argv) == EXIT_OK
    assert out.read_bytes() == first


def test_flow_outputs_are_deterministic(tmp_path):
    def go(tag):
        d = tmp_path / tag
        argv = ["flow", "--body", "circle:100", "--n", "64", "--tmax", "0.5",
                "--snapshot-every", "7", "--out-trace", str(d / "trace.csv"),
                "--out-svg", str(d / "svg"), "--summary", str(d / "summary.json")]
        assert run_command(argv) == EXIT_OK
        return d
    a, b = go("a"), go("b")
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    names = sorted(p.name for p in (a / "svg").iterdir())
    assert names == sorted(p.name for p in (b / "svg").iterdir())
    assert all(re.fullmatch(r"snapshot_\d{8}\.svg", n) for n in names)
    steps = [int(n[9:17]) for n in names]
    assert steps[0] == 0 and steps == sorted(steps)
    for n in names:
        assert (a / "svg" / n).read_bytes() == (b / "svg" / n).read_bytes()
    meta, rows = read_csv(a / "trace.csv")
    assert "config_hash" in meta
    L = [r["L"] for r in rows]
    assert all(np.diff(L) <= 1e-12)
    s = json.loads((a / "summary.json").read_text())
    assert s["config_hash"] == meta["config_hash"] and s["steps"] == len(rows) - 1


def test_empty_render_has_body_only(tmp_path):
    p = tmp_path / "e.svg"
    render_svg([], circle(1.0), p)
    text = p.read_text()
    assert text.count("<polygon") == 1 and "<polyline" not in text
    render_svg([], circle(1.0), tmp_path / "f.svg")
    assert (tmp_path / "f.svg").read_text() == text


def test_loj_json(tmp_path):
    out = tmp_path / "loj.json"
    argv = ["loj", "--body", "circle:100", "--amplitudes", "1e-3..1e-1:5", "--n", "256",
            "--out", str(out)]
    assert run_command(argv) == EXIT_OK
    s = json.loads(out.read_text())["slopes"]
    assert s["distance"] == pytest.approx(1.0, abs=0.1)
    assert s["length"] == pytest.approx(2.0, abs=0.1)
    assert s["length_vs_eps_sq"] == pytest.approx(1.0, abs=0.05)


def test_stability_outputs(tmp_path):
    out = tmp_path / "stab.csv"
    argv = ["stability", "--body", "circle:100", "--amplitudes", "0.02,0.04", "--n", "128",
            "--out", str(out)]
    assert run_command(argv) == EXIT_OK
    meta, rows = read_csv(out)
    assert len(rows) == 2 and all(r["reduction_ok"] == 1.0 for r in rows)
    comp = json.loads(out.with_suffix(".json").read_text())
    assert comp["config_hash"] == meta["config_hash"] and "fits" in comp


def test_profile_outputs(tmp_path):
    out, summ = tmp_path / "p.csv", tmp_path / "p.json"
    argv = ["profile", "--body", "circle:10", "--etas", "0.5,1", "--partitions", "3",
            "--out", str(out), "--summary", str(summ)]
    assert run_command(argv) == EXIT_OK
    _, rows = read_csv(out)
    assert all(r["bounds_ok"] == 1.0 for r in rows)
    assert json.loads(summ.read_text())["ok"] is True


def test_parse_values():
    assert parse_values("1,2.5") == [1.0, 2.5]
    v = parse_values("1e-3..1e-1:3")
    assert v == pytest.approx([1e-3, 1e-2, 1e-1])
    assert len(parse_values("1..2", count=4)) == 4
    with pytest.raises(ConfigError):
        parse_values("a,b")


def test_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("ISOFLOW_THREADS", "zero")
    assert run_command(["stability", "--amplitudes", "0.01"]) == EXIT_CONFIG


def test_selftest_quick(tmp_path):
    out = tmp_path / "self.json"
    assert run_command(["selftest", "--out", str(out)]) == EXIT_OK
    res = json.loads(out.read_text())["results"]
    assert res and all(r["passed"] for r in res)
