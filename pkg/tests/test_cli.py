import io
import json
import subprocess
import sys

import pydot
import pytest

from plan2bn.cli import run
from plan2bn.compiler import load_network

from _golden import FIXTURES

RECON = str(FIXTURES / "recon.plan")
OVERLAY = str(FIXTURES / "recon_overlay.json")
PLANS = sorted(p.name for p in FIXTURES.glob("*.plan"))


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_validate_clean_library():
    code, out, err = cli("validate", RECON)
    assert code == 0 and err == ""
    assert out == "0 errors, 0 warnings\n"


def test_validate_json():
    code, out, _ = cli("validate", RECON, "--output", "json")
    assert code == 0
    assert json.loads(out) == {"errors": [], "warnings": []}


def test_validate_reports_recursion(tmp_path):
    plan = tmp_path / "loop.plan"
    plan.write_text("ka A achieves !a { !b }\nka B achieves !b { !a }\nka T achieves !t { !a }\n")
    code, out, _ = cli("validate", str(plan))
    assert code == 1
    assert f"{plan}: RECURSION at A: recursive goal cycle !a -> !b -> !a" in out
    assert out.endswith("1 errors, 0 warnings\n")


def test_recognize_bound_stream():
    code, out, err = cli("recognize", RECON, "--overlay", OVERLAY,
                         "--obs", str(FIXTURES / "bound.obsl"))
    assert code == 0, err
    reports = [json.loads(line) for line in out.splitlines()]
    assert [r["t"] for r in reports] == [1, 2]
    assert reports[0]["argmax"]["perform_bound"] == "Active"
    assert reports[-1]["argmax"]["perform_bound"] == "Achieved"
    assert list(reports[0]) == ["t", "beliefs", "argmax", "delta"]


def test_recognize_table_and_track():
    code, out, _ = cli("recognize", RECON, "--overlay", OVERLAY, "--track", "hide",
                       "--obs", str(FIXTURES / "hide.obsl"), "--output", "table")
    assert code == 0
    lines = out.splitlines()
    assert [l for l in lines if l.startswith("t=")] == ["t=1", "t=2"]
    assert lines[-1].split()[0] == "hide"


def test_compile_json_loads_back():
    code, out, _ = cli("compile", RECON, "--overlay", OVERLAY)
    assert code == 0
    net, vmap = load_network(out)
    assert len(net) == 25 and vmap.top_level == ["perform_bound", "dealt_with_enemy"]


def test_compile_table():
    code, out, _ = cli("compile", str(FIXTURES / "single_ka.plan"), "--output", "table")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split() == ["variable", "role", "domain", "parents"]
    assert lines[1].split()[:2] == ["perform_bound", "goal"]
    assert len(lines) == 7


def test_option_flags_reach_compiler():
    _, full, _ = cli("compile", str(FIXTURES / "or_branch.plan"))
    _, bare, _ = cli("compile", str(FIXTURES / "or_branch.plan"), "--no-temporal-arcs",
                     "--no-evidence-vars", "--no-or-inhibition")
    full, bare = json.loads(full), json.loads(bare)
    assert {a["kind"] for a in full["arcs"]} == {
        "subaction", "temporal", "inhibitory", "evidence", "context"}
    assert {a["kind"] for a in bare["arcs"]} == {"subaction", "context"}
    _, goals, _ = cli("compile", str(FIXTURES / "two_goals.plan"), "--no-goal-inhibition")
    assert "inhibitory" not in {a["kind"] for a in json.loads(goals)["arcs"]}


def test_dump_dot_parses():
    code, out, _ = cli("dump-dot", RECON)
    assert code == 0
    (graph,) = pydot.graph_from_dot_data(out)
    assert graph.get_name().strip('"') == "recon"
    assert len([n for n in graph.get_nodes() if n.get_name() not in ("node", "edge")]) == 25


def test_out_file(tmp_path):
    target = tmp_path / "net.json"
    code, out, _ = cli("compile", RECON, "--out", str(target))
    assert code == 0 and out == ""
    assert load_network(target.read_text())[0]


@pytest.mark.parametrize("plan", PLANS)
@pytest.mark.parametrize("command", ["validate", "compile", "dump-dot"])
def test_exit_codes_on_fixtures(plan, command):
    code, _, err = cli(command, str(FIXTURES / plan))
    assert (code, err) == (0, "")


@pytest.mark.parametrize("obs", ["bound.obsl", "hide.obsl", "ambiguous_move.obsl"])
def test_exit_codes_on_streams(obs):
    code, _, err = cli("recognize", RECON, "--overlay", OVERLAY, "--obs", str(FIXTURES / obs))
    assert (code, err) == (0, "")


def test_usage_and_io_errors(tmp_path):
    code, _, err = cli("compile", str(tmp_path / "missing.plan"))
    assert code == 2 and "missing.plan" in err
    assert cli("frobnicate", RECON)[0] == 2
    assert cli("recognize", RECON)[0] == 2
    assert cli("compile", RECON, "--overlay", str(tmp_path / "nope.json"))[0] == 2
    assert cli("compile", RECON, "--out", str(tmp_path / "no" / "dir.json"))[0] == 2
    assert cli()[0] == 2


def test_syntax_error_names_file_and_location(tmp_path):
    plan = tmp_path / "bad.plan"
    plan.write_text("ka k achieves !g {\n  @x\n}\n")
    code, out, err = cli("compile", str(plan))
    assert code == 1 and out == ""
    assert err.startswith(f"{plan}:2:3: unknown step-kind sigil '@'")


def test_bad_overlay_and_observations(tmp_path):
    overlay = tmp_path / "o.json"
    overlay.write_text('{"no_such_var": {"prior": [1, 0]}}')
    code, _, err = cli("compile", RECON, "--overlay", str(overlay))
    assert code == 1 and str(overlay) in err
    overlay.write_text("{broken")
    assert cli("compile", RECON, "--overlay", str(overlay))[0] == 1

    stream = tmp_path / "s.obsl"
    stream.write_text('{"t": 1, "target": "ev_find_cover", "value": "Performed"}\n'
                      '{"t": 1, "target": "ev_aim_at_enemy", "value": "Performed"}\n')
    code, out, err = cli("recognize", RECON, "--obs", str(stream))
    assert code == 1
    assert "t=1: STALE_INDEX" in err
    assert len(out.splitlines()) == 1  # the accepted report is still written
    stream.write_text("{oops\n")
    code, _, err = cli("recognize", RECON, "--obs", str(stream))
    assert code == 1 and "line 1" in err
    stream.write_text('{"t": 1, "target": "ev_find_cover", "value": "Performed"}\n')
    code, _, err = cli("recognize", RECON, "--obs", str(stream), "--track", "find_cover")
    assert code == 1 and "UNKNOWN_GOAL" in err


def _invoke(*argv):
    return subprocess.run([sys.executable, "-m", "plan2bn.cli", *argv],
                          capture_output=True, check=False)


@pytest.mark.parametrize("argv", [
    ("compile", RECON, "--overlay", OVERLAY),
    ("dump-dot", RECON),
    ("recognize", RECON, "--overlay", OVERLAY, "--obs", str(FIXTURES / "bound.obsl")),
])
def test_byte_determinism_across_processes(argv):
    first, second = _invoke(*argv), _invoke(*argv)
    assert first.returncode == 0, first.stderr
    assert first.stdout == second.stdout and first.stdout
