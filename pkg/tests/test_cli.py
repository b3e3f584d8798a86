"""CLI behavior: exit codes, dump formats, schema stability, multi-file
namespaces."""

import json
import subprocess
import sys

import pytest

from conftest import CORPUS, ROOT


def rsc(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "rsccore.cli", *args],
        capture_output=True, text=True, cwd=cwd or str(ROOT),
        env={"PYTHONPATH": str(ROOT / "src"), "PATH": "/usr/bin:/bin"})


def test_check_verified_exit_zero():
    r = rsc("check", str(CORPUS / "minindex.rsc"))
    assert r.returncode == 0
    assert "VERIFIED" in r.stderr


def test_check_errors_exit_one():
    r = rsc("check", str(CORPUS / "bad_undefined.rsc"))
    assert r.returncode == 1
    assert "error[" in r.stderr
    assert "bad_undefined.rsc:2:" in r.stderr


def test_usage_error_exit_two():
    r = rsc("check", str(CORPUS / "minindex.rsc"), "--solver", "external")
    assert r.returncode == 2


def test_missing_file_exit_two():
    r = rsc("check", "no_such_file.rsc")
    assert r.returncode == 2


def test_check_json_format():
    r = rsc("check", "--format", "json", str(CORPUS / "bad_head0.rsc"))
    assert r.returncode == 1
    data = json.loads(r.stdout)
    assert data["schema"] == "rsc/check/v1"
    assert data["verdict"] == "errors"
    assert data["diagnostics"][0]["span"]["line"] == 8


def test_dump_vcs_json():
    r = rsc("check", "--dump-vcs", str(CORPUS / "head.rsc"))
    data = json.loads(r.stdout)
    assert data["schema"] == "rsc/vcs/v1"
    assert data["constraints"]
    kinds = {c["kind"] for c in data["constraints"]}
    assert "sub" in kinds and "wf" in kinds


def test_dump_solution_json():
    r = rsc("check", "--dump-solution", str(CORPUS / "ssa_reduce.rsc"))
    data = json.loads(r.stdout)
    assert data["schema"] == "rsc/solution/v1"
    assert any(v["origin"][0] == "phi" for v in data["kvars"].values())


def test_dump_ssa_deterministic():
    outs = {rsc("check", "--dump-ssa", str(CORPUS / "minindex.rsc")).stdout
            for _ in range(2)}
    assert len(outs) == 1
    assert "letwhile" in outs.pop()


def test_run_entry_and_args():
    r = rsc("run", str(CORPUS / "minindex.rsc"), "--entry", "minIndex",
            "--args", "[9,4,6,2,8]")
    assert r.returncode == 0
    assert r.stdout.strip() == "3"


def test_run_stuck_exit_one():
    r = rsc("run", str(CORPUS / "head.rsc"), "--entry", "head",
            "--args", "[]")
    assert r.returncode == 1
    assert "stuck" in r.stdout


def test_simulate_json_report():
    r = rsc("simulate", str(CORPUS / "field_ghost.rsc"))
    assert r.returncode == 0
    data = json.loads(r.stdout)
    assert data["schema"] == "rsc/sim/v1"
    assert data["status"] == "ok"
    assert data["frsc_steps"] <= data["irsc_steps"]


def test_multi_file_concatenation(tmp_path):
    lib = tmp_path / "lib.rsc"
    lib.write_text("/*@ (x: nat) => nat */\nfunction inc(x) {"
                   " return x + 1; }\n")
    main = tmp_path / "main.rsc"
    main.write_text("var r = inc(3);\n")
    r = rsc("check", str(lib), str(main))
    assert r.returncode == 0


def test_qualifier_file_flag(tmp_path):
    quals = tmp_path / "q.txt"
    quals.write_text("v = ★ + 1\n")
    r = rsc("check", "--qualifiers", str(quals),
            str(CORPUS / "ssa_reduce.rsc"))
    assert r.returncode == 0
