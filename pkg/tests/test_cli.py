import json
import subprocess
import sys

import pytest

from gossipscope.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_eval_true(capsys):
    code, out, _ = run(capsys, "eval", "--agents", "3", "--calltype", "p3,pushpull,before", "--bound", "4",
                       "--seq", "a<>c;b<>c;a<>b", "--formula", "K[a]F[c,b]")
    assert code == 0
    assert out.splitlines() == ["true", "bound: N=4"]


def test_eval_false_and_oracle(capsys):
    args = ["eval", "--agents", "3", "--calltype", "p3,pushpull,after", "--bound", "3",
            "--seq", "a<>c;b<>c;a<>b", "--formula", "K[a]F[c,b]", "--json"]
    code, out, _ = run(capsys, *args)
    assert code == 1 and json.loads(out)["value"] is False and json.loads(out)["bound"] == 3
    code, out, _ = run(capsys, *args, "--oracle")
    assert code == 1 and json.loads(out)["value"] is False


def test_schedule(capsys):
    code, out, _ = run(capsys, "schedule", "--agents", "6")
    assert code == 0 and out.strip() == "a<>e;a<>f;a<>b;c<>d;a<>c;b<>d;a<>e;a<>f"
    assert run(capsys, "schedule", "--agents", "3")[0] == 2


def test_indist(capsys):
    code, out, _ = run(capsys, "indist", "--agents", "4", "--calltype", "p2,pushpull,after", "--bound", "3",
                       "--agent", "a", "--seqA", "a<>b;b<>c", "--seqB", "a<>b;c<>d")
    assert code == 0 and out.startswith("true")
    code, out, _ = run(capsys, "indist", "--agents", "3", "--calltype", "p1,pushpull,after", "--bound", "2",
                       "--agent", "a", "--seqA", "b<>c", "--seqB", "c<>b", "--oracle")
    assert code == 1 and out.startswith("false")


def test_classes_json(capsys):
    code, out, _ = run(capsys, "classes", "--agents", "3", "--calltype", "p3,pushpull,after", "--bound", "2",
                       "--agent", "a", "--seq", "b<>c", "--json")
    rec = json.loads(out)
    assert code == 0 and rec["bound"] == 2 and rec["class_count"] == 25
    assert "ε" in rec["classes"][0]["members"]


def test_compare_and_verify(capsys):
    code, out, _ = run(capsys, "compare", "--agents", "3", "--bound", "3",
                       "--left", "p1,pushpull,after", "--right", "p2,pushpull,after", "--json")
    rec = json.loads(out)
    assert code == 0 and rec["verdict"] == "LeftStrictSubset" and rec["witnesses"]
    code, out, _ = run(capsys, "verify-preorder", "--agents", "3", "--bound", "3")
    assert code == 0 and "153/153" in out and "bound: N=3" in out


def test_protocol_file(capsys, tmp_path):
    f = tmp_path / "hms.txt"
    f.write_text("agents: 3\ncalltype: p3 pushpull after\nbound: 6\nrule (X,Y): !K[X]F[Y,X] -> X<>Y\n")
    code, out, _ = run(capsys, "protocol", str(f), "--json")
    rec = json.loads(out)
    assert code == 0 and rec["all_expert"] and not rec["bound_limited"] and rec["bound"] == 6
    code, out, _ = run(capsys, "protocol", str(f), "--bound", "2")
    assert code == 1 and "undetermined" in out
    code, out, _ = run(capsys, "protocol", str(f), "--semantics", "fixpoint", "--bound", "4")
    assert "semantics: fixpoint" in out


@pytest.mark.parametrize("argv", [
    ["eval", "--agents", "3", "--calltype", "p3,pushpull,before", "--seq", "a<>c", "--formula", "K[a]F[c,"],
    ["eval", "--agents", "3", "--calltype", "p9,pushpull,before", "--seq", "a<>c", "--formula", "F[a,a]"],
    ["eval", "--agents", "2", "--calltype", "p1,pushpull,before", "--seq", "a<>b", "--formula", "F[a,a]"],
    ["eval", "--agents", "3", "--calltype", "p1,pushpull,before", "--bound", "1", "--seq", "a<>b;b<>c",
     "--formula", "F[a,a]"],
    ["eval", "--agents", "3", "--calltype", "p1,push,before", "--seq", "a<>b", "--formula", "F[a,a]"],
    ["protocol", "/nonexistent/file"],
    ["frobnicate"],
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_pair_budget_env(capsys, monkeypatch):
    monkeypatch.setenv("GOSSIPSCOPE_PAIR_BUDGET", "10")
    code, _, err = run(capsys, "indist", "--agents", "3", "--calltype", "p3,pushpull,after", "--bound", "3",
                       "--agent", "a", "--seqA", "b<>c", "--seqB", "ε")
    assert code == 2 and "budget" in err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "gossipscope", "schedule", "--agents", "4"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "a<>b;c<>d;a<>c;b<>d"
