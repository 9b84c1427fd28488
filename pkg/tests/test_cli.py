import json
from pathlib import Path

import pytest

from dacr.cli import main

GOLDEN = Path(__file__).parent / "golden"


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bundled_honest(capsys):
    code, out, _ = run_cli(capsys, "simulate", "--config", "honest")
    assert code == 0 and json.loads(out)["violations"] == []


def test_bundled_tamper_matches_golden(capsys):
    code, out, _ = run_cli(capsys, "simulate", "--config", "tamper")
    assert code == 0
    assert json.loads(out)["approvals_per_view"]["1"] == 0
    assert out == (GOLDEN / "tamper_metrics.json").read_text()


def test_out_dir_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["simulate", "--config", "honest", "--seed", "7", "--out", str(tmp_path / name)]) == 0
    for f in ("metrics.json", "metrics.csv", "trace.jsonl"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_print_defaults(capsys):
    code, out, _ = run_cli(capsys, "simulate", "--print-defaults")
    assert code == 0 and json.loads(out)["n"] == 4


@pytest.mark.parametrize("text,needle", [('{"n": 3, "f": 1}', "n >= 4"), ('{"n": 4,\n"f": }', "line 2"),
                                         ('{"colour": 1}', "colour")])
def test_bad_configs_exit_2(tmp_path, capsys, text, needle):
    p = tmp_path / "c.json"
    p.write_text(text)
    code, _, err = run_cli(capsys, "simulate", "--config", str(p))
    assert code == 2 and needle in err


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["simulate", "--config", "/no/such/file.json"]) == 2
    assert main(["prob-honest", "--n", "10", "--f", "4"]) == 2


def test_prob_tables(capsys):
    code, out, _ = run_cli(capsys, "prob-honest", "--n", "31", "--f", "10")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("x,q=11")
    assert lines[1].split(",")[1] == "0"                   # x = 0
    assert lines[22].split(",")[1] == "1"                  # x = n - t + 1 = 21, q = t
    code, out, _ = run_cli(capsys, "prob-malicious", "--n", "31", "--f", "10")
    rows = [r.split(",") for r in out.splitlines()[1:]]
    assert all(float(r[2]) == 0 for r in rows[:11]) and float(rows[-1][2]) == 1


def test_censor_bound_and_curves(capsys):
    code, out, _ = run_cli(capsys, "censor-bound", "--n", "31", "--f", "10", "--x", "5", "--alpha", "0.9",
                           "--T", "10,2000")
    assert code == 0 and len(out.splitlines()) == 3
    code, out, _ = run_cli(capsys, "retrieve-curve", "--f", "30")
    assert code == 0 and len(out.splitlines()) == 93
    code, out, _ = run_cli(capsys, "lite-params", "--f", "16,32")
    assert code == 0 and out.splitlines()[1].startswith("16,1.5,")


def test_scaling_subcommand(capsys):
    code, out, _ = run_cli(capsys, "scaling", "--ns", "7,13", "--d", "32")
    assert code == 0 and len(out.splitlines()) == 5


def test_dispersal_only_protocol(tmp_path, capsys):
    p = tmp_path / "q.json"
    p.write_text(json.dumps({"protocol": "quarter", "n": 9, "f": 2, "d": 16,
                             "adversary": {"strategy": "TamperColumn"}}))
    code, out, _ = run_cli(capsys, "simulate", "--config", str(p))
    assert code == 0 and json.loads(out)["tampered_undetected"] is True
