import csv
import json
import subprocess
import sys

import pytest

from pargame.cli import main, run
from pargame.io import fixture_path


def report(argv):
    code, text, _ = run(argv)
    return code, json.loads(text)


def test_spectral_free_game():
    code, rep = report(["spectral", "--gen", "free", "--k", "3", "--d", "2"])
    assert code == 0
    assert rep["spectral"]["lambda"] == pytest.approx(1 / 3, abs=1e-8)
    assert rep["result"] == "pass"


def test_value_ghz():
    code, rep = report(["value", "--gen", "ghz"])
    assert code == 0
    assert rep["value"]["value"] == "3/4"


def test_value_from_file_and_generator_agree():
    _, a = report(["value", "--gen", "ghz"])
    _, b = report(["value", "--game", str(fixture_path("ghz.game"))])
    assert a["value"] == b["value"]
    assert a["game"]["digest"] == b["game"]["digest"]


def test_bound_ghz_is_vacuous():
    code, rep = report(["bound", "--gen", "ghz", "--reps", "10", "--c", "1"])
    assert code == 0
    assert rep["lambda_zero"] is True
    assert rep["theorem_bound"]["value"] == 1.0
    assert "vacuous" in rep["theorem_bound"]["note"]
    assert len(rep["components"]) == 4


def test_bound_explicit_params():
    code, rep = report(["bound", "--epsilon", "1", "--lam", "1", "--answer-count", "4", "--reps", "2"])
    assert code == 0
    assert rep["min_reps"] == 2
    assert rep["theorem_bound"]["guaranteed"] is True


def test_bound_anchored_with_measurements():
    code, rep = report(["bound", "--gen", "ghz", "--anchor", "1/2", "--reps", "10", "--value-reps", "1"])
    assert code == 0
    assert "anchored" in rep["corollary_bounds"]
    assert rep["measured"]["values"] == ["31/32"]


def test_anchor_value_law():
    code, rep = report(["anchor", "--gen", "ghz", "--anchor", "1/4"])
    assert code == 0
    assert rep["value"]["anchored"] == rep["value"]["predicted"]


def test_repeat_laws():
    code, rep = report(["repeat", "--gen", "ghz", "--reps", "2"])
    assert code == 0
    assert rep["value"]["repeated"] == "5/8"


def test_transforms_left_to_right():
    _, a = report(["validate", "--gen", "ghz", "--reps", "2", "--anchor", "1/2"])
    _, b = report(["validate", "--gen", "ghz", "--anchor", "1/2", "--reps", "2"])
    # anchoring after repetition: 16 full tuples, 3*16 with one ⊥, 3*4 with two, 1 all-⊥
    assert a["game"]["support_size"] == 77
    assert b["game"]["support_size"] == 23**2


def test_graph_and_csv(tmp_path):
    out = tmp_path / "edges.csv"
    code, rep = report(["graph", "--gen", "free", "--k", "2", "--d", "2", "--csv", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == len(rep["graph"]["weights"])
    assert rep["graph"]["component_count"] == 1


def test_congestion_anchored():
    code, rep = report(["congestion", "--gen", "ghz", "--anchor", "1/2"])
    assert code == 0
    assert rep["congestion"]["max_path_length"] <= 6


def test_congestion_disconnected_reports_only():
    code, rep = report(["congestion", "--gen", "ghz"])
    assert code == 0
    assert rep["checks"][0]["asserted"] is False


def test_roundsim_ghz_and_csv(tmp_path):
    out = tmp_path / "dist.csv"
    code, rep = report(["roundsim", "--gen", "ghz", "--reps", "2", "--csv", str(out)])
    assert code == 0
    assert rep["lambda"] == pytest.approx(0, abs=1e-8)
    rows = list(csv.DictReader(out.open()))
    assert {r["i"] for r in rows} == {str(c["i"]) for c in rep["coordinates"]}


def test_roundsim_with_strategy_file(tmp_path):
    _, val = report(["value", "--gen", "ghz", "--reps", "2"])
    path = tmp_path / "s.json"
    path.write_text(json.dumps(val["value"]["witness"]))
    code, rep = report(["roundsim", "--gen", "ghz", "--reps", "2", "--strategy", str(path)])
    assert code == 0
    assert rep["strategy"]["provenance"] == "supplied"
    assert rep["strategy"]["value"] == "5/8"


def test_threads_do_not_change_reports():
    texts = {run(["value", "--gen", "random", "--k", "3", "--seed", "3", "--threads", t])[1] for t in ("1", "2", "8")}
    assert len(texts) == 1


def test_invalid_game_file_exits_1(tmp_path):
    path = tmp_path / "g.game"
    data = json.loads(fixture_path("ghz.game").read_text())
    data["distribution"][0]["p"] = "1/2"
    path.write_text(json.dumps(data))
    code, rep = report(["validate", "--game", str(path)])
    assert code == 1
    assert any("sum ≠ 1" in v for v in rep["violations"])


def test_budget_exceeded_exits_1():
    code, rep = report(["value", "--gen", "ghz", "--reps", "2", "--method", "plain-exhaustive", "--budget", "100"])
    assert code == 1
    assert rep["value"]["complete"] is False


@pytest.mark.parametrize(
    "argv",
    [
        ["value"],
        ["value", "--gen", "ghz", "--game", "x.game"],
        ["frobnicate", "--gen", "ghz"],
        ["bound", "--gen", "ghz"],
        ["bound", "--gen", "ghz", "--reps", "2", "--reps", "3"],
        ["anchor", "--gen", "ghz"],
        ["value", "--game", "/nonexistent.game"],
        ["bound", "--epsilon", "1/2", "--reps", "3"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


def test_out_file_and_echo(tmp_path):
    out = tmp_path / "r.json"
    assert main(["value", "--gen", "ghz", "--threads", "2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["command"] == ["value", "--gen", "ghz"]
    assert rep["schema_version"] == "1"


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "pargame.cli", "value", "--gen", "ghz"], capture_output=True, text=True, check=True
    )
    assert json.loads(proc.stdout)["value"]["value"] == "3/4"
