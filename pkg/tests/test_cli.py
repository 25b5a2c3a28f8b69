import csv
import json
import math

import pytest

from qpass.cli import CONFIG_SCHEMA, EXIT_CONFIG, EXIT_FIXTURE, EXIT_OK, EXIT_WRITE, main


@pytest.fixture(autouse=True)
def _outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("QPASS_OUTPUT_DIR", str(tmp_path / "out"))
    return tmp_path / "out"


def test_verify_bounds_single_point(_outdir, capsys):
    rc = main(["verify-bounds", "--alpha", "0.5", "--xi", "0.5", "--forgeries", "5", "--starts", "2", "--budget", "4000"])
    assert rc == EXIT_OK
    data = json.loads((_outdir / "bounds.json").read_text())
    assert data["passed"] and data["checks"] == 8
    assert "PASS ps_upper_bound" in capsys.readouterr().out


def test_run_requires_seed():
    assert main(["run"]) == EXIT_CONFIG


def test_run_is_deterministic(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"t{i}.json"
        assert main(["run", "--seed", "7", "--mode", "extended", "--decoys", "8", "--sessions", "2", "--out", str(path)]) == 0
        outs.append(path.read_text())
    assert outs[0] == outs[1]
    ts = json.loads(outs[0])["transcripts"]
    assert [t["verdict"] for t in ts] == ["accepted", "accepted"]


def test_enroll_then_run_with_fixture(tmp_path):
    fx = tmp_path / "fx.json"
    assert main(["enroll", "--seed", "1", "--N", "4", "--password", "1010", "--out", str(fx)]) == 0
    assert json.loads(fx.read_text())["password"] == "1010"
    out = tmp_path / "t.json"
    assert main(["run", "--seed", "2", "--N", "4", "--fixture", str(fx), "--sessions", "3", "--out", str(out)]) == 0
    assert all(t["verdict"] == "accepted" for t in json.loads(out.read_text())["transcripts"])
    assert main(["run", "--seed", "2", "--N", "5", "--fixture", str(fx)]) == EXIT_CONFIG


def test_missing_or_bad_fixture(tmp_path):
    assert main(["run", "--seed", "1", "--fixture", str(tmp_path / "none.json")]) == EXIT_FIXTURE
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": "other"}))
    assert main(["run", "--seed", "1", "--fixture", str(bad)]) == EXIT_FIXTURE


def test_write_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--seed", "1", "--out", str(blocker / "sub" / "t.json")]) == EXIT_WRITE
    assert main(["report", "--output-dir", str(blocker / "dir")]) == EXIT_WRITE


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(
        json.dumps(
            {
                "schema": CONFIG_SCHEMA,
                "protocol": {"N": 3, "alpha": 0.5, "xi": 0.5, "mode": "extended", "N_D": 4},
                "seed": 5,
                "trials": 50,
                "attack": {"kind": "card-steal", "params": {"password": {"r": 1.0}}},
                "output": {"dir": str(tmp_path / "o")},
            }
        )
    )
    assert main(["attack", "--config", str(cfg), "--N", "1", "--mode", "basic"]) == 0
    rows = list(csv.DictReader((tmp_path / "o" / "attack_card-steal.csv").open()))
    conf = json.loads(rows[0]["config"])
    assert conf["N"] == 1 and conf["mode"] == "basic" and conf["seed"] == 5
    assert conf["xi"] == pytest.approx(0.5)
    assert float(rows[0]["target"]) == pytest.approx(0.3)


def test_config_errors_are_aggregated(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema": "nope", "protocol": {"N": 0, "colour": 1}}))
    assert main(["run", "--config", str(cfg), "--alpha", "2"]) == EXIT_CONFIG
    err = capsys.readouterr().err
    for frag in ("schema", "colour", "alpha", "N must", "--seed"):
        assert frag in err


def test_attack_kinds(_outdir):
    assert main(["attack", "--seed", "1", "--kind", "no-card", "--N", "2", "--trials", "200"]) == 0
    assert main(["attack", "--seed", "1", "--kind", "mitm", "--N", "2", "--trials", "10"]) == 0
    assert main(
        ["attack", "--seed", "1", "--kind", "intercept-resend", "--mode", "extended", "--decoys", "8", "--N", "2", "--trials", "10"]
    ) == 0
    assert main(["attack", "--seed", "1", "--kind", "accumulate", "--N", "4", "--trials", "1", "--rounds", "5"]) == 0
    assert main(["attack", "--seed", "1", "--kind", "intercept-resend"]) == EXIT_CONFIG
    assert main(["attack", "--seed", "1", "--kind", "teleport"]) == EXIT_CONFIG
    assert main(["attack", "--seed", "1"]) == EXIT_CONFIG
    rows = list(csv.DictReader((_outdir / "attack_accumulate-discarded.csv").open()))
    assert [r["metric"] for r in rows] == ["accuracy@1", "accuracy@2", "accuracy@5"]


def test_report(_outdir, capsys):
    assert main(["run", "--seed", "3"]) == 0
    assert main(["attack", "--seed", "1", "--kind", "no-card", "--N", "1", "--trials", "100"]) == 0
    assert main(["report"]) == 0
    s = json.loads((_outdir / "summary.json").read_text())
    assert s["sessions"] == {"accepted": 1}
    assert "no-card-forgery" in s["attacks"]
    assert s["headline"]["p_n"]["closed_form"] == pytest.approx(0.2)
    assert (_outdir / "summary.csv").exists()


def test_xi_delta_exclusive():
    with pytest.raises(SystemExit):
        main(["run", "--seed", "1", "--xi", "0.5", "--delta", "1.0"])
    assert main(["run", "--seed", "1", "--xi", "1.5"]) == EXIT_CONFIG
    assert main(["run", "--seed", "1", "--delta", str(math.pi)]) == EXIT_CONFIG
