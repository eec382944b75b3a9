import json
import subprocess
import sys

import pytest

from confsphere.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, SuiteRun, UsageError, main, run_suite
from confsphere.scenarios import ScenarioSpec


def test_regularity_round_passes(tmp_path):
    out = tmp_path / "r"
    assert main(["verify", "--suite", "regularity", "--scenario", "round", "--n", "3",
                 "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["summary"]["failed"] == 0 and report["summary"]["checks"] == 4
    for rec in report["records"]:
        assert {"anchor", "lhs", "rhs", "slack", "verdict", "seed"} <= set(rec)
        assert rec["slack"] > 0
    meta = json.loads((out / "metadata.json").read_text())
    assert "created" in meta and "created" not in (out / "report.json").read_text()


def test_usage_errors(capsys):
    assert main(["verify", "--suite", "nonsense"]) == EXIT_USAGE
    assert main(["verify", "--suite", "spherical-mean", "--n", "5", "--variant", "u"]) == EXIT_USAGE
    assert "n in {3, 4}" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--scenario", "torus"])
    assert exc.value.code == 2
    with pytest.raises(UsageError):
        SuiteRun("regularity", ScenarioSpec("round"), h=0.5)


def test_failing_check_sets_exit_one(tmp_path):
    # a tolerance far below the differencing error makes the identity fail
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "perturbation", "n": 3, "J": 1}))
    assert main(["verify", "--suite", "total-scalar", "--config", str(cfg), "--tol", "1e-14",
                 "--resolution", "16"]) == EXIT_FAIL


def test_report_bytes_are_deterministic(tmp_path):
    args = ["verify", "--suite", "spherical-mean", "--scenario", "bubble", "--lambda", "2",
            "--n", "3", "--seed", "42"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b), "--workers", "3"]) == EXIT_OK
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert list(a.glob("phi-profile-*.csv"))


def test_singular_set_bundle_and_plots(tmp_path):
    out = tmp_path / "s"
    assert main(["verify", "--suite", "singular-set", "--scenario", "spike",
                 "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    perims = [r for r in report["records"]
              if r["check"] == "singular-set-perimeter" and r["variant"] == "f"]
    assert len(perims) == 5
    assert (out / "bad-set-f-0.csv").exists()
    assert main(["plot", str(out), "--kind", "tau-scan", "--out", str(tmp_path / "p1")]) == 0
    assert main(["plot", str(out), "--kind", "tau-scan", "--out", str(tmp_path / "p2")]) == 0
    svgs = sorted((tmp_path / "p1").glob("*.svg"))
    assert len(svgs) == 10
    for f in svgs:
        assert f.read_bytes() == (tmp_path / "p2" / f.name).read_bytes()


def test_plot_missing_series(tmp_path):
    empty = tmp_path / "report.json"
    empty.write_text(json.dumps({"series": {}}))
    assert main(["plot", str(empty)]) == EXIT_USAGE
    assert main(["plot", str(empty), "--kind", "phi-profile"]) == EXIT_USAGE


def test_constants_and_dump(tmp_path, capsys):
    assert main(["constants", "--n", "3"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)
    assert data["n"] == 3 and data["C_f"] == pytest.approx(1.1780972451)
    out = tmp_path / "d"
    assert main(["scenario-dump", "--scenario", "perturbation", "--J", "2", "--samples", "64",
                 "--out", str(out)]) == EXIT_OK
    spec = json.loads((out / "scenario.json").read_text())
    assert spec["name"] == "perturbation" and spec["J"] == 2
    header = (out / "values.csv").read_text().splitlines()[0]
    assert header == "x0,x1,x2,x3,weight,f0,f1"


def test_all_suite_skips_inapplicable():
    status, report, _ = run_suite(SuiteRun("all", ScenarioSpec("bubble", 3, {"lambda": 2.0})))
    assert status == EXIT_OK
    assert any(s["suite"] == "singular-set" for s in report["skipped"])


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "confsphere", "constants", "--n", "4"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["n"] == 4
