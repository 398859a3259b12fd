import json
import subprocess
import sys

import numpy as np
import pytest

from sle_lab.cli import main, read_config, report_bundle, resolve_config, UsageError


def test_missing_kappa(capsys):
    assert main(["check-martingale", "--r", "1"]) == 2
    assert "missing required key: kappa" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("kappa = 4\nbogus = 1\n")
    assert main(["simulate-trace", "--config", str(cfg)]) == 2
    assert "unknown key: bogus" in capsys.readouterr().err


def test_invalid_value(capsys):
    assert main(["simulate-trace", "--kappa", "four"]) == 2
    assert "kappa" in capsys.readouterr().err


def test_domain_error_is_usage(tmp_path, capsys):
    assert main(["simulate-trace", "--kappa", "4", "--T", "1", "--dt", "0.3", "--output-dir", str(tmp_path)]) == 2


def test_read_config_comments_and_aliases(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# header\nkappa=2.6667  # trailing\npaths = 12\n\nphi0.C = 5\n")
    vals = read_config(cfg)
    assert vals == {"kappa": "2.6667", "n_paths": "12", "phi0.C": "5"}
    out = resolve_config("natural-param", vals, {"n_paths": 30})
    assert out["n_paths"] == 30 and out["phi0.C"] == 5.0 and out["kappa"] == pytest.approx(2.6667)
    with pytest.raises(UsageError):
        read_config(tmp_path / "missing.cfg")


def test_simulate_trace_csv(tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["simulate-trace", "--kappa", "4", "--T", "0.1", "--dt", "0.0001", "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert out.read_text().startswith("t,re,im,vbound")
    assert data.shape == (1001, 4)


def test_check_martingale_report(tmp_path):
    assert main(["check-martingale", "--kappa", "2.6667", "--r", "1", "--t", "0.5", "--paths", "500",
                 "--dt", "0.01", "--halvings", "1", "--output-dir", str(tmp_path)]) in (0, 1)
    rep = json.loads((tmp_path / "check-martingale.json").read_text())
    assert rep["config"]["kappa"] == pytest.approx(2.6667)
    assert "version" in rep and "timestamp" in rep
    assert "zscore" in rep["result"]["rows"][0]


def test_other_subcommands_run(tmp_path):
    d = str(tmp_path)
    assert main(["diffusion-stats", "--q", "1", "--statistic", "exp-moment", "--paths", "500", "--output-dir", d]) in (0, 1)
    assert main(["derivative-moments", "--kappa", "4", "--t", "1,2,4", "--paths", "200", "--output-dir", d]) in (0, 1)
    assert main(["green-function", "--kappa", "4", "--paths", "500", "--output-dir", d]) in (0, 1)
    assert main(["natural-param", "--kappa", "2.6667", "--n-list", "16,32", "--paths", "4", "--output-dir", d]) in (0, 1)
    assert main(["estimate-dimension", "--kappa", "2.6667", "--paths", "2", "--n-points", "2048",
                 "--output-dir", d]) in (0, 1)
    for name in ("diffusion-stats", "derivative-moments", "green-function", "natural-param", "estimate-dimension"):
        assert json.loads((tmp_path / f"{name}.json").read_text())["command"] == name
    assert (tmp_path / "derivative-moments.csv").exists()
    index, status = report_bundle(tmp_path)
    assert len(index["entries"]) == 5 and index["summary"]["unreadable"] == 0


def test_report_bundle_empty_and_mixed(tmp_path):
    index, status = report_bundle(tmp_path)
    assert status == 0 and index["entries"] == []
    (tmp_path / "a.json").write_text(json.dumps({"command": "x", "passed": True, "result": {}}))
    (tmp_path / "b.json").write_text(json.dumps({"command": "y", "passed": False, "result": {}}))
    index, status = report_bundle(tmp_path)
    assert index["summary"]["pass"] == 1 and index["summary"]["fail"] == 1 and status == 1
    assert main(["report-bundle", "--dir", str(tmp_path)]) == 1
    assert (tmp_path / "index.json").exists()


def test_report_bundle_unreadable(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps({"command": "x", "passed": True, "result": {}}))
    (tmp_path / "broken.json").write_text("{not json")
    index, status = report_bundle(tmp_path)
    assert status == 1 and index["unreadable"][0]["file"] == "broken.json"


def test_csv_identical_across_jobs(tmp_path):
    outs = []
    for jobs in ("1", "2"):
        d = tmp_path / jobs
        assert main(["derivative-moments", "--kappa", "4", "--t", "1,2", "--paths", "300",
                     "--jobs", jobs, "--output-dir", str(d)]) in (0, 1)
        outs.append((d / "derivative-moments.csv").read_bytes())
    assert outs[0] == outs[1]


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "sle_lab.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "simulate-trace" in res.stdout
