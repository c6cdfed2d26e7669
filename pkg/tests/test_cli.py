import json
import subprocess
import sys

import numpy as np
import pytest

from responder_audit.audit import AuditConfig, ConfigError, OUTDIR_ENV, run_audit
from responder_audit.cli import main
from responder_audit.data_model import ingest, threshold_assignment, write_csv
from responder_audit.identification import bounds, group_cells, point_rates, stats_from_cells
from responder_audit.nuisance import fit_predict, resplit_bootstrap
from responder_audit.synth_oracle import SyntheticSpec

from conftest import scored

SPEC = SyntheticSpec([[0.0], [1.0], [2.0]], ("a", "b"), [0.5, 0.5],
                     [[0.3, 0.3, 0.4], [0.5, 0.3, 0.2]],
                     [[[0.6, 0.1, 0, 0.3], [0.3, 0.4, 0, 0.3], [0.1, 0.7, 0, 0.2]],
                      [[0.5, 0.2, 0, 0.3], [0.4, 0.3, 0.05, 0.25], [0.2, 0.6, 0, 0.2]]], 0.5)


@pytest.fixture(scope="module")
def sim_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    SPEC.save(d / "spec.json")
    rc = main(["simulate", "--spec", str(d / "spec.json"), "--n", "3000", "--seed", "1",
               "--out", str(d / "data.csv"), "--types-out", str(d / "types.csv")])
    assert rc == 0
    return d / "data.csv"


def _audit_args(path, out, *extra):
    return ["audit", str(path), "--splits", "4", "--seed", "3", "--out", str(out),
            "--max-thresholds", "60", *extra]


def test_simulate_writes_files(sim_csv):
    ds = ingest(sim_csv)
    assert len(ds) == 3000 and set(ds.groups) == {"a", "b"} and not ds.is_scored
    types = (sim_csv.parent / "types.csv").read_text().splitlines()
    assert types[0].split(",")[-1] == "response_type" and len(types) == 3001


def test_audit_intervals_nested_in_B(sim_csv, tmp_path):
    assert main(_audit_args(sim_csv, tmp_path, "--B", "0,0.05,0.1", "--no-plot")) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    for g in ("a", "b"):
        rows = sorted((r for r in rep["intervals"] if r["group"] == g), key=lambda r: r["B"])
        assert [r["B"] for r in rows] == [0.0, 0.05, 0.1]
        assert rows[0]["tpr"][0] == pytest.approx(rows[0]["tpr"][1], abs=1e-12)
        for small, big in zip(rows, rows[1:]):
            for m in ("tpr", "tnr"):
                assert big[m][0] <= small[m][0] + 1e-12 and small[m][1] <= big[m][1] + 1e-12
    for d in rep["disparities"]:
        assert d["interval"][0] <= d["interval"][1]


def test_unknown_group_exit_code(sim_csv, tmp_path, capsys):
    rc = main(_audit_args(sim_csv, tmp_path, "--groups", "a,zz"))
    assert rc == 2
    assert "zz" in capsys.readouterr().err
    assert not (tmp_path / "report.json").exists()


@pytest.mark.parametrize("bad", [["--B", "0,1.5"], ["--splits", "0"], ["--kinds", "PR"]])
def test_bad_config_exit_code(sim_csv, tmp_path, bad):
    assert main(_audit_args(sim_csv, tmp_path, *bad)) == 2


def test_missing_input_exit_code(tmp_path):
    assert main(["audit", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


def test_external_scores_two_unit(tmp_path):
    # population scores for the two-unit example, audited at B = 0
    ds = scored([0.2, 0.6], [0.3, 0.2], [0.5, 0.8])
    write_csv(ds, tmp_path / "pop.csv")
    rc = main(["audit", str(tmp_path / "pop.csv"), "--estimator", "external", "--theta", "0.4",
               "--B", "0", "--out", str(tmp_path / "out"), "--no-plot"])
    assert rc == 0
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    (row,) = rep["intervals"]
    assert row["point"]["tpr"] == pytest.approx(0.75, abs=1e-12)
    assert row["point"]["tnr"] == pytest.approx(2 / 3, abs=1e-12)
    assert row["tpr"] == pytest.approx([0.75, 0.75], abs=1e-12)


def test_curves_command_files(sim_csv, tmp_path, capsys):
    rc = main(["curves", str(sim_csv), "--splits", "2", "--B", "0,0.1", "--out", str(tmp_path),
               "--kinds", "ROC,xROC", "--max-thresholds", "40"])
    assert rc == 0
    printed = capsys.readouterr().out.split()
    names = {p.split("/")[-1] for p in printed}
    for label in ("ROC_a", "ROC_b", "xROC_a_b", "xROC_b_a"):
        for B in ("0", "0.1"):
            assert f"{label}_B{B}.csv" in names
            assert (tmp_path / "curves" / f"{label}_B{B}.csv").exists()
        assert (tmp_path / "plots" / f"{label}.svg").exists()
    assert (tmp_path / "curves.json").exists() and not (tmp_path / "report.json").exists()


def test_support_matches_audit_upper_bound(sim_csv, tmp_path, capsys):
    main(["audit", str(sim_csv), "--splits", "1", "--seed", "5", "--B", "0.1", "--out", str(tmp_path),
          "--kinds", "ROC", "--max-thresholds", "10", "--no-plot"])
    rep = json.loads((tmp_path / "report.json").read_text())
    upper = next(r["tpr"][1] for r in rep["intervals"] if r["group"] == "a")
    capsys.readouterr()
    assert main(["support", str(sim_csv), "--seed", "5", "--mu", "a:1:0", "--B", "0.1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["value"] == pytest.approx(upper, abs=1e-4)
    assert main(["support", str(sim_csv), "--mu", "a:x:0", "--B", "0.1"]) == 2
    assert main(["support", str(sim_csv), "--mu", "zz:1:0", "--B", "0.1"]) == 2


def test_repeated_runs_byte_identical(sim_csv, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(_audit_args(sim_csv, out, "--B", "0,0.1")) == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    assert any(str(f).endswith(".csv") for f in files)
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f


def test_env_var_sets_out_dir(sim_csv, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTDIR_ENV, str(tmp_path / "from_env"))
    assert main(["audit", str(sim_csv), "--splits", "1", "--kinds", "ROC", "--B", "0",
                 "--max-thresholds", "10", "--no-plot"]) == 0
    assert (tmp_path / "from_env" / "report.json").exists()


def test_report_reproducible_from_modules(sim_csv):
    cfg = AuditConfig(input=str(sim_csv), n_splits=3, seed=2, B_list=(0.0, 0.1), kinds=("ROC",),
                      max_thresholds=10)
    rep = run_audit(cfg, write=False)
    ds = ingest(sim_csv)
    per = {("a", 0.1): [], ("b", 0.0): []}
    for folds in resplit_bootstrap(ds, 3, seed=2):
        s = fit_predict(ds, "binning", folds=folds)
        Z = threshold_assignment(s.tau, np.median(s.tau))
        for g, B in per:
            tpr, tnr = bounds(stats_from_cells(group_cells(s, Z, g), B))
            per[(g, B)].append([tpr.lower, tpr.upper, tnr.lower, tnr.upper,
                                *point_rates(stats_from_cells(group_cells(s, Z, g), B))])
    for (g, B), rows in per.items():
        want = np.mean(rows, axis=0)
        got = next(r for r in rep["intervals"] if r["group"] == g and r["B"] == B)
        np.testing.assert_allclose([*got["tpr"], *got["tnr"], got["point"]["tpr"], got["point"]["tnr"]],
                                   want, atol=1e-12)
        assert got["n_splits_used"] == 3


def test_config_validation():
    with pytest.raises(ConfigError):
        AuditConfig(B_list=())
    with pytest.raises(ConfigError):
        AuditConfig(estimator="forest")
    cfg = AuditConfig(B_list=(0.1, 0.0, 0.1), thresholds=(0.2, 0.5))
    assert cfg.B_list == (0.0, 0.1)
    assert cfg.thresholds == (np.inf, 0.5, 0.2, -np.inf)


def test_demo_nonid_output(capsys):
    assert main(["demo-nonid"]) == 0
    text = capsys.readouterr().out
    gap = float(text.split("TPR gap:")[1].split()[0])
    disc = float(text.split("discrepancy:")[1].split()[0])
    assert gap >= 0.08 and disc < 1e-12
    # the two printed observable-law tables are identical
    tables = [t.split("TPR under")[0] for t in text.split("observable law of spec")[1:]]
    assert tables[0].split(":", 1)[1] == tables[1].split(":", 1)[1]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "responder_audit", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "audit" in r.stdout
