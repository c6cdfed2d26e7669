"""Acceptance run: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines.
"""

import time

import numpy as np
import pytest

from responder_audit.audit import AuditConfig, run_audit
from responder_audit.cli import main
from responder_audit.curves import CurveBand, read_band_csv, robust_roc, robust_xroc, xauc_bounds
from responder_audit.identification import (DegenerateGroup, bounds, extreme_eta, point_rates, rho,
                                            stats_from_cells)
from responder_audit.support_function import (ContrastDirection, SingularT, fractional_knapsack,
                                              group_support, support_cells)
from responder_audit.synth_oracle import (SyntheticSpec, generate, nonidentifiability_witness,
                                          random_spec, sharpness_check, true_rates)

from conftest import random_cells, scored, vertex_lp


def verdict(k, ok, detail):
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
    assert ok, detail


def test_criterion_1_point_identification_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst, n_checked = 0.0, 0
    for _ in range(120):
        spec = random_spec(rng, n_x=int(rng.integers(1, 7)))
        z = spec.threshold_policy(rng.uniform(-0.1, 1.0))
        if rng.random() < 0.5:
            z = rng.random(z.shape) < 0.5  # arbitrary (non-threshold) policy
        truth = true_rates(spec, z)
        for k, a in enumerate(spec.groups):
            try:
                p = point_rates(stats_from_cells(spec.population_cells(a, z[k]), 0.0))
            except DegenerateGroup:
                continue
            worst = max(worst, abs(p[0] - truth[a][0]), abs(p[1] - truth[a][1]))
            n_checked += 1
    dt = time.perf_counter() - t0
    verdict(1, worst <= 1e-12 and dt < 5 and n_checked >= 100,
            f"{n_checked} group policies, max |point - truth| = {worst:.2e}, {dt:.2f}s")


def test_criterion_2_sharpness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst_gap, worst_bang, n_specs, failed = 0.0, 0.0, 0, 0
    for _ in range(20):
        spec = random_spec(rng, n_x=int(rng.integers(2, 5)), max_p10=0.05, px_denominator=20)
        policy = spec.threshold_policy(float(np.median(spec.tau)))
        for B in (0.05, 0.1, 0.3):
            rep = sharpness_check(spec, policy, B)
            for k, a in enumerate(spec.groups):
                g = rep["groups"][a]
                worst_gap = max(worst_gap, *g["gap"].values())
                cells = spec.population_cells(a, policy[k])
                tpr, tnr = bounds(stats_from_cells(cells, B))
                up = rho(cells, extreme_eta(cells, B, "upper"))
                lo = rho(cells, extreme_eta(cells, B, "lower"))
                worst_bang = max(worst_bang, abs(up[0] - tpr.upper), abs(up[1] - tnr.upper),
                                 abs(lo[0] - tpr.lower), abs(lo[1] - tnr.lower))
            failed += not rep["passed"]
        n_specs += 1
    dt = time.perf_counter() - t0
    verdict(2, worst_gap <= 2e-3 and failed == 0 and worst_bang <= 1e-12 and dt < 60,
            f"{n_specs} specs x 3 budgets, max grid gap {worst_gap:.2e}, "
            f"bang-bang error {worst_bang:.1e}, {dt:.1f}s")


def test_criterion_3_containment():
    rng = np.random.default_rng(303)
    violations, n = 0, 0
    for _ in range(150):
        B = float(rng.choice([0.01, 0.05, 0.1, 0.2, 0.4]))
        spec = random_spec(rng, n_x=int(rng.integers(1, 7)), max_p10=B)
        assert np.all(spec.p[..., 2] <= B)
        z = spec.threshold_policy(rng.uniform(-0.1, 1.0))
        truth = true_rates(spec, z)
        for k, a in enumerate(spec.groups):
            try:
                tpr, tnr = bounds(stats_from_cells(spec.population_cells(a, z[k]), B))
            except DegenerateGroup:
                continue
            n += 1
            violations += not (tpr.contains(truth[a][0], 1e-12) and tnr.contains(truth[a][1], 1e-12))
    verdict(3, violations == 0 and n >= 100, f"{violations} violations in {n} group intervals")


def test_criterion_4_nonidentifiability_witness():
    w = nonidentifiability_witness()
    gap = abs(w["tpr_a"] - w["tpr_b"])
    verdict(4, w["law_gap"] < 1e-12 and gap >= 0.05,
            f"law discrepancy {w['law_gap']:.1e}, TPR gap {gap:.4f}")


def test_criterion_5_support_function():
    rng = np.random.default_rng(505)
    grid_n = 2001
    unit_err, homog_err, sep_err, lp_err = 0.0, 0.0, 0.0, 0.0
    for trial in range(40):
        cells = random_cells(rng, int(rng.integers(2, 8)))
        B = float(rng.uniform(0.0, 0.5))
        try:
            tpr, tnr = bounds(stats_from_cells(cells, B))
            for (a, b), target in (((1, 0), tpr.upper), ((-1, 0), -tpr.lower),
                                   ((0, 1), tnr.upper), ((0, -1), -tnr.lower)):
                unit_err = max(unit_err, abs(group_support(cells, a, b, B, grid_n).value - target))
            a, b, c = rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.1, 5)
            v = group_support(cells, a, b, B, grid_n).value
            homog_err = max(homog_err, abs(group_support(cells, c * a, c * b, B, grid_n).value - c * v))
        except (DegenerateGroup, SingularT):
            continue
        two = {"a": random_cells(rng, 4, "a"), "b": random_cells(rng, 3, "b")}
        mu = ContrastDirection({"a": tuple(rng.uniform(-1, 1, 2)), "b": tuple(rng.uniform(-1, 1, 2))})
        try:
            whole = support_cells(two, mu, B, grid_n).value
            parts = sum(support_cells(two, mu.restrict(g), B, grid_n).value for g in two)
        except (DegenerateGroup, SingularT):
            continue
        sep_err = max(sep_err, abs(whole - parts))
    for _ in range(300):
        n = int(rng.integers(1, 7))
        values, weights = rng.normal(size=n), rng.uniform(0.05, 1.0, n)
        caps = rng.uniform(0.0, 1.0, n)
        budget = rng.uniform(0, 1) * float(weights @ caps)
        _, obj = fractional_knapsack(values, weights, caps, budget)
        lp_err = max(lp_err, abs(obj - vertex_lp(values, weights, caps, budget)))
    ok = unit_err <= 2 / grid_n and homog_err <= 1e-9 and sep_err <= 1e-9 and lp_err <= 1e-12
    verdict(5, ok, f"unit-direction error {unit_err:.1e} (tol {2 / grid_n:.1e}), homogeneity "
                   f"{homog_err:.1e}, separability {sep_err:.1e}, greedy vs vertices {lp_err:.1e}")


def test_criterion_6_structural_invariants():
    rng = np.random.default_rng(606)
    nest, collapse, sat = 0.0, 0.0, 0.0
    for _ in range(200):
        cells = random_cells(rng, int(rng.integers(1, 9)))
        b1, b2 = np.sort(rng.uniform(0, 1, 2))
        try:
            small, big = bounds(stats_from_cells(cells, b1)), bounds(stats_from_cells(cells, b2))
            zero = bounds(stats_from_cells(cells, 0.0))
            p = point_rates(stats_from_cells(cells, 0.0))
            b_sat = float(np.max(cells.eta_cap))
            at_sat = bounds(stats_from_cells(cells, b_sat + rng.uniform(0, 1) * (1 - b_sat)))
            at_one = bounds(stats_from_cells(cells, 1.0))
        except DegenerateGroup:
            continue
        for s, b in zip(small, big):
            nest = max(nest, b.lower - s.lower, s.upper - b.upper)
        for iv, pt in zip(zero, p):
            collapse = max(collapse, abs(iv.lower - pt), abs(iv.upper - pt))
        for x, y in zip(at_sat, at_one):
            sat = max(sat, abs(x.lower - y.lower), abs(x.upper - y.upper))

    end_err, self_err, diag_err = 0.0, 0.0, 0.0
    for seed in range(20):
        r = np.random.default_rng(seed)
        n = 30
        tau = r.uniform(0, 0.6, n)
        mu0 = r.uniform(0, 0.4, n)
        grp = np.where(np.arange(n) < n // 2, "a", "b")
        ds = scored(tau, mu0, group=grp)
        B = float(r.uniform(0, 0.3))
        for band in (robust_roc(ds, "a", B), robust_xroc(ds, "a", "b", B)):
            for pts in (band.lower, band.upper):
                end_err = max(end_err, np.abs(pts[0]).max(), np.abs(pts[-1] - 1).max())
        roc, xself = robust_roc(ds, "a", B), robust_xroc(ds, "a", "a", B)
        self_err = max(self_err, np.abs(roc.lower - xself.lower).max(), np.abs(roc.upper - xself.upper).max())
    # diagonal bands: an explicit one, and the single tied jump of a constant score
    t = np.linspace(0, 1, 11)
    diag = CurveBand("xROC", ("a", "b"), 0.0, t[::-1], np.column_stack([t, t]),
                     np.column_stack([t, t]), np.zeros(11, bool))
    flat = scored(np.full(10, 0.3), np.full(10, 0.2), group=["a"] * 5 + ["b"] * 5)
    for band in (diag, robust_xroc(flat, "a", "b", 0.0), robust_xroc(flat, "a", "b", 0.1)):
        lo, hi = xauc_bounds(band)
        diag_err = max(diag_err, abs(lo - 0.5), abs(hi - 0.5))
    worst = max(nest, collapse, sat, end_err, self_err, diag_err)
    verdict(6, worst <= 1e-9,
            f"nesting {nest:.1e}, B=0 collapse {collapse:.1e}, saturation {sat:.1e}, "
            f"endpoints {end_err:.1e}, xROC(a,a)-ROC(a) {self_err:.1e}, diagonal xAUC {diag_err:.1e}")


def _recovery_spec():
    p01 = [0.05, 0.25, 0.45, 0.65]

    def rows(p11):
        return [[1 - a - b, a, 0.0, b] for a, b in zip(p01, p11)]
    return SyntheticSpec([[0.0], [1.0], [2.0], [3.0]], ("a", "b"), [0.5, 0.5],
                         [[0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4]],
                         [rows([0.3, 0.2, 0.2, 0.1]), rows([0.1, 0.3, 0.2, 0.2])], 0.5)


def test_criterion_7_end_to_end_recovery(tmp_path):
    t0 = time.perf_counter()
    spec = _recovery_spec()
    ds, _ = generate(spec, 50000, seed=7)
    # midpoints between the cell-level effects; estimated effects fall on the same side
    th = [0.75, 0.55, 0.35, 0.15, -0.05]
    cfg = AuditConfig(n_splits=50, n_folds=2, seed=7, estimator="binning", B_list=(0.0,), theta=0.35,
                      thresholds=th, kinds=("TPR_disparity", "TNR_disparity"), plot=False,
                      out_dir=str(tmp_path))
    rep = run_audit(cfg, ds=ds)
    truth = true_rates(spec, spec.threshold_policy(0.35))
    point_err = max(abs(iv["point"][m] - truth[iv["group"]][k])
                    for iv in rep["intervals"] for k, m in enumerate(("tpr", "tnr")))
    curve_err, n_pts = 0.0, 0
    for k, metric in enumerate(("TPR", "TNR")):
        entry = next(e for e in rep["curves"] if e["kind"] == f"{metric}_disparity")
        ga, gb = entry["groups"]
        band = read_band_csv(tmp_path / entry["csv"], entry["kind"], (ga, gb), 0.0)
        for i, t in enumerate(band.thresholds):
            if band.gap[i]:
                continue
            tr = true_rates(spec, spec.threshold_policy(t))
            d = tr[ga][k] - tr[gb][k]
            curve_err = max(curve_err, abs(band.lower[i, 1] - d), abs(band.upper[i, 1] - d))
            n_pts += 1
    dt = time.perf_counter() - t0
    verdict(7, point_err <= 0.02 and curve_err <= 0.03 and n_pts > 0 and dt < 120,
            f"point error {point_err:.4f}, disparity error {curve_err:.4f} over {n_pts} points, {dt:.1f}s")


def test_criterion_8_determinism(tmp_path):
    spec = _recovery_spec()
    spec.save(tmp_path / "spec.json")
    assert main(["simulate", "--spec", str(tmp_path / "spec.json"), "--n", "4000", "--seed", "3",
                 "--out", str(tmp_path / "data.csv")]) == 0
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["audit", str(tmp_path / "data.csv"), "--splits", "5", "--seed", "11",
                     "--out", str(out)]) == 0
        runs.append(out)
    files = sorted(p.relative_to(runs[0]) for p in runs[0].rglob("*") if p.is_file())
    mismatched = [str(f) for f in files if (runs[0] / f).read_bytes() != (runs[1] / f).read_bytes()]
    n_csv = sum(str(f).endswith(".csv") for f in files)
    verdict(8, not mismatched and n_csv > 0 and (runs[0] / "report.json").exists(),
            f"{len(files)} files ({n_csv} CSV) compared, {len(mismatched)} differ")
