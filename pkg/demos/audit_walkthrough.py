"""Simulate a trial, audit it, and compare with the population truth.

Writes the audit output under ./walkthrough_out (or the directory given as
the first argument).
"""

import sys
from pathlib import Path

import numpy as np

from responder_audit.audit import AuditConfig, run_audit
from responder_audit.synth_oracle import SyntheticSpec, generate, true_rates

out = Path(sys.argv[1] if len(sys.argv) > 1 else "walkthrough_out")

p01 = [0.05, 0.25, 0.45, 0.65]


def rows(p11, p10):
    return [[1 - a - b - c, a, c, b] for a, b, c in zip(p01, p11, p10)]


# group b carries a few anti-responders, so its B=0 numbers are biased
spec = SyntheticSpec([[0.0], [1.0], [2.0], [3.0]], ("a", "b"), [0.5, 0.5],
                     [[0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4]],
                     [rows([0.3, 0.2, 0.2, 0.1], [0, 0, 0, 0]),
                      rows([0.1, 0.3, 0.2, 0.2], [0.03, 0.03, 0.03, 0.03])], 0.5)
ds, _ = generate(spec, 50000, seed=1)
cfg = AuditConfig(n_splits=20, seed=1, B_list=(0.0, 0.05, 0.1), theta=0.35,
                  thresholds=(0.75, 0.55, 0.35, 0.15, -0.05), out_dir=str(out))
rep = run_audit(cfg, ds=ds)

truth = true_rates(spec, spec.threshold_policy(0.35))
print(f"policy: Z = 1[tau_hat >= 0.35], {rep['n_splits']} splits")
for iv in rep["intervals"]:
    t = truth[iv["group"]]
    print(f"group {iv['group']} B={iv['B']:<4}  TPR [{iv['tpr'][0]:.3f}, {iv['tpr'][1]:.3f}]"
          f" (truth {t[0]:.3f})  TNR [{iv['tnr'][0]:.3f}, {iv['tnr'][1]:.3f}] (truth {t[1]:.3f})")
for d in rep["disparities"]:
    a, b = d["groups"]
    gap = truth[a][0 if d["metric"] == "TPR" else 1] - truth[b][0 if d["metric"] == "TPR" else 1]
    print(f"{d['metric']} {a}-{b} B={d['B']:<4} [{d['interval'][0]:+.3f}, {d['interval'][1]:+.3f}]"
          f" (truth {gap:+.3f})")
print(f"bands and plots written under {out}/")
print("xAUC bounds:", {e["label"] + f"@{e['B']:g}": np.round(e["auc"], 3).tolist()
                       for e in rep["curves"] if e.get("auc")})
