"""Two response-type distributions that no experiment can tell apart.

Both specs below produce the same joint law of (X, T, Y).  They disagree on
how many responders the policy Z = 1[X = 1] reaches, so TPR is not a
function of the data once anti-responders are allowed.  A budget B bounding
the anti-responder share turns the question into an interval.
"""

from responder_audit.identification import bounds, stats_from_cells
from responder_audit.synth_oracle import nonidentifiability_witness

w = nonidentifiability_witness()
spec_a, spec_b, policy = w["spec_a"], w["spec_b"], w["policy"]

for name, spec in (("A", spec_a), ("B", spec_b)):
    print(f"spec {name}  mu0 = {spec.mu0[0].round(4).tolist()}  mu1 = {spec.mu1[0].round(4).tolist()}"
          f"  max p10 = {spec.p[0, :, 2].max():.2f}")
print(f"largest difference in the observable law: {w['law_gap']:.1e}")
print(f"TPR under A = {w['tpr_a']:.4f}, under B = {w['tpr_b']:.4f}")

cells = spec_a.population_cells("a", policy[0])
for B in (0.0, 0.05, 0.1, 0.2):
    tpr, _ = bounds(stats_from_cells(cells, B))
    inside = [tpr.contains(w[k], 1e-12) for k in ("tpr_a", "tpr_b")]
    print(f"B = {B:<4}  TPR in [{tpr.lower:.4f}, {tpr.upper:.4f}]  covers A, B: {inside}")
