"""Audit treatment policies for group TPR/TNR disparities under partial identification.

Response types are unobserved, so a policy's true positive rate among
responders is only identified under monotone response.  This package
computes the identified rates, sharp bounds when the anti-responder
probability is at most ``B``, the support function of the joint region,
and robust ROC / xROC / disparity bands over threshold policies.
"""

__version__ = "0.1.0"

from .data_model import (DataError, Dataset, Policy, UnitRecord, apply_policy, ingest,
                         threshold_assignment, write_csv)
from .nuisance import EmptyCellError, NuisanceModel, fit_predict, resplit_bootstrap
from .identification import (DegenerateGroup, GroupCells, GroupStats, RateInterval, bounds,
                             extreme_eta, group_stats, point_rates, report_fragment, rho,
                             threshold_sweep)
from .support_function import (ContrastDirection, InfeasibleBudget, SingularT, SupportResult,
                               disparity_extremes, fractional_knapsack, support)
from .curves import (CurveBand, average_bands, disparity_curve, robust_roc, robust_xroc,
                     xauc_bounds)
from .synth_oracle import (SyntheticSpec, generate, nonidentifiability_witness, sharpness_check,
                           true_rates)
from .audit import AuditConfig, run_audit

__all__ = [
    "AuditConfig", "ContrastDirection", "CurveBand", "DataError", "Dataset", "DegenerateGroup",
    "EmptyCellError", "GroupCells", "GroupStats", "InfeasibleBudget", "NuisanceModel", "Policy",
    "RateInterval", "SingularT", "SupportResult", "SyntheticSpec", "UnitRecord", "apply_policy",
    "average_bands", "bounds", "disparity_curve", "disparity_extremes", "extreme_eta",
    "fit_predict", "fractional_knapsack", "generate", "group_stats", "ingest",
    "nonidentifiability_witness", "point_rates", "report_fragment", "resplit_bootstrap", "rho",
    "robust_roc", "robust_xroc", "run_audit", "sharpness_check", "support", "threshold_assignment",
    "threshold_sweep", "true_rates", "write_csv", "xauc_bounds",
]
