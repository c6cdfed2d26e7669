"""Batch audit: score, bound and sweep a dataset over resampled splits.

One audit run draws ``n_splits`` independent sample splits, cross-fits the
nuisance scores on each, and for every budget ``B`` computes

* point rates and sharp TPR/TNR intervals per group at the audited policy,
* sharp disparity intervals for every pair of audited groups,
* robust ROC / xROC and disparity bands over a common threshold grid.

Split-level numbers are averaged (endpoints are averaged, not recomputed on
averaged scores).  Splits where a group is degenerate are left out of that
group's averages and counted in the report.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .curves import KINDS, average_bands, split_bands, write_band_csv, xauc_bounds
from .data_model import DataError, Dataset, ingest, threshold_assignment
from .identification import group_cells, report_fragment, stats_from_cells
from .nuisance import DEFAULT_EPS, ESTIMATORS, fit_predict, resplit_bootstrap
from .plots import write_svg

logger = logging.getLogger(__name__)

DEFAULT_B_LIST = (0.0, 0.02, 0.05, 0.1, 0.2)
MAX_THRESHOLDS = 2001
OUTDIR_ENV = "RESPONDER_AUDIT_OUTDIR"


class ConfigError(ValueError):
    """Invalid audit configuration (bad budget, unknown group, ...)."""


@dataclass
class AuditConfig:
    input: str | None = None
    schema: dict = field(default_factory=dict)
    delimiter: str = ","
    exclude: tuple = ()
    estimator: str = "binning"
    n_folds: int = 2
    n_splits: int = 50
    seed: int = 0
    B_list: tuple = DEFAULT_B_LIST
    groups: tuple | None = None
    # None audits the policy 1[tau >= median tau_hat] of each split
    theta: float | None = None
    out_dir: str | None = None
    plot: bool = True
    include_group: bool = True
    eps: float = DEFAULT_EPS
    kinds: tuple = KINDS
    # explicit band sweep; None uses the observed tau_hat values
    thresholds: tuple | None = None
    max_thresholds: int = MAX_THRESHOLDS

    def __post_init__(self):
        B = [float(b) for b in self.B_list]
        if not B:
            raise ConfigError("B_list must be nonempty")
        for b in B:
            if not (0.0 <= b <= 1.0) or math.isnan(b):
                raise ConfigError(f"budget B={b} outside [0, 1]")
        self.B_list = tuple(sorted(set(B)))
        if self.estimator not in ESTIMATORS + ("external",):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.n_splits < 1:
            raise ConfigError("n_splits must be >= 1")
        if self.n_folds < 2:
            raise ConfigError("n_folds must be >= 2")
        if self.theta is not None and math.isnan(float(self.theta)):
            raise ConfigError("theta must be a number")
        for k in self.kinds:
            if k not in KINDS:
                raise ConfigError(f"unknown curve kind {k!r}; expected one of {KINDS}")
        if self.max_thresholds < 3:
            raise ConfigError("max_thresholds must be >= 3")
        self.exclude = tuple(self.exclude)
        self.kinds = tuple(self.kinds)
        if self.groups is not None:
            self.groups = tuple(str(g) for g in self.groups)
        if self.thresholds is not None:
            th = np.asarray(self.thresholds, dtype=float)
            if th.size == 0 or np.isnan(th).any():
                raise ConfigError("thresholds must be a nonempty list of numbers")
            self.thresholds = tuple(np.unique(np.concatenate([th, [np.inf, -np.inf]]))[::-1].tolist())

    def resolved_out_dir(self):
        return Path(self.out_dir or os.environ.get(OUTDIR_ENV) or "audit_out")

    def to_dict(self):
        d = asdict(self)
        d["out_dir"] = None  # output location is not part of the result
        for k in ("B_list", "exclude", "kinds", "groups", "thresholds"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d


def load_dataset(cfg: AuditConfig) -> Dataset:
    if cfg.input is None:
        raise ConfigError("no input file given")
    return ingest(cfg.input, cfg.schema or None, cfg.delimiter, cfg.exclude)


def resolve_groups(ds: Dataset, groups) -> list:
    if groups is None:
        return list(ds.groups)
    for g in groups:
        if g not in ds.groups:
            raise ConfigError(f"unknown group {g!r}; available groups: {', '.join(ds.groups)}")
    if len(set(groups)) != len(groups):
        raise ConfigError("groups listed more than once")
    return list(groups)


def score_splits(ds: Dataset, cfg: AuditConfig) -> list:
    """Scored copies of ``ds``, one per resampled split (one copy for external scores)."""
    if cfg.estimator == "external":
        if not ds.is_scored:
            raise DataError("estimator 'external' needs mu0 and mu1 columns in the input")
        return [ds]
    folds = resplit_bootstrap(ds, cfg.n_splits, cfg.seed, cfg.n_folds)
    return [fit_predict(ds, cfg.estimator, folds=f, eps=cfg.eps, include_group=cfg.include_group)
            for f in folds]


def split_theta(ds: Dataset, theta):
    return float(np.median(ds.tau)) if theta is None else float(theta)


def common_thresholds(scored: list, max_n: int = MAX_THRESHOLDS) -> np.ndarray:
    """Union of distinct ``tau_hat`` values over splits, descending, with +/-inf.

    When the union is larger than ``max_n - 2`` it is thinned to evenly spaced
    order statistics (always observed values, extremes kept).
    """
    vals = np.unique(np.concatenate([s.tau for s in scored]))
    keep = max_n - 2
    if len(vals) > keep:
        idx = np.unique(np.round(np.linspace(0, len(vals) - 1, keep)).astype(int))
        vals = vals[idx]
    return np.concatenate([[np.inf], vals[::-1], [-np.inf]])


def _mean_or_none(rows):
    if not rows:
        return None
    return np.mean(np.asarray(rows, dtype=float), axis=0).tolist()


def _interval_summary(scored, thetas, groups, B_list):
    per_split, intervals = [], []
    frags = {}
    for i, (s, th) in enumerate(zip(scored, thetas)):
        Z = threshold_assignment(s.tau, th)
        row = {"split": i, "theta": th, "fragments": []}
        for g in groups:
            cells = group_cells(s, Z, g)
            for B in B_list:
                fr = report_fragment(stats_from_cells(cells, B), B)
                frags[(g, B, i)] = fr
                row["fragments"].append(fr)
        per_split.append(row)
    for g in groups:
        for B in B_list:
            ok = [frags[(g, B, i)] for i in range(len(scored)) if not frags[(g, B, i)]["degenerate"]]
            point = _mean_or_none([[f["point"]["tpr"], f["point"]["tnr"]] for f in ok])
            intervals.append({
                "group": g, "B": B,
                "point": None if point is None else {"tpr": point[0], "tnr": point[1]},
                "tpr": _mean_or_none([f["tpr"] for f in ok]),
                "tnr": _mean_or_none([f["tnr"] for f in ok]),
                "n_splits_used": len(ok),
                "n_degenerate": len(scored) - len(ok),
            })
    disparities = []
    for ia, a in enumerate(groups):
        for b in groups[ia + 1:]:
            for B in B_list:
                for metric in ("tpr", "tnr"):
                    rows = []
                    for i in range(len(scored)):
                        fa, fb = frags[(a, B, i)], frags[(b, B, i)]
                        if fa["degenerate"] or fb["degenerate"]:
                            continue
                        rows.append([fa[metric][0] - fb[metric][1], fa[metric][1] - fb[metric][0]])
                    disparities.append({"groups": [a, b], "metric": metric.upper(), "B": B,
                                        "interval": _mean_or_none(rows),
                                        "n_splits_used": len(rows)})
    return intervals, disparities, per_split


def averaged_bands(scored: list, groups, B_list, kinds=KINDS, thresholds=None) -> dict:
    """``{(label, B): CurveBand}`` averaged over splits on a common grid."""
    grid = common_thresholds(scored) if thresholds is None else np.asarray(thresholds, dtype=float)
    out = {}
    for B in B_list:
        per_split = [split_bands(s, B, grid, groups, kinds) for s in scored]
        for label in per_split[0]:
            out[(label, B)] = average_bands([d[label] for d in per_split], grid)
    return out


def _band_name(label, B):
    return f"{label}_B{B:g}.csv"


def band_entries(bands: dict) -> list:
    entries = []
    for (label, B), band in bands.items():
        e = {"label": label, "kind": band.kind, "groups": list(band.groups), "B": B,
             "csv": f"curves/{_band_name(label, B)}", "n_thresholds": int(len(band.thresholds)),
             "gap_thresholds": band.thresholds[band.gap].tolist()}
        if band.kind in ("ROC", "xROC"):
            try:
                e["auc"] = list(xauc_bounds(band))
            except ValueError as exc:
                logger.warning("no area for %s at B=%g: %s", label, B, exc)
                e["auc"] = None
        entries.append(e)
    return entries


def write_bands(bands: dict, out_dir: Path, plot: bool = True) -> list:
    cdir = out_dir / "curves"
    cdir.mkdir(parents=True, exist_ok=True)
    paths = []
    by_label = {}
    for (label, B), band in bands.items():
        p = cdir / _band_name(label, B)
        write_band_csv(band, p)
        paths.append(p)
        by_label.setdefault(label, []).append(band)
    if plot:
        pdir = out_dir / "plots"
        pdir.mkdir(parents=True, exist_ok=True)
        for label, bl in by_label.items():
            p = pdir / f"{label}.svg"
            write_svg(bl, p, title=label.replace("_", " "))
            paths.append(p)
    return paths


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, fixed indent, non-finite floats as null."""
    return json.dumps(_json_safe(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def run_audit(cfg: AuditConfig, ds: Dataset | None = None, write: bool = True,
              curves: bool = True, intervals: bool = True) -> dict:
    """Run the audit and return the report dict; write files when ``write``."""
    if ds is None:
        ds = load_dataset(cfg)
    groups = resolve_groups(ds, cfg.groups)
    scored = score_splits(ds, cfg)
    thetas = [split_theta(s, cfg.theta) for s in scored]
    report = {
        "version": __version__,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "n_units": len(ds),
        "groups": groups,
        "group_sizes": {g: int(ds.group_mask(g).sum()) for g in groups},
        "n_splits": len(scored),
        "policy": {"rule": "Z = 1[tau_hat >= theta]",
                   "theta": "median of tau_hat per split" if cfg.theta is None else float(cfg.theta),
                   "theta_mean": float(np.mean(thetas))},
    }
    if intervals:
        report["intervals"], report["disparities"], report["splits"] = _interval_summary(
            scored, thetas, groups, cfg.B_list)
    out_dir = cfg.resolved_out_dir()
    if curves:
        grid = (common_thresholds(scored, cfg.max_thresholds) if cfg.thresholds is None
                else np.array(cfg.thresholds))
        bands = averaged_bands(scored, groups, cfg.B_list, cfg.kinds, grid)
        report["curves"] = band_entries(bands)
        if write:
            write_bands(bands, out_dir, cfg.plot)
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        name = "report.json" if intervals else "curves.json"
        (out_dir / name).write_text(dumps(report), encoding="utf-8")
    return report


__all__ = ["AuditConfig", "ConfigError", "DEFAULT_B_LIST", "OUTDIR_ENV",
           "averaged_bands", "common_thresholds", "dumps", "load_dataset", "resolve_groups",
           "run_audit", "score_splits", "split_theta"]
