"""Threshold sweeps: disparity bands, robust ROC / xROC bands and xAUC bounds.

Every band is evaluated on a descending threshold grid for the policies
``Z = 1[tau_hat >= theta]``.  The default grid is ``+inf``, the distinct
observed ``tau_hat`` values in descending order, then ``-inf``, so each
achievable empirical policy appears once.  Thresholds where a group is
degenerate are kept as gaps and never interpolated.

The lower and upper curves are envelopes of the identification region; a
single policy need not realize either of them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data_model import Dataset
from .identification import DELTA, GroupCells, group_cells, threshold_sweep

KINDS = ("ROC", "xROC", "TPR_disparity", "TNR_disparity")


@dataclass(frozen=True, eq=False)
class CurveBand:
    """Lower/upper parametric curves over a threshold sweep.

    ``lower`` and ``upper`` are (n, 2) arrays of (x, y) per threshold.  For
    ROC-type bands x is a false positive rate; for disparity bands x is the
    threshold itself and y the disparity endpoint.
    """

    kind: str
    groups: tuple
    B: float
    thresholds: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    gap: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown band kind {self.kind!r}")
        for name in ("thresholds", "lower", "upper", "gap"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def points_lower(self):
        return [tuple(p) for p in self.lower[~self.gap].tolist()]

    @property
    def points_upper(self):
        return [tuple(p) for p in self.upper[~self.gap].tolist()]

    @property
    def label(self):
        return "_".join([self.kind, *self.groups])

    def same_curve(self, other, atol=0.0):
        return (self.kind == other.kind and self.groups == other.groups
                and np.array_equal(self.thresholds, other.thresholds)
                and np.array_equal(self.gap, other.gap)
                and np.allclose(self.lower[~self.gap], other.lower[~other.gap], atol=atol, rtol=0)
                and np.allclose(self.upper[~self.gap], other.upper[~other.gap], atol=atol, rtol=0))


def default_thresholds(tau) -> np.ndarray:
    vals = np.unique(np.asarray(tau, dtype=float))[::-1]
    return np.concatenate([[np.inf], vals, [-np.inf]])


def _thresholds(ds, thresholds):
    if thresholds is None:
        return default_thresholds(ds.tau)
    th = np.asarray(thresholds, dtype=float)
    if th.size == 0:
        raise ValueError("thresholds must be nonempty")
    return th


def _cells(ds, a):
    return group_cells(ds, np.zeros(len(ds), dtype=np.int8), a)


def _disparity_from_sweeps(sa, sb, groups, metric, B, th):
    metric = metric.upper()
    if metric not in ("TPR", "TNR"):
        raise ValueError("metric must be TPR or TNR")
    key = metric.lower()
    lo = sa[key + "_lo"] - sb[key + "_hi"]
    hi = sa[key + "_hi"] - sb[key + "_lo"]
    gap = sa["degenerate"] | sb["degenerate"]
    return CurveBand(f"{metric}_disparity", groups, float(B), th,
                     np.column_stack([th, lo]), np.column_stack([th, hi]), gap)


def _xroc_from_sweeps(sa, sb, groups, kind, B, th):
    lower = np.column_stack([1.0 - sb["tnr_lo"], sa["tpr_lo"]])
    upper = np.column_stack([1.0 - sb["tnr_hi"], sa["tpr_hi"]])
    gap = sa["degenerate"] | sb["degenerate"]
    return CurveBand(kind, groups, float(B), th, lower, upper, gap)


def disparity_band_cells(ca: GroupCells, cb: GroupCells, metric: str, B: float,
                         thresholds, delta: float = DELTA) -> CurveBand:
    th = np.asarray(thresholds, dtype=float)
    return _disparity_from_sweeps(threshold_sweep(ca, B, th, delta), threshold_sweep(cb, B, th, delta),
                                  (ca.group, cb.group), metric, B, th)


def disparity_curve(ds: Dataset, a, b, metric: str, B: float, thresholds=None) -> CurveBand:
    """Band of sharp ``metric_a - metric_b`` intervals across thresholds."""
    if a == b:
        raise ValueError("disparity needs two distinct groups")
    return disparity_band_cells(_cells(ds, a), _cells(ds, b), metric, B, _thresholds(ds, thresholds))


def xroc_band_cells(ca: GroupCells, cb: GroupCells, B: float, thresholds,
                    delta: float = DELTA, kind: str = "xROC") -> CurveBand:
    th = np.asarray(thresholds, dtype=float)
    sa = threshold_sweep(ca, B, th, delta)
    sb = sa if cb is ca else threshold_sweep(cb, B, th, delta)
    groups = (ca.group,) if kind == "ROC" else (ca.group, cb.group)
    return _xroc_from_sweeps(sa, sb, groups, kind, B, th)


def robust_roc(ds: Dataset, a, B: float, thresholds=None) -> CurveBand:
    """Robust ROC band of group ``a``: lower ``(1 - TNR_lo, TPR_lo)``, upper ``(1 - TNR_hi, TPR_hi)``."""
    ca = _cells(ds, a)
    return xroc_band_cells(ca, ca, B, _thresholds(ds, thresholds), kind="ROC")


def robust_xroc(ds: Dataset, a, b, B: float, thresholds=None) -> CurveBand:
    """Robust xROC band: TPR of group ``a`` against the false positive rate of group ``b``."""
    return xroc_band_cells(_cells(ds, a), _cells(ds, b), B, _thresholds(ds, thresholds))


def _area(points):
    x, y = points[:, 0], points[:, 1]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def xauc_bounds(band: CurveBand, tol: float = 1e-12):
    """Trapezoidal areas under the lower and upper curves, in threshold order.

    Vertical steps add no area; horizontal steps add a rectangle; tied scores
    (diagonal steps) get half credit.
    """
    if band.kind not in ("ROC", "xROC"):
        raise ValueError("xAUC needs an ROC or xROC band")
    areas = []
    for pts in (band.lower[~band.gap], band.upper[~band.gap]):
        if len(pts) < 2:
            raise ValueError("degenerate band: fewer than two usable points")
        if not (np.allclose(pts[0], 0.0, atol=tol) and np.allclose(pts[-1], 1.0, atol=tol)):
            raise ValueError("band must run from (0, 0) to (1, 1); include the +/-inf thresholds")
        if np.any(np.diff(pts[:, 0]) < -tol):
            raise ValueError("band x coordinates are not sorted along the threshold sweep")
        areas.append(_area(pts))
    return areas[0], areas[1]


def _step_index(band_thresholds, grid):
    """Index into a descending threshold list of the smallest entry >= each grid value."""
    asc = band_thresholds[::-1]
    j = np.searchsorted(asc, grid, side="left")
    if np.any(j >= len(asc)):
        raise ValueError("common grid exceeds the largest band threshold; include +inf")
    return len(asc) - 1 - j


def average_bands(bands: Sequence[CurveBand], thresholds=None) -> CurveBand:
    """Pointwise mean of bands (e.g. across resampled splits).

    Each band is read as a step function of theta: the policy at ``theta``
    equals the one at the smallest band threshold ``>= theta``.  The common
    grid defaults to the union of all band thresholds.  A grid point is a gap
    if it falls on a gap in any band.  For ROC-type bands both coordinates
    are averaged; for disparity bands x stays the threshold.
    """
    bands = list(bands)
    if not bands:
        raise ValueError("no bands to average")
    ref = bands[0]
    for b in bands[1:]:
        if (b.kind, b.groups, b.B) != (ref.kind, ref.groups, ref.B):
            raise ValueError("cannot average bands of different kind, groups or B")
    if thresholds is None:
        grid = np.unique(np.concatenate([b.thresholds for b in bands]))[::-1]
    else:
        grid = np.asarray(thresholds, dtype=float)
    lower = np.zeros((len(grid), 2))
    upper = np.zeros((len(grid), 2))
    gap = np.zeros(len(grid), dtype=bool)
    for b in bands:
        k = _step_index(b.thresholds, grid)
        lower += b.lower[k]
        upper += b.upper[k]
        gap |= b.gap[k]
    lower /= len(bands)
    upper /= len(bands)
    if ref.kind.endswith("disparity"):
        lower[:, 0] = grid
        upper[:, 0] = grid
    lower[gap] = np.nan
    upper[gap] = np.nan
    return CurveBand(ref.kind, ref.groups, ref.B, grid, lower, upper, gap)


def _fmt(v):
    return repr(float(v))


def write_band_csv(band: CurveBand, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "x_lower", "y_lower", "x_upper", "y_upper", "gap_flag"])
        for i, th in enumerate(band.thresholds):
            if band.gap[i]:
                w.writerow([_fmt(th), "", "", "", "", 1])
            else:
                w.writerow([_fmt(th), *map(_fmt, band.lower[i]), *map(_fmt, band.upper[i]), 0])


def read_band_csv(path, kind, groups, B):
    th, lo, up, gap = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            th.append(float(row["theta"]))
            g = row["gap_flag"] == "1"
            gap.append(g)
            lo.append([np.nan, np.nan] if g else [float(row["x_lower"]), float(row["y_lower"])])
            up.append([np.nan, np.nan] if g else [float(row["x_upper"]), float(row["y_upper"])])
    return CurveBand(kind, tuple(groups), float(B), np.array(th), np.array(lo).reshape(-1, 2),
                     np.array(up).reshape(-1, 2), np.array(gap, dtype=bool))


def split_bands(ds: Dataset, B: float, thresholds=None, groups=None,
                kinds: Sequence[str] = KINDS, delta: float = DELTA) -> dict:
    """All bands of one scored dataset at one ``B``, sharing one sweep per group.

    Returns ``{label: CurveBand}`` with ROC per group, xROC per ordered pair
    and TPR/TNR disparity per unordered pair (in ``groups`` order).
    """
    th = _thresholds(ds, thresholds)
    groups = list(ds.groups if groups is None else groups)
    sw = {g: threshold_sweep(_cells(ds, g), B, th, delta) for g in groups}
    out = {}
    if "ROC" in kinds:
        for g in groups:
            band = _xroc_from_sweeps(sw[g], sw[g], (g,), "ROC", B, th)
            out[band.label] = band
    if "xROC" in kinds:
        for a in groups:
            for b in groups:
                if a != b:
                    band = _xroc_from_sweeps(sw[a], sw[b], (a, b), "xROC", B, th)
                    out[band.label] = band
    for metric in ("TPR", "TNR"):
        if f"{metric}_disparity" in kinds:
            for i, a in enumerate(groups):
                for b in groups[i + 1:]:
                    band = _disparity_from_sweeps(sw[a], sw[b], (a, b), metric, B, th)
                    out[band.label] = band
    return out
