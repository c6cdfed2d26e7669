"""Point identification of group TPR/TNR under monotone response, and sharp
bounds when anti-responder probability is only known to be at most ``B``.

All quantities are weighted means within one group.  Empirical data uses
equal weights ``1/n_a``; population (synthetic) cells use ``P(x | a)``.
Throughout, for a policy ``Z`` and per-unit CATE ``tau``:

* ``m_z = P(Z=z | a) * E[tau | a, Z=z]``        (responder mass on arm z)
* ``c_z = P(Z=z | a) * E[clip_B | a, Z=z]``     with ``clip_B = min(B, mu0, 1 - mu1)``
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data_model import Dataset

DELTA = 1e-8
NEGATIVE_TAU_WARN_FRACTION = 0.05
ETA_TOL = 1e-12


class DegenerateGroup(ValueError):
    """Responder (or non-responder) mass in a group is below the guard ``delta``."""


class EtaOutOfRange(ValueError):
    pass


class NegativeTauWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class GroupCells:
    """Unit-level (or covariate-cell-level) view of a single group.

    ``w`` are nonnegative weights summing to one.
    """

    tau: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    z: np.ndarray
    w: np.ndarray
    group: str = ""

    def __post_init__(self):
        for name in ("tau", "mu0", "mu1", "w"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "z", np.asarray(self.z).astype(bool))
        n = len(self.tau)
        if any(len(getattr(self, k)) != n for k in ("mu0", "mu1", "z", "w")):
            raise ValueError("GroupCells arrays must have equal length")
        if n == 0:
            raise ValueError(f"group {self.group!r} is empty")

    def __len__(self):
        return len(self.tau)

    @property
    def eta_cap(self):
        """Identified per-unit upper bound on the anti-responder probability."""
        return np.minimum(self.mu0, 1.0 - self.mu1)

    def clip(self, B):
        return np.clip(np.minimum(B, self.eta_cap), 0.0, None)

    def with_z(self, z):
        return GroupCells(self.tau, self.mu0, self.mu1, z, self.w, self.group)


@dataclass(frozen=True)
class GroupStats:
    group: str
    r1: float
    r0: float
    tau1: float
    tau0: float
    clip1: float
    clip0: float
    n: int
    B: float
    cells: GroupCells | None = field(default=None, repr=False, compare=False)

    @property
    def masses(self):
        return self.r1 * self.tau1, self.r0 * self.tau0, self.r1 * self.clip1, self.r0 * self.clip0

    def at(self, B):
        """Same group and policy, clip means re-evaluated at budget ``B``."""
        if self.cells is None:
            if B != self.B:
                raise ValueError("GroupStats without unit-level cells cannot change B")
            return self
        return stats_from_cells(self.cells, B, n=self.n)


@dataclass(frozen=True)
class RateInterval:
    metric: str
    group: str
    lower: float
    upper: float
    B: float
    # the lower endpoints of TPR and TNR are attained by one common eta, as are the upper ones
    simultaneous: bool = True

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, value, tol=0.0):
        return self.lower - tol <= value <= self.upper + tol


def _check_negative_tau(tau, group):
    frac = float(np.mean(np.asarray(tau) < 0)) if len(tau) else 0.0
    if frac > NEGATIVE_TAU_WARN_FRACTION:
        warnings.warn(
            f"group {group!r}: {frac:.1%} of tau_hat values are negative "
            "(monotone response strained or noisy estimates)",
            NegativeTauWarning, stacklevel=3)


def group_cells(ds: Dataset, Z, a) -> GroupCells:
    if not ds.is_scored:
        raise ValueError("dataset has no mu0/mu1/tau scores; run nuisance.fit_predict first")
    mask = ds.group_mask(a)
    n_a = int(mask.sum())
    return GroupCells(ds.tau[mask], ds.mu0[mask], ds.mu1[mask], np.asarray(Z)[mask],
                      np.full(n_a, 1.0 / n_a), group=a)


def stats_from_cells(cells: GroupCells, B: float, n: int | None = None) -> GroupStats:
    w, z = cells.w, cells.z
    clip = cells.clip(B)
    r1 = float(np.sum(w[z]))
    r0 = float(np.sum(w[~z]))

    def cond_mean(v, sel, r):
        return float(np.sum(w[sel] * v[sel]) / r) if r > 0 else 0.0

    return GroupStats(
        group=cells.group, r1=r1, r0=r0,
        tau1=cond_mean(cells.tau, z, r1), tau0=cond_mean(cells.tau, ~z, r0),
        clip1=cond_mean(clip, z, r1), clip0=cond_mean(clip, ~z, r0),
        n=len(cells) if n is None else n, B=float(B), cells=cells,
    )


def group_stats(ds: Dataset, Z, a, B: float = 0.0) -> GroupStats:
    """Sufficient statistics of group ``a`` under assignment ``Z`` at budget ``B``.

    Empty policy arms get ``r_z = 0`` and conditional means of 0.
    """
    cells = group_cells(ds, Z, a)
    _check_negative_tau(cells.tau, a)
    return stats_from_cells(cells, B)


def _closed_forms(m1, m0, c1, c0, r1, r0):
    """Point rates and the four sharp endpoints from arm masses (array friendly)."""
    m1, m0, c1, c0, r1, r0 = (np.asarray(v, dtype=float) for v in (m1, m0, c1, c0, r1, r0))
    n1 = r1 - m1
    n0 = r0 - m0
    dens = {
        "tpr": m0 + m1,
        "tnr": n0 + n1,
        "tpr_hi": m0 + m1 + c1,
        "tpr_lo": m0 + c0 + m1,
        "tnr_hi": n0 + n1 - c1,
        "tnr_lo": n0 - c0 + n1,
    }
    nums = {
        "tpr": m1,
        "tnr": n0,
        "tpr_hi": m1 + c1,
        "tpr_lo": m1,
        "tnr_hi": n0,
        "tnr_lo": n0 - c0,
    }
    with np.errstate(divide="ignore", invalid="ignore"):
        out = {k: nums[k] / dens[k] for k in nums}
    return out, dens


def _guard(dens, keys, group, delta):
    for k in keys:
        if dens[k] < delta:
            which = "responder" if k.startswith("tpr") else "non-responder"
            raise DegenerateGroup(
                f"group {group!r}: {which} mass {float(dens[k]):.3g} below {delta:g}; "
                f"{k.split('_')[0].upper()} undefined")


def point_rates(gs: GroupStats, delta: float = DELTA):
    """Identified (TPR, TNR) of the group under monotone treatment response."""
    m1, m0, c1, c0 = gs.masses
    out, dens = _closed_forms(m1, m0, 0.0, 0.0, gs.r1, gs.r0)
    _guard(dens, ("tpr", "tnr"), gs.group, delta)
    return float(out["tpr"]), float(out["tnr"])


def rho(cells: GroupCells, eta, delta: float = DELTA, tol: float = ETA_TOL):
    """(TPR, TNR) implied by anti-responder probabilities ``eta`` per unit.

    ``eta`` must lie in ``[0, min(mu0, 1 - mu1)]`` per unit (up to ``tol``).
    """
    eta = np.broadcast_to(np.asarray(eta, dtype=float), cells.tau.shape)
    if np.any(eta < -tol) or np.any(eta > cells.eta_cap + tol):
        raise EtaOutOfRange("eta must satisfy 0 <= eta <= min(mu0, 1 - mu1) per unit")
    w, z = cells.w, cells.z
    resp = cells.tau + eta
    m1 = np.sum(w[z] * resp[z])
    m0 = np.sum(w[~z] * resp[~z])
    n1 = np.sum(w[z] * (1.0 - resp[z]))
    n0 = np.sum(w[~z] * (1.0 - resp[~z]))
    if m0 + m1 < delta:
        raise DegenerateGroup(f"group {cells.group!r}: responder mass below {delta:g}")
    if n0 + n1 < delta:
        raise DegenerateGroup(f"group {cells.group!r}: non-responder mass below {delta:g}")
    return float(m1 / (m0 + m1)), float(n0 / (n0 + n1))


def bounds(gs: GroupStats, B: float | None = None, delta: float = DELTA):
    """Sharp identification intervals for TPR and TNR under ``p10 <= B``.

    Returns
    -------
    (RateInterval, RateInterval)
        TPR and TNR intervals.  The pair of lower endpoints is attained by a
        single eta (clip on ``Z=0`` units, 0 on ``Z=1``) and so is the pair of
        upper endpoints (clip on ``Z=1``, 0 on ``Z=0``); see :func:`extreme_eta`.
    """
    if B is None:
        B = gs.B
    if not 0.0 <= B <= 1.0:
        raise ValueError(f"B must lie in [0, 1], got {B}")
    gs = gs.at(B)
    m1, m0, c1, c0 = gs.masses
    out, dens = _closed_forms(m1, m0, c1, c0, gs.r1, gs.r0)
    _guard(dens, ("tpr", "tnr", "tpr_hi", "tpr_lo", "tnr_hi", "tnr_lo"), gs.group, delta)
    tpr = RateInterval("TPR", gs.group, float(out["tpr_lo"]), float(out["tpr_hi"]), float(B))
    tnr = RateInterval("TNR", gs.group, float(out["tnr_lo"]), float(out["tnr_hi"]), float(B))
    return tpr, tnr


def extreme_eta(cells: GroupCells, B: float, which: str):
    """Bang-bang eta attaining the ``"upper"`` or ``"lower"`` (TPR, TNR) pair."""
    clip = cells.clip(B)
    if which == "upper":
        return np.where(cells.z, clip, 0.0)
    if which == "lower":
        return np.where(cells.z, 0.0, clip)
    raise ValueError("which must be 'upper' or 'lower'")


def report_fragment(gs: GroupStats, B: float, delta: float = DELTA) -> dict:
    """JSON-ready summary for one (group, B); degenerate groups carry nulls."""
    try:
        point = point_rates(gs, delta)
        tpr, tnr = bounds(gs, B, delta)
    except DegenerateGroup:
        return {"group": gs.group, "B": float(B), "tpr": None, "tnr": None,
                "point": None, "degenerate": True}
    return {
        "group": gs.group,
        "B": float(B),
        "tpr": [tpr.lower, tpr.upper],
        "tnr": [tnr.lower, tnr.upper],
        "point": {"tpr": point[0], "tnr": point[1]},
        "degenerate": False,
    }


def threshold_sweep(cells: GroupCells, B: float, thresholds, delta: float = DELTA) -> dict:
    """Closed-form endpoints for every policy ``Z = 1[tau >= theta]``.

    ``cells.z`` is ignored.  Returns arrays keyed ``tpr``, ``tnr``, ``tpr_lo``,
    ``tpr_hi``, ``tnr_lo``, ``tnr_hi`` plus boolean ``degenerate``; degenerate
    entries are NaN.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    order = np.argsort(-cells.tau, kind="stable")
    tau_desc = cells.tau[order]
    w = cells.w[order]
    clip = cells.clip(B)[order]
    zero = np.zeros(1)
    cw = np.concatenate([zero, np.cumsum(w)])
    ct = np.concatenate([zero, np.cumsum(w * tau_desc)])
    cc = np.concatenate([zero, np.cumsum(w * clip)])
    # number of units with tau >= theta
    k = len(tau_desc) - np.searchsorted(tau_desc[::-1], thresholds, side="left")
    r1, m1, c1 = cw[k], ct[k], cc[k]
    r0, m0, c0 = cw[-1] - r1, ct[-1] - m1, cc[-1] - c1
    out, dens = _closed_forms(m1, m0, c1, c0, r1, r0)
    bad = np.zeros(len(thresholds), dtype=bool)
    for d in dens.values():
        bad |= d < delta
    for key in out:
        out[key] = np.where(bad, np.nan, out[key])
    out["degenerate"] = bad
    return out
