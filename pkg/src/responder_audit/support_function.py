"""Support function of the joint (TPR, TNR) identification region.

For a contrast ``mu`` over groups, ``h(mu) = sup over eta of
sum_a mu_a^TPR * rho_a^TPR(eta) + mu_a^TNR * rho_a^TNR(eta)`` with eta in the
box ``0 <= eta <= min(B, mu0, 1 - mu1)``.  The region is a product over
groups, so ``h`` is a sum of per-group values.  Within a group the linear-
fractional objective is rewritten with ``t = 1 / E[tau + eta | a]`` and
``omega = t * eta``; for fixed ``t`` what remains is a linear program with a
single equality constraint (a fractional knapsack with an exact budget), and
``t`` is searched on a grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import minimize_scalar

from .data_model import Dataset
from .identification import (DELTA, DegenerateGroup, GroupCells, bounds, group_cells,
                             point_rates, rho, stats_from_cells)

DEFAULT_GRID_N = 1001
T_SINGULAR_TOL = 1e-6
BUDGET_TOL = 1e-12


class InfeasibleBudget(ValueError):
    pass


class SingularT(ValueError):
    pass


@dataclass(frozen=True)
class ContrastDirection:
    """Per-group ``(tpr_coef, tnr_coef)``; groups not listed have zero weight."""

    coefs: Mapping[str, tuple]

    def __post_init__(self):
        coefs = {str(g): (float(c[0]), float(c[1])) for g, c in dict(self.coefs).items()}
        if not any(v != 0.0 for c in coefs.values() for v in c):
            raise ValueError("contrast direction must have a nonzero coefficient")
        object.__setattr__(self, "coefs", coefs)

    @classmethod
    def parse(cls, text):
        """``"a:1:0,b:-1:0"`` -> ``{a: (1, 0), b: (-1, 0)}``."""
        coefs = {}
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            g, tpr, tnr = item.rsplit(":", 2)
            coefs[g] = (float(tpr), float(tnr))
        return cls(coefs)

    def scaled(self, c):
        return ContrastDirection({g: (c * a, c * b) for g, (a, b) in self.coefs.items()})

    def restrict(self, group):
        return ContrastDirection({group: self.coefs[group]})


@dataclass
class GroupOptimum:
    group: str
    value: float
    t: float
    budget: float
    omega: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)
    mean_eta_z1: float = 0.0
    mean_eta_z0: float = 0.0
    allocation: str = ""


@dataclass
class SupportResult:
    value: float
    groups: dict
    grid_resolution: int

    def to_dict(self):
        return {
            "value": self.value,
            "grid_n": self.grid_resolution,
            "groups": {
                g: {"value": o.value, "t": o.t, "budget": o.budget,
                    "mean_eta_z1": o.mean_eta_z1, "mean_eta_z0": o.mean_eta_z0,
                    "allocation": o.allocation}
                for g, o in self.groups.items()
            },
        }


def _cond_mean(w, v, sel):
    return float(np.sum(w[sel] * v[sel]) / np.sum(w[sel])) if np.any(w[sel] > 0) else 0.0


def fractional_knapsack(values, weights, caps, budget, tol=BUDGET_TOL):
    """Maximize ``values @ x`` s.t. ``weights @ x == budget``, ``0 <= x <= caps``.

    Greedy by value per unit weight (stable order on ties).  Entries with zero
    weight are left at 0 when their value is not positive, else set to cap.
    Returns ``(x, objective)``; raises :class:`InfeasibleBudget` when the
    budget is outside ``[0, weights @ caps]``.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    caps = np.asarray(caps, dtype=float)
    total = float(weights @ caps)
    if budget < -tol or budget > total + tol:
        raise InfeasibleBudget(f"budget {budget:.6g} outside [0, {total:.6g}]")
    x = np.zeros_like(values)
    free = weights <= 0
    x[free & (values > 0)] = caps[free & (values > 0)]
    idx = np.flatnonzero(~free)
    ratio = values[idx] / weights[idx]
    order = idx[np.argsort(-ratio, kind="stable")]
    remaining = min(max(budget, 0.0), total)
    for i in order:
        if remaining <= 0:
            break
        take = min(caps[i], remaining / weights[i])
        x[i] = take
        remaining -= take * weights[i]
    return x, float(values @ x)


def _class_value(t, mu_tpr, mu_tnr, agg):
    """Inner LP optimum for each t, using that ratios are constant within each arm."""
    M1, N0, T, C1, C0 = agg
    S = 1.0 - t * T
    cap1, cap0 = t * C1, t * C0
    with np.errstate(divide="ignore", invalid="ignore"):
        tnr_scale = mu_tnr / (t - 1.0) if mu_tnr != 0.0 else np.zeros_like(t)
    # objective per unit of omega: mu_tpr on Z=1 units, -tnr_scale on Z=0 units
    first1 = mu_tpr >= -tnr_scale
    budget = np.clip(S, 0.0, None)
    w1 = np.where(first1, np.minimum(budget, cap1), np.maximum(budget - cap0, 0.0))
    w0 = budget - w1
    feasible = (S >= -BUDGET_TOL) & (w1 <= cap1 + BUDGET_TOL) & (w0 <= cap0 + BUDGET_TOL)
    val = mu_tpr * (t * M1 + w1) + tnr_scale * (t * N0 - w0)
    return val, feasible, S


def group_support(cells: GroupCells, mu_tpr: float, mu_tnr: float, B: float,
                  grid_n: int = DEFAULT_GRID_N, refine: bool = True, delta: float = DELTA) -> GroupOptimum:
    """Per-group support value ``h_a(mu_a)`` with its maximizing eta."""
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    w, z = cells.w, cells.z
    clip = cells.clip(B)
    T = float(np.sum(w * cells.tau))
    if T < delta:
        raise DegenerateGroup(f"group {cells.group!r}: responder mass {T:.3g} below {delta:g}")
    if 1.0 - T < delta:
        raise DegenerateGroup(f"group {cells.group!r}: non-responder mass below {delta:g}")
    C = float(np.sum(w * clip))
    agg = (float(np.sum(w[z] * cells.tau[z])), float(np.sum(w[~z] * (1.0 - cells.tau[~z]))), T,
           float(np.sum(w[z] * clip[z])), float(np.sum(w[~z] * clip[~z])))
    zero = np.zeros(len(cells))
    if mu_tpr == 0.0 and mu_tnr == 0.0:
        return GroupOptimum(cells.group, 0.0, 1.0 / T, 0.0, zero, zero, allocation="zero contrast")
    if C == 0.0:
        # the box is {0}: the region is the identified point
        tpr, tnr = point_rates(stats_from_cells(cells, 0.0), delta)
        return GroupOptimum(cells.group, mu_tpr * tpr + mu_tnr * tnr, 1.0 / T, 0.0, zero, zero,
                            allocation="no budget (eta = 0)")

    t_lo, t_hi = 1.0 / (T + C), 1.0 / T
    t = np.linspace(t_lo, t_hi, grid_n) if C > 0 else np.array([t_hi])
    if C > 0:
        # regime breakpoints of the inner LP (one arm's capacity exactly exhausted,
        # or the two arms' per-unit objective coefficients tie); the value has kinks there
        kinks = [1.0 / (T + agg[3]), 1.0 / (T + agg[4])]
        if mu_tnr != 0.0 and mu_tpr != 0.0:
            kinks.append(1.0 - mu_tnr / mu_tpr)
        kinks = [k for k in kinks if t_lo < k < t_hi]
        t = np.unique(np.concatenate([t, kinks]))
    vals, feasible, _ = _class_value(t, mu_tpr, mu_tnr, agg)
    if mu_tnr != 0.0:
        singular = np.abs(t - 1.0) < T_SINGULAR_TOL
        if singular.all():
            raise SingularT(f"group {cells.group!r}: every grid point has t within {T_SINGULAR_TOL} of 1")
        feasible &= ~singular
    if not feasible.any():
        raise InfeasibleBudget(f"group {cells.group!r}: no feasible t on the grid")
    vals = np.where(feasible, vals, -np.inf)
    k = int(np.argmax(vals))
    t_best, v_best = float(t[k]), float(vals[k])

    if refine and len(t) > 1:
        lo, hi = t[max(k - 1, 0)], t[min(k + 1, len(t) - 1)]

        def neg(s):
            v, ok, _ = _class_value(np.array([s]), mu_tpr, mu_tnr, agg)
            if not ok[0] or (mu_tnr != 0.0 and abs(s - 1.0) < T_SINGULAR_TOL):
                return np.inf
            return -float(v[0])

        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        if np.isfinite(res.fun) and -res.fun > v_best:
            t_best, v_best = float(res.x), float(-res.fun)

    # unit-level allocation at the chosen t via the general greedy
    budget = max(1.0 - t_best * T, 0.0)
    a0 = -mu_tnr / (t_best - 1.0) if mu_tnr != 0.0 else 0.0
    ratio = np.where(z, mu_tpr, a0)
    omega, _ = fractional_knapsack(w * ratio, w, t_best * clip, min(budget, t_best * C))
    eta = np.minimum(omega / t_best, cells.eta_cap)
    first = "Z=1" if mu_tpr >= a0 else "Z=0"
    return GroupOptimum(cells.group, v_best, t_best, budget, omega, eta,
                        mean_eta_z1=_cond_mean(w, eta, z), mean_eta_z0=_cond_mean(w, eta, ~z),
                        allocation=f"budget filled on {first} units first (bang-bang)")


def support(ds: Dataset, Z, mu: ContrastDirection, B: float, grid_n: int = DEFAULT_GRID_N,
            refine: bool = True) -> SupportResult:
    """Evaluate the support function of the identification region at ``mu``.

    Parameters
    ----------
    ds : Dataset
        Scored dataset.
    Z : array of {0, 1}
        Policy assignment per unit.
    mu : ContrastDirection
    B : float
        Bound on the anti-responder probability.
    grid_n : int
        Number of grid points for ``t`` in each group.
    refine : bool
        Polish the best grid point with a bounded scalar search between its
        neighbours.  The result is never worse than the plain grid value.
    """
    cells = {}
    for g in mu.coefs:
        cells[g] = group_cells(ds, Z, g)
    return support_cells(cells, mu, B, grid_n, refine)


def support_cells(cells: Mapping[str, GroupCells], mu: ContrastDirection, B: float,
                  grid_n: int = DEFAULT_GRID_N, refine: bool = True) -> SupportResult:
    groups = {}
    total = 0.0
    for g, (a, b) in mu.coefs.items():
        opt = group_support(cells[g], a, b, B, grid_n, refine)
        groups[g] = opt
        total += opt.value
    return SupportResult(total, groups, grid_n)


def check_optimizer(cells: GroupCells, opt: GroupOptimum, mu_tpr, mu_tnr):
    """Value of the reported eta through :func:`rho`; should equal ``opt.value``."""
    tpr, tnr = rho(cells, opt.eta)
    return mu_tpr * tpr + mu_tnr * tnr


def disparity_extremes(ds: Dataset, Z, a, b, metric: str, B: float):
    """Sharp interval for ``metric_a - metric_b`` (metric in {"TPR", "TNR"})."""
    if a == b:
        raise ValueError("disparity needs two distinct groups")
    ia = _interval(stats_from_cells(group_cells(ds, Z, a), B), metric)
    ib = _interval(stats_from_cells(group_cells(ds, Z, b), B), metric)
    return ia.lower - ib.upper, ia.upper - ib.lower


def _interval(gs, metric):
    tpr, tnr = bounds(gs, gs.B)
    if metric.upper() == "TPR":
        return tpr
    if metric.upper() == "TNR":
        return tnr
    raise ValueError(f"metric must be TPR or TNR, got {metric!r}")
