"""Synthetic populations with a fully specified potential-outcome joint.

A :class:`SyntheticSpec` fixes, for every group ``a`` and covariate point
``x``, the response-type probabilities ``(p00, p01, p10, p11)`` where
``pij = P(Y(0)=i, Y(1)=j | x, a)``.  From it we get exact ground truth
(the true TPR/TNR of any policy), the observable law, and samples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data_model import Dataset
from .identification import (DELTA, DegenerateGroup, GroupCells, bounds, extreme_eta,
                             rho, stats_from_cells)

SIMPLEX_TOL = 1e-12
TYPE_NAMES = ("p00", "p01", "p10", "p11")
MAX_SHARPNESS_SUPPORT = 5
TIE_TOL = 1e-12


class SpecError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SyntheticSpec:
    """Finite-support population.

    Attributes
    ----------
    x_support : (n_x, d) array
        Covariate points.
    groups : tuple of str
    group_probs : (n_groups,) array
        ``P(A = a)``.
    px : (n_groups, n_x) array
        ``P(X = x | A = a)``; each row sums to one.
    p : (n_groups, n_x, 4) array
        Response-type probabilities in the order p00, p01, p10, p11.
    propensity : (n_groups, n_x) array
        ``P(T = 1 | x, a)`` in (0, 1).
    """

    x_support: np.ndarray
    groups: tuple
    group_probs: np.ndarray
    px: np.ndarray
    p: np.ndarray
    propensity: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.x_support, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        n_g, n_x = len(self.groups), len(xs)
        gp = np.asarray(self.group_probs, dtype=float)
        px = np.asarray(self.px, dtype=float)
        if px.ndim == 1:
            px = np.tile(px, (n_g, 1))
        p = np.asarray(self.p, dtype=float)
        if p.ndim == 2:
            p = np.tile(p, (n_g, 1, 1))
        e = np.broadcast_to(np.asarray(self.propensity, dtype=float), (n_g, n_x)).copy()
        if gp.shape != (n_g,) or px.shape != (n_g, n_x) or p.shape != (n_g, n_x, 4):
            raise SpecError("inconsistent spec shapes")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=2) - 1) > SIMPLEX_TOL):
            raise SpecError("response-type probabilities must lie on the simplex (tolerance 1e-12)")
        if np.any(px < 0) or np.any(np.abs(px.sum(axis=1) - 1) > SIMPLEX_TOL):
            raise SpecError("P(x | a) must be a distribution for every group")
        if np.any(gp < 0) or abs(gp.sum() - 1) > SIMPLEX_TOL:
            raise SpecError("group probabilities must sum to one")
        if np.any((e <= 0) | (e >= 1)):
            raise SpecError("propensity must lie strictly inside (0, 1)")
        for name, v in (("x_support", xs), ("group_probs", gp), ("px", px), ("p", p), ("propensity", e)):
            v = np.array(v)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "groups", tuple(str(g) for g in self.groups))

    # observable law --------------------------------------------------------

    @property
    def mu0(self):
        return self.p[..., 2] + self.p[..., 3]

    @property
    def mu1(self):
        return self.p[..., 1] + self.p[..., 3]

    @property
    def tau(self):
        return self.p[..., 1] - self.p[..., 2]

    def gindex(self, a):
        try:
            return self.groups.index(a)
        except ValueError:
            raise KeyError(f"group {a!r} not in spec") from None

    def observable_law(self):
        """``P(X=x, A=a, T=t, Y=y)`` as an array of shape (n_groups, n_x, 2, 2)."""
        base = self.group_probs[:, None] * self.px
        law = np.empty(base.shape + (2, 2))
        for t, e in ((0, 1 - self.propensity), (1, self.propensity)):
            mu = self.mu1 if t else self.mu0
            law[..., t, 1] = base * e * mu
            law[..., t, 0] = base * e * (1 - mu)
        return law

    def population_cells(self, a, z=None) -> GroupCells:
        """Covariate cells of group ``a`` weighted by ``P(x | a)``, true scores."""
        g = self.gindex(a)
        if z is None:
            z = np.zeros(len(self.x_support), dtype=bool)
        return GroupCells(self.tau[g], self.mu0[g], self.mu1[g], np.asarray(z)[...], self.px[g], group=a)

    def threshold_policy(self, theta):
        """Z(x, a) = 1[tau(x, a) >= theta] on the support, shape (n_groups, n_x)."""
        return (self.tau >= theta).astype(np.int8)

    # serialization ----------------------------------------------------------

    def to_dict(self):
        return {
            "x_support": self.x_support.tolist(),
            "groups": list(self.groups),
            "group_probs": self.group_probs.tolist(),
            "px": self.px.tolist(),
            "p": {name: self.p[..., k].tolist() for k, name in enumerate(TYPE_NAMES)},
            "propensity": self.propensity.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        groups = tuple(d["groups"])
        xs = np.asarray(d["x_support"], dtype=float)
        n_x = len(xs)
        pdict = d["p"]
        if isinstance(pdict, dict):
            comps = [np.asarray(pdict.get(k, 0.0), dtype=float) for k in TYPE_NAMES]
            shape = np.broadcast_shapes(*[c.shape for c in comps], (n_x,))
            if len(shape) == 1:
                shape = (len(groups), n_x)
            p = np.stack([np.broadcast_to(c, shape) for c in comps], axis=-1)
        else:
            p = np.asarray(pdict, dtype=float)
        gp = d.get("group_probs") or [1.0 / len(groups)] * len(groups)
        px = d.get("px") or [1.0 / n_x] * n_x
        return cls(xs, groups, gp, px, p, d.get("propensity", 0.5))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def generate(spec: SyntheticSpec, n: int, seed: int = 0, oracle_scores: bool = False):
    """Draw ``n`` i.i.d. units.

    Returns ``(Dataset, types)`` where ``types`` is a side table of the hidden
    response types coded 0..3 = (00, 01, 10, 11) and never enters the
    Dataset.  With ``oracle_scores`` the dataset carries the true ``mu0``,
    ``mu1``, ``tau`` of each unit's cell.
    """
    rng = np.random.default_rng(seed)
    g = rng.choice(len(spec.groups), size=n, p=spec.group_probs)
    x = np.empty(n, dtype=np.int64)
    for k in range(len(spec.groups)):
        sel = g == k
        x[sel] = rng.choice(len(spec.x_support), size=int(sel.sum()), p=spec.px[k])
    u = rng.random(n)
    cum = np.cumsum(spec.p[g, x], axis=1)
    types = np.minimum((u[:, None] >= cum[:, :3]).sum(axis=1), 3)
    t = (rng.random(n) < spec.propensity[g, x]).astype(np.int8)
    y0 = types >= 2
    y1 = (types == 1) | (types == 3)
    y = np.where(t == 1, y1, y0).astype(np.int8)
    width = len(str(max(n - 1, 0)))
    ds = Dataset(
        unit_ids=[f"u{i:0{width}d}" for i in range(n)],
        features=spec.x_support[x],
        group=np.array(spec.groups, dtype=object)[g],
        treatment=t, outcome=y,
        feature_names=tuple(f"x{j + 1}" for j in range(spec.x_support.shape[1])),
        mu0=spec.mu0[g, x] if oracle_scores else None,
        mu1=spec.mu1[g, x] if oracle_scores else None,
        tau=spec.tau[g, x] if oracle_scores else None,
    )
    return ds, types


def _policy_array(spec, policy):
    if callable(policy):
        z = np.array([[policy(x, a) for x in spec.x_support] for a in spec.groups])
    else:
        z = np.asarray(policy)
        if z.ndim == 1:
            z = np.tile(z, (len(spec.groups), 1))
    z = z.astype(bool)
    if z.shape != (len(spec.groups), len(spec.x_support)):
        raise ValueError("policy must give one decision per (group, x) cell")
    return z


def true_rates(spec: SyntheticSpec, policy) -> dict:
    """Exact ``{group: (TPR, TNR)}`` of a deterministic policy on the support.

    ``policy`` is an array of shape (n_groups, n_x) or (n_x,), or a callable
    ``policy(x, a) -> {0, 1}``.  Non-responders are units with
    ``Y(1) <= Y(0)``, i.e. types 00, 10 and 11.
    """
    z = _policy_array(spec, policy)
    out = {}
    for k, a in enumerate(spec.groups):
        w = spec.px[k]
        resp = w * spec.p[k, :, 1]
        nonresp = w * (1.0 - spec.p[k, :, 1])
        if resp.sum() <= 0:
            raise DegenerateGroup(f"group {a!r} has no responder mass")
        if nonresp.sum() <= 0:
            raise DegenerateGroup(f"group {a!r} has no non-responder mass")
        out[a] = (float(resp[z[k]].sum() / resp.sum()), float(nonresp[~z[k]].sum() / nonresp.sum()))
    return out


def witness_pair():
    """Two specs with identical observable laws but different TPR under Z = 1[X=1].

    X in {0, 1} uniform, T independent with P(T=1) = 1/2, one group.  Spec A
    satisfies monotone response; spec B has anti-responder probability 0.1 in
    both cells.  Returns ``(spec_a, spec_b, policy)``.
    """
    def make(rows):
        return SyntheticSpec([[0.0], [1.0]], ("a",), [1.0], [0.5, 0.5], [rows], 0.5)
    #            p00   p01   p10   p11
    spec_a = make([[0.68, 0.02, 0.00, 0.30],
                   [0.70, 0.10, 0.00, 0.20]])
    spec_b = make([[0.58, 0.12, 0.10, 0.20],
                   [0.60, 0.20, 0.10, 0.10]])
    policy = np.array([[0, 1]])
    return spec_a, spec_b, policy


def nonidentifiability_witness(min_gap=0.05):
    """Return a verified witness pair plus diagnostics.

    Raises ``AssertionError`` if the pair fails the cell-by-cell observable
    law check (1e-12) or its TPR gap is below ``min_gap``.
    """
    spec_a, spec_b, policy = witness_pair()
    law_gap = float(np.max(np.abs(spec_a.observable_law() - spec_b.observable_law())))
    tpr_a = true_rates(spec_a, policy)["a"][0]
    tpr_b = true_rates(spec_b, policy)["a"][0]
    if law_gap >= 1e-12:
        raise AssertionError(f"witness observable laws differ by {law_gap:g}")
    if abs(tpr_a - tpr_b) < min_gap:
        raise AssertionError(f"witness TPR gap {abs(tpr_a - tpr_b):g} below {min_gap}")
    return {"spec_a": spec_a, "spec_b": spec_b, "policy": policy,
            "law_gap": law_gap, "tpr_a": tpr_a, "tpr_b": tpr_b,
            "max_p10": max(float(spec_a.p[..., 2].max()), float(spec_b.p[..., 2].max()))}


def _attainable_sums(weights, grids, decimals):
    """All distinct values of sum_c weights[c] * eta_c, eta_c ranging over grids[c]."""
    sums = np.zeros(1)
    for wc, gc in zip(weights, grids):
        sums = np.unique(np.round(np.add.outer(sums, wc * gc).ravel(), decimals))
    return sums


def sharpness_check(spec: SyntheticSpec, policy, B: float, grid_step: float = 1e-3,
                    decimals: int = 12, chunk: int = 2_000_000, delta: float = DELTA) -> dict:
    """Brute-force the identification intervals on a per-cell eta grid.

    Only the observable law of ``spec`` is used (its ``p10`` is treated as
    unknown).  For each group, every cell's eta ranges over
    ``{0, step, 2 step, ..., cap}`` with ``cap = min(B, mu0, 1 - mu1)``
    (the cap itself always included).  Since rho depends on eta only through
    the conditional means of eta on ``Z=1`` and ``Z=0`` cells, distinct
    attainable pairs of those sums are enumerated exactly instead of the full
    product grid.  Reports grid extremes, closed-form bounds and their gaps;
    ``passed`` when every gap is within ``2 * grid_step``.
    """
    if len(spec.x_support) > MAX_SHARPNESS_SUPPORT:
        raise SpecError(f"support too large for exhaustive grid (> {MAX_SHARPNESS_SUPPORT} points)")
    z_all = _policy_array(spec, policy)
    report = {"B": B, "grid_step": grid_step, "groups": {}, "passed": True}
    for k, a in enumerate(spec.groups):
        cells = spec.population_cells(a, z_all[k])
        cap = cells.clip(B)
        grids = [grid_step * np.arange(int(np.floor(c / grid_step + 1e-9)) + 1) for c in cap]
        w, z = cells.w, cells.z
        s1 = _attainable_sums(w[z], [grids[i] for i in np.flatnonzero(z)], decimals)
        s0 = _attainable_sums(w[~z], [grids[i] for i in np.flatnonzero(~z)], decimals)
        m1 = float(np.sum(w[z] * cells.tau[z]))
        m0 = float(np.sum(w[~z] * cells.tau[~z]))
        r1 = float(np.sum(w[z]))
        r0 = float(np.sum(w[~z]))
        ext = {"tpr": [np.inf, -np.inf], "tnr": [np.inf, -np.inf]}
        arg = {}
        # TPR optimizers are tie-broken toward the matching TNR extreme
        tie_tnr = {"min": np.inf, "max": -np.inf}
        step = max(1, chunk // max(len(s0), 1))
        for i in range(0, len(s1), step):
            e1 = s1[i:i + step, None]
            e0 = s0[None, :]
            num_t = m1 + e1
            den_t = m0 + e0 + m1 + e1
            nn1 = r1 - m1 - e1
            nn0 = r0 - m0 - e0
            den_n = nn0 + nn1
            ok = (den_t >= delta) & (den_n >= delta)
            with np.errstate(divide="ignore", invalid="ignore"):
                tpr = np.where(ok, num_t / den_t, np.nan)
                tnr = np.where(ok, nn0 / den_n, np.nan)
            if np.all(np.isnan(tpr)):
                continue
            ext["tnr"] = [min(ext["tnr"][0], float(np.nanmin(tnr))), max(ext["tnr"][1], float(np.nanmax(tnr)))]
            for side, sign, j in (("max", 1.0, 1), ("min", -1.0, 0)):
                best = sign * np.nanmax(sign * tpr)
                if sign * (best - ext["tpr"][j]) < -TIE_TOL:
                    continue
                ties = np.abs(tpr - best) <= TIE_TOL
                cand = np.where(ties, sign * tnr, -np.inf)
                ix = np.unravel_index(np.argmax(cand), cand.shape)
                if sign * (best - ext["tpr"][j]) > TIE_TOL or sign * (tnr[ix] - tie_tnr[side]) > 0:
                    tie_tnr[side] = float(tnr[ix])
                    arg[("tpr", side)] = (float(e1[ix[0], 0]), float(s0[ix[1]]))
                if sign * (best - ext["tpr"][j]) > 0:
                    ext["tpr"][j] = float(best)

        gs = stats_from_cells(cells, B)
        tpr_iv, tnr_iv = bounds(gs, B)
        closed = {"tpr": [tpr_iv.lower, tpr_iv.upper], "tnr": [tnr_iv.lower, tnr_iv.upper]}
        gaps = {key: max(abs(ext[key][0] - closed[key][0]), abs(ext[key][1] - closed[key][1]))
                for key in ext}

        def tnr_at(pair):
            e1, e0 = pair
            nn1, nn0 = r1 - m1 - e1, r0 - m0 - e0
            return nn0 / (nn0 + nn1)

        # the eta maximizing TPR should also maximize TNR, and likewise for the minima
        simult = {
            "max": abs(tnr_at(arg[("tpr", "max")]) - ext["tnr"][1]),
            "min": abs(tnr_at(arg[("tpr", "min")]) - ext["tnr"][0]),
        }
        bang = {}
        for which in ("upper", "lower"):
            bang[which] = rho(cells, extreme_eta(cells, B, which))
        passed = all(g <= 2 * grid_step for g in gaps.values()) and \
            all(s <= 2 * grid_step for s in simult.values())
        report["groups"][a] = {
            "grid": ext, "closed_form": closed, "gap": gaps,
            "argmax_tpr_sums": arg[("tpr", "max")], "argmin_tpr_sums": arg[("tpr", "min")],
            "simultaneity_gap": simult,
            "bang_bang": {"upper": list(bang["upper"]), "lower": list(bang["lower"])},
            "n_pairs": int(len(s1) * len(s0)),
            "passed": passed,
        }
        report["passed"] &= passed
    return report


def random_spec(rng, n_x=3, groups=("a", "b"), max_p10=0.0, monotone_mean=True,
                px_denominator=None):
    """Random spec for property tests.

    ``p10`` is drawn uniformly in ``[0, max_p10]`` per cell (capped so it does
    not exceed ``p01`` when ``monotone_mean``, keeping ``tau >= 0``).  With
    ``px_denominator`` the covariate probabilities are multiples of
    ``1 / px_denominator``.
    """
    n_g = len(groups)
    xs = np.arange(n_x, dtype=float)[:, None]
    if px_denominator:
        px = np.empty((n_g, n_x))
        for k in range(n_g):
            cuts = np.sort(rng.choice(np.arange(1, px_denominator), size=n_x - 1, replace=False))
            px[k] = np.diff(np.concatenate([[0], cuts, [px_denominator]])) / px_denominator
    else:
        px = rng.dirichlet(np.ones(n_x), size=n_g)
    p = np.empty((n_g, n_x, 4))
    for k in range(n_g):
        for j in range(n_x):
            base = rng.dirichlet(np.ones(4))
            p01 = base[1]
            p10 = rng.uniform(0, max_p10) if max_p10 > 0 else 0.0
            if monotone_mean:
                p10 = min(p10, p01)
            p10 = min(p10, 1 - p01)
            rest = 1 - p01 - p10
            share = base[0] / (base[0] + base[3]) if base[0] + base[3] > 0 else 0.5
            p00 = rest * share
            p[k, j] = [p00, p01, p10, rest - p00]
    gp = np.full(n_g, 1.0 / n_g)
    return SyntheticSpec(xs, tuple(groups), gp, px, p, rng.uniform(0.2, 0.8, size=(n_g, n_x)))
