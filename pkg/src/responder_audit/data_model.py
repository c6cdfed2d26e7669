"""Unit-level data, delimited-file ingest and threshold policies."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_SCHEMA = {
    "id": "id",
    "group": "group",
    "treatment": "treatment",
    "outcome": "outcome",
    "mu0": "mu0",
    "mu1": "mu1",
    "tau": "tau",
}
REQUIRED_ROLES = ("id", "group", "treatment", "outcome")
SCORE_ROLES = ("mu0", "mu1", "tau")
TAU_CONSISTENCY_TOL = 1e-9


class DataError(ValueError):
    """Raised for malformed input data."""


@dataclass(frozen=True)
class UnitRecord:
    unit_id: str
    features: tuple
    group: str
    treatment: int
    outcome: int
    mu0_hat: float | None = None
    mu1_hat: float | None = None
    tau_hat: float | None = None


def _readonly(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented, immutable collection of units.

    Scores (``mu0``, ``mu1``, ``tau``) are ``None`` until populated either by
    ingest of external columns or by :func:`responder_audit.nuisance.fit_predict`.
    When both ``mu0`` and ``mu1`` are given and ``tau`` is not, ``tau`` is
    derived as ``mu1 - mu0``.
    """

    unit_ids: np.ndarray
    features: np.ndarray
    group: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    feature_names: tuple = ()
    mu0: np.ndarray | None = None
    mu1: np.ndarray | None = None
    tau: np.ndarray | None = None
    groups: tuple = field(default=(), compare=False)

    def __post_init__(self):
        n = len(self.unit_ids)
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim == 1:
            feats = feats.reshape(n, -1) if n else feats.reshape(0, len(self.feature_names))
        object.__setattr__(self, "unit_ids", _readonly(np.array([str(u) for u in self.unit_ids], dtype=object)))
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "group", _readonly(np.asarray(self.group, dtype=object).astype(str).astype(object)))
        t = np.asarray(self.treatment)
        y = np.asarray(self.outcome)
        for name, col in (("treatment", t), ("outcome", y)):
            if col.shape != (n,):
                raise DataError(f"{name} must have one entry per unit")
            if not np.all((col == 0) | (col == 1)):
                raise DataError(f"{name} must be binary 0/1")
        object.__setattr__(self, "treatment", _readonly(t.astype(np.int8)))
        object.__setattr__(self, "outcome", _readonly(y.astype(np.int8)))
        if feats.shape[0] != n:
            raise DataError("features must have one row per unit")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(feats.shape[1]))
        if len(names) != feats.shape[1]:
            raise DataError("feature_names does not match the feature matrix")
        object.__setattr__(self, "feature_names", names)

        mu0, mu1, tau = self.mu0, self.mu1, self.tau
        for name, col in (("mu0", mu0), ("mu1", mu1)):
            if col is not None:
                col = np.asarray(col, dtype=float)
                if col.shape != (n,) or np.any(~np.isfinite(col)):
                    raise DataError(f"{name} must be a finite score per unit")
                if np.any((col < 0) | (col > 1)):
                    raise DataError(f"{name}: score out of range [0, 1]")
        if tau is None and mu0 is not None and mu1 is not None:
            tau = np.asarray(mu1, dtype=float) - np.asarray(mu0, dtype=float)
        elif tau is not None:
            tau = np.asarray(tau, dtype=float)
            if tau.shape != (n,) or np.any(~np.isfinite(tau)):
                raise DataError("tau must be a finite score per unit")
            if mu0 is not None and mu1 is not None:
                diff = np.abs(tau - (np.asarray(mu1, float) - np.asarray(mu0, float)))
                if np.any(diff > TAU_CONSISTENCY_TOL):
                    raise DataError("tau disagrees with mu1 - mu0")
        for name, col in (("mu0", mu0), ("mu1", mu1), ("tau", tau)):
            object.__setattr__(self, name, None if col is None else _readonly(np.asarray(col, dtype=float)))

        seen = dict.fromkeys(self.group.tolist())
        object.__setattr__(self, "groups", tuple(seen))
        for g in self.groups:
            arms = set(self.treatment[self.group == g].tolist())
            if arms != {0, 1}:
                raise DataError(f"group {g!r} needs at least one treated and one control unit")

    def __len__(self):
        return len(self.unit_ids)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.feature_names != other.feature_names or len(self) != len(other):
            return False
        for name in ("unit_ids", "features", "group", "treatment", "outcome", "mu0", "mu1", "tau"):
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True

    @property
    def is_scored(self):
        return self.mu0 is not None and self.mu1 is not None and self.tau is not None

    @property
    def records(self):
        out = []
        for i in range(len(self)):
            out.append(UnitRecord(
                unit_id=self.unit_ids[i],
                features=tuple(self.features[i].tolist()),
                group=self.group[i],
                treatment=int(self.treatment[i]),
                outcome=int(self.outcome[i]),
                mu0_hat=None if self.mu0 is None else float(self.mu0[i]),
                mu1_hat=None if self.mu1 is None else float(self.mu1[i]),
                tau_hat=None if self.tau is None else float(self.tau[i]),
            ))
        return out

    def group_mask(self, a):
        if a not in self.groups:
            raise KeyError(f"group {a!r} not found; available: {list(self.groups)}")
        return self.group == a

    def with_scores(self, mu0, mu1, tau=None):
        return Dataset(self.unit_ids, self.features, self.group, self.treatment,
                       self.outcome, self.feature_names, mu0=mu0, mu1=mu1, tau=tau)

    def without_scores(self):
        return Dataset(self.unit_ids, self.features, self.group, self.treatment,
                       self.outcome, self.feature_names)

    def take(self, idx):
        idx = np.asarray(idx)
        pick = (lambda c: None if c is None else c[idx])
        return Dataset(self.unit_ids[idx], self.features[idx], self.group[idx],
                       self.treatment[idx], self.outcome[idx], self.feature_names,
                       mu0=pick(self.mu0), mu1=pick(self.mu1), tau=pick(self.tau))

    @classmethod
    def from_records(cls, records: Iterable[UnitRecord], feature_names: Sequence[str] = ()):
        records = list(records)
        def col(attr):
            vals = [getattr(r, attr) for r in records]
            if all(v is None for v in vals):
                return None
            if any(v is None for v in vals):
                raise DataError(f"{attr} must be present for all records or none")
            return np.array(vals, dtype=float)
        n_feat = len(records[0].features) if records else len(feature_names)
        return cls(
            unit_ids=[r.unit_id for r in records],
            features=np.array([r.features for r in records], dtype=float).reshape(len(records), n_feat),
            group=[r.group for r in records],
            treatment=[r.treatment for r in records],
            outcome=[r.outcome for r in records],
            feature_names=tuple(feature_names),
            mu0=col("mu0_hat"), mu1=col("mu1_hat"), tau=col("tau_hat"),
        )


@dataclass(frozen=True)
class Policy:
    """Either ``Policy.threshold(theta)`` or ``Policy.explicit(z)``."""

    kind: str
    theta: float | None = None
    assignment: tuple | None = None
    description: str = ""

    @classmethod
    def threshold(cls, theta, description=""):
        return cls("threshold", theta=float(theta),
                   description=description or f"treat iff tau_hat >= {theta}")

    @classmethod
    def explicit(cls, assignment, description="explicit assignment"):
        z = tuple(int(v) for v in assignment)
        if any(v not in (0, 1) for v in z):
            raise ValueError("explicit assignment must be 0/1")
        return cls("explicit", assignment=z, description=description)


def threshold_assignment(tau, theta):
    """Z = 1[tau >= theta]; ties are treated."""
    return (np.asarray(tau, dtype=float) >= theta).astype(np.int8)


def apply_policy(ds: Dataset, p: Policy) -> np.ndarray:
    if p.kind == "threshold":
        if ds.tau is None:
            raise DataError("threshold policy requires tau_hat for every record")
        return threshold_assignment(ds.tau, p.theta)
    if p.kind == "explicit":
        z = np.asarray(p.assignment, dtype=np.int8)
        if z.shape != (len(ds),):
            raise DataError("explicit assignment length does not match dataset")
        return z
    raise ValueError(f"unknown policy kind {p.kind!r}")


def _parse_binary(raw, line, col):
    try:
        v = float(raw)
    except ValueError:
        v = math.nan
    if v not in (0.0, 1.0):
        raise DataError(f"row {line}: column {col!r} must be 0 or 1, got {raw!r}")
    return int(v)


def _parse_float(raw, line, col):
    try:
        v = float(raw)
    except ValueError:
        raise DataError(f"row {line}: column {col!r} is not numeric: {raw!r}") from None
    if not math.isfinite(v):
        raise DataError(f"row {line}: column {col!r} is not finite: {raw!r}")
    return v


def ingest(path, schema: Mapping[str, str] | None = None, delimiter=",",
           exclude: Sequence[str] = ()) -> Dataset:
    """Read a delimited text file with a header row into a validated Dataset.

    Parameters
    ----------
    path : str or path-like
        UTF-8 file with a header row.
    schema : mapping, optional
        Role -> column name overrides for ``id``, ``group``, ``treatment``,
        ``outcome`` and the optional score roles ``mu0``, ``mu1``, ``tau``.
    delimiter : str
        Field separator.
    exclude : sequence of str
        Columns ignored (neither role nor feature).

    Every remaining column is a numeric feature.  Row numbers in error
    messages count data rows from 1 (the header is row 0).
    """
    roles = dict(DEFAULT_SCHEMA)
    roles.update(schema or {})
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing = [roles[r] for r in REQUIRED_ROLES if roles[r] not in header]
        if missing:
            raise DataError(f"{path}: missing required column(s) {missing}")
        col_ix = {h: j for j, h in enumerate(header)}
        score_cols = {r: roles[r] for r in SCORE_ROLES if roles[r] in col_ix}
        used = {roles[r] for r in REQUIRED_ROLES} | set(score_cols.values()) | set(exclude)
        feature_names = tuple(h for h in header if h not in used)

        ids, groups, ts, ys, feats = [], [], [], [], []
        scores = {r: [] for r in score_cols}
        for line, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"row {line}: expected {len(header)} fields, got {len(row)}")
            get = lambda c: row[col_ix[c]].strip()
            ids.append(get(roles["id"]))
            g = get(roles["group"])
            if g == "":
                raise DataError(f"row {line}: missing group label")
            groups.append(g)
            ts.append(_parse_binary(get(roles["treatment"]), line, roles["treatment"]))
            ys.append(_parse_binary(get(roles["outcome"]), line, roles["outcome"]))
            feats.append([_parse_float(get(c), line, c) for c in feature_names])
            for r, c in score_cols.items():
                v = _parse_float(get(c), line, c)
                if r != "tau" and not 0.0 <= v <= 1.0:
                    raise DataError(f"row {line}: {c} score out of range [0, 1]: {v}")
                scores[r].append(v)

    arr = lambda r: np.array(scores[r], dtype=float) if r in scores else None
    return Dataset(
        unit_ids=ids,
        features=np.array(feats, dtype=float).reshape(len(ids), len(feature_names)),
        group=groups, treatment=ts, outcome=ys, feature_names=feature_names,
        mu0=arr("mu0"), mu1=arr("mu1"), tau=arr("tau"),
    )


def write_csv(ds: Dataset, path, delimiter=",", extra_columns: Mapping[str, Sequence] | None = None):
    """Serialize ``ds`` using the default schema; floats are written with ``repr``."""
    header = ["id", "group", "treatment", "outcome", *ds.feature_names]
    cols = [("mu0", ds.mu0), ("mu1", ds.mu1), ("tau", ds.tau)]
    cols = [(n, c) for n, c in cols if c is not None]
    header += [n for n, _ in cols]
    extra = dict(extra_columns or {})
    header += list(extra)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for i in range(len(ds)):
            row = [ds.unit_ids[i], ds.group[i], int(ds.treatment[i]), int(ds.outcome[i])]
            row += [repr(float(v)) for v in ds.features[i]]
            row += [repr(float(c[i])) for _, c in cols]
            row += [extra[k][i] for k in extra]
            w.writerow(row)
