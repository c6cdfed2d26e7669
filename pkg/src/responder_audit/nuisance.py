"""Cross-fitted estimates of mu0 = P(Y=1|T=0,X,A), mu1 = P(Y=1|T=1,X,A) and tau.

Two learners are provided: exact frequency binning over the distinct
covariate rows (for discrete features) and a logistic T-learner fit by IRLS.
Predictions for a unit always come from parameters fit on the other folds.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data_model import Dataset

logger = logging.getLogger(__name__)

ESTIMATORS = ("binning", "logistic")
DEFAULT_EPS = 1e-4
IRLS_MAX_ITER = 100
IRLS_TOL = 1e-8
IRLS_RIDGE = 1e-8


class EmptyCellError(ValueError):
    """A (fold, arm, covariate cell) needed for prediction has no training data."""


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class NuisanceModel:
    estimator_kind: str
    fold_assignments: np.ndarray
    eps: float = DEFAULT_EPS
    # (fold, arm) -> per-cell means (binning) or coefficient vector (logistic)
    params: dict = field(default_factory=dict)
    fallbacks: list = field(default_factory=list)


def make_folds(n, n_folds, rng):
    """Balanced random fold labels: counts differ by at most one."""
    return rng.permutation(np.arange(n) % n_folds)


def resplit_bootstrap(ds: Dataset, n_splits: int, seed: int, n_folds: int = 2) -> list[np.ndarray]:
    """Draw ``n_splits`` independent balanced partitions of the units.

    The first partition equals the one :func:`fit_predict` draws for the
    same seed, so ``n_splits=1`` reproduces the default single split.
    """
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    rng = np.random.default_rng(seed)
    return [make_folds(len(ds), n_folds, rng) for _ in range(n_splits)]


def design_matrix(ds: Dataset, include_group=True):
    """Features plus (optionally) one-hot group columns, reference level dropped."""
    cols = [ds.features]
    if include_group and len(ds.groups) > 1:
        onehot = np.stack([(ds.group == g).astype(float) for g in ds.groups[1:]], axis=1)
        cols.append(onehot)
    return np.hstack(cols)


def _cell_ids(X):
    if X.shape[1] == 0:
        return np.zeros(len(X), dtype=np.int64), 1
    _, inv = np.unique(X, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    return inv, int(inv.max()) + 1 if len(inv) else 0


def _fit_binning(cells, n_cells, y, train, arm_mask):
    sel = train & arm_mask
    counts = np.bincount(cells[sel], minlength=n_cells)
    sums = np.bincount(cells[sel], weights=y[sel], minlength=n_cells)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    return means, counts


def logistic_irls(X, y, max_iter=IRLS_MAX_ITER, tol=IRLS_TOL, ridge=IRLS_RIDGE):
    """Fit P(y=1|x) = sigmoid(x @ beta) by iteratively reweighted least squares.

    ``X`` must already contain an intercept column.  Returns ``(beta, converged)``.
    """
    n, p = X.shape
    beta = np.zeros(p)
    for _ in range(max_iter):
        eta = np.clip(X @ beta, -35, 35)
        prob = 1.0 / (1.0 + np.exp(-eta))
        w = prob * (1.0 - prob)
        H = X.T @ (X * w[:, None]) + ridge * np.eye(p)
        g = X.T @ (y - prob)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return beta, False
        beta = beta + step
        if not np.all(np.isfinite(beta)):
            return np.zeros(p), False
        if np.max(np.abs(step)) <= tol:
            return beta, True
    return beta, False


def fit_predict(ds: Dataset, kind: str = "binning", n_folds: int = 2, seed: int = 0,
                folds=None, eps: float = DEFAULT_EPS, include_group: bool = True,
                return_model: bool = False):
    """Populate ``mu0``, ``mu1`` and ``tau`` on ``ds`` by cross-fitting.

    Parameters
    ----------
    ds : Dataset
        Unscored (or scored; existing scores are replaced) dataset.
    kind : {"binning", "logistic"}
    n_folds : int
        Number of folds; 2 is a plain half/half sample split.
    seed : int
        Seeds the fold draw when ``folds`` is not given.
    folds : array of int, optional
        Explicit fold labels, e.g. from :func:`resplit_bootstrap`.
    eps : float
        Predictions are clipped to ``[eps, 1 - eps]``.
    include_group : bool
        Use the group label as a covariate.

    Returns
    -------
    Dataset, or ``(Dataset, NuisanceModel)`` when ``return_model`` is set.
    """
    if kind not in ESTIMATORS:
        raise ValueError(f"unknown estimator {kind!r}; expected one of {ESTIMATORS}")
    if folds is None:
        if n_folds < 2:
            raise ValueError("n_folds must be >= 2")
        folds = make_folds(len(ds), n_folds, np.random.default_rng(seed))
    folds = np.asarray(folds)
    fold_ids = np.unique(folds)
    if len(fold_ids) < 2:
        raise ValueError("cross-fitting needs at least two folds")

    X = design_matrix(ds, include_group)
    y = ds.outcome.astype(float)
    t = ds.treatment
    model = NuisanceModel(kind, folds, eps)
    preds = {0: np.empty(len(ds)), 1: np.empty(len(ds))}

    if kind == "binning":
        cells, n_cells = _cell_ids(X)
        for f in fold_ids:
            test = folds == f
            train = ~test
            for arm in (0, 1):
                means, counts = _fit_binning(cells, n_cells, y, train, t == arm)
                need = np.unique(cells[test])
                empty = need[counts[need] == 0]
                if len(empty):
                    row = X[cells == empty[0]][0]
                    raise EmptyCellError(
                        f"no training units with T={arm} outside fold {f} for covariate cell {row.tolist()}")
                model.params[(int(f), arm)] = means
                preds[arm][test] = means[cells[test]]
    else:
        Xd = np.hstack([np.ones((len(ds), 1)), X])
        for f in fold_ids:
            test = folds == f
            train = ~test
            for arm in (0, 1):
                sel = train & (t == arm)
                if not sel.any():
                    raise EmptyCellError(f"no training units with T={arm} outside fold {f}")
                beta, ok = logistic_irls(Xd[sel], y[sel])
                if not ok:
                    msg = (f"IRLS did not converge in {IRLS_MAX_ITER} iterations "
                           f"(fold {f}, T={arm}); using intercept-only fit")
                    warnings.warn(msg, ConvergenceWarning, stacklevel=2)
                    logger.warning(msg)
                    model.fallbacks.append((int(f), arm))
                    p = np.clip(y[sel].mean(), 1e-12, 1 - 1e-12)
                    beta = np.zeros(Xd.shape[1])
                    beta[0] = np.log(p / (1 - p))
                model.params[(int(f), arm)] = beta
                preds[arm][test] = 1.0 / (1.0 + np.exp(-np.clip(Xd[test] @ beta, -35, 35)))

    mu0 = np.clip(preds[0], eps, 1 - eps)
    mu1 = np.clip(preds[1], eps, 1 - eps)
    scored = ds.with_scores(mu0, mu1, mu1 - mu0)
    return (scored, model) if return_model else scored
