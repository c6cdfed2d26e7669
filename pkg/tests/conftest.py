import itertools

import numpy as np
import pytest

from responder_audit.data_model import Dataset
from responder_audit.identification import GroupCells


def scored(tau, mu0, mu1=None, group="a", treatment=None, features=None):
    tau = np.asarray(tau, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = mu0 + tau if mu1 is None else np.asarray(mu1, dtype=float)
    n = len(tau)
    group = np.array([group] * n if isinstance(group, str) else group, dtype=object)
    if treatment is None:
        treatment = np.zeros(n, dtype=int)
        for g in set(group):
            idx = np.flatnonzero(group == g)
            treatment[idx[::2]] = 1
    feats = np.zeros((n, 0)) if features is None else np.asarray(features, dtype=float)
    return Dataset([f"u{i}" for i in range(n)], feats, group, treatment,
                   np.zeros(n, dtype=int), tuple(f"x{j}" for j in range(feats.shape[1])),
                   mu0=mu0, mu1=mu1, tau=tau)


@pytest.fixture
def two_unit():
    """Two units in group a: tau (0.2, 0.6), Z = (0, 1)."""
    ds = scored([0.2, 0.6], [0.3, 0.2], [0.5, 0.8])
    return ds, np.array([0, 1])


@pytest.fixture
def two_unit_cells():
    return GroupCells([0.2, 0.6], [0.3, 0.2], [0.5, 0.8], [0, 1], [0.5, 0.5], group="a")


def random_cells(rng, n, group="a", tau_nonneg=True):
    mu0 = rng.uniform(0.0, 0.8, n)
    lo = 0.0 if tau_nonneg else -mu0
    tau = rng.uniform(lo, 1.0 - mu0)
    return GroupCells(tau, mu0, mu0 + tau, rng.random(n) < 0.5, np.full(n, 1.0 / n), group=group)


def vertex_lp(values, weights, caps, budget):
    """Max of values @ x over the vertices of {weights @ x = budget, 0 <= x <= caps}.

    A vertex has at most one coordinate strictly between its bounds.
    """
    n = len(values)
    best = -np.inf
    for free in [None, *range(n)]:
        others = [i for i in range(n) if i != free]
        for bits in itertools.product((0, 1), repeat=len(others)):
            x = np.zeros(n)
            for i, b in zip(others, bits):
                x[i] = caps[i] * b
            rest = budget - weights @ x
            if free is None:
                if abs(rest) > 1e-12:
                    continue
            else:
                if weights[free] <= 0:
                    continue
                x[free] = rest / weights[free]
                if x[free] < -1e-12 or x[free] > caps[free] + 1e-12:
                    continue
            best = max(best, float(values @ x))
    return best
