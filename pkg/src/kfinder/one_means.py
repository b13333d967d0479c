"""Exact solvers for the centered 1-means problems.

Centered 1-means restricts the center to be one of the input points; the
outlier variant additionally selects the best subset of a given size m around
the chosen center. Both are solved exactly by trying every candidate center
against stably sorted distances (O(n^2 log n)); ties always break toward the
smaller point index so results are reproducible.
"""

import numpy as np

from . import _kernels
from .linalg import _check_subset, sigma_sq


class CenteredOneMeansResult:
    __slots__ = ("center_index", "cost", "selected")

    def __init__(self, center_index, cost, selected):
        self.center_index = int(center_index)
        self.cost = float(cost)
        self.selected = np.asarray(selected, dtype=np.int64)

    def __repr__(self):
        return (
            f"CenteredOneMeansResult(center={self.center_index}, "
            f"cost={self.cost!r}, m={self.selected.size})"
        )


def _sorted_sqdist(rows):
    """Squared distances between rows, each row stably argsorted ascending."""
    D = np.asarray(_kernels.pairwise_sqdist(np.ascontiguousarray(rows)))
    order = np.argsort(D, axis=1, kind="stable")
    return D, order


def centered_one_means(ps, subset=None):
    """Best center drawn from the subset itself; exact optimum."""
    idx = _check_subset(ps, subset)
    rows = ps.points[idx]
    D = np.asarray(_kernels.pairwise_sqdist(np.ascontiguousarray(rows)))
    costs = D.sum(axis=1)
    best = int(np.argmin(costs))  # argmin returns the first (smallest index) tie
    return CenteredOneMeansResult(idx[best], costs[best], idx)


def outlier_centered_one_means(ps, subset=None, m=None):
    """Best size-m subset around the best center; exact optimum.

    For every candidate center the m nearest points (center included, distance
    ties broken by point index) minimize the cost for that center; the best
    center wins, again breaking ties by index.
    """
    idx = _check_subset(ps, subset)
    if m is None:
        m = idx.size
    m = int(m)
    if m < 1:
        raise ValueError("m-too-small: need m >= 1")
    if m > idx.size:
        raise ValueError("m-too-large: m exceeds subset size")
    idx = np.sort(idx)  # global index order makes stable ties canonical
    rows = ps.points[idx]
    D, order = _sorted_sqdist(rows)
    prefix = np.take_along_axis(D, order, axis=1)[:, :m].sum(axis=1)
    best = int(np.argmin(prefix))
    selected = np.sort(idx[order[best, :m]])
    return CenteredOneMeansResult(idx[best], prefix[best], selected)


def cost_matrix(rows):
    """Per-center cumulative costs: entry [c, t] = cost of the (t+1) nearest.

    Shared machinery for the tight-subset sweep; rows must follow the caller's
    canonical (index-sorted) order.
    """
    D, order = _sorted_sqdist(rows)
    return np.cumsum(np.take_along_axis(D, order, axis=1), axis=1), order


def sigma_cost_bracket_check(ps, subset=None, dim=None):
    """True iff sigma^2 <= opt/|X| <= 4 d sigma^2 (+1e-9) for the subset.

    `dim` overrides the ambient dimension, e.g. with the subspace rank when
    the rows are projections living in a lower-dimensional flat.
    """
    idx = _check_subset(ps, subset)
    d = ps.d if dim is None else int(dim)
    s2 = sigma_sq(ps, idx)
    avg = centered_one_means(ps, idx).cost / idx.size
    return s2 <= avg + 1e-9 and avg <= 4.0 * d * s2 + 1e-9
