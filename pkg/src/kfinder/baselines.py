"""Baselines and hardness gadgets: Lloyd's k-means with k-means++ seeding,
the elbow estimator, the 3-cover reduction to the tight-subset decision
problem, and the tightness-contrast demonstration."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .generate import sample_gaussian_mixture, spherical_mixture
from .linalg import Clustering, PointSet, sigma


def _kmeanspp_centers(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        tot = d2.sum()
        if tot <= 0:
            centers[j] = X[int(rng.integers(n))]
        else:
            r = rng.random() * tot
            idx = int(np.searchsorted(np.cumsum(d2), r))
            centers[j] = X[min(idx, n - 1)]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _lloyd_run(X, centers, max_iter=300):
    k = centers.shape[0]
    labels = None
    for _ in range(max_iter):
        new_labels, dmin = _kernels.lloyd_assign(X, centers)
        new_labels = np.asarray(new_labels)
        centers_new, counts = _kernels.lloyd_update(X, new_labels, k)
        centers_new = np.array(centers_new)
        counts = np.asarray(counts)
        for c in np.nonzero(counts == 0)[0]:
            # empty cluster: restart it at the farthest point
            far = int(np.argmax(dmin))
            centers_new[c] = X[far]
            new_labels[far] = c
            dmin[far] = 0.0
        if labels is not None and np.array_equal(labels, new_labels):
            centers = centers_new
            break
        labels = new_labels
        centers = centers_new
    labels, dmin = _kernels.lloyd_assign(X, centers)
    return np.asarray(labels), centers, float(np.sum(dmin))


def lloyd_kmeans(ps, k, restarts=1, seed=0, init_centers=None):
    """Best-of-restarts Lloyd with k-means++ seeding.

    Each run seeds by D^2 sampling and iterates to an assignment fixpoint
    (or 300 iterations); empty clusters are re-seeded at the farthest point.
    `init_centers`, when given, is tried as one extra start.
    """
    if k > ps.n:
        raise ValueError("k-too-large: need k <= n")
    X = np.ascontiguousarray(ps.points)
    rng = np.random.default_rng(seed)
    best = None
    starts = [_kmeanspp_centers(X, k, rng) for _ in range(max(1, restarts))]
    if init_centers is not None:
        starts.append(np.array(init_centers, dtype=np.float64))
    for c0 in starts:
        labels, centers, cost = _lloyd_run(X, c0.copy())
        if best is None or cost < best[2]:
            best = (labels, centers, cost)
    labels, centers, cost = best
    return Clustering(ps, labels), cost, centers


@dataclass
class ElbowResult:
    deltas: list  # (k, best k-means cost)
    ratios: list  # (k, delta_{k-1} / delta_k)
    k_star: int


def elbow_estimate(ps, k_max, restarts=1, seed=0):
    """Elbow estimator: argmax over k in [2, k_max] of delta_{k-1}/delta_k.

    Best-so-far costs inherit centers across k (previous best centers plus
    the farthest point start), which keeps delta_k nonincreasing. Zero-cost
    plateaus give infinite ratios; the smallest such k wins ties.
    """
    if not 2 <= k_max <= ps.n - 1:
        raise ValueError("bad-kmax: need 2 <= k_max <= n-1")
    X = ps.points
    deltas = []
    prev_centers = None
    for k in range(1, k_max + 1):
        inherit = None
        if prev_centers is not None:
            _, dmin = _kernels.lloyd_assign(
                np.ascontiguousarray(X), np.ascontiguousarray(prev_centers)
            )
            far = X[int(np.argmax(np.asarray(dmin)))]
            inherit = np.vstack([prev_centers, far])
        _, cost, centers = lloyd_kmeans(
            ps, k, restarts=restarts, seed=seed + 7919 * k, init_centers=inherit
        )
        deltas.append((k, cost))
        prev_centers = centers
    ratios = []
    for k in range(2, k_max + 1):
        num = deltas[k - 2][1]
        den = deltas[k - 1][1]
        if den <= 0.0:
            r = math.inf if num > 0 else 1.0
        else:
            r = num / den
        ratios.append((k, r))
    best_r = max(r for _, r in ratios)
    best_k = next(k for k, r in ratios if r == best_r)  # ties -> smaller k
    return ElbowResult(deltas, ratios, best_k)


class ThreeCoverInstance:
    """Set system: all sets of size 3, every element in exactly 3 sets."""

    def __init__(self, universe_size, sets):
        m = int(universe_size)
        if m % 3 != 0 or m < 3:
            raise ValueError("malformed-3cover: universe size must be a multiple of 3")
        norm = []
        degree = np.zeros(m + 1, dtype=np.int64)
        for s in sets:
            t = tuple(sorted(int(e) for e in s))
            if len(t) != 3 or len(set(t)) != 3:
                raise ValueError("malformed-3cover: sets must have 3 distinct elements")
            if t[0] < 1 or t[-1] > m:
                raise ValueError("malformed-3cover: element out of range")
            for e in t:
                degree[e] += 1
            norm.append(t)
        if np.any(degree[1:] != 3):
            raise ValueError("malformed-3cover: every element must appear in exactly 3 sets")
        self.universe_size = m
        self.sets = norm

    @property
    def h(self):
        return self.universe_size // 3


def exact_cover_exists(inst):
    """Backtracking search for a disjoint cover of the universe."""
    m = inst.universe_size
    by_element = {e: [] for e in range(1, m + 1)}
    for i, s in enumerate(inst.sets):
        for e in s:
            by_element[e].append(i)

    covered = np.zeros(m + 1, dtype=bool)
    used = [False] * len(inst.sets)

    def rec(remaining):
        if remaining == 0:
            return True
        # branch on the uncovered element with fewest usable sets
        best_e, best_opts = None, None
        for e in range(1, m + 1):
            if covered[e]:
                continue
            opts = [
                i
                for i in by_element[e]
                if not used[i] and not any(covered[x] for x in inst.sets[i])
            ]
            if best_opts is None or len(opts) < len(best_opts):
                best_e, best_opts = e, opts
                if not opts:
                    return False
        for i in best_opts:
            used[i] = True
            for x in inst.sets[i]:
                covered[x] = True
            if rec(remaining - 3):
                return True
            used[i] = False
            for x in inst.sets[i]:
                covered[x] = False
        return False

    return rec(m)


def build_checkntsc_instance(inst):
    """One point per set in R^m: value sqrt(h/3) on the set's coordinates."""
    m = inst.universe_size
    h = inst.h
    val = math.sqrt(h) / math.sqrt(3.0)
    pts = np.zeros((len(inst.sets), m))
    for i, s in enumerate(inst.sets):
        for e in s:
            pts[i, e - 1] = val
    return PointSet(pts), h


def check_ntsc_decision_bruteforce(ps, h):
    """Exhaustive minimum of sigma over size-h subsets; decision at 1."""
    n = ps.n
    if math.comb(n, h) > 10**6:
        raise ValueError("too-large-for-bruteforce: C(n, h) exceeds 1e6")
    best_sigma_sq = math.inf
    best = None
    pts = ps.points
    for combo in itertools.combinations(range(n), h):
        idx = np.asarray(combo, dtype=np.int64)
        rows = pts[idx]
        rows = rows - rows[0]
        G = rows @ rows.T
        Gc = np.asarray(_kernels.center_gram(np.ascontiguousarray(G)))
        s2 = max(_kernels.top_eig(Gc), 0.0) / h
        if s2 < best_sigma_sq:
            best_sigma_sq = s2
            best = idx
    sig = math.sqrt(best_sigma_sq) if best is not None else 0.0
    return sig <= 1.0 + 1e-9, best, sig


def generate_three_cover(m, kind, seed=0, max_tries=2000):
    """Random degree-3 instances; `kind` selects cover existence.

    'yes': the union of three random partitions of [m] into triples (each
    partition is itself a cover). 'no': rejection-sample configuration-model
    instances until the backtracking oracle refutes a cover.
    """
    rng = np.random.default_rng(seed)
    if kind == "yes":
        sets = []
        for _ in range(3):
            perm = rng.permutation(m) + 1
            sets.extend(tuple(sorted(perm[i : i + 3])) for i in range(0, m, 3))
        return ThreeCoverInstance(m, sets)
    if kind != "no":
        raise ValueError("bad-kind: expected 'yes' or 'no'")
    for _ in range(max_tries):
        slots = np.repeat(np.arange(1, m + 1), 3)
        rng.shuffle(slots)
        sets = [slots[i : i + 3] for i in range(0, 3 * m, 3)]
        if any(len(set(s.tolist())) != 3 for s in sets):
            continue
        inst = ThreeCoverInstance(m, [tuple(sorted(s.tolist())) for s in sets])
        if not exact_cover_exists(inst):
            return inst
    raise RuntimeError("no-instance: failed to sample a coverless instance")


@dataclass
class ContrastReport:
    sigma_whole: float
    sigma_component: float
    sigma_ratio: float
    one_means_ratio: float
    in_regime: bool
    gap: float
    dim: float


def tightness_contrast_demo(seed=0, gap=20.0, dim=200, n=2000, halves=20):
    """Average 1-means cost barely drops on half subsets while sigma does.

    Two unit-variance spherical components separated by `gap`: random half
    subsets keep ~the whole-set average 1-means cost, but sigma of the whole
    set (about gap/2) dwarfs the per-component sigma. The 1-means clause is
    only meaningful when the noise energy d dominates gap^2/4.
    """
    means = np.zeros((2, dim))
    means[1, 0] = gap
    spec = spherical_mixture(means, 1.0)
    sample = sample_gaussian_mixture(spec, n, seed)
    pts = sample.points.points

    def avg_one_means(rows):
        mu = rows.mean(axis=0)
        return float(np.mean(np.sum((rows - mu) ** 2, axis=1)))

    whole = avg_one_means(pts)
    rng = np.random.default_rng((seed, 99))
    ratios = []
    for _ in range(halves):
        half = rng.choice(n, size=n // 2, replace=False)
        ratios.append(avg_one_means(pts[half]) / whole)
    s_whole = sigma(sample.points)
    comp_ids = np.nonzero(sample.labels == 1)[0]
    s_comp = sigma(sample.points, comp_ids)
    return ContrastReport(
        sigma_whole=s_whole,
        sigma_component=s_comp,
        sigma_ratio=s_whole / s_comp,
        one_means_ratio=float(np.mean(ratios)),
        in_regime=dim >= gap * gap / 2.0,
        gap=gap,
        dim=dim,
    )
