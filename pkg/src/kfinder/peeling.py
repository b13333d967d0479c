"""Peeling identifiers for the number of clusters.

`identify_k_with_w0` peels one tight cluster per iteration inside a truncated
SVD subspace, given the minimum cluster weight w0. `identify_k` sweeps a guess
for w0 downward, pruning each peeled set and accepting the first guess whose
partition passes the separation/prune/size conditions.
"""

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import _kernels
from .errors import AlgoError
from .linalg import PointSet, svd_subspace
from .one_means import cost_matrix


def _ceil(v):
    """Ceiling with a guard against float noise just above an integer."""
    return int(math.ceil(v - 1e-9))


def k_bound(w0):
    """Upper bound ceil(1/w0) on the number of clusters at weight floor w0."""
    return _ceil(1.0 / w0)


@dataclass(frozen=True)
class AlgoConstants:
    """Tunable coefficients of the identifiers.

    Defaults follow the procedure definitions; quantitative recovery tests
    relax the leading coefficients and document the values they use.
    """

    r_coeff: float = 2000.0
    prune_c: float = 1e12
    prune_exp: float = 12.0
    sep_test_coeff: float = 800.0
    sep_test_exp: float = 4.0
    stop_fraction: float = 0.1
    seed_fraction: float = 0.5
    w_step: float | None = None  # None -> 1/n
    tight_floor: int | None = None  # None -> max(2, ceil(sqrt(n) ln n / 100))
    convex_ratio_coeff: float = 72000.0
    convex_ratio_exp: float = 3.5
    convex_zero_tol: float = 1e-12
    convex_nu_projected: bool = False
    solver_max_iter: int = 5000
    solver_plateau: int = 200
    solver_restart: int = 100
    solver_tol: float = 1e-4
    solver_step: float = 0.5

    def __post_init__(self):
        for name in ("r_coeff", "prune_c", "sep_test_coeff", "convex_ratio_coeff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"bad-constant: {name} must be positive")
        for name in ("prune_exp", "sep_test_exp", "convex_ratio_exp"):
            if getattr(self, name) < 0:
                raise ValueError(f"bad-constant: {name} must be nonnegative")
        if not 0.0 < self.stop_fraction < 1.0:
            raise ValueError("bad-constant: stop_fraction must lie in (0,1)")
        if not 0.0 < self.seed_fraction < 1.0:
            raise ValueError("bad-constant: seed_fraction must lie in (0,1)")
        if self.w_step is not None and self.w_step <= 0:
            raise ValueError("bad-constant: w_step must be positive")

    def tight_size_floor(self, n):
        """Minimum subset size subject to the tightness tests.

        Floored at 2: a singleton has sigma = 0 and would count as tight
        against any spread set.
        """
        if self.tight_floor is not None:
            return max(2, int(self.tight_floor))
        return max(2, _ceil(math.sqrt(n) * math.log(n) / 100.0))

    def with_overrides(self, **kw):
        return replace(self, **kw)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class IterationRecord:
    """One peel: the seed found, the admission radius and the removed set."""

    seed: np.ndarray
    seed_mean: np.ndarray
    seed_sigma: float
    radius: float
    peeled: np.ndarray
    peeled_mean: np.ndarray
    peeled_sigma: float


@dataclass
class SweepRecord:
    """One tried guess in the w-sweep with its first failed condition."""

    w_hat: float
    k_hat: int
    failed: str | None
    clusters: list
    pruned_sizes: list


@dataclass
class RunReport:
    """Full trace of an identification run."""

    k_hat: int
    iterations: list
    constants: AlgoConstants
    rng_seed: int
    residual: np.ndarray
    flags: tuple = ()
    w_hat_trace: list = field(default_factory=list)
    accepted_w: float | None = None
    subspace_rank: int = 0
    w0: float | None = None

    def peeled_sets(self):
        return [it.peeled for it in self.iterations]

    def validate_partition(self, n):
        """Peeled sets are disjoint and, with the residual, cover [0, n)."""
        seen = np.concatenate([it.peeled for it in self.iterations] + [self.residual])
        if seen.size != n or np.unique(seen).size != n:
            raise AssertionError("peeled sets + residual do not partition the input")
        return True


def _sigma_sq_rows(rows):
    m = rows.shape[0]
    if m == 1:
        return 0.0
    d = rows.shape[1]
    # shifting by the first row keeps coincident data exactly zero-variance
    rows = rows - rows[0]
    if d <= m:
        B = rows - rows.mean(axis=0)
        G = B.T @ B
    else:
        G = np.asarray(_kernels.center_gram(np.ascontiguousarray(rows @ rows.T)))
    return max(_kernels.top_eig(G), 0.0) / m


def _shifted_mean(rows):
    """Mean computed relative to the first row: exact for coincident rows."""
    return rows[0] + (rows - rows[0]).mean(axis=0)


class _SweepCache:
    """Reusable per-rank data for the sweep: subspace, coordinates and the
    full-set cost matrix for the first peel of every guess."""

    def __init__(self, ps):
        self.ps = ps
        self.rank = None
        self.subspace = None
        self.coords = None
        self.cum = None
        self.order = None

    def get(self, rank):
        if rank != self.rank:
            self.rank = rank
            self.subspace = svd_subspace(self.ps, rank)
            self.coords = self.ps.points @ self.subspace.basis.T
            self.cum, self.order = cost_matrix(self.coords)
        return self


def identify_k_with_w0(
    ps,
    w0,
    constants=None,
    rng_seed=0,
    _cache=None,
    _abort_below=None,
):
    """Estimate k by peeling radius-balls around tight seed sets.

    Per iteration: find the size-ceil(seed_fraction*w0*n) subset of the
    projected remaining points with minimum centered 1-means cost, then peel
    every remaining point within radius r_j of its projected mean, where
    r_j = r_coeff * kbound^2 * sigma_M(seed) / w0^3.

    `_abort_below`, used by the sweep, stops the run as soon as a peeled set
    is smaller than the given size (the partition is already rejectable).
    """
    constants = constants or AlgoConstants()
    if not 0.0 < w0 <= 1.0:
        raise ValueError("bad-weight: w0 must lie in (0, 1]")
    n = ps.n
    if n < 2 or w0 * n < 2.0:
        raise ValueError("weight-too-small: need w0 * n >= 2 and n >= 2")

    kb = k_bound(w0)
    rank = min(kb, n, ps.d)
    if _cache is not None:
        cache = _cache.get(rank)
        sub, coords = cache.subspace, cache.coords
    else:
        cache = None
        sub = svd_subspace(ps, rank)
        coords = ps.points @ sub.basis.T

    seed_size = _ceil(constants.seed_fraction * w0 * n)
    stop_at = constants.stop_fraction * w0 * n
    remaining = np.arange(n, dtype=np.int64)
    iters = []
    flags = []

    while True:
        if remaining.size <= stop_at:
            break
        if seed_size > remaining.size:
            flags.append("exhausted")
            break
        if cache is not None and remaining.size == n:
            cum, order = cache.cum, cache.order
            rows = coords
        else:
            rows = coords[remaining]
            cum, order = cost_matrix(rows)
        costs = cum[:, seed_size - 1]
        center_pos = int(np.argmin(costs))
        seed_pos = order[center_pos, :seed_size]
        seed_ids = np.sort(remaining[seed_pos])

        seed_rows = coords[seed_ids]
        mu = _shifted_mean(seed_rows)
        sig = math.sqrt(_sigma_sq_rows(seed_rows))
        r = constants.r_coeff * kb * kb * sig / w0**3

        diff = coords[remaining] - mu
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        admit = dist <= r
        admit[center_pos] = True  # the seed center always peels: termination
        peeled = remaining[admit]

        peel_rows = coords[peeled]
        iters.append(
            IterationRecord(
                seed=seed_ids,
                seed_mean=sub.basis.T @ mu,
                seed_sigma=sig,
                radius=r,
                peeled=peeled,
                peeled_mean=sub.basis.T @ peel_rows.mean(axis=0),
                peeled_sigma=math.sqrt(_sigma_sq_rows(peel_rows)),
            )
        )
        remaining = remaining[~admit]
        if _abort_below is not None and peeled.size < _abort_below:
            flags.append("aborted-small-cluster")
            break
        if len(iters) >= n:
            flags.append("iteration-cap")
            break

    report = RunReport(
        k_hat=len(iters),
        iterations=iters,
        constants=constants,
        rng_seed=rng_seed,
        residual=remaining,
        flags=tuple(flags),
        subspace_rank=rank,
        w0=w0,
    )
    return report


def prune(ps, X, subspace, w_hat, constants=None, n_total=None):
    """Shave tight subsets off X until none remain.

    A subset T (|T| >= tight_size_floor) is tight when the average centered
    1-means cost of its projection stays strictly below
    w_hat^12 |T|^2 sigma_M(X)^2 / (c |X|^2); sigma_M(X) and |X| refer to the
    original X for the whole run. Removal candidates are scanned as the
    m nearest neighbours of each candidate center, smallest center index
    first, then smallest m.
    """
    constants = constants or AlgoConstants()
    X = np.sort(np.asarray(X, dtype=np.int64).reshape(-1))
    if X.size == 0:
        raise ValueError("empty-subset")
    if n_total is None:
        n_total = ps.n
    floor = constants.tight_size_floor(n_total)
    coords = ps.points[X] @ subspace.basis.T
    sig2 = _sigma_sq_rows(coords)
    thr_coeff = (
        w_hat**constants.prune_exp * sig2 / (constants.prune_c * float(X.size) ** 2)
    )

    keep = np.arange(X.size, dtype=np.int64)
    while keep.size >= floor and thr_coeff > 0.0:
        cum, order = cost_matrix(coords[keep])
        sizes = np.arange(floor, keep.size + 1, dtype=np.float64)
        # average cost < thr_coeff * m^2  <=>  total cost < thr_coeff * m^3
        bad = cum[:, floor - 1 :] < thr_coeff * sizes**3
        hits = np.argwhere(bad)
        if hits.size == 0:
            break
        c, mk = hits[0]
        m = floor + int(mk)
        remove_pos = keep[order[int(c), :m]]
        keep = np.setdiff1d(keep, remove_pos, assume_unique=False)
    return X[keep]


@dataclass
class PartitionConditions:
    """Independent evaluation of the three acceptance conditions."""

    a_pass: bool
    b_pass: bool
    c_pass: bool
    pruned: list
    pair_margins: list

    def first_failure(self):
        if not self.a_pass:
            return "a"
        if not self.b_pass:
            return "b"
        if not self.c_pass:
            return "c"
        return None

    def all_pass(self):
        return self.a_pass and self.b_pass and self.c_pass


def check_partition_conditions(ps, x_list, subspace, w_hat, constants=None, n_total=None):
    """Evaluate the acceptance conditions on peeled sets X_1..X_k.

    (a) projected means of every pair separated by
        sep_test_coeff / w_hat^sep_test_exp times the sum of their sigmas;
    (b) pruning keeps at least half of every set;
    (c) every set holds at least w_hat * n / 2 points.
    """
    constants = constants or AlgoConstants()
    if n_total is None:
        n_total = ps.n
    sets = [np.sort(np.asarray(x, dtype=np.int64).reshape(-1)) for x in x_list]
    if any(s.size == 0 for s in sets):
        raise ValueError("empty-subset")
    total = sum(s.size for s in sets)
    if total and np.unique(np.concatenate(sets)).size != total:
        raise ValueError("not-a-partition: peeled sets overlap")

    coords = [ps.points[s] @ subspace.basis.T for s in sets]
    mus = [c.mean(axis=0) for c in coords]
    sigs = [math.sqrt(_sigma_sq_rows(c)) for c in coords]

    a_pass = True
    margins = []
    coeff = constants.sep_test_coeff / w_hat**constants.sep_test_exp
    for h in range(len(sets)):
        for j in range(h + 1, len(sets)):
            gap = float(np.linalg.norm(mus[h] - mus[j]))
            need = coeff * (sigs[h] + sigs[j])
            margins.append((h, j, gap, need))
            if gap < need:
                a_pass = False

    pruned = [
        prune(ps, s, subspace, w_hat, constants, n_total=n_total) for s in sets
    ]
    b_pass = all(p.size >= s.size / 2.0 for p, s in zip(pruned, sets))
    c_pass = all(s.size >= w_hat * n_total / 2.0 for s in sets)
    return PartitionConditions(a_pass, b_pass, c_pass, pruned, margins)


def identify_k(ps, constants=None, rng_seed=0):
    """Estimate k without knowing w0: sweep guesses downward from 1.

    Each guess w runs the peeling identifier, prunes every peeled set and
    accepts the first w whose partition passes conditions (a), (b), (c). The
    returned report carries the full trace of rejected guesses.
    """
    constants = constants or AlgoConstants()
    n = ps.n
    if n < 2:
        raise ValueError("weight-too-small: need n >= 2")

    if constants.w_step is None:
        w_values = [(j / n, j) for j in range(n, 1, -1)]
    else:
        w_values = []
        w = 1.0
        while w * n >= 2.0 - 1e-9:
            w_values.append((w, None))
            w = w - constants.w_step

    cache = _SweepCache(ps)
    trace = []
    for w_hat, _j in w_values:
        abort_below = w_hat * n / 2.0
        run = identify_k_with_w0(
            ps,
            w_hat,
            constants,
            rng_seed=rng_seed,
            _cache=cache,
            _abort_below=abort_below,
        )
        sets = run.peeled_sets()
        if "aborted-small-cluster" in run.flags:
            trace.append(
                SweepRecord(w_hat, run.k_hat, "c", sets, [s.size for s in sets])
            )
            continue
        conds = check_partition_conditions(
            ps, sets, cache.subspace, w_hat, constants, n_total=n
        )
        failed = conds.first_failure()
        trace.append(
            SweepRecord(w_hat, run.k_hat, failed, sets, [p.size for p in conds.pruned])
        )
        if failed is None:
            run.w_hat_trace = trace
            run.accepted_w = w_hat
            return run
    raise AlgoError(
        "no-acceptable-w",
        "no guess for the minimum weight passed conditions (a)-(c)",
        payload=trace,
    )
