"""Hot numeric kernels: numba-jitted fast path with a pure-numpy fallback.

Every kernel exists in two interchangeable flavours:

* a numpy implementation (always available), and
* a numba ``@njit`` compilation of either the same source or a loop-oriented
  twin, used by default when numba imports cleanly.

Set ``K_FINDER_PURE_NUMPY=1`` in the environment to force the numpy path.
``benchmarks/bench_kernels.py`` times both flavours side by side; agreement
between the two paths is covered by the test suite.
"""

import os

import numpy as np

PURE_NUMPY = os.environ.get("K_FINDER_PURE_NUMPY", "").strip().lower() in {
    "1", "true", "yes", "on",
}

try:
    if PURE_NUMPY:
        raise ImportError("numba disabled via K_FINDER_PURE_NUMPY")
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False
    _njit = None


# Power-iteration defaults: tolerance on the relative Rayleigh-quotient change
# and an iteration cap well above 10*dim (small Gram matrices with clustered
# spectra need the headroom to reach the 1e-9 oracle tolerance).
POWER_TOL = 1e-13
POWER_CAP_MIN = 600


def start_vector(g):
    """Deterministic quasi-random start vector (no RNG state involved)."""
    v = np.empty(g)
    mask = (1 << 64) - 1
    x = 12345
    for i in range(g):
        x = ((x + 0x9E3779B97F4A7C15) * 0xBF58476D1CE4E5B9) & mask
        v[i] = 1.0 + 0.25 * ((x % 1024) / 1024.0 - 0.5)
    return v / np.sqrt(v @ v)


def _top_eig_vec(G, v0, tol, max_iter):
    """Largest eigenvalue/eigenvector of a symmetric PSD matrix.

    Power iteration with a Rayleigh-quotient stopping rule (two consecutive
    relative changes below tol).
    """
    v = v0 / np.sqrt(v0 @ v0)
    scale = np.abs(G).max()
    if scale == 0.0:
        return 0.0, v
    lam = v @ (G @ v)
    stall = 0
    for _ in range(max_iter):
        w = G @ v
        nw = np.sqrt(w @ w)
        if nw <= 1e-300 * scale:
            return 0.0, v
        v = w / nw
        lam_new = v @ (G @ v)
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300 * scale):
            stall += 1
            if stall >= 2:
                lam = lam_new
                break
        else:
            stall = 0
        lam = lam_new
    if lam < 0.0:
        lam = 0.0
    return lam, v


def _pairwise_sqdist(X):
    """Dense matrix of squared euclidean distances between rows of X."""
    sq = np.sum(X * X, axis=1)
    D = sq.reshape(-1, 1) + sq.reshape(1, -1) - 2.0 * (X @ X.T)
    return np.maximum(D, 0.0)


def _center_gram(G):
    """Turn a raw Gram matrix into the Gram of mean-centered rows."""
    m = G.shape[0]
    rm = np.sum(G, axis=1) / m
    tot = np.sum(rm) / m
    return G - rm.reshape(-1, 1) - rm.reshape(1, -1) + tot


def _capped_simplex(z, m, iters):
    """Euclidean projection of z onto {0 <= y <= 1, sum(y) = m} by bisection."""
    n = z.shape[0]
    lo = np.min(z) - 1.0
    hi = np.max(z)
    gap = 1e-10 * max(1.0, hi - lo)  # bisection tolerance on the shift
    for _ in range(iters):
        if hi - lo <= gap:
            break
        tau = 0.5 * (lo + hi)
        s = 0.0
        for i in range(n):
            yi = z[i] - tau
            if yi > 1.0:
                yi = 1.0
            elif yi < 0.0:
                yi = 0.0
            s += yi
        if s > m:
            lo = tau
        else:
            hi = tau
    tau = 0.5 * (lo + hi)
    y = z - tau
    for i in range(n):
        if y[i] > 1.0:
            y[i] = 1.0
        elif y[i] < 0.0:
            y[i] = 0.0
    return y


def _selection_solve(C, y0, v0, m, max_iter, plateau, tol, step0, restart_every):
    """Projected subgradient descent for min ||diag(y) C|| / sqrt(m).

    C holds the rows x_i - nu. Returns (y_best, f_best, v, iters, converged)
    where v is the final top right-singular direction (reusable as a warm
    start across a scan over m) and converged reports whether the plateau
    rule fired before the iteration cap.
    """
    n, d = C.shape
    sqm = np.sqrt(np.float64(m))
    fm = np.float64(m)

    def _proj(z):
        lo = np.min(z) - 1.0
        hi = np.max(z)
        gap = 1e-10 * max(1.0, hi - lo)
        for _ in range(100):
            if hi - lo <= gap:
                break
            tau = 0.5 * (lo + hi)
            s = 0.0
            for i in range(n):
                yi = z[i] - tau
                if yi > 1.0:
                    yi = 1.0
                elif yi < 0.0:
                    yi = 0.0
                s += yi
            if s > fm:
                lo = tau
            else:
                hi = tau
        tau = 0.5 * (lo + hi)
        y = z - tau
        for i in range(n):
            if y[i] > 1.0:
                y[i] = 1.0
            elif y[i] < 0.0:
                y[i] = 0.0
        return y

    def _power(yv, vv, inner_tol, cap):
        lam = -1.0
        for _ in range(cap):
            u = (yv * yv) * (C @ vv)
            Mv = C.T @ u
            nm = np.sqrt(Mv @ Mv)
            if nm <= 1e-300:
                return 0.0, vv
            vv = Mv / nm
            lam_new = vv @ (C.T @ ((yv * yv) * (C @ vv)))
            if lam >= 0.0 and abs(lam_new - lam) <= inner_tol * max(lam_new, 1e-300):
                return lam_new, vv
            lam = lam_new
        return lam, vv

    y = _proj(y0.copy())
    v = v0 / np.sqrt(v0 @ v0)
    cmax = np.abs(C).max()
    if cmax == 0.0:
        return y, 0.0, v, 0, True

    lam, v = _power(y, v, 1e-12, 40 * d + 200)
    f = np.sqrt(max(lam, 0.0)) / sqm
    f_best = f
    y_best = y.copy()
    stall = 0
    t_local = 0
    step = step0
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        t_local += 1
        s = np.sqrt(max(lam, 0.0))
        if s <= 1e-14 * cmax * sqm:
            f_best = s / sqm
            y_best = y.copy()
            converged = True
            break
        w = C @ v
        g = y * w * w / s
        gn = np.sqrt(g @ g)
        if gn <= 1e-300:
            converged = True
            break
        eta = step / np.sqrt(np.float64(t_local))
        y = _proj(y - (eta / gn) * g)
        lam, v = _power(y, v, 1e-10, 60)
        f = np.sqrt(max(lam, 0.0)) / sqm
        if f < f_best - tol * max(f_best, 1e-300):
            f_best = f
            y_best = y.copy()
            stall = 0
        else:
            if f < f_best:
                f_best = f
                y_best = y.copy()
            stall += 1
            if stall >= plateau:
                converged = True
                break
            if stall % restart_every == 0:
                y = y_best.copy()
                step *= 0.5
                t_local = 1
    return y_best, f_best, v, it, converged


def _lloyd_assign_py(X, centers):
    """Nearest-center assignment; returns labels and squared distances."""
    D = (
        np.sum(X * X, axis=1).reshape(-1, 1)
        + np.sum(centers * centers, axis=1).reshape(1, -1)
        - 2.0 * (X @ centers.T)
    )
    labels = np.argmin(D, axis=1)
    dmin = np.maximum(D[np.arange(X.shape[0]), labels], 0.0)
    return labels.astype(np.int64), dmin


def _lloyd_assign_nb(X, centers):
    n, d = X.shape
    k = centers.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dmin = np.empty(n)
    for i in range(n):
        best = np.inf
        arg = 0
        for c in range(k):
            s = 0.0
            for j in range(d):
                t = X[i, j] - centers[c, j]
                s += t * t
            if s < best:
                best = s
                arg = c
        labels[i] = arg
        dmin[i] = best
    return labels, dmin


def _lloyd_update_py(X, labels, k):
    """Mean of each assigned group; empty groups keep count 0."""
    counts = np.bincount(labels, minlength=k)
    centers = np.zeros((k, X.shape[1]))
    for j in range(X.shape[1]):
        centers[:, j] = np.bincount(labels, weights=X[:, j], minlength=k)
    nz = counts > 0
    centers[nz] /= counts[nz].reshape(-1, 1).astype(np.float64)
    return centers, counts.astype(np.int64)


def _lloyd_update_nb(X, labels, k):
    n, d = X.shape
    centers = np.zeros((k, d))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(n):
        c = labels[i]
        counts[c] += 1
        for j in range(d):
            centers[c, j] += X[i, j]
    for c in range(k):
        if counts[c] > 0:
            for j in range(d):
                centers[c, j] /= counts[c]
    return centers, counts


def _gram_tight_test_nb(G, idx, lam_thr, tol, cap):
    """Tightness probe from a precomputed raw Gram matrix.

    Extracts the subset Gram, double-centers it and power-iterates. The
    Rayleigh quotient lower-bounds the top eigenvalue, so the test exits as
    soon as it reaches lam_thr (subset provably not tight). Returns
    (tight_candidate, lam) with lam meaningful only on full convergence.
    """
    s = idx.shape[0]
    sub = np.empty((s, s))
    for a in range(s):
        ia = idx[a]
        for b in range(s):
            sub[a, b] = G[ia, idx[b]]
    rm = np.sum(sub, axis=1) / s
    tot = np.sum(rm) / s
    for a in range(s):
        for b in range(s):
            sub[a, b] += tot - rm[a] - rm[b]
    scale = np.abs(sub).max()
    if scale == 0.0:
        return 0.0 < lam_thr, 0.0
    v = np.ones(s)
    for a in range(s):
        v[a] += 0.001 * (a % 7)
    v /= np.sqrt(v @ v)
    lam = v @ (sub @ v)
    if lam >= lam_thr:
        return False, lam
    stall = 0
    for _ in range(cap):
        w = sub @ v
        nw = np.sqrt(w @ w)
        if nw <= 1e-300 * scale:
            return 0.0 < lam_thr, 0.0
        v = w / nw
        lam_new = v @ (sub @ v)
        if lam_new >= lam_thr:
            return False, lam_new
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300 * scale):
            stall += 1
            if stall >= 2:
                lam = lam_new
                break
        else:
            stall = 0
        lam = lam_new
    if lam < 0.0:
        lam = 0.0
    return lam < lam_thr, lam


def _gram_tight_test_py(G, idx, lam_thr, tol, cap):
    sub = G[np.ix_(idx, idx)]
    s = idx.shape[0]
    rm = np.sum(sub, axis=1) / s
    tot = np.sum(rm) / s
    sub = sub - rm.reshape(-1, 1) - rm.reshape(1, -1) + tot
    scale = np.abs(sub).max()
    if scale == 0.0:
        return 0.0 < lam_thr, 0.0
    v = np.ones(s) + 0.001 * (np.arange(s) % 7)
    v /= np.sqrt(v @ v)
    lam = v @ (sub @ v)
    if lam >= lam_thr:
        return False, lam
    stall = 0
    for _ in range(cap):
        w = sub @ v
        nw = np.sqrt(w @ w)
        if nw <= 1e-300 * scale:
            return 0.0 < lam_thr, 0.0
        v = w / nw
        lam_new = v @ (sub @ v)
        if lam_new >= lam_thr:
            return False, lam_new
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300 * scale):
            stall += 1
            if stall >= 2:
                lam = lam_new
                break
        else:
            stall = 0
        lam = lam_new
    if lam < 0.0:
        lam = 0.0
    return lam < lam_thr, lam


def _gray_weak_scan_nb(pts, floor, coeff, power_tol, power_cap):
    """First subset (in Gray-code order) violating the tightness bound.

    Scans every subset T with |T| >= floor of the points `pts` (|C| <= 62),
    testing sigma^2(T) < |T|^2 * coeff. Returns the violating bitmask or 0.
    """
    s, d = pts.shape
    total = np.int64(1) << s
    sx = np.zeros(d)
    S = np.zeros((d, d))
    t = 0
    mask = np.int64(0)
    v = np.ones(d)
    for a in range(d):
        v[a] += 0.001 * (a % 7)
    for step in range(1, total):
        # trailing-zero bit of `step` flips between consecutive Gray codes
        j = 0
        x = step
        while x & 1 == 0:
            j += 1
            x >>= 1
        bit = np.int64(1) << j
        mask ^= bit
        if mask & bit:
            t += 1
            for a in range(d):
                sx[a] += pts[j, a]
                for b in range(d):
                    S[a, b] += pts[j, a] * pts[j, b]
        else:
            t -= 1
            for a in range(d):
                sx[a] -= pts[j, a]
                for b in range(d):
                    S[a, b] -= pts[j, a] * pts[j, b]
        if t < floor:
            continue
        rhs = coeff * t * t
        # covariance of the subset; sigma^2(T) is its top eigenvalue, and the
        # Rayleigh quotient bounds it from below, so most subsets prove
        # "not tight" after a couple of iterations
        M = S / t - np.outer(sx / t, sx / t)
        scale = np.abs(M).max()
        if scale == 0.0:
            lam = 0.0
        else:
            nv = np.sqrt(v @ v)
            vv = v / nv
            lam = vv @ (M @ vv)
            if lam >= rhs:
                v = vv
                continue
            stall = 0
            for _ in range(power_cap):
                w = M @ vv
                nw = np.sqrt(w @ w)
                if nw <= 1e-300 * scale:
                    lam = 0.0
                    break
                vv = w / nw
                lam_new = vv @ (M @ vv)
                if lam_new >= rhs:
                    lam = lam_new
                    break
                if abs(lam_new - lam) <= power_tol * max(abs(lam_new), 1e-300 * scale):
                    stall += 1
                    if stall >= 2:
                        lam = lam_new
                        break
                else:
                    stall = 0
                lam = lam_new
            v = vv
            if lam < 0.0:
                lam = 0.0
        if lam < rhs:
            return mask
    return np.int64(0)


def _gray_weak_scan_py(pts, floor, coeff, power_tol, power_cap):
    """Numpy twin of the weak scan: batched eigenvalues over Gray-ordered masks."""
    s, d = pts.shape
    total = 1 << s
    steps = np.arange(1, total, dtype=np.int64)
    masks = steps ^ (steps >> 1)
    members = ((masks[:, None] >> np.arange(s)[None, :]) & 1).astype(bool)
    sizes = members.sum(axis=1)
    ok = sizes >= floor
    if not ok.any():
        return np.int64(0)
    outer = (pts[:, :, None] * pts[:, None, :]).reshape(s, d * d)
    idx_all = np.nonzero(ok)[0]
    chunk = 8192
    for lo in range(0, idx_all.size, chunk):
        rows = idx_all[lo : lo + chunk]
        mem = members[rows].astype(np.float64)
        t = sizes[rows].astype(np.float64)
        sx = mem @ pts
        S = (mem @ outer).reshape(-1, d, d)
        mu = sx / t[:, None]
        cov = S / t[:, None, None] - mu[:, :, None] * mu[:, None, :]
        lam = np.linalg.eigvalsh(cov)[:, -1]
        bad = np.maximum(lam, 0.0) < coeff * t * t
        if bad.any():
            return np.int64(masks[rows[np.nonzero(bad)[0][0]]])
    return np.int64(0)


def _gray_line_scan_nb(tvals, floor, coeff):
    """1-d version of the Gray scan: tvals are scalar projections."""
    s = tvals.shape[0]
    total = np.int64(1) << s
    st = 0.0
    st2 = 0.0
    t = 0
    mask = np.int64(0)
    for step in range(1, total):
        j = 0
        x = step
        while x & 1 == 0:
            j += 1
            x >>= 1
        bit = np.int64(1) << j
        mask ^= bit
        if mask & bit:
            t += 1
            st += tvals[j]
            st2 += tvals[j] * tvals[j]
        else:
            t -= 1
            st -= tvals[j]
            st2 -= tvals[j] * tvals[j]
        if t < floor:
            continue
        mu = st / t
        var = st2 / t - mu * mu
        if var < 0.0:
            var = 0.0
        if var < coeff * t * t:
            return mask
    return np.int64(0)


def _gray_line_scan_py(tvals, floor, coeff):
    s = tvals.shape[0]
    total = 1 << s
    steps = np.arange(1, total, dtype=np.int64)
    masks = steps ^ (steps >> 1)
    members = ((masks[:, None] >> np.arange(s)[None, :]) & 1).astype(bool)
    sizes = members.sum(axis=1)
    ok = sizes >= floor
    if not ok.any():
        return np.int64(0)
    t = sizes[ok].astype(np.float64)
    st = members[ok] @ tvals
    st2 = members[ok] @ (tvals * tvals)
    var = np.maximum(st2 / t - (st / t) ** 2, 0.0)
    bad = var < coeff * t * t
    if bad.any():
        return np.int64(masks[np.nonzero(ok)[0][np.nonzero(bad)[0][0]]])
    return np.int64(0)


NUMPY_IMPLS = {
    "top_eig_vec": _top_eig_vec,
    "pairwise_sqdist": _pairwise_sqdist,
    "center_gram": _center_gram,
    "capped_simplex": _capped_simplex,
    "selection_solve": _selection_solve,
    "lloyd_assign": _lloyd_assign_py,
    "lloyd_update": _lloyd_update_py,
    "gray_weak_scan": _gray_weak_scan_py,
    "gray_line_scan": _gray_line_scan_py,
    "gram_tight_test": _gram_tight_test_py,
}

if NUMBA_ENABLED:
    NUMBA_IMPLS = {
        "top_eig_vec": _njit(cache=True)(_top_eig_vec),
        "pairwise_sqdist": _njit(cache=True)(_pairwise_sqdist),
        "center_gram": _njit(cache=True)(_center_gram),
        "capped_simplex": _njit(cache=True)(_capped_simplex),
        "selection_solve": _njit(cache=True)(_selection_solve),
        "lloyd_assign": _njit(cache=True)(_lloyd_assign_nb),
        "lloyd_update": _njit(cache=True)(_lloyd_update_nb),
        "gray_weak_scan": _njit(cache=True)(_gray_weak_scan_nb),
        "gray_line_scan": _njit(cache=True)(_gray_line_scan_nb),
        "gram_tight_test": _njit(cache=True)(_gram_tight_test_nb),
    }
    ACTIVE = NUMBA_IMPLS
else:
    NUMBA_IMPLS = None
    ACTIVE = NUMPY_IMPLS

top_eig_vec = ACTIVE["top_eig_vec"]
pairwise_sqdist = ACTIVE["pairwise_sqdist"]
center_gram = ACTIVE["center_gram"]
capped_simplex = ACTIVE["capped_simplex"]
selection_solve = ACTIVE["selection_solve"]
lloyd_assign = ACTIVE["lloyd_assign"]
lloyd_update = ACTIVE["lloyd_update"]
gray_weak_scan = ACTIVE["gray_weak_scan"]
gray_line_scan = ACTIVE["gray_line_scan"]
gram_tight_test = ACTIVE["gram_tight_test"]


def top_eig(G, tol=POWER_TOL, max_iter=None):
    """Largest eigenvalue of a symmetric PSD matrix via the active kernel."""
    g = G.shape[0]
    if max_iter is None:
        max_iter = max(POWER_CAP_MIN, 10 * g)
    lam, _ = top_eig_vec(np.ascontiguousarray(G), start_vector(g), tol, max_iter)
    return lam
