"""Convex-program identifier.

Each iteration selects a fractional subset y in [0,1]^|T| with mass m that
minimizes ||B_y|| / sqrt(m), where row i of B_y is y_i (x_i - nu). A scan
finds the largest mass m* whose optimum stays within a fixed factor of the
optimum at the base mass, the solution at m* is rounded by thresholding, and
the rounded set is peeled off.
"""

import math

import numpy as np

from . import _kernels
from .errors import AlgoError
from .linalg import sigma, svd_subspace
from .one_means import cost_matrix
from .peeling import AlgoConstants, RunReport, _ceil, _shifted_mean, k_bound


def spectral_norm_rows(B, v0=None):
    """||B|| via power iteration on the smaller Gram matrix.

    v0 warm-starts the iteration when it matches the Gram side.
    """
    m, d = B.shape
    if m == 0 or d == 0:
        return 0.0
    G = B.T @ B if d <= m else B @ B.T
    g = G.shape[0]
    if v0 is None or v0.shape[0] != g:
        v0 = _kernels.start_vector(g)
    lam, _ = _kernels.top_eig_vec(
        np.ascontiguousarray(G), np.ascontiguousarray(v0, dtype=np.float64),
        _kernels.POWER_TOL, max(_kernels.POWER_CAP_MIN, 10 * g),
    )
    return math.sqrt(max(lam, 0.0))


def selection_objective(rows, nu, y, m):
    """||B_y|| / sqrt(m) recomputed from scratch."""
    C = rows - np.asarray(nu, dtype=np.float64)
    return spectral_norm_rows(y.reshape(-1, 1) * C) / math.sqrt(m)


def spectral_subgradient(C, y):
    """Subgradient of y -> ||diag(y) C|| from the top singular pair.

    At points where the top singular value is simple this is the gradient:
    g_i = u_i (c_i . v).
    """
    B = y.reshape(-1, 1) * C
    d = C.shape[1]
    G = B.T @ B
    lam, v = _kernels.top_eig_vec(
        np.ascontiguousarray(G), _kernels.start_vector(d), 1e-14, 20000
    )
    s = math.sqrt(max(lam, 0.0))
    w = C @ v
    if s == 0.0:
        return np.zeros_like(y), 0.0, v
    u = (y * w) / s
    return u * w, s, v


class FractionalSelection:
    """Solution of the selection program: y in [0,1]^|T| with sum(y) = m."""

    __slots__ = ("indices", "y", "m", "objective", "direction", "iterations")

    def __init__(self, indices, y, m, objective, direction=None, iterations=0):
        y = np.asarray(y, dtype=np.float64)
        m = int(m)
        if abs(float(y.sum()) - m) > 1e-6:
            raise ValueError("bad-selection: mass must equal m within 1e-6")
        if y.min() < -1e-9 or y.max() > 1.0 + 1e-9:
            raise ValueError("bad-selection: entries must lie in [0,1]")
        self.indices = np.asarray(indices, dtype=np.int64)
        self.y = y
        self.m = m
        self.objective = float(objective)
        self.direction = direction
        self.iterations = int(iterations)


class RoundedSelection:
    """Thresholded 0/1 selection with the guarantees it achieved."""

    __slots__ = ("selected", "spectral_bound_ratio", "mass_deficit", "norm_before", "norm_after")

    def __init__(self, selected, ratio, deficit, norm_before, norm_after):
        self.selected = np.asarray(selected, dtype=np.int64)
        self.spectral_bound_ratio = float(ratio)
        self.mass_deficit = int(deficit)
        self.norm_before = float(norm_before)
        self.norm_after = float(norm_after)


def solve_convex(
    ps, subset, m, nu, tol=1e-4, constants=None, seed=0, warm=None, plateau=None
):
    """Minimize ||B_y||/sqrt(m) over {0 <= y <= 1, sum y = m} on the subset.

    Projected subgradient descent with best-iterate tracking; convergence is
    declared when the best objective stops improving by more than tol
    (relative) over `plateau` iterations (default: constants.solver_plateau).
    Deterministic given `seed`; `warm` may carry a previous
    FractionalSelection over the same subset.
    """
    constants = constants or AlgoConstants()
    if plateau is None:
        plateau = constants.solver_plateau
    ids = np.sort(np.asarray(subset, dtype=np.int64).reshape(-1))
    if ids.size == 0:
        raise ValueError("empty-subset")
    m = int(m)
    if m > ids.size:
        raise ValueError("infeasible: m exceeds |T|")
    if m < 1:
        raise ValueError("infeasible: need m >= 1")
    nu = np.asarray(nu, dtype=np.float64).reshape(-1)
    if nu.shape[0] != ps.d:
        raise ValueError("dim-mismatch")
    rows = ps.points[ids]
    C = np.ascontiguousarray(rows - nu)

    if m == ids.size:
        y = np.ones(ids.size)
        obj = spectral_norm_rows(C) / math.sqrt(m)
        return FractionalSelection(ids, y, m, obj, direction=None, iterations=0)

    if warm is not None and warm.y.shape[0] == ids.size:
        y0 = warm.y.copy()
        v0 = warm.direction if warm.direction is not None else None
    else:
        y0 = np.full(ids.size, m / ids.size)
        v0 = None
    if v0 is None:
        rng = np.random.default_rng(seed)
        v0 = rng.normal(size=ps.d)

    y, f, v, iters, converged = _kernels.selection_solve(
        C,
        y0,
        np.ascontiguousarray(v0, dtype=np.float64),
        m,
        constants.solver_max_iter,
        plateau,
        tol,
        constants.solver_step * math.sqrt(m),
        constants.solver_restart,
    )
    v = np.asarray(v)
    obj = spectral_norm_rows(y.reshape(-1, 1) * C, v0=v) / math.sqrt(m)
    sel = FractionalSelection(ids, y, m, obj, direction=np.asarray(v), iterations=iters)
    if not converged:
        raise AlgoError(
            "solver-stalled",
            f"no plateau within {constants.solver_max_iter} iterations",
            payload=sel,
        )
    return sel


def round_selection(fsel, w0, ps=None, nu=None):
    """Threshold a fractional selection at w0^2/20.

    Both guarantees are checked on every call: the spectral norm grows by at
    most 20/w0^2 and the integral mass falls short of m by at most w0^2 n/20.
    When `ps`/`nu` are omitted the spectral norms are reported as 0 ratios on
    an all-zero matrix.
    """
    thr = w0 * w0 / 20.0
    keep = fsel.y >= thr
    selected = fsel.indices[keep]
    deficit = max(0, fsel.m - int(np.count_nonzero(keep)))

    norm_before = norm_after = 0.0
    if ps is not None and nu is not None:
        rows = ps.points[fsel.indices]
        C = rows - np.asarray(nu, dtype=np.float64)
        norm_before = spectral_norm_rows(fsel.y.reshape(-1, 1) * C)
        norm_after = spectral_norm_rows(C[keep]) if selected.size else 0.0
    ratio = norm_after / norm_before if norm_before > 0 else 0.0

    limit = 20.0 / (w0 * w0)
    if ratio > limit + 1e-6:
        raise AssertionError("rounding spectral bound violated")
    if deficit > math.ceil(w0 * w0 * fsel.y.shape[0] / 20.0):
        raise AssertionError("rounding mass deficit violated")
    return RoundedSelection(selected, ratio, deficit, norm_before, norm_after)


class ConvexIterationRecord:
    """One peel of the convex identifier."""

    __slots__ = (
        "seed",
        "nu",
        "base_mass",
        "base_objective",
        "m_star",
        "objective_at_m_star",
        "threshold",
        "peeled",
        "mass_deficit",
        "spectral_bound_ratio",
        "flags",
    )

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw[name])


def identify_k_convex(ps, w0, constants=None, rng_seed=0):
    """Estimate k by repeatedly solving and rounding the selection program.

    Per iteration: a seed set of ceil(seed_fraction w0 n) projected points
    with minimum centered 1-means cost fixes the reference point nu; masses m
    are scanned upward from the base mass while the program optimum stays
    within convex_ratio_coeff / w0^convex_ratio_exp of the base optimum; the
    solution at the last passing mass is rounded and peeled.
    """
    constants = constants or AlgoConstants()
    if not 0.0 < w0 <= 1.0:
        raise ValueError("bad-weight: w0 must lie in (0, 1]")
    n = ps.n
    if n < 2 or w0 * n < 2.0:
        raise ValueError("weight-too-small: need w0 * n >= 2 and n >= 2")

    kb = k_bound(w0)
    rank = min(kb, n, ps.d)
    sub = svd_subspace(ps, rank)
    coords = ps.points @ sub.basis.T

    base_mass = _ceil(constants.seed_fraction * w0 * n)
    stop_at = constants.stop_fraction * w0 * n
    ratio = constants.convex_ratio_coeff / w0**constants.convex_ratio_exp
    zero_floor = constants.convex_zero_tol * sigma(ps) * math.sqrt(n)

    remaining = np.arange(n, dtype=np.int64)
    iters = []
    flags = []
    while True:
        if remaining.size <= stop_at:
            break
        if base_mass > remaining.size:
            flags.append("exhausted")
            break
        cum, order = cost_matrix(coords[remaining])
        center_pos = int(np.argmin(cum[:, base_mass - 1]))
        seed_ids = np.sort(remaining[order[center_pos, :base_mass]])
        if constants.convex_nu_projected:
            nu = sub.basis.T @ _shifted_mean(coords[seed_ids])
        else:
            nu = _shifted_mean(ps.points[seed_ids])

        base = solve_convex(
            ps, remaining, base_mass, nu, constants.solver_tol, constants, rng_seed
        )
        thr = ratio * base.objective if base.objective > zero_floor else zero_floor

        # ascending scan with early-exit batching: jump in strides while the
        # optimum stays under threshold, then walk the last stride one by one
        scan_plateau = min(60, constants.solver_plateau)
        sol = base
        m_star = base_mass
        prev = base

        def _solve_at(m, prev_sel):
            return solve_convex(
                ps, remaining, m, nu, constants.solver_tol, constants, rng_seed,
                warm=prev_sel, plateau=scan_plateau,
            )

        stride = 8
        top = remaining.size
        while m_star < top:
            m_jump = min(m_star + stride, top)
            cand = _solve_at(m_jump, prev)
            prev = cand
            if cand.objective <= thr:
                sol = cand
                m_star = m_jump
                continue
            # refine inside (m_star, m_jump)
            for m in range(m_star + 1, m_jump):
                cand = _solve_at(m, prev)
                prev = cand
                if cand.objective > thr:
                    break
                sol = cand
                m_star = m
            break

        it_flags = []
        rsel = round_selection(sol, w0, ps, nu)
        peeled = rsel.selected
        if peeled.size == 0:
            peeled = seed_ids
            it_flags.append("rounding-degenerate")
        iters.append(
            ConvexIterationRecord(
                seed=seed_ids,
                nu=nu,
                base_mass=base_mass,
                base_objective=base.objective,
                m_star=m_star,
                objective_at_m_star=sol.objective,
                threshold=thr,
                peeled=peeled,
                mass_deficit=rsel.mass_deficit,
                spectral_bound_ratio=rsel.spectral_bound_ratio,
                flags=tuple(it_flags),
            )
        )
        keep = ~np.isin(remaining, peeled, assume_unique=True)
        remaining = remaining[keep]
        if len(iters) >= n:
            flags.append("iteration-cap")
            break

    return RunReport(
        k_hat=len(iters),
        iterations=iters,
        constants=constants,
        rng_seed=rng_seed,
        residual=remaining,
        flags=tuple(flags),
        subspace_rank=rank,
        w0=w0,
    )
