"""Point-set container, spectral deviation sigma, truncated SVD subspaces.

sigma(X) is the maximum directional standard deviation of a point set: the
spectral norm of the mean-centered data matrix divided by sqrt(|X|), with the
divide-by-m variance convention throughout.
"""

import numpy as np

from . import _kernels


class PointSet:
    """Immutable n x d array of real coordinates."""

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.array(points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("bad-shape: expected an n x d matrix with n,d >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite: coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __setattr__(self, name, value):
        raise AttributeError("PointSet is immutable")

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def rows(self, subset=None):
        """Coordinate rows for an index subset (all rows when subset is None)."""
        if subset is None:
            return self.points
        return self.points[np.asarray(subset, dtype=np.int64)]

    def __len__(self):
        return self.n


def _check_subset(ps, subset):
    if subset is None:
        return np.arange(ps.n, dtype=np.int64)
    idx = np.asarray(subset, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise ValueError("empty-subset")
    if idx.min() < 0 or idx.max() >= ps.n:
        raise ValueError(f"bad-index: subset indices must lie in [0, {ps.n})")
    return idx


def mean(ps, subset=None):
    """Coordinate-wise average of the selected rows."""
    idx = _check_subset(ps, subset)
    return ps.points[idx].mean(axis=0)


def sigma_sq(ps, subset=None):
    """sigma(X)^2: top eigenvalue of the (biased) sample covariance."""
    idx = _check_subset(ps, subset)
    X = ps.points[idx]
    return _sigma_sq_of_rows(X)


def _sigma_sq_of_rows(X):
    m, d = X.shape
    if m == 1:
        return 0.0
    # shifting by the first row keeps coincident data exactly zero-variance
    X = X - X[0]
    if d <= m:
        B = X - X.mean(axis=0)
        G = B.T @ B
    else:
        # wide data: work with the m x m Gram of centered rows instead
        G = _kernels.center_gram(np.ascontiguousarray(X @ X.T))
    lam = _kernels.top_eig(G)
    return max(lam, 0.0) / m


def sigma(ps, subset=None):
    """Maximum directional standard deviation of the selected rows."""
    return float(np.sqrt(sigma_sq(ps, subset)))


def directional_sigma(ps, subset, v):
    """Root-mean-square of v.(x - mu) over the subset, for a unit vector v."""
    idx = _check_subset(ps, subset)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != ps.d:
        raise ValueError("dim-mismatch: direction length must equal d")
    if abs(v @ v - 1.0) > 2e-9:
        raise ValueError("not-unit-vector")
    X = ps.points[idx]
    t = (X - X.mean(axis=0)) @ v
    return float(np.sqrt(np.mean(t * t)))


class Subspace:
    """Orthonormal basis (rows) of a d'-dimensional subspace of R^d."""

    __slots__ = ("basis",)

    def __init__(self, basis):
        B = np.array(basis, dtype=np.float64, copy=True)
        if B.ndim != 2 or B.shape[0] < 1 or B.shape[0] > B.shape[1]:
            raise ValueError("bad-rank: basis must be d' x d with 1 <= d' <= d")
        gram = B @ B.T
        if np.max(np.abs(gram - np.eye(B.shape[0]))) > 1e-9:
            raise ValueError("not-orthonormal: basis rows must be orthonormal")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    def __setattr__(self, name, value):
        raise AttributeError("Subspace is immutable")

    @property
    def rank(self):
        return self.basis.shape[0]

    @property
    def ambient_dim(self):
        return self.basis.shape[1]

    def project_rows(self, X):
        """Project coordinate rows onto the subspace (ambient coordinates)."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.ambient_dim:
            raise ValueError("dim-mismatch")
        return (X @ self.basis.T) @ self.basis


def svd_subspace(ps, rank):
    """Top-`rank` right-singular subspace of the raw (uncentered) point matrix."""
    if rank < 1 or rank > min(ps.n, ps.d):
        raise ValueError("bad-rank: need 1 <= d' <= min(n, d)")
    # LAPACK SVD of the raw matrix; the eigendecomposition of A^T A stays an
    # independent oracle in the tests
    _, _, Vt = np.linalg.svd(ps.points, full_matrices=False)
    return Subspace(Vt[:rank])


def project(sub, ps):
    """PointSet of projections, expressed in the ambient d coordinates."""
    return PointSet(sub.project_rows(ps.points))


class ClusterStats:
    """Per-cluster summary: mean, sigma and size."""

    __slots__ = ("mean", "sigma", "size")

    def __init__(self, mean_vec, sigma_val, size):
        if size < 1:
            raise ValueError("empty-subset")
        if sigma_val < 0:
            raise ValueError("negative-sigma")
        self.mean = np.asarray(mean_vec, dtype=np.float64)
        self.sigma = float(sigma_val)
        self.size = int(size)

    @classmethod
    def from_points(cls, ps, subset=None):
        idx = _check_subset(ps, subset)
        return cls(mean(ps, idx), sigma(ps, idx), idx.size)


class Clustering:
    """Assignment of point indices to cluster labels, with per-cluster stats."""

    def __init__(self, ps, labels):
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != ps.n:
            raise ValueError("dim-mismatch: one label per point required")
        self.point_set = ps
        self.labels = labels
        uniq = np.unique(labels)
        self.cluster_indices = [np.nonzero(labels == u)[0] for u in uniq]
        self.cluster_labels = uniq

    @property
    def k(self):
        return len(self.cluster_indices)

    def stats(self, which):
        return ClusterStats.from_points(self.point_set, self.cluster_indices[which])


def sigma_sq_oracle(X):
    """Dense-eigendecomposition sigma^2 (test oracle, independent of kernels)."""
    X = np.asarray(X, dtype=np.float64)
    m = X.shape[0]
    B = X - X.mean(axis=0)
    return float(max(np.linalg.eigvalsh(B.T @ B / m)[-1], 0.0))
