import numpy as np
import pytest

from kfinder import (
    PointSet,
    Subspace,
    directional_sigma,
    mean,
    project,
    sigma,
    sigma_sq,
    svd_subspace,
)
from kfinder.linalg import ClusterStats, sigma_sq_oracle


def random_pointset(rng, n_max=30, d_max=6):
    n = int(rng.integers(1, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    scale = rng.uniform(0.05, 20.0)
    return PointSet(rng.normal(size=(n, d)) * scale + rng.normal(size=d) * 5)


class TestPointSet:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            PointSet([[1.0, np.nan]])
        with pytest.raises(ValueError):
            PointSet([[np.inf, 0.0]])

    def test_immutable(self):
        ps = PointSet([[1.0, 2.0]])
        with pytest.raises(ValueError):
            ps.points[0, 0] = 3.0
        with pytest.raises(AttributeError):
            ps.points = np.zeros((1, 2))


class TestMean:
    def test_single_point(self):
        ps = PointSet([[0.0, 0.0]])
        assert np.allclose(mean(ps, [0]), [0.0, 0.0])

    def test_symmetry(self):
        ps = PointSet([[1.0, 0.0], [-1.0, 0.0]])
        assert np.allclose(mean(ps), [0.0, 0.0])

    def test_hand_sum(self):
        ps = PointSet([[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]])
        assert np.allclose(mean(ps), [1.0, 1.0])

    def test_empty_subset(self):
        ps = PointSet([[0.0, 0.0]])
        with pytest.raises(ValueError, match="empty-subset"):
            mean(ps, [])


class TestSigma:
    def test_single_point(self):
        assert sigma(PointSet([[5.0, 5.0]])) == 0.0

    def test_unit_pair(self):
        assert sigma(PointSet([[1.0, 0.0], [-1.0, 0.0]])) == pytest.approx(1.0)

    def test_cross(self):
        ps = PointSet([[1, 0], [-1, 0], [0, 1], [0, -1]])
        assert sigma(ps) == pytest.approx(np.sqrt(0.5), abs=1e-9)

    def test_matches_eigen_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            ps = random_pointset(rng)
            want = sigma_sq_oracle(ps.points)
            got = sigma_sq(ps)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)

    def test_subset_monotonicity(self):
        # |S| sigma(S)^2 <= |X| sigma(X)^2 on random subsets
        rng = np.random.default_rng(11)
        for _ in range(200):
            ps = random_pointset(rng)
            full = ps.n * sigma_sq(ps)
            size = int(rng.integers(1, ps.n + 1))
            sub = rng.choice(ps.n, size=size, replace=False)
            assert size * sigma_sq(ps, sub) <= full + 1e-9

    def test_mean_gap_bound(self):
        # |mu(R)-mu(S)|^2 <= 2/|RnS| (|R| sigma(R)^2 + |S| sigma(S)^2)
        rng = np.random.default_rng(13)
        checked = 0
        while checked < 200:
            ps = random_pointset(rng)
            if ps.n < 2:
                continue
            r = rng.choice(ps.n, size=int(rng.integers(1, ps.n + 1)), replace=False)
            s = rng.choice(ps.n, size=int(rng.integers(1, ps.n + 1)), replace=False)
            inter = np.intersect1d(r, s)
            if inter.size == 0:
                continue
            gap = mean(ps, r) - mean(ps, s)
            lhs = float(gap @ gap)
            rhs = 2.0 / inter.size * (r.size * sigma_sq(ps, r) + s.size * sigma_sq(ps, s))
            assert lhs <= rhs + 1e-9
            checked += 1

    def test_sigma_is_max_over_directions(self):
        rng = np.random.default_rng(17)
        ps = random_pointset(rng, n_max=20, d_max=4)
        while ps.n < 3:
            ps = random_pointset(rng, n_max=20, d_max=4)
        s = sigma(ps)
        best = 0.0
        for _ in range(10000):
            v = rng.normal(size=ps.d)
            v /= np.linalg.norm(v)
            best = max(best, directional_sigma(ps, None, v))
            assert best <= s + 1e-9
        assert best >= 0.98 * s

    def test_translation_invariance(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            ps = random_pointset(rng)
            shift = rng.normal(size=ps.d) * 100
            assert sigma(PointSet(ps.points + shift)) == pytest.approx(
                sigma(ps), abs=1e-9 * max(1.0, sigma(ps))
            )

    def test_scaling(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            ps = random_pointset(rng)
            a = rng.uniform(-4.0, 4.0)
            assert sigma(PointSet(ps.points * a)) == pytest.approx(
                abs(a) * sigma(ps), rel=1e-9, abs=1e-12
            )


class TestDirectionalSigma:
    def test_no_spread_along_y(self):
        ps = PointSet([[1.0, 0.0], [-1.0, 0.0]])
        assert directional_sigma(ps, None, [0.0, 1.0]) == pytest.approx(0.0)

    def test_spread_along_x(self):
        ps = PointSet([[1.0, 0.0], [-1.0, 0.0]])
        assert directional_sigma(ps, None, [1.0, 0.0]) == pytest.approx(1.0)

    def test_diagonal(self):
        ps = PointSet([[1.0, 1.0], [-1.0, -1.0]])
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        assert directional_sigma(ps, None, v) == pytest.approx(np.sqrt(2), abs=1e-9)

    def test_rejects_non_unit(self):
        ps = PointSet([[1.0, 0.0], [-1.0, 0.0]])
        with pytest.raises(ValueError, match="not-unit-vector"):
            directional_sigma(ps, None, [2.0, 0.0])


class TestSvdSubspace:
    def test_rank1_line(self):
        ps = PointSet([[1.0, 0.0], [3.0, 0.0], [-2.0, 0.0]])
        sub = svd_subspace(ps, 1)
        assert abs(sub.basis[0] @ np.array([1.0, 0.0])) == pytest.approx(1.0)

    def test_full_rank_identity(self):
        ps = PointSet(np.eye(3) + 0.1)
        sub = svd_subspace(ps, 3)
        assert np.allclose(sub.project_rows(ps.points), ps.points, atol=1e-12)

    def test_residual_matches_dense_oracle(self):
        rng = np.random.default_rng(29)
        A = rng.normal(size=(20, 5))
        sub = svd_subspace(PointSet(A), 2)
        got = np.linalg.norm(A - sub.project_rows(A))
        # oracle: eigendecomposition of A^T A
        lam, V = np.linalg.eigh(A.T @ A)
        top = V[:, np.argsort(lam)[::-1][:2]]
        want = np.linalg.norm(A - (A @ top) @ top.T)
        assert got == pytest.approx(want, rel=1e-6)

    def test_bad_rank(self):
        ps = PointSet([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValueError, match="bad-rank"):
            svd_subspace(ps, 3)
        with pytest.raises(ValueError, match="bad-rank"):
            svd_subspace(ps, 0)

    def test_basis_orthonormal(self):
        rng = np.random.default_rng(31)
        ps = PointSet(rng.normal(size=(12, 6)))
        sub = svd_subspace(ps, 4)
        assert np.max(np.abs(sub.basis @ sub.basis.T - np.eye(4))) < 1e-9


class TestProject:
    def test_identity_on_full_space(self):
        ps = PointSet([[1.0, 2.0], [3.0, 4.0]])
        sub = Subspace(np.eye(2))
        assert np.allclose(project(sub, ps).points, ps.points)

    def test_axis_projection(self):
        sub = Subspace([[1.0, 0.0]])
        out = project(sub, PointSet([[3.0, 4.0]]))
        assert np.allclose(out.points, [[3.0, 0.0]])

    def test_idempotent(self):
        rng = np.random.default_rng(37)
        ps = PointSet(rng.normal(size=(15, 5)))
        sub = svd_subspace(ps, 2)
        once = project(sub, ps)
        twice = project(sub, once)
        assert np.max(np.abs(twice.points - once.points)) <= 1e-12

    def test_dim_mismatch(self):
        sub = Subspace([[1.0, 0.0]])
        with pytest.raises(ValueError, match="dim-mismatch"):
            project(sub, PointSet([[1.0, 2.0, 3.0]]))


class TestClusterStats:
    def test_from_points(self):
        ps = PointSet([[1.0, 0.0], [-1.0, 0.0]])
        st = ClusterStats.from_points(ps)
        assert st.size == 2
        assert st.sigma == pytest.approx(1.0)
        assert np.allclose(st.mean, [0.0, 0.0])

    def test_zero_sigma_iff_coincident(self):
        ps = PointSet([[2.0, 2.0], [2.0, 2.0], [2.0, 2.0]])
        assert ClusterStats.from_points(ps).sigma == 0.0
