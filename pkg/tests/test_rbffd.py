import numpy as np
import pytest
from scipy.spatial.distance import cdist

from rbfshape import KernelSpec, PointCloud, l2_error, optimize_shape
from rbfshape.rbffd import (
    IDENTITY,
    LAPLACIAN,
    NodeSets,
    StencilSet,
    assemble_global,
    bdf2_heat,
    build_stencil_set,
    build_stencils,
    closest_center_map,
    local_weights,
    solve_poisson,
)

IMQ = KernelSpec("imq")


def banded_eps(x, stencils):
    from rbfshape import hardy_shape

    out = np.empty(stencils.indices.shape[0])
    for i, idx in enumerate(stencils.indices):
        cloud = PointCloud(x[idx])
        out[i] = optimize_shape(cloud, IMQ, init_eps=hardy_shape(cloud)).eps
    return out


class TestStencils:
    def test_all_nodes_when_m_equals_n(self):
        x = np.random.default_rng(0).uniform(0, 1, size=(10, 2))
        idx = build_stencils(x, 10)
        for row in idx:
            assert sorted(row) == list(range(10))

    def test_interior_symmetry_equidistant(self):
        x = np.linspace(0, 1, 21).reshape(-1, 1)
        idx = build_stencils(x, 5)
        # Interior node 10: neighbours 8..12.
        assert sorted(idx[10]) == [8, 9, 10, 11, 12]

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, size=(60, 2))
        idx = build_stencils(x, 10)
        d = cdist(x, x)
        for i in range(60):
            order = np.lexsort((np.arange(60), d[i]))
            assert set(idx[i]) == set(order[:10])

    def test_contains_own_center_first(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 1, size=(30, 2))
        idx = build_stencils(x, 7)
        assert np.array_equal(idx[:, 0], np.arange(30))

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            build_stencils(np.zeros((3, 1)) + np.arange(3)[:, None], 5)

    def test_grid_ties_resolved_to_low_index(self):
        # 3x3 grid, 2 neighbours: the four tied unit-distance neighbours of
        # the center must resolve deterministically to the lowest index.
        x = np.stack(np.meshgrid([0, 1, 2], [0, 1, 2], indexing="ij"), -1).reshape(-1, 2).astype(float)
        idx = build_stencils(x, 2)
        center = 4  # (1, 1)
        assert idx[center, 0] == center
        assert idx[center, 1] == 1  # (0,1) is the lowest-index tie

    def test_closest_center_map(self):
        x = np.array([[0.0], [1.0], [2.0]])
        y = np.array([[0.1], [0.9], [1.6], [0.5]])
        nu = closest_center_map(x, y)
        np.testing.assert_array_equal(nu[:3], [0, 1, 2])
        assert nu[3] == 0  # exact midpoint tie -> lowest index


class TestLocalWeights:
    def test_kronecker_delta(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(0, 1, size=(10, 2))
        for k in (0, 3, 9):
            w = local_weights(pts, 4.0, IMQ, IDENTITY, pts[k])
            e = np.zeros(10)
            e[k] = 1.0
            assert np.abs(w - e).max() < 1e-10

    def test_identity_weights_sum_to_one(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(0, 1, size=(10, 1))
        w = local_weights(pts, 6.0, IMQ, IDENTITY, np.array([0.37]))
        assert abs(w.sum() - 1.0) < 1e-10

    def test_laplacian_weights_sum_to_zero(self):
        rng = np.random.default_rng(5)
        for dim in (1, 2):
            pts = rng.uniform(0, 1, size=(10, dim))
            w = local_weights(pts, 5.0, IMQ, LAPLACIAN, pts.mean(axis=0))
            assert abs(w.sum()) < 1e-10

    def test_laplacian_converges_on_sine(self):
        # Shrinking 10-node stencils around y at fixed eps: weighted sum
        # approaches d2/dx2 sin(pi x) = -pi^2 sin(pi x).
        y = 0.452
        errors = []
        for half_width in (0.2, 0.1, 0.05):
            x = np.linspace(y - half_width, y + half_width, 10).reshape(-1, 1)
            w = local_weights(x, 8.0, IMQ, LAPLACIAN, np.array([y]))
            approx = w @ np.sin(np.pi * x[:, 0])
            errors.append(abs(approx + np.pi**2 * np.sin(np.pi * y)))
        assert errors[-1] < errors[0]
        assert errors[-1] < 5e-3

    def test_laplacian_banded_eps_accurate(self):
        # The band-targeting eps holds the relative accuracy of the weights
        # roughly constant across stencil widths.
        y = 0.452
        from rbfshape import hardy_shape

        for half_width in (0.4, 0.1, 0.05):
            x = np.linspace(y - half_width, y + half_width, 10).reshape(-1, 1)
            cloud = PointCloud(x)
            eps = optimize_shape(cloud, IMQ, init_eps=hardy_shape(cloud)).eps
            w = local_weights(x, eps, IMQ, LAPLACIAN, np.array([y]))
            approx = w @ np.sin(np.pi * x[:, 0])
            assert abs(approx + np.pi**2 * np.sin(np.pi * y)) < 5e-3


class TestAssembleGlobal:
    def test_collocation_identity_is_identity_matrix(self):
        rng = np.random.default_rng(6)
        x = rng.uniform(0, 1, size=(25, 2))
        nodes = NodeSets.collocation(x, np.zeros(25, dtype=bool))
        st = build_stencil_set(nodes, 10)
        op = assemble_global(x, x, st, np.full(25, 8.0), IMQ, IDENTITY)
        assert np.abs(op.toarray() - np.eye(25)).max() < 1e-10

    def test_laplacian_rows_sum_to_zero(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(0, 1, size=(40, 2))
        y = rng.uniform(0, 1, size=(60, 2))
        nodes = NodeSets(x, y, np.zeros(40, dtype=bool), np.zeros(60, dtype=bool))
        st = build_stencil_set(nodes, 10)
        op = assemble_global(x, y, st, np.full(40, 8.0), IMQ, LAPLACIAN)
        sums = np.asarray(op.sum(axis=1)).ravel()
        scale = np.abs(op.toarray()).max()
        assert np.abs(sums).max() < 1e-10 * max(scale, 1.0)

    def test_oversampled_shape_and_sparsity(self):
        x = np.stack(np.meshgrid(np.linspace(0, 1, 5), np.linspace(0, 1, 5), indexing="ij"), -1).reshape(-1, 2)
        y = np.stack(np.meshgrid(np.linspace(0, 1, 10), np.linspace(0, 1, 10), indexing="ij"), -1).reshape(-1, 2)
        nodes = NodeSets(x, y, np.zeros(25, dtype=bool), np.zeros(100, dtype=bool))
        st = build_stencil_set(nodes, 10)
        op = assemble_global(x, y, st, np.full(25, 10.0), IMQ, IDENTITY)
        assert op.shape == (100, 25)
        per_row = np.diff(op.indptr)
        assert per_row.max() <= 10


class TestSolvePoisson:
    @staticmethod
    def _grid(m):
        axis = np.linspace(0.0, 1.0, m)
        pts = np.stack(np.meshgrid(axis, axis, indexing="ij"), -1).reshape(-1, 2)
        bnd = ((pts == 0.0) | (pts == 1.0)).any(axis=1)
        return pts, bnd

    def test_constant_solution_exact(self):
        x, bnd = self._grid(7)
        nodes = NodeSets.collocation(x, bnd)
        st = build_stencil_set(nodes, 10)
        u = solve_poisson(nodes, st, np.full(len(x), 20.0), IMQ, np.zeros(len(x)), np.full(len(x), 3.0))
        assert np.abs(u - 3.0).max() < 1e-10

    def test_manufactured_1d_poisson(self):
        # u'' = -pi^2 sin(pi x), u(0) = u(1) = 0 -> u = sin(pi x)
        x = np.linspace(0, 1, 19).reshape(-1, 1)
        bnd = np.zeros(19, dtype=bool)
        bnd[[0, -1]] = True
        nodes = NodeSets.collocation(x, bnd)
        st = build_stencil_set(nodes, 10)
        eps = banded_eps(x, st)
        f = -np.pi**2 * np.sin(np.pi * x[:, 0])
        u = solve_poisson(nodes, st, eps, IMQ, f, np.zeros(19))
        err = l2_error(np.sin(np.pi * x[:, 0]), u)
        assert err < 1e-2

    def test_oversampled_least_squares(self):
        x, x_bnd = self._grid(5)
        y, y_bnd = self._grid(9)
        nodes = NodeSets(x, y, x_bnd, y_bnd)
        st = build_stencil_set(nodes, 10)
        u = solve_poisson(nodes, st, np.full(len(x), 12.0), IMQ, np.zeros(len(y)), np.full(len(y), 1.5))
        assert np.abs(u - 1.5).max() < 1e-8


class TestBdf2Heat:
    @staticmethod
    def _setup(m=19):
        x = np.linspace(0, 1, m).reshape(-1, 1)
        bnd = np.zeros(m, dtype=bool)
        bnd[[0, -1]] = True
        nodes = NodeSets.collocation(x, bnd)
        st = build_stencil_set(nodes, 10)
        return x, nodes, st

    def test_zero_data_stays_zero(self):
        x, nodes, st = self._setup()
        _, traj = bdf2_heat(nodes, st, np.full(len(x), 15.0), IMQ, 0.01, 0.1, 1.0,
                            np.zeros(len(x)), lambda p, t: np.zeros(len(p)))
        assert np.abs(traj).max() == 0.0

    def test_sine_decay_matches_exact(self):
        x, nodes, st = self._setup()
        eps = banded_eps(x, st)
        u0 = 6 * np.sin(np.pi * x[:, 0])
        times, traj = bdf2_heat(nodes, st, eps, IMQ, 1e-3, 0.1, 1.0, u0,
                                lambda p, t: np.zeros(len(p)))
        exact = 6 * np.sin(np.pi * x[:, 0]) * np.exp(-np.pi**2 * times[-1])
        assert l2_error(exact, traj[-1]) < 1e-4

    def test_norm_non_increasing(self):
        x, nodes, st = self._setup()
        eps = banded_eps(x, st)
        u0 = 6 * np.sin(np.pi * x[:, 0])
        _, traj = bdf2_heat(nodes, st, eps, IMQ, 1e-3, 0.2, 1.0, u0,
                            lambda p, t: np.zeros(len(p)))
        norms = np.linalg.norm(traj, axis=1)
        assert np.all(np.diff(norms) <= 1e-12)

    def test_boundary_injection_applied(self):
        x, nodes, st = self._setup()
        eps = np.full(len(x), 15.0)
        times, traj = bdf2_heat(nodes, st, eps, IMQ, 0.01, 0.05, 1.0,
                                np.zeros(len(x)), lambda p, t: np.full(len(p), t))
        assert traj[-1][0] == pytest.approx(times[-1])
        assert traj[-1][-1] == pytest.approx(times[-1])

    def test_alpha_zero_freezes_solution(self):
        x, nodes, st = self._setup()
        u0 = np.sin(np.pi * x[:, 0])
        _, traj = bdf2_heat(nodes, st, np.full(len(x), 15.0), IMQ, 0.01, 0.1, 0.0, u0,
                            lambda p, t: np.zeros(len(p)))
        np.testing.assert_allclose(traj[-1], traj[0], atol=1e-12)

    def test_bad_dt_rejected(self):
        x, nodes, st = self._setup()
        with pytest.raises(ValueError):
            bdf2_heat(nodes, st, np.full(len(x), 15.0), IMQ, 0.0, 1.0, 1.0,
                      np.zeros(len(x)), lambda p, t: np.zeros(len(p)))
