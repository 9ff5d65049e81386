import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from mcen.data_model import ClusterPartition, CoefficientMatrix, standardize
from mcen.errors import MaxSweepsExceeded, SingularGram
from mcen.gaussian_cd import (
    GramCache,
    SolverSettings,
    cd_update,
    closed_form_delta0,
    default_delta_grid,
    delta_max,
    kkt_residual,
    objective_fixed_groups,
    population_target,
    soft_threshold,
    solve_elastic_net,
    solve_fixed_groups,
    _run_gaussian,
    _cluster_arrays,
)

from helpers import fista_elastic_net, objective_textbook, random_partition, random_problem

TIGHT = SolverSettings(tol=1e-12)


class TestSoftThreshold:
    def test_examples(self):
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-3.0, 1.0) == -2.0
        assert soft_threshold(0.5, 1.0) == 0.0

    def test_tie_gives_zero(self):
        assert soft_threshold(1.0, 1.0) == 0.0
        assert soft_threshold(-1.0, 1.0) == 0.0


class TestCdUpdate:
    def _problem(self, seed=0, n=30, p=5, r=4):
        rng = np.random.default_rng(seed)
        X, Y, _, _ = random_problem(rng, n=n, p=p, r=r)
        return X, Y, GramCache.from_data(X, Y)

    def test_gamma_zero_is_lasso_update(self):
        X, Y, gram = self._problem()
        rng = np.random.default_rng(1)
        B = CoefficientMatrix(rng.normal(size=(X.p, Y.r)))
        D = ClusterPartition(np.array([1, 1, 2, 2]))
        delta = 0.3
        for j in range(X.p):
            for k in range(Y.r):
                got = cd_update(j, k, B, D, gram, 0.0, delta)
                partial = gram.XtY[j, k] - gram.R[j] @ B.values[:, k] \
                    + gram.R[j, j] * B.values[j, k]
                want = soft_threshold(partial, delta / 2.0) / gram.R[j, j]
                assert abs(got - want) < 1e-12

    def test_singleton_cluster_drops_gamma(self):
        X, Y, gram = self._problem(seed=2)
        rng = np.random.default_rng(3)
        B = CoefficientMatrix(rng.normal(size=(X.p, Y.r)))
        D = ClusterPartition(np.arange(1, Y.r + 1))
        for gamma in (0.5, 3.0):
            assert abs(
                cd_update(1, 2, B, D, gram, gamma, 0.2)
                - cd_update(1, 2, B, D, gram, 0.0, 0.2)
            ) < 1e-12

    def test_orthonormal_two_response_formula(self):
        # R = I, both responses in one cluster, current coefficients zero:
        # the update is S(x_j'y_k / n, delta/2) / (1 + gamma/2)
        rng = np.random.default_rng(4)
        n, p, r = 40, 3, 2
        M = rng.normal(size=(n, p))
        Q_, _ = np.linalg.qr(M)
        Xv = Q_ * np.sqrt(n)
        Yv = rng.normal(size=(n, r))
        Yv -= Yv.mean(axis=0)
        from mcen.data_model import DesignMatrix, ResponseMatrix

        X, Y = DesignMatrix(Xv), ResponseMatrix(Yv)
        gram = GramCache.from_data(X, Y)
        assert np.abs(gram.R - np.eye(p)).max() < 1e-10
        B = CoefficientMatrix(np.zeros((p, r)))
        D = ClusterPartition(np.array([1, 1]))
        gamma, delta = 0.8, 0.15
        for j in range(p):
            for k in range(r):
                got = cd_update(j, k, B, D, gram, gamma, delta)
                want = soft_threshold(gram.XtY[j, k], delta / 2.0) / (1.0 + gamma / 2.0)
                assert abs(got - want) < 1e-12

    def test_matches_numeric_coordinate_minimization(self):
        # the update with (gamma, delta) minimizes the fixed-partition
        # objective with fusion weight gamma/2 in the chosen coordinate
        X, Y, gram = self._problem(seed=5, n=35, p=4, r=4)
        rng = np.random.default_rng(6)
        B0 = rng.normal(size=(X.p, Y.r)) * 0.5
        D = ClusterPartition(np.array([1, 2, 1, 2]))
        gamma, delta = 0.9, 0.2
        for j, k in [(0, 0), (2, 1), (3, 3), (1, 2)]:
            got = cd_update(j, k, CoefficientMatrix(B0), D, gram, gamma, delta)

            def coord_obj(t):
                B = B0.copy()
                B[j, k] = t
                return objective_textbook(B, X.values, Y.values, D, gamma / 2.0, delta)

            res = minimize_scalar(coord_obj, bounds=(-10, 10), method="bounded",
                                  options={"xatol": 1e-12})
            assert abs(got - res.x) < 1e-6


class TestSolveFixedGroups:
    def test_gamma_zero_matches_columnwise_reference(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            X, Y, _, D = random_problem(rng, n=40, p=8, r=3)
            delta = 0.4 * delta_max(X, Y)
            B = solve_fixed_groups(X, Y, D, 0.0, delta, settings=TIGHT)
            for c in range(Y.r):
                ref = fista_elastic_net(X.values, Y.values[:, c], delta / 2.0, 0.0)
                assert np.abs(B.values[:, c] - ref).max() < 1e-6

    def test_all_singletons_equals_gamma_zero(self):
        rng = np.random.default_rng(8)
        X, Y, _, _ = random_problem(rng, n=30, p=6, r=4)
        delta = 0.3 * delta_max(X, Y)
        singletons = ClusterPartition(np.arange(1, Y.r + 1))
        joint = ClusterPartition(np.ones(Y.r, dtype=np.int64))
        B_singletons = solve_fixed_groups(X, Y, singletons, 2.0, delta, settings=TIGHT)
        B_gamma0 = solve_fixed_groups(X, Y, joint, 0.0, delta, settings=TIGHT)
        assert np.abs(B_singletons.values - B_gamma0.values).max() < 1e-8

    def test_delta_zero_matches_closed_form(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            X, Y, _, D = random_problem(rng, n=45, p=7, r=5)
            gamma = float(rng.choice([0.1, 1.0, 10.0]))
            B = solve_fixed_groups(X, Y, D, gamma, 0.0, settings=TIGHT)
            Bc = closed_form_delta0(X, Y, D, gamma)
            assert np.abs(B.values - Bc.values).max() < 1e-8

    def test_objective_matches_textbook_form(self):
        rng = np.random.default_rng(10)
        X, Y, _, D = random_problem(rng, n=25, p=5, r=4)
        B = rng.normal(size=(X.p, Y.r))
        got = objective_fixed_groups(B, X, Y, D, 0.7, 0.3)
        want = objective_textbook(B, X.values, Y.values, D, 0.7, 0.3)
        assert abs(got - want) < 1e-10 * max(1.0, abs(want))

    def test_monotone_descent_per_sweep(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            X, Y, _, D = random_problem(rng)
            gamma = float(rng.uniform(0, 3))
            delta = float(rng.uniform(0, 1)) * delta_max(X, Y)
            gram = GramCache.from_data(X, Y)
            assign0, csize, order = _cluster_arrays(D)
            B = np.zeros((X.p, Y.r))
            prev = objective_fixed_groups(B, X, Y, D, gamma, delta)
            for _sweep in range(25):
                B, _, _ = _run_gaussian(
                    gram.R, gram.XtY, B, assign0, csize, order,
                    gamma2=2 * gamma, l1=delta / 2, tol=0.0, max_sweeps=1,
                    active_set=False,
                )
                cur = objective_fixed_groups(B, X, Y, D, gamma, delta)
                assert cur <= prev + 1e-10 * max(1.0, abs(prev))
                prev = cur

    def test_cluster_processing_order_invariance(self):
        rng = np.random.default_rng(12)
        X, Y, _, D = random_problem(rng, n=30, p=6, r=5)
        gamma, delta = 1.2, 0.2 * delta_max(X, Y)
        gram = GramCache.from_data(X, Y)
        assign0, csize, order = _cluster_arrays(D)
        solutions = []
        for perm_seed in range(3):
            prng = np.random.default_rng(perm_seed)
            shuffled = order.copy()
            prng.shuffle(shuffled)
            B, _, conv = _run_gaussian(
                gram.R, gram.XtY, np.zeros((X.p, Y.r)), assign0, csize,
                np.ascontiguousarray(shuffled, dtype=np.int64),
                gamma2=2 * gamma, l1=delta / 2, tol=1e-12, max_sweeps=10_000,
                active_set=True,
            )
            assert conv
            solutions.append(B)
        for B in solutions[1:]:
            assert np.abs(B - solutions[0]).max() < 1e-8

    def test_max_sweeps_carries_iterate(self):
        rng = np.random.default_rng(13)
        X, Y, _, D = random_problem(rng, n=30, p=10, r=3)
        with pytest.raises(MaxSweepsExceeded) as exc:
            solve_fixed_groups(X, Y, D, 1.0, 0.0,
                               settings=SolverSettings(tol=1e-14, max_sweeps=2))
        assert exc.value.coefficients.shape == (X.p, Y.r)
        assert exc.value.converged is False

    def test_warm_start_converges_faster(self):
        rng = np.random.default_rng(14)
        X, Y, _, D = random_problem(rng, n=40, p=8, r=4)
        B = solve_fixed_groups(X, Y, D, 0.5, 0.1, settings=TIGHT)
        again = solve_fixed_groups(X, Y, D, 0.5, 0.1, init=B, settings=TIGHT)
        assert np.abs(again.values - B.values).max() < 1e-10


class TestClosedForm:
    def test_gamma_zero_is_ols(self):
        rng = np.random.default_rng(15)
        X, Y, _, D = random_problem(rng, n=50, p=6, r=4)
        ols = np.linalg.solve(X.values.T @ X.values, X.values.T @ Y.values)
        B = closed_form_delta0(X, Y, D, 0.0)
        assert np.abs(B.values - ols).max() < 1e-10

    def test_scalar_blend_example(self):
        # p = 1, one cluster of two responses with per-response least-squares
        # fits (1, 3) and gamma = 1: first blended value is 5/3
        n = 40
        rng = np.random.default_rng(16)
        x = rng.normal(size=n)
        x -= x.mean()
        x /= np.sqrt((x**2).mean())
        from mcen.data_model import DesignMatrix, ResponseMatrix

        X = DesignMatrix(x[:, None])
        Y = ResponseMatrix(np.column_stack([1.0 * x, 3.0 * x]))
        D = ClusterPartition(np.array([1, 1]))
        B = closed_form_delta0(X, Y, D, 1.0)
        assert np.allclose(B.values[0], [5.0 / 3.0, 7.0 / 3.0], atol=1e-10)
        # and the coordinate solver agrees with the same blend
        solved = solve_fixed_groups(X, Y, D, 1.0, 0.0, settings=TIGHT)
        assert np.abs(solved.values - B.values).max() < 1e-9

    def test_large_gamma_approaches_cluster_mean(self):
        n = 30
        rng = np.random.default_rng(17)
        x = rng.normal(size=n)
        x -= x.mean()
        x /= np.sqrt((x**2).mean())
        from mcen.data_model import DesignMatrix, ResponseMatrix

        X = DesignMatrix(x[:, None])
        Y = ResponseMatrix(np.column_stack([1.0 * x, 3.0 * x]))
        D = ClusterPartition(np.array([1, 1]))
        B = closed_form_delta0(X, Y, D, 1e6)
        assert np.abs(B.values - 2.0).max() < 1e-5

    def test_singular_gram_raises(self):
        rng = np.random.default_rng(18)
        Xv = rng.normal(size=(10, 3))
        Xv[:, 2] = Xv[:, 0] + Xv[:, 1]  # exactly collinear
        Xv -= Xv.mean(axis=0)
        Xv /= np.sqrt((Xv**2).mean(axis=0))
        from mcen.data_model import DesignMatrix, ResponseMatrix

        X = DesignMatrix(Xv)
        Y = ResponseMatrix(np.zeros((10, 2)) + rng.normal(size=(10, 2)) - 0)
        Yc = ResponseMatrix(Y.values - Y.values.mean(axis=0))
        with pytest.raises(SingularGram):
            closed_form_delta0(X, Yc, ClusterPartition(np.array([1, 1])), 0.5)

    def test_n_not_greater_than_p_raises(self):
        rng = np.random.default_rng(19)
        X, Y, _, D = random_problem(rng, n=30, p=6, r=3)
        from mcen.data_model import DesignMatrix

        X_fat = DesignMatrix(rng.normal(size=(5, 6)))
        from mcen.data_model import ResponseMatrix

        with pytest.raises(SingularGram):
            closed_form_delta0(X_fat, ResponseMatrix(rng.normal(size=(5, 3))),
                               ClusterPartition(np.array([1, 1, 1])), 0.5)


class TestPopulationTarget:
    def test_gamma_zero_identity(self):
        rng = np.random.default_rng(20)
        B = CoefficientMatrix(rng.normal(size=(4, 3)))
        D = random_partition(rng, 3)
        out = population_target(B, D, 0.0)
        assert np.array_equal(out.values, B.values)

    def test_equal_columns_fixed_point(self):
        col = np.arange(4.0)
        B = CoefficientMatrix(np.column_stack([col, col, col]))
        D = ClusterPartition(np.array([1, 1, 1]))
        out = population_target(B, D, 7.3)
        assert np.abs(out.values - B.values).max() < 1e-12

    def test_two_column_blend_value(self):
        B = CoefficientMatrix(np.array([[0.0, 1.0]]))
        D = ClusterPartition(np.array([1, 1]))
        out = population_target(B, D, 0.5)
        assert np.allclose(out.values, [[0.25, 0.75]])


class TestKktAndDeltaMax:
    def test_converged_solution_certified(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            X, Y, _, D = random_problem(rng)
            gamma = float(rng.uniform(0, 2))
            delta = float(rng.uniform(0.05, 0.8)) * delta_max(X, Y)
            B = solve_fixed_groups(X, Y, D, gamma, delta,
                                   settings=SolverSettings(tol=1e-10))
            assert kkt_residual(B, X, Y, D, gamma, delta) <= 1e-6

    def test_closed_form_certified(self):
        rng = np.random.default_rng(22)
        X, Y, _, D = random_problem(rng, n=40, p=6, r=4)
        B = closed_form_delta0(X, Y, D, 1.5)
        assert kkt_residual(B, X, Y, D, 1.5, 0.0) <= 1e-8

    def test_zero_matrix_at_delta_max(self):
        rng = np.random.default_rng(23)
        X, Y, _, D = random_problem(rng, n=30, p=5, r=3)
        dm = delta_max(X, Y)
        Z = np.zeros((X.p, Y.r))
        assert kkt_residual(Z, X, Y, D, 0.0, dm) == 0.0
        assert kkt_residual(Z, X, Y, D, 0.0, dm * 1.5) == 0.0
        assert kkt_residual(Z, X, Y, D, 0.0, 0.99 * dm) > 0.0

    def test_delta_max_tiny_example(self):
        from mcen.data_model import DesignMatrix, ResponseMatrix

        X = DesignMatrix(np.array([[1.0], [-1.0]]))
        Y = ResponseMatrix(np.array([[1.0], [-1.0]]))
        assert delta_max(X, Y) == 2.0

    def test_delta_max_zero_response(self):
        from mcen.data_model import DesignMatrix, ResponseMatrix

        X = DesignMatrix(np.array([[1.0], [-1.0]]))
        Y = ResponseMatrix(np.zeros((2, 1)))
        assert delta_max(X, Y) == 0.0

    def test_delta_max_is_boundary(self):
        rng = np.random.default_rng(24)
        X, Y, _, _ = random_problem(rng, n=5, p=3, r=2)
        D = ClusterPartition(np.array([1, 1]))
        dm = delta_max(X, Y)
        B = solve_fixed_groups(X, Y, D, 0.0, dm, settings=TIGHT)
        assert not B.values.any()
        B_below = solve_fixed_groups(X, Y, D, 0.0, 0.99 * dm, settings=TIGHT)
        assert B_below.values.any()

    def test_default_grid_shape(self):
        rng = np.random.default_rng(25)
        X, Y, _, _ = random_problem(rng, n=40, p=5, r=3)
        grid = default_delta_grid(X, Y, 100)
        assert grid.size == 100
        assert np.all(np.diff(grid) < 0)
        assert np.isclose(grid[0], delta_max(X, Y))
        assert np.isclose(grid[-1], 0.001 * grid[0])
        X2, Y2, _, _ = random_problem(rng, n=10, p=20, r=2)
        grid2 = default_delta_grid(X2, Y2, 50)
        assert np.isclose(grid2[-1], 0.05 * grid2[0])


class TestElasticNetColumns:
    def test_matches_reference(self):
        rng = np.random.default_rng(26)
        X, Y, _, _ = random_problem(rng, n=30, p=5, r=3)
        gamma, delta = 0.4, 0.1
        B = solve_elastic_net(X, Y, gamma, delta, settings=TIGHT)
        for c in range(Y.r):
            ref = fista_elastic_net(X.values, Y.values[:, c], delta, gamma)
            assert np.abs(B.values[:, c] - ref).max() < 1e-6
