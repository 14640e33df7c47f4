import numpy as np
import pytest

from scio import (
    CVPlan,
    DataMatrix,
    SolverConfig,
    column_objective,
    cv_risk,
    estimate_with_cv,
    gen_decay,
    min_eigenvalue,
    sample_covariance,
    sample_gaussian,
    select_lambda,
    solve_column,
    split_sample,
    two_block_compose,
)
from scio.covariance import perturb_to_pd
from scio.tuning import _argmin_prefer_larger, _cv_grid

# n=4 design whose sample covariance is exactly the identity
EXACT_IDENTITY_DATA = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]


class TestSplitSample:
    def test_partition(self):
        x = DataMatrix(np.arange(20.0).reshape(10, 2))
        (train, validate), = split_sample(x, CVPlan(seed=3))
        assert train.n == 5 and validate.n == 5
        combined = np.vstack([train.rows, validate.rows])
        assert sorted(map(tuple, combined)) == sorted(map(tuple, x.rows))
        train_set = set(map(tuple, train.rows))
        assert all(tuple(row) not in train_set for row in validate.rows)

    def test_deterministic(self):
        x = DataMatrix(np.arange(24.0).reshape(12, 2))
        a = split_sample(x, CVPlan(seed=9))
        b = split_sample(x, CVPlan(seed=9))
        assert (a[0][0].rows == b[0][0].rows).all()
        assert (a[0][1].rows == b[0][1].rows).all()

    def test_multiple_folds(self):
        x = DataMatrix(np.arange(20.0).reshape(10, 2))
        folds = split_sample(x, CVPlan(folds_h=3, seed=1))
        assert len(folds) == 3
        for train, validate in folds:
            assert train.n + validate.n == 10
            assert set(map(tuple, train.rows)).isdisjoint(map(tuple, validate.rows))

    def test_insufficient_rows(self):
        with pytest.raises(ValueError, match="at least 2"):
            split_sample(DataMatrix(np.zeros((3, 2))), CVPlan())

    def test_fraction(self):
        x = DataMatrix(np.arange(40.0).reshape(20, 2))
        (train, validate), = split_sample(x, CVPlan(split_fraction=0.25, seed=0))
        assert train.n == 5 and validate.n == 15


class TestPlanValidation:
    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            CVPlan(split_fraction=1.0)

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            CVPlan(grid_n=1)

    def test_bad_folds(self):
        with pytest.raises(ValueError):
            CVPlan(folds_h=0)

    def test_bad_upper(self):
        with pytest.raises(ValueError):
            CVPlan(grid_upper_a=0.0)


class TestCvRisk:
    def test_identity_closed_form(self):
        d = DataMatrix(EXACT_IDENTITY_DATA)
        assert (sample_covariance(d).sigma_hat.array == np.eye(2)).all()
        splits = [(d, d)]
        for lam in (0.2, 0.5, 0.9):
            want = 0.5 * (1 - lam) ** 2 - (1 - lam)
            assert cv_risk(0, lam, splits) == pytest.approx(want, abs=1e-10)

    def test_zero_solution_zero_risk(self):
        d = DataMatrix(EXACT_IDENTITY_DATA)
        assert cv_risk(0, 1.0, [(d, d)]) == 0.0

    def test_lambda_positive_required(self):
        d = DataMatrix(EXACT_IDENTITY_DATA)
        with pytest.raises(ValueError):
            cv_risk(0, 0.0, [(d, d)])

    def test_in_sample_equals_objective_minus_penalty(self):
        rng = np.random.default_rng(0)
        x = DataMatrix(rng.standard_normal((30, 4)))
        cov = perturb_to_pd(sample_covariance(x))
        lam = 0.2
        for i in range(4):
            beta = solve_column(cov.sigma_hat, i, lam).beta
            want = column_objective(cov.sigma_hat, i, beta, lam) - lam * np.abs(beta).sum()
            got = cv_risk(i, lam, [(x, x)])
            # same fit, validation covariance differs only by the perturbation
            assert got == pytest.approx(want - cov.rho_applied / 2 * (beta @ beta), abs=1e-8)


class TestSelectLambda:
    def test_grid_shape_and_argmin(self):
        rng = np.random.default_rng(1)
        x = DataMatrix(sample_gaussian(gen_decay(6, 0.6), 60, seed=4).rows)
        plan = CVPlan(grid_n=8, seed=2)
        res = select_lambda(2, plan, x)
        assert len(res.risks) == 8 and len(res.lambdas) == 8
        assert res.chosen_index == int(np.argmin(res.risks[::-1]) * -1 + 7)
        assert res.risks[res.chosen_index] == res.risks.min()
        assert res.chosen_lambda == res.lambdas[res.chosen_index]

    def test_grid_formula(self):
        x = DataMatrix(EXACT_IDENTITY_DATA)
        grid = _cv_grid(CVPlan(grid_n=4, grid_upper_a=2.0),
                        sample_covariance(x).sigma_hat)
        assert np.allclose(grid, [0.5, 1.0, 1.5, 2.0])

    def test_tie_breaks_to_larger_lambda(self):
        assert _argmin_prefer_larger(np.array([3.0, 1.0, 1.0, 2.0])) == 2
        assert _argmin_prefer_larger(np.array([0.0, 0.0])) == 1
        assert _argmin_prefer_larger(np.array([2.0, 1.0])) == 1

    def test_matches_independent_risk_evaluation(self):
        # warm-started path risks equal independently computed risks
        rng = np.random.default_rng(5)
        x = DataMatrix(rng.standard_normal((40, 3)))
        plan = CVPlan(grid_n=5, seed=7)
        res = select_lambda(1, plan, x)
        splits = split_sample(x, plan)
        fresh = np.array([cv_risk(1, float(lam), splits) for lam in res.lambdas])
        assert np.abs(fresh - res.risks).max() < 1e-6
        assert _argmin_prefer_larger(fresh) == res.chosen_index


class TestEstimateWithCv:
    def test_smoke_minimal(self):
        x = DataMatrix(EXACT_IDENTITY_DATA)
        est = estimate_with_cv(x, CVPlan(grid_n=3, seed=0))
        assert est.dim == 2
        assert (est.omega_hat.array == est.omega_hat.array.T).all()

    def test_reports_all_chosen_lambdas(self):
        x = sample_gaussian(gen_decay(6, 0.6), 80, seed=8)
        collected = []
        est = estimate_with_cv(x, CVPlan(grid_n=10, seed=3), collect_cv=collected)
        assert est.lambda_per_column.shape == (6,)
        assert (est.lambda_per_column > 0).all()
        assert [c.column_i for c in collected] == list(range(6))
        assert [c.chosen_lambda for c in collected] == est.lambda_per_column.tolist()

    def test_adapts_per_column(self):
        # heterogeneous sparsity: at least two distinct penalties chosen
        truth = two_block_compose(gen_decay(10, 0.6))
        x = sample_gaussian(truth, 200, seed=11)
        est = estimate_with_cv(x, CVPlan(seed=1))
        assert len(set(est.lambda_per_column.tolist())) >= 2

    def test_output_pd_after_repair(self):
        x = sample_gaussian(gen_decay(8, 0.5), 40, seed=2)
        est = estimate_with_cv(x, CVPlan(grid_n=10, seed=4))
        assert min_eigenvalue(est.omega_hat) > 0

    def test_deterministic_given_seed(self):
        x = sample_gaussian(gen_decay(6, 0.6), 60, seed=9)
        a = estimate_with_cv(x, CVPlan(grid_n=6, seed=5))
        b = estimate_with_cv(x, CVPlan(grid_n=6, seed=5))
        assert (a.omega_hat.array == b.omega_hat.array).all()

    def test_threads_match_serial(self):
        x = sample_gaussian(gen_decay(6, 0.6), 60, seed=10)
        a = estimate_with_cv(x, CVPlan(grid_n=6, seed=6), threads=1)
        b = estimate_with_cv(x, CVPlan(grid_n=6, seed=6), threads=3)
        assert (a.omega_hat.array == b.omega_hat.array).all()

    def test_full_sample_refit_flag(self):
        x = sample_gaussian(gen_decay(6, 0.6), 60, seed=12)
        split_fit = estimate_with_cv(x, CVPlan(grid_n=6, seed=7))
        full_fit = estimate_with_cv(x, CVPlan(grid_n=6, seed=7),
                                    refit_full_sample=True)
        assert not (split_fit.omega_hat.array == full_fit.omega_hat.array).all()

    def test_solver_config_respected(self):
        x = sample_gaussian(gen_decay(4, 0.6), 40, seed=13)
        est = estimate_with_cv(x, CVPlan(grid_n=4, seed=8),
                               SolverConfig(tol=1e-8))
        assert all(m.kkt_residual <= 1e-8 + 1e-12 for m in est.per_column_meta)
