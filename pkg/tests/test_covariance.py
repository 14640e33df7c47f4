import numpy as np
import pytest

from scio import (
    CovarianceEstimate,
    DataMatrix,
    SymMatrix,
    load_csv,
    min_eigenvalue,
    perturb_to_pd,
    sample_covariance,
)


class TestDataMatrix:
    def test_shape_and_accessors(self):
        d = DataMatrix([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert d.n == 3 and d.p == 2

    def test_single_row_allowed(self):
        assert DataMatrix([[1.0, 2.0]]).n == 1

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            DataMatrix([[1.0], [np.inf]])

    def test_rows_read_only(self):
        d = DataMatrix([[1.0, 2.0], [3.0, 4.0]])
        with pytest.raises(ValueError):
            d.rows[0, 0] = 9.0


class TestSampleCovariance:
    def test_two_points(self):
        cov = sample_covariance([[0.0, 0.0], [2.0, 0.0]])
        assert np.array_equal(cov.sigma_hat.array, [[1.0, 0.0], [0.0, 0.0]])
        assert cov.rho_applied == 0.0
        assert cov.n_used == 2

    def test_constant_column_gives_zeros(self):
        cov = sample_covariance([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        assert (cov.sigma_hat.array[:, 1] == 0.0).all()
        assert (cov.sigma_hat.array[1, :] == 0.0).all()

    def test_single_variable(self):
        cov = sample_covariance([[-1.0], [1.0]])
        assert cov.sigma_hat[0, 0] == pytest.approx(1.0)

    def test_needs_two_observations(self):
        with pytest.raises(ValueError, match="at least 2"):
            sample_covariance([[1.0, 2.0]])

    def test_divisor_is_n(self):
        cov = sample_covariance([[0.0], [1.0], [2.0]])
        # centered values -1, 0, 1: sum of squares 2, divided by n=3
        assert cov.sigma_hat[0, 0] == pytest.approx(2.0 / 3.0)

    def test_psd_on_random_data(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            x = rng.standard_normal((6, 8))  # p > n: singular but PSD
            cov = sample_covariance(x)
            assert min_eigenvalue(cov.sigma_hat) >= -1e-10

    def test_scaling_data_scales_covariance(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((20, 4))
        c = 3.0
        a = sample_covariance(x).sigma_hat.array
        b = sample_covariance(c * x).sigma_hat.array
        assert np.allclose(b, c * c * a, rtol=1e-12)


class TestPerturbToPd:
    def test_identity_unchanged(self):
        cov = CovarianceEstimate(SymMatrix.identity(3), n_used=10)
        out = perturb_to_pd(cov)
        assert out.rho_applied == 0.0
        assert (out.sigma_hat.array == np.eye(3)).all()

    def test_singular_diagonal(self):
        cov = CovarianceEstimate(SymMatrix.diagonal([1.0, 0.0]), n_used=4)
        out = perturb_to_pd(cov)
        assert out.rho_applied == pytest.approx(0.5, abs=1e-9)
        assert np.diag(out.sigma_hat.array) == pytest.approx([1.5, 0.5], abs=1e-9)

    def test_indefinite(self):
        cov = CovarianceEstimate(SymMatrix([[1.0, 2.0], [2.0, 1.0]]), n_used=100)
        out = perturb_to_pd(cov)
        assert out.rho_applied == pytest.approx(1.1, abs=1e-8)
        assert np.diag(out.sigma_hat.array) == pytest.approx([2.1, 2.1], abs=1e-8)

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((5, 9))  # singular covariance
        once = perturb_to_pd(sample_covariance(x))
        twice = perturb_to_pd(once)
        assert twice.rho_applied == once.rho_applied
        assert (twice.sigma_hat.array == once.sigma_hat.array).all()

    def test_output_is_pd(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = rng.standard_normal((4, 7))
            out = perturb_to_pd(sample_covariance(x))
            assert min_eigenvalue(out.sigma_hat) > 0


class TestCsv:
    def test_comma(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("1.0,2.0\n3.0,4.0\n")
        d = load_csv(f)
        assert d.n == 2 and d.p == 2
        assert d.rows[1, 0] == 3.0

    def test_tab_sniffed(self, tmp_path):
        f = tmp_path / "d.tsv"
        f.write_text("1.0\t2.0\n3.0\t4.0\n")
        assert load_csv(f).p == 2

    def test_header_flag(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,b\n1.0,2.0\n3.0,4.0\n")
        assert load_csv(f, has_header=True).n == 2
        with pytest.raises(ValueError):
            load_csv(f)  # header parsed as data

    def test_ragged_rejected(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(ValueError, match="ragged"):
            load_csv(f)

    def test_non_numeric_rejected(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("1.0,2.0\n3.0,x\n")
        with pytest.raises(ValueError, match="non-numeric"):
            load_csv(f)

    def test_empty_rejected(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_csv(f)

    def test_explicit_delimiter(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("1.0;2.0\n3.0;4.0\n")
        assert load_csv(f, delimiter=";").p == 2
