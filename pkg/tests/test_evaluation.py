import math

import numpy as np
import pytest

from scio import (
    NotPositiveDefiniteError,
    SymMatrix,
    bregman_loss,
    classification_score,
    loss_report,
    support_report,
)
from scio.evaluation import format_cell, format_table, mean_sd


def sym_from(rng, p):
    return SymMatrix.from_average(rng.standard_normal((p, p)))


class TestLossReport:
    def test_identical_inputs(self):
        m = SymMatrix.identity(4)
        rep = loss_report(m, m)
        assert rep.spectral == rep.frobenius == rep.elementwise_max == 0.0
        assert rep.frobenius_sq_over_p == 0.0

    def test_diagonal_shift(self):
        truth = SymMatrix.identity(4)
        est = truth.add_diagonal(0.1)
        rep = loss_report(est, truth)
        assert rep.spectral == pytest.approx(0.1, abs=1e-9)
        assert rep.frobenius == pytest.approx(0.2, abs=1e-12)
        assert rep.elementwise_max == pytest.approx(0.1)
        assert rep.frobenius_sq_over_p == pytest.approx(0.01, abs=1e-12)

    def test_single_entry_fro_sq_over_p(self):
        truth = SymMatrix(np.zeros((4, 4)))
        est = SymMatrix.diagonal([2.0, 0.0, 0.0, 0.0])
        assert loss_report(est, truth).frobenius_sq_over_p == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            loss_report(SymMatrix.identity(2), SymMatrix.identity(3))

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(0)
        a, b = sym_from(rng, 5), sym_from(rng, 5)
        x, y = loss_report(a, b), loss_report(b, a)
        assert x == y

    def test_triangle_inequality(self):
        rng = np.random.default_rng(1)
        a, b, c = (sym_from(rng, 5) for _ in range(3))
        for norm in ("spectral", "frobenius", "elementwise_max"):
            ab = getattr(loss_report(a, b), norm)
            bc = getattr(loss_report(b, c), norm)
            ac = getattr(loss_report(a, c), norm)
            assert ac <= ab + bc + 1e-9


class TestSupportReport:
    def test_perfect_recovery(self):
        rng = np.random.default_rng(2)
        m = SymMatrix.from_average(rng.standard_normal((5, 5)))
        rep = support_report(m, m)
        assert rep.tp_pct == 100.0
        assert rep.tn_pct is None  # dense truth has no true non-edges

    def test_all_zero_estimate(self):
        truth = SymMatrix([[1.0, 0.5, 0.0],
                           [0.5, 1.0, 0.0],
                           [0.0, 0.0, 1.0]])
        est = SymMatrix.identity(3)
        rep = support_report(est, truth)
        assert rep.tp_pct == 0.0
        assert rep.tn_pct == 100.0

    def test_one_false_edge_of_ten(self):
        truth = SymMatrix.identity(5)  # 10 off-diagonal zero pairs
        a = np.eye(5)
        a[0, 1] = a[1, 0] = 0.3
        rep = support_report(SymMatrix(a), truth)
        assert rep.tn_pct == 90.0
        assert rep.tp_pct is None

    def test_counts_partition(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            est = SymMatrix.from_average(
                rng.standard_normal((6, 6)) * (rng.random((6, 6)) < 0.4))
            truth = SymMatrix.from_average(
                rng.standard_normal((6, 6)) * (rng.random((6, 6)) < 0.4))
            rep = support_report(est, truth)
            true_edges = int(np.count_nonzero(truth.array[np.triu_indices(6, 1)]))
            assert rep.true_pos + rep.false_neg == true_edges
            assert rep.true_neg + rep.false_pos == 15 - true_edges

    def test_threshold_applies_to_estimate(self):
        truth = SymMatrix([[1.0, 0.5], [0.5, 1.0]])
        est = SymMatrix([[1.0, 0.01], [0.01, 1.0]])
        assert support_report(est, truth, threshold=0.0).tp_pct == 100.0
        assert support_report(est, truth, threshold=0.05).tp_pct == 0.0


class TestBregmanLoss:
    def test_identity(self):
        for p in (2, 5):
            assert bregman_loss(SymMatrix.identity(p), SymMatrix.identity(p)) == float(p)

    def test_scaled_diagonal(self):
        got = bregman_loss(SymMatrix.identity(2), SymMatrix.diagonal([2.0, 2.0]))
        assert got == pytest.approx(4.0 - 2.0 * math.log(2.0))

    def test_non_pd_rejected(self):
        with pytest.raises(NotPositiveDefiniteError):
            bregman_loss(SymMatrix.identity(2), SymMatrix([[1.0, 2.0], [2.0, 1.0]]))

    def test_minimized_at_inverse_for_diagonal_sigma(self):
        sigma = SymMatrix.diagonal([1.0, 2.0, 4.0])
        omega_star = SymMatrix.diagonal([1.0, 0.5, 0.25])
        base = bregman_loss(sigma, omega_star)
        for d in ([0.1, 0, 0], [0, -0.05, 0], [0.02, 0.03, -0.01]):
            other = SymMatrix.diagonal(np.array([1.0, 0.5, 0.25]) + np.array(d))
            assert bregman_loss(sigma, other) > base

    def test_perturbations_increase_loss(self):
        # strict convexity with minimum at the true inverse
        rng = np.random.default_rng(4)
        g = rng.standard_normal((8, 4))
        sigma = SymMatrix.from_average(g.T @ g / 8 + 0.5 * np.eye(4))
        omega_star = SymMatrix.from_average(np.linalg.inv(sigma.array))
        base = bregman_loss(sigma, omega_star)
        for _ in range(10):
            d = SymMatrix.from_average(rng.standard_normal((4, 4)) * 0.05)
            perturbed = SymMatrix(omega_star.array + d.array)
            assert bregman_loss(sigma, perturbed) > base


class TestClassificationScore:
    def test_identical_classes_score_zero(self):
        omega = SymMatrix.identity(3)
        mean = np.zeros(3)
        x = np.array([1.0, -2.0, 0.5])
        assert classification_score(x, mean, mean, omega, omega) == 0.0

    def test_at_own_mean(self):
        omega = SymMatrix.identity(3)
        mk = np.array([1.0, 0.0, 0.0])
        mk2 = np.array([0.0, 2.0, 0.0])
        got = classification_score(mk, mk, mk2, omega, omega)
        assert got == pytest.approx(float(np.sum((mk - mk2) ** 2)))
        assert got >= 0

    def test_antisymmetry(self):
        rng = np.random.default_rng(5)
        g1 = rng.standard_normal((8, 3))
        g2 = rng.standard_normal((8, 3))
        o1 = SymMatrix.from_average(g1.T @ g1 / 8 + 0.3 * np.eye(3))
        o2 = SymMatrix.from_average(g2.T @ g2 / 8 + 0.3 * np.eye(3))
        m1, m2 = rng.standard_normal(3), rng.standard_normal(3)
        for _ in range(5):
            x = rng.standard_normal(3)
            s12 = classification_score(x, m1, m2, o1, o2)
            s21 = classification_score(x, m2, m1, o2, o1)
            assert s12 == -s21

    def test_non_pd_rejected(self):
        bad = SymMatrix([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(NotPositiveDefiniteError):
            classification_score(np.zeros(2), np.zeros(2), np.ones(2),
                                 bad, SymMatrix.identity(2))


class TestAggregation:
    def test_mean_sd(self):
        mean, sd = mean_sd([1.0, 2.0, 3.0])
        assert mean == 2.0
        assert sd == pytest.approx(1.0)

    def test_single_value_sd_zero(self):
        assert mean_sd([4.0]) == (4.0, 0.0)

    def test_format_cell(self):
        assert format_cell(10.004, 0.385) == "10.00(0.39)"

    def test_format_table_aligned(self):
        text = format_table("T", ["a", "bbb"], [["1", "2"], ["333", "4"]])
        lines = text.splitlines()
        assert lines[0] == "T"
        assert len(lines) == 5  # title, header, rule, two rows
        assert lines[2].startswith("---")
        assert lines[3] == "1    2"
