import numpy as np
import pytest

from graph import build_similarity, check_coefficient_matrix


class TestBuildSimilarity:
    def test_symmetric_nonnegative_zero_diagonal(self):
        coef = np.array([[0.0, -0.6, 0.0], [0.8, 0.0, 1.0], [-0.6, 0.8, 0.0]])
        sim = build_similarity(coef)
        np.testing.assert_array_equal(sim, sim.T)
        assert np.all(sim >= 0)
        np.testing.assert_array_equal(np.diag(sim), 0.0)
        assert sim[0, 1] == pytest.approx(1.4)

    def test_non_square(self):
        with pytest.raises(ValueError):
            build_similarity(np.zeros((2, 3)))


class TestCoefficientCheck:
    def test_accepts_unit_and_zero_columns(self):
        check_coefficient_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))

    def test_rejects_diagonal(self):
        with pytest.raises(ValueError, match="diagonal"):
            check_coefficient_matrix(np.eye(2))

    def test_rejects_non_unit_column(self):
        with pytest.raises(ValueError, match="unit-norm"):
            check_coefficient_matrix(np.array([[0.0, 0.5], [0.5, 0.0]]))
