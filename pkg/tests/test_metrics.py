import logging
import math

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from gomp import GompTrace, IterationRecord
from metrics import (aod, anrn, ccr, confusion_matrix, knee_dimension, mean_aod_per_index, metrics_report,
                     normalized_singular_values, per_neighbor_true_rate, tnr)


def trace(point, batches, aods=None):
    records = [IterationRecord(selected=tuple(b), residual_norm=0.5, step_norm=0.5) for b in batches]
    if aods is not None:
        for rec, angle in zip(records, aods[1:]):
            rec.aod = angle
    return GompTrace(point=point, initial_norm=1.0, initial_aod=None if aods is None else aods[0],
                     records=records)


class TestTnrAnrn:
    def test_tnr_counts_same_cluster_links(self):
        coef = np.zeros((4, 4))
        coef[1, 0] = 1.0  # true
        coef[2, 0] = 0.5  # false
        coef[0, 1] = 1.0  # true
        assert tnr(coef, [1, 1, 2, 2]) == pytest.approx(2 / 3)

    def test_empty_matrix_is_vacuous(self, caplog):
        with caplog.at_level(logging.WARNING, logger="metrics"):
            assert tnr(np.zeros((3, 3)), [1, 1, 2]) == 1.0
        assert "vacuous" in caplog.text

    def test_label_count_mismatch(self):
        with pytest.raises(ValueError):
            tnr(np.zeros((3, 3)), [1, 2])

    def test_anrn(self):
        coef = np.zeros((4, 4))
        coef[1, 0] = coef[2, 0] = coef[0, 3] = 1.0
        assert anrn(coef) == pytest.approx(0.75)


class TestCcr:
    def test_permuted_labels_are_perfect(self):
        assert ccr([2, 2, 3, 3, 1], [1, 1, 2, 2, 3]) == 1.0

    def test_best_matching(self):
        assert ccr([1, 1, 2, 2], [1, 2, 2, 2]) == pytest.approx(0.75)

    def test_extra_predicted_clusters_count_as_wrong(self):
        assert ccr([1, 2, 3], [1, 1, 1]) == pytest.approx(1 / 3)

    def test_hungarian_branch_on_many_clusters(self):
        truth = np.repeat(np.arange(1, 11), 3)
        pred = (truth * 7) % 11
        assert ccr(pred, truth) == 1.0

    def test_exhaustive_agrees_with_assignment(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pred, truth = rng.integers(1, 6, 40), rng.integers(1, 6, 40)
            counts = confusion_matrix(pred, truth)
            rows, cols = linear_sum_assignment(counts, maximize=True)
            assert ccr(pred, truth) == pytest.approx(counts[rows, cols].sum() / 40)


class TestAod:
    def test_inside_outside_and_diagonal(self):
        basis = np.eye(3)[:, :1]
        assert aod([2.0, 0.0, 0.0], basis) == 0.0
        assert aod([0.0, 1.0, 0.0], basis) == pytest.approx(math.pi / 2)
        assert aod([1.0, 1.0, 0.0], basis) == pytest.approx(math.pi / 4)

    def test_zero_vector(self):
        assert aod(np.zeros(3), np.eye(3)[:, :1]) == 0.0


class TestPerIndex:
    def test_true_rate_per_neighbor_index(self):
        labels = [1, 1, 1, 2]
        traces = [trace(0, [[1], [3]]), trace(1, [[2]])]
        assert per_neighbor_true_rate(traces, labels) == [1.0, 0.0]

    def test_true_rate_counts_only_traces_that_reached_the_index(self):
        labels = [1, 1, 1, 1, 2]
        # neighbor 3 exists only for point 0, and it is false there
        traces = [trace(0, [[1], [2], [4]]), trace(1, [[0]]), trace(2, [[4], [0]])]
        assert per_neighbor_true_rate(traces, labels) == [pytest.approx(2 / 3), 1.0, 0.0]

    def test_mean_aod_uses_selecting_residual(self):
        traces = [trace(0, [[1, 2], [3, 4]], aods=[0.4, 0.2, 0.1]),
                  trace(1, [[0, 2], [3, 4]], aods=[0.6, 0.4, 0.3])]
        np.testing.assert_allclose(mean_aod_per_index(traces), [0.5, 0.5, 0.3, 0.3])


class TestDimension:
    def test_normalized_singular_values_start_at_one(self):
        pts = np.random.default_rng(0).standard_normal((20, 5))
        values = normalized_singular_values(pts)
        assert values[0] == pytest.approx(1.0)
        assert np.all(np.diff(values) <= 0)

    def test_knee_at_largest_relative_drop(self):
        assert knee_dimension([1.0, 0.9, 0.8, 0.1, 0.05]) == 3

    def test_knee_of_low_rank_data(self):
        rng = np.random.default_rng(1)
        pts = rng.standard_normal((50, 4)) @ rng.standard_normal((4, 30)) + 1e-4 * rng.standard_normal((50, 30))
        assert knee_dimension(normalized_singular_values(pts), max_dim=10) == 4


class TestReport:
    def test_without_truth_only_anrn(self):
        row = metrics_report(np.eye(2)[::-1]).to_row()
        assert row == {"anrn": 1.0}

    def test_with_truth(self):
        coef = np.array([[0.0, 1.0], [1.0, 0.0]])
        row = metrics_report(coef, np.array([1, 1]), np.array([1, 1])).to_row()
        assert row["tnr"] == 1.0 and row["ccr"] == 1.0 and row["tnr_vacuous"] is False
