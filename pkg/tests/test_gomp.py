import math

import numpy as np
import pytest

from datagen import add_noise, generate
from errors import ConfigError
from gomp import (HALT_EXHAUSTED, HALT_FIXED, HALT_FLOOR, HALT_RATIO, StopPolicy, gomp_select, normalize_points,
                  run_regressions, sparse_representation, stopping_check, stopping_check_equiv,
                  stopping_threshold_equiv, truth_bases_for)
from graph import check_coefficient_matrix


def naive_gomp(points, i, p, iterations):
    """Textbook GOMP with a fresh least-squares fit per iteration."""
    y = points[i]
    selected, norms = [], []
    r = y.copy()
    for _ in range(iterations):
        cand = [j for j in range(points.shape[0]) if j != i and j not in selected]
        scores = {j: abs(points[j] @ r) for j in cand}
        selected += sorted(cand, key=lambda j: (-scores[j], j))[:p]
        a = points[selected].T
        coef = np.linalg.lstsq(a, y, rcond=None)[0]
        r = y - a @ coef
        norms.append(np.linalg.norm(r))
    return selected, norms, coef


class TestStopPolicy:
    def test_parse(self):
        assert StopPolicy.parse("ratio", 2) == StopPolicy.ratio(2)
        assert StopPolicy.parse("fixed:4", 1) == StopPolicy.fixed(4, 1)
        assert StopPolicy.fixed(4, 1).describe() == "fixed:4"

    @pytest.mark.parametrize("text", ["fixed:x", "fixed", "greedy", "fixed:0"])
    def test_parse_rejects(self, text):
        with pytest.raises(ConfigError):
            StopPolicy.parse(text, 1)

    def test_p_must_be_positive(self):
        with pytest.raises(ConfigError):
            StopPolicy.ratio(0)


class TestStoppingRule:
    def test_ratio_threshold(self):
        # 1 - sqrt(1/100) = 0.9
        assert stopping_check(1.0, 0.91, 1, 100)
        assert not stopping_check(1.0, 0.89, 1, 100)

    def test_zero_previous_residual_halts(self):
        assert stopping_check(0.0, 0.0, 1, 10)

    def test_p_larger_than_n(self):
        with pytest.raises(ConfigError):
            stopping_check(1.0, 0.5, 11, 10)
        with pytest.raises(ConfigError):
            stopping_check_equiv(0.5, 11, 10)

    def test_equivalent_threshold(self):
        s = math.sqrt(4 / 100)
        assert stopping_threshold_equiv(4, 100) == pytest.approx(math.sqrt(2 * s - s * s))

    @pytest.mark.slow
    def test_both_forms_agree_on_seeded_runs(self):
        for seed in range(100):
            _, ds = generate(20, 3, 3, 0.3, [8, 8, 8], 0.2, np.random.default_rng(seed))
            p = 1 + seed % 3
            _, trace = gomp_select(ds, seed % ds.size, StopPolicy.ratio(p))
            norms = trace.residual_norms()
            for m, rec in enumerate(trace.records):
                prev, curr, step = norms[m], rec.residual_norm, rec.step_norm
                assert abs(prev ** 2 - curr ** 2 - step ** 2) <= 1e-9 * prev ** 2
                assert stopping_check(prev, curr, p, 20) == stopping_check_equiv(step / prev, p, 20)


class TestGompSelect:
    @pytest.mark.parametrize("p,iterations", [(1, 4), (2, 3), (3, 2)])
    def test_matches_naive_implementation(self, noisy_data, p, iterations):
        _, ds = noisy_data
        for i in (0, 17, 60):
            rep, trace = gomp_select(ds, i, StopPolicy.fixed(iterations, p))
            selected, norms, coef = naive_gomp(ds.points, i, p, iterations)
            assert list(rep.support) == selected
            np.testing.assert_allclose([r.residual_norm for r in trace.records], norms, rtol=1e-9)
            np.testing.assert_allclose(rep.coeffs, coef, rtol=1e-8, atol=1e-10)
            assert trace.halted_by == HALT_FIXED

    def test_support_excludes_self_and_is_unit_norm(self, noisy_data):
        _, ds = noisy_data
        rep, _ = gomp_select(ds, 5, StopPolicy.fixed(3, 2))
        assert 5 not in rep.support
        assert len(rep.support) == 6
        assert np.linalg.norm(rep.normalized_full) == pytest.approx(1.0)
        assert set(np.flatnonzero(rep.normalized_full)) <= set(rep.support)

    def test_ties_go_to_lowest_index(self):
        points = np.array([[1.0, 0.0], [0.6, 0.8], [0.6, 0.8], [0.0, 1.0]])
        rep, _ = gomp_select(points, 0, StopPolicy.fixed(1, 1))
        assert rep.support == (1,)

    def test_ratio_halt_discards_last_batch(self, noisy_data):
        _, ds = noisy_data
        for rep, trace in run_regressions(ds, StopPolicy.ratio(2)):
            if trace.halted_by == HALT_RATIO and not trace.first_batch_kept:
                assert trace.discarded_last_batch
                assert len(rep.support) == 2 * (trace.iterations - 1)
                assert not set(trace.records[-1].selected) & set(rep.support)

    def test_first_batch_is_kept_when_rule_fires_immediately(self):
        points = np.eye(3)
        rep, trace = gomp_select(points, 0, StopPolicy.ratio(1))
        assert trace.halted_by == HALT_RATIO
        assert trace.first_batch_kept and not trace.discarded_last_batch
        assert rep.support == (1,)

    def test_zero_point_selects_nothing(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        rep, trace = gomp_select(points, 0, StopPolicy.ratio(1))
        assert trace.halted_by == HALT_FLOOR
        assert rep.support == ()
        assert not np.any(rep.normalized_full)

    def test_noiseless_point_stops_at_floor(self, orthogonal_data):
        _, ds = orthogonal_data
        rep, trace = gomp_select(ds, 0, StopPolicy.fixed(10, 1))
        assert trace.halted_by == HALT_FLOOR
        assert len(rep.support) == 4

    def test_candidates_run_out(self):
        points = np.random.default_rng(0).standard_normal((4, 10))
        rep, trace = gomp_select(points, 0, StopPolicy.fixed(5, 2))
        assert trace.halted_by == HALT_EXHAUSTED
        assert sorted(rep.support) == [1, 2, 3]

    def test_index_out_of_range(self, noisy_data):
        with pytest.raises(IndexError):
            gomp_select(noisy_data[1], 500, StopPolicy.ratio(1))


class TestTraces:
    def test_gomp_aod_is_constant_within_a_batch(self, orthogonal_data):
        model, ds = orthogonal_data
        truth = truth_bases_for(ds.labels, model.bases)
        noisy = add_noise(ds, 0.3, np.random.default_rng(2))
        _, trace = gomp_select(noisy, 3, StopPolicy.fixed(3, 3), truth[3])
        aods = trace.selection_aods()
        assert len(aods) == 9
        for batch in range(3):
            assert len(set(aods[3 * batch: 3 * batch + 3])) == 1

    def test_aods_need_a_truth_basis(self, noisy_data):
        _, trace = gomp_select(noisy_data[1], 0, StopPolicy.fixed(2, 1))
        with pytest.raises(ValueError):
            trace.selection_aods()


class TestSparseRepresentation:
    def test_matrix_is_well_formed(self, noisy_data):
        coef = sparse_representation(noisy_data[1], StopPolicy.ratio(1))
        check_coefficient_matrix(coef)

    def test_thread_count_does_not_change_result(self, noisy_data):
        policy = StopPolicy.ratio(2)
        one = sparse_representation(noisy_data[1], policy, threads=1)
        many = sparse_representation(noisy_data[1], policy, threads=3)
        np.testing.assert_array_equal(one, many)

    def test_normalize_points_keeps_zero_rows(self):
        out = normalize_points(np.array([[3.0, 4.0], [0.0, 0.0]]))
        np.testing.assert_allclose(out, [[0.6, 0.8], [0.0, 0.0]])


class TestScaleInvariance:
    @pytest.mark.parametrize("scale", [1e-12, 1e6])
    def test_support_does_not_depend_on_data_scale(self, noisy_data, scale):
        points = noisy_data[1].points
        reference, ref_trace = gomp_select(points, 0, StopPolicy.ratio(2))
        scaled, trace = gomp_select(scale * points, 0, StopPolicy.ratio(2))
        assert scaled.support == reference.support
        assert trace.halted_by == ref_trace.halted_by


class TestSelectionInvariants:
    def test_residual_is_orthogonal_to_support(self, noisy_data):
        points = noisy_data[1].points
        for i in (1, 30, 70):
            rep, _ = gomp_select(points, i, StopPolicy.fixed(3, 2))
            chosen = points[list(rep.support)]
            residual = points[i] - chosen.T @ rep.coeffs
            np.testing.assert_allclose(chosen @ residual, 0.0, atol=1e-10)

    def test_recorded_aod_matches_direct_computation(self, orthogonal_data):
        model, ds = orthogonal_data
        noisy = add_noise(ds, 0.2, np.random.default_rng(12))
        truth = truth_bases_for(ds.labels, model.bases)
        points = noisy.points
        i = 25
        _, trace = gomp_select(points, i, StopPolicy.fixed(3, 2), truth[i])
        u = truth[i]
        selected = []
        for rec in trace.records:
            selected += list(rec.selected)
            a = points[selected].T
            r = points[i] - a @ np.linalg.lstsq(a, points[i], rcond=None)[0]
            par = u @ (u.T @ r)
            expected = math.atan(np.linalg.norm(r - par) / np.linalg.norm(par))
            assert rec.aod == pytest.approx(expected, abs=1e-9)

    def test_single_neighbor_matches_plain_omp(self):
        for seed in range(50):
            _, ds = generate(30, 3, 3, 0.2, [8, 8, 8], 0.1, np.random.default_rng(100 + seed))
            i = seed % ds.size
            rep, _ = gomp_select(ds, i, StopPolicy.fixed(4, 1))
            selected, _, _ = naive_gomp(ds.points, i, 1, 4)
            assert list(rep.support) == selected


class TestRatioRuleDepth:
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_low_noise_keeps_one_neighbor_per_dimension(self, p):
        _, ds = generate(300, 6, 3, 0.0, [48, 48, 48], 1e-6, np.random.default_rng(21))
        coef = sparse_representation(ds, StopPolicy.ratio(p))
        supports = np.count_nonzero(coef, axis=0)
        assert 5.8 <= supports.mean() <= 6.2
