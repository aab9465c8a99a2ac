import math
from dataclasses import replace

import numpy as np
import pytest

from bounds import (BoundParams, separation_check, brute_force_k_min, global_bound, gomp_comparison_bound,
                    halting_bound, halting_remainder, is_majorized, iteration_bound, j_term, mc_concentration,
                    omp_comparison_bound, omp_specialization_bound, optimal_k_sequence, sequence_objective,
                    unit_ball_volume)
from errors import ConfigError


def small_params(**changes):
    base = BoundParams(n=10_000, N=300, cluster_size=100, d_L=6, sigma=0.01, tau=0.9,
                       affinities=(0.0, 0.0))
    return replace(base, **changes)


class TestParams:
    def test_tau_outside_unit_interval(self):
        with pytest.raises(ConfigError, match=r"\(0, 1\)"):
            BoundParams(n=100, N=100, cluster_size=30, d_L=5, sigma=0.1, tau=1.2)

    def test_cluster_larger_than_data(self):
        with pytest.raises(ConfigError):
            BoundParams(n=100, N=10, cluster_size=30, d_L=5, sigma=0.1, tau=0.5)

    def test_unit_ball_volume(self):
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


class TestIterationBound:
    def test_p1_matches_written_out_specialization(self):
        params = small_params(p=1, M=3)
        spec = omp_specialization_bound(params)
        it = iteration_bound(params, [1, 1, 1])
        assert spec.value == pytest.approx(it.value, abs=1e-14)

    def test_each_positive_k_adds_its_j_term(self, large_n_params):
        without = iteration_bound(large_n_params, [3, 0, 0, 0, 0]).value
        with_one = iteration_bound(large_n_params, [3, 1, 0, 0, 0]).value
        tail = (4 + 2 * large_n_params.c_const) / large_n_params.N ** 2
        assert without - with_one == pytest.approx(j_term(1, large_n_params) + tail, rel=1e-6)

    def test_iteration_count_limit(self, large_n_params):
        with pytest.raises(ConfigError):
            iteration_bound(large_n_params, [1] * 8)

    def test_small_data_is_vacuous(self):
        result = iteration_bound(BoundParams(n=20, N=50, cluster_size=20, d_L=5, sigma=0.5, tau=0.5), [1])
        assert result.vacuous


class TestGlobalBound:
    def test_balanced_sequence(self):
        assert optimal_k_sequence(7, 3, 3) == [3, 2, 2]
        assert optimal_k_sequence(0, 2, 3) == [0, 0]

    def test_k_t_too_large(self):
        with pytest.raises(ConfigError):
            optimal_k_sequence(10, 3, 3)

    @pytest.mark.slow
    def test_brute_force_oracle(self):
        base = BoundParams(n=10_000, N=10_000, cluster_size=3000, d_L=20, sigma=0.01, tau=0.5, c_const=1.0)
        for big_m in range(1, 5):
            for p in range(1, 5):
                params = replace(base, p=p, M=big_m)
                for k_t in range(p * big_m + 1):
                    seq = optimal_k_sequence(k_t, big_m, p)
                    _, best = brute_force_k_min(k_t, big_m, p, params)
                    assert best == pytest.approx(sequence_objective(seq, params), rel=1e-12, abs=1e-300)
                    assert global_bound(params, k_t).value == pytest.approx(
                        iteration_bound(params, seq).value, abs=1e-12)

    def test_enumeration_guard(self, large_n_params):
        with pytest.raises(ConfigError):
            brute_force_k_min(10, 12, 3, large_n_params)


class TestComparison:
    def test_gomp_beats_omp_at_large_n(self, large_n_params):
        gomp = gomp_comparison_bound(large_n_params, 2)
        omp = omp_comparison_bound(large_n_params, 2)
        assert gomp.value > omp.value

    def test_k_must_exceed_one(self, large_n_params):
        with pytest.raises(ConfigError):
            gomp_comparison_bound(large_n_params, 1)


class TestHalting:
    def test_remainder(self):
        assert halting_remainder(20, 3) == 2
        assert halting_remainder(9, 3) == 3
        assert halting_remainder(5, 1) == 1

    def test_halting_bound_is_a_probability_bound(self, large_n_params):
        assert halting_bound(large_n_params).value < 1.0

    def test_p_above_dimension(self):
        with pytest.raises(ConfigError):
            halting_bound(small_params(p=7))


class TestSeparation:
    def test_passes_with_enough_ambient_dimension(self):
        # natural log: at n=1e4 the printed condition fails (0.050 > 0.039), so this needs n=1e5
        check = separation_check(small_params(n=100_000))
        assert check.passed and check.lhs < check.rhs

    def test_printed_fails_at_ten_thousand_under_natural_log(self):
        check = separation_check(small_params())
        assert not check.passed
        assert check.lhs == pytest.approx(0.050, abs=5e-3)
        assert check.rhs == pytest.approx(0.039, abs=5e-3)

    def test_proof_variant_is_looser(self):
        params = small_params()
        assert separation_check(params, "proof").passed
        assert separation_check(params, "proof").lhs < separation_check(params, "printed").lhs

    def test_large_affinity_fails(self):
        assert not separation_check(small_params(affinities=(0.99,), tau=0.99)).passed

    def test_undefined_at_high_noise(self):
        with pytest.raises(ConfigError, match="undefined"):
            separation_check(small_params(sigma=0.7))


class TestMajorization:
    def test_balanced_is_majorized_by_unbalanced(self):
        assert is_majorized([2, 2, 2], [3, 2, 1])
        assert not is_majorized([3, 2, 1], [2, 2, 2])

    def test_schur_convexity_on_j(self, large_n_params):
        params = replace(large_n_params, M=3)
        seqs = [[3, 2, 2], [3, 3, 1], [2, 2, 3], [3, 1, 3]]
        balanced = sum(j_term(k, params) for k in seqs[0])
        for seq in seqs[1:]:
            if is_majorized(seqs[0], seq):
                assert balanced <= sum(j_term(k, params) for k in seq) * (1 + 1e-12)


class TestConcentration:
    @pytest.mark.slow
    @pytest.mark.parametrize("m,eps", [(50, 0.5), (100, 0.1), (20, 0.3)])
    def test_empirical_rates_respect_bounds(self, m, eps):
        res = mc_concentration(m, eps, 100_000, np.random.default_rng(m))
        assert res.emp_a <= res.bound_a + res.tolerance(res.bound_a)
        assert res.emp_b <= res.bound_b + res.tolerance(res.bound_b)

    def test_same_seed_same_rates(self):
        a = mc_concentration(10, 0.3, 5000, np.random.default_rng(1), chunk=1000)
        b = mc_concentration(10, 0.3, 5000, np.random.default_rng(1), chunk=1000)
        assert a == b


class TestMonotonicity:
    def test_bounds_grow_with_ambient_dimension(self):
        ns = [50, 200, 1000, 10_000, 100_000]
        for name, fn in [("iteration", lambda p: iteration_bound(p, [1, 1, 1])),
                         ("halting", halting_bound)]:
            values = [fn(small_params(n=n, p=1, M=3)).value for n in ns]
            assert values == sorted(values), name

    def test_majorized_sequences_cost_no_more(self, large_n_params):
        rng = np.random.default_rng(5)
        checked = 0
        for _ in range(400):
            p = int(rng.integers(1, 6))
            big_m = int(rng.integers(1, 6))
            params = replace(large_n_params, p=p, M=big_m)
            k = rng.integers(0, p + 1, size=big_m)
            q = rng.permutation(k)
            # move one unit from the smaller to the larger entry: q then majorizes k
            if big_m > 1:
                order = np.argsort(q)
                lo, hi = order[0], order[-1]
                if q[lo] > 0 and q[hi] < p:
                    q[lo] -= 1
                    q[hi] += 1
            assert is_majorized(k.tolist(), q.tolist())
            assert sequence_objective(k.tolist(), params) <= sequence_objective(q.tolist(), params) * (1 + 1e-12)
            checked += 1
        assert checked == 400


class TestBallVolume:
    def test_segment_length(self):
        assert unit_ball_volume(1) == pytest.approx(2.0)
        assert unit_ball_volume(0) == pytest.approx(1.0)

    @pytest.mark.parametrize("d", range(2, 30))
    def test_dimension_recurrence(self, d):
        assert unit_ball_volume(d) == pytest.approx(2 * math.pi / d * unit_ball_volume(d - 2), rel=1e-12)
