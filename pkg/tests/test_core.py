import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from advice_efficient import core
from advice_efficient.core import CumulativeEstimates, SampleSet, SamplingDistribution
from advice_efficient.errors import InvalidInputError, InvalidStateError

from conftest import ordered_inclusion

totals_strategy = arrays(
    np.float64,
    st.integers(1, 30),
    elements=st.floats(0.0, 1e6, allow_nan=False, allow_infinity=False),
)
eta_strategy = st.floats(0.0, 10.0, allow_nan=False)


class TestComputeDistribution:
    def test_zero_losses_give_uniform(self):
        q = core.compute_distribution(CumulativeEstimates.zeros(3), 0.5)
        np.testing.assert_allclose(q.probs, [1 / 3] * 3, rtol=0, atol=1e-15)

    def test_eta_zero_gives_uniform(self):
        q = core.compute_distribution([3.0, 100.0, 7.5, 0.0], 0.0)
        np.testing.assert_array_equal(q.probs, [0.25] * 4)

    def test_two_to_one_ratio(self):
        eta = 0.37
        q = core.compute_distribution([0.0, math.log(2) / eta], eta)
        np.testing.assert_allclose(q.probs, [2 / 3, 1 / 3], rtol=0, atol=1e-15)

    def test_matches_direct_formula(self, rng):
        totals = rng.uniform(0, 20, 9)
        eta = 0.3
        w = np.exp(-eta * totals)
        np.testing.assert_allclose(core.compute_distribution(totals, eta).probs, w / w.sum(), rtol=1e-13)

    def test_no_underflow_for_huge_totals(self):
        q = core.compute_distribution([1e6, 1e6 + 1.0, 2e6], 50.0)
        assert q.probs[0] > 0.99
        assert abs(q.probs.sum() - 1.0) <= 1e-12

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            core.compute_distribution([], 0.1)
        with pytest.raises(InvalidInputError):
            CumulativeEstimates([])

    def test_negative_eta_rejected(self):
        with pytest.raises(InvalidInputError):
            core.compute_distribution([0.0, 1.0], -0.1)

    @settings(max_examples=200, deadline=None)
    @given(totals_strategy, eta_strategy)
    def test_normalized(self, totals, eta):
        p = core.compute_distribution(totals, eta).probs
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(totals_strategy, eta_strategy, st.floats(0.0, 1e3))
    def test_shift_invariant(self, totals, eta, c):
        a = core.compute_distribution(totals, eta).probs
        b = core.compute_distribution(totals + c, eta).probs
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 50.0), st.floats(1e-3, 10.0), st.floats(0.01, 1.0))
    def test_smaller_total_gets_more_mass(self, a, gap, eta):
        p = core.compute_distribution([a, a + gap, a + 2 * gap], eta).probs
        assert p[0] > p[1] > p[2]


class TestLearningRate:
    def test_single_expert_is_zero(self):
        assert core.learning_rate(1, 1, 1) == 0.0
        assert core.learning_rate(999, 1, 1) == 0.0

    def test_value(self):
        # sqrt(10 * ln(100) / 100)
        assert core.learning_rate(1, 100, 10) == pytest.approx(0.6786140424415112, abs=1e-15)

    @pytest.mark.parametrize("k", [1, 3, 17, 1000])
    def test_quadrupling_round_halves_rate(self, k):
        assert core.learning_rate(4 * k, 20, 3) == pytest.approx(core.learning_rate(k, 20, 3) / 2, rel=1e-15)

    @given(st.integers(2, 500), st.integers(1, 500), st.integers(1, 10_000))
    def test_positive_and_non_increasing(self, N, M, t):
        M = min(M, N)
        a, b = core.learning_rate(t, N, M), core.learning_rate(t + 1, N, M)
        assert 0 < b <= a

    @pytest.mark.parametrize("args", [(0, 5, 2), (1, 5, 0), (1, 5, 6), (1, 0, 1)])
    def test_bad_arguments(self, args):
        with pytest.raises(InvalidInputError):
            core.learning_rate(*args)


class TestInclusionProbability:
    def test_full_observation_is_exactly_one(self, rng):
        q = SamplingDistribution(rng.dirichlet(np.ones(6)))
        assert all(core.inclusion_probability(q, h, 6, 6) == 1.0 for h in range(6))

    def test_single_observation_is_q(self, rng):
        q = SamplingDistribution(rng.dirichlet(np.ones(5)))
        assert [core.inclusion_probability(q, h, 1, 5) for h in range(5)] == q.probs.tolist()

    @pytest.mark.parametrize("N", range(2, 7))
    def test_uniform_q_gives_M_over_N(self, N):
        q = SamplingDistribution.uniform(N)
        for M in range(1, N + 1):
            brute = ordered_inclusion(q.probs, M)
            np.testing.assert_allclose(brute, M / N, rtol=0, atol=1e-12)
            for h in range(N):
                assert core.inclusion_probability(q, h, M, N) == pytest.approx(M / N, abs=1e-12)

    @pytest.mark.parametrize("N", range(2, 7))
    def test_matches_ordered_enumeration(self, N, rng):
        for M in range(1, N + 1):
            q = SamplingDistribution(rng.dirichlet(np.ones(N)))
            closed = [core.inclusion_probability(q, h, M, N) for h in range(N)]
            np.testing.assert_allclose(closed, ordered_inclusion(q.probs, M), rtol=0, atol=1e-12)
            np.testing.assert_allclose(core.inclusion_probabilities(q, M), closed, rtol=0, atol=1e-15)

    def test_single_expert(self):
        assert core.inclusion_probability(SamplingDistribution([1.0]), 0, 1, 1) == 1.0

    def test_out_of_range_expert(self):
        with pytest.raises(InvalidInputError):
            core.inclusion_probability(SamplingDistribution.uniform(3), 3, 2, 3)


class TestSampleExperts:
    def test_single_expert(self, rng):
        s = core.sample_experts(SamplingDistribution([1.0]), 1, rng)
        assert s == SampleSet(0, (0,))

    def test_full_observation(self, rng):
        q = SamplingDistribution([0.1, 0.2, 0.3, 0.4])
        for _ in range(50):
            assert core.sample_experts(q, 4, rng).observed == (0, 1, 2, 3)

    def test_point_mass_primary_with_uniform_extra(self, rng):
        q = SamplingDistribution([1.0, 0.0, 0.0])
        n = 100_000
        hits = {(0, 1): 0, (0, 2): 0}
        for _ in range(n):
            s = core.sample_experts(q, 2, rng)
            assert s.primary == 0
            hits[s.observed] += 1
        # chi-square with one degree of freedom, 99.9% quantile 10.83
        chi2 = sum((c - n / 2) ** 2 / (n / 2) for c in hits.values())
        assert chi2 < 10.83

    def test_every_subset_equiprobable(self, rng):
        # Extras given primary 0 out of N=5 with M=3: C(4, 2) = 6 subsets.
        q = SamplingDistribution([1.0, 0.0, 0.0, 0.0, 0.0])
        n = 60_000
        counts: dict = {}
        for _ in range(n):
            obs = core.sample_experts(q, 3, rng).observed
            counts[obs] = counts.get(obs, 0) + 1
        assert len(counts) == 6
        expected = n / 6
        chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
        assert chi2 < 20.52  # 99.9% quantile, 5 degrees of freedom

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 12), st.data())
    def test_sample_set_invariants(self, N, data):
        M = data.draw(st.integers(1, N))
        seed = data.draw(st.integers(0, 2**32 - 1))
        rng = np.random.default_rng(seed)
        q = SamplingDistribution(rng.dirichlet(np.ones(N)))
        s = core.sample_experts(q, M, rng)
        assert len(s.observed) == len(set(s.observed)) == M
        assert s.primary in s.observed
        assert all(0 <= h < N for h in s.observed)

    def test_zero_mass_expert_never_primary(self, rng):
        q = SamplingDistribution([0.5, 0.0, 0.5, 0.0])
        assert all(core.sample_experts(q, 1, rng).primary in (0, 2) for _ in range(2000))

    @pytest.mark.parametrize("M", [0, 4])
    def test_bad_budget(self, M, rng):
        with pytest.raises(InvalidInputError):
            core.sample_experts(SamplingDistribution.uniform(3), M, rng)

    def test_deterministic_given_seed(self):
        q = SamplingDistribution([0.2, 0.3, 0.1, 0.4])
        a = [core.sample_experts(q, 2, np.random.default_rng(7)) for _ in range(3)]
        b = [core.sample_experts(q, 2, np.random.default_rng(7)) for _ in range(3)]
        assert a == b


class TestImportanceWeightedEstimate:
    def test_full_observation_unweighted(self):
        assert core.importance_weighted_estimate(0.7, 1.0, True) == 0.7

    @pytest.mark.parametrize("loss", [0.0, 0.3, 1.0])
    def test_unobserved_is_zero(self, loss):
        assert core.importance_weighted_estimate(loss, 0.25, False) == 0.0

    def test_half_inclusion_doubles(self):
        q = SamplingDistribution([0.5, 0.5])
        p = core.inclusion_probability(q, 0, 1, 2)
        assert p == 0.5
        assert core.importance_weighted_estimate(0.5, p, True) == 1.0

    @pytest.mark.parametrize("p", [0.0, -0.1])
    def test_zero_probability_observation_is_a_bug(self, p):
        with pytest.raises(InvalidStateError):
            core.importance_weighted_estimate(0.5, p, True)

    @pytest.mark.parametrize("loss", [-0.01, 1.01, float("nan")])
    def test_loss_out_of_range(self, loss):
        with pytest.raises(InvalidInputError):
            core.importance_weighted_estimate(loss, 0.5, True)


class TestTypes:
    def test_distribution_validation(self):
        with pytest.raises(InvalidInputError):
            SamplingDistribution([0.5, 0.6])
        with pytest.raises(InvalidInputError):
            SamplingDistribution([1.5, -0.5])
        with pytest.raises(InvalidInputError):
            SamplingDistribution([])

    def test_estimates_accumulate(self):
        est = CumulativeEstimates.zeros(3)
        est.add(np.array([0.0, 2.0, 0.5]))
        est.add(np.array([1.0, 0.0, 0.0]))
        np.testing.assert_array_equal(est.totals, [1.0, 2.0, 0.5])
        assert est.round_index == 2
        with pytest.raises(InvalidStateError):
            est.add(np.array([-1.0, 0.0, 0.0]))

    def test_sample_set_validation(self):
        assert SampleSet(2, (3, 2, 0)).observed == (0, 2, 3)
        with pytest.raises(InvalidInputError):
            SampleSet(1, (0, 2))
        with pytest.raises(InvalidInputError):
            SampleSet(0, (0, 0))

    def test_argmax_tie_breaks_low(self):
        assert core.argmax_expert(SamplingDistribution([0.2, 0.4, 0.4])) == 1
