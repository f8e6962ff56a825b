"""Tests for the enhanced threshold strategies."""

import math

import numpy as np
import pytest

from coopsense.detector import Hypothesis, analytic_pf, decide, energy_statistic
from coopsense.noise_model import VarianceBracket, generate_noise
from coopsense.threshold_schemes import (
    EnhancedDecision,
    IntervalOutcome,
    ObservationContext,
    SchemeConfig,
    SchemeKind,
    convex_normalizer,
    convex_weighted_statistic,
    decide_enhanced,
    default_weights,
    expectation_statistic,
    statistic_interval,
    two_step_decide,
)


def brute_force_convex_minimum(expectations, weights, exponent):
    """Independent oracle: evaluate every cyclic alignment explicitly."""
    size = len(expectations)
    best = math.inf
    for offset in range(size):
        num = 0.0
        den = 0.0
        for t in range(size):
            w = weights[(t - offset) % size] ** exponent
            num += w * expectations[t]
            den += w
        best = min(best, num / den)
    return best


class TestStatisticInterval:
    def test_degenerate_bracket_collapses(self):
        rng = np.random.default_rng(1)
        samples = generate_noise(1.0, 16, rng)
        energy = float(np.sum(np.abs(samples) ** 2))
        bracket = VarianceBracket(low=0.8, high=0.8)
        low, high = statistic_interval(energy, bracket, 16)
        reference = energy_statistic(samples, 0.8)
        assert low == pytest.approx(reference, rel=1e-12)
        assert high == pytest.approx(reference, rel=1e-12)

    def test_direct_arithmetic(self):
        bracket = VarianceBracket(low=1.0, high=4.0)
        assert statistic_interval(8.0, bracket, 2) == (1.0, 4.0)

    def test_interval_contains_every_interior_statistic(self):
        rng = np.random.default_rng(2)
        for _ in range(10**4):
            energy = float(rng.uniform(0.0, 50.0))
            low_v = float(rng.uniform(0.1, 2.0))
            high_v = low_v + float(rng.uniform(0.0, 2.0))
            k = int(rng.integers(1, 20))
            bracket = VarianceBracket(low=low_v, high=high_v)
            lo, hi = statistic_interval(energy, bracket, k)
            assert lo <= hi
            inner = float(rng.uniform(low_v, high_v))
            value = energy / (k * inner)
            assert lo - 1e-12 <= value <= hi + 1e-12


class TestTwoStepDecide:
    def test_interval_above(self):
        result = two_step_decide((35.0, 40.0), 30.0)
        assert result.outcome == IntervalOutcome.H1

    def test_interval_below(self):
        result = two_step_decide((10.0, 20.0), 30.0)
        assert result.outcome == IntervalOutcome.H0

    def test_straddling_is_undecided(self):
        result = two_step_decide((25.0, 35.0), 30.0)
        assert result.outcome == IntervalOutcome.UNDECIDED

    def test_boundary_counts_as_detection(self):
        assert two_step_decide((30.0, 40.0), 30.0).outcome == IntervalOutcome.H1


class TestExpectationStatistic:
    def test_matches_energy_statistic_when_exact(self):
        rng = np.random.default_rng(3)
        samples = generate_noise(2.0, 32, rng)
        energy = float(np.sum(np.abs(samples) ** 2))
        assert expectation_statistic(energy, 2.0, 32) == pytest.approx(
            energy_statistic(samples, 2.0), rel=1e-12
        )

    def test_direct_arithmetic(self):
        assert expectation_statistic(12.0, 2.0, 3) == pytest.approx(2.0)

    def test_rejects_bad_variance(self):
        with pytest.raises(ValueError):
            expectation_statistic(1.0, 0.0, 4)

    def test_false_alarm_tracks_design_better_than_fixed(self):
        # Miscalibrated fixed normalization vs the bracket-mean one, under
        # true variance drifting uniformly across the bracket.
        rng = np.random.default_rng(515)
        trials, k, threshold = 4 * 10**5, 5, 30.0
        bracket = VarianceBracket(low=1.0, high=1.1)
        nominal = 1.0
        design_pf = analytic_pf(k, threshold)
        variances = rng.uniform(bracket.low, bracket.high, size=trials)
        energies = variances * rng.standard_gamma(k, size=trials)
        # accumulated-scale statistic: 2 * energy / normalizer
        pf_fixed = np.mean(2.0 * energies / nominal >= threshold)
        pf_expect = np.mean(2.0 * energies / bracket.mean >= threshold)
        assert abs(pf_expect - design_pf) < abs(pf_fixed - design_pf)


class TestConvexScheme:
    def test_unit_weights_reduce_to_expectation(self):
        rng = np.random.default_rng(4)
        for _ in range(10**4):
            size = int(rng.integers(1, 12))
            exps = rng.uniform(0.2, 5.0, size=size)
            energy = float(rng.uniform(0.0, 40.0))
            k = int(rng.integers(1, 30))
            exponent = int(rng.integers(1, 4))
            convex = convex_weighted_statistic(
                energy, exps, k, weights=np.ones(size), exponent=exponent
            )
            expectation = expectation_statistic(energy, float(np.mean(exps)), k)
            assert convex == pytest.approx(expectation, abs=1e-12, rel=1e-12)

    def test_single_expectation_ignores_weights(self):
        for weights, exponent in [((3.0,), 1), ((0.25,), 5)]:
            assert convex_normalizer([2.5], weights, exponent) == pytest.approx(2.5)

    def test_brute_force_offset_oracle(self):
        expectations = [1.0, 2.0, 4.0]
        weights = [1.0, 0.5, 0.25]
        oracle = brute_force_convex_minimum(expectations, weights, 1)
        assert oracle == pytest.approx(12.0 / 7.0, rel=1e-12)
        assert convex_normalizer(expectations, weights, 1) == pytest.approx(
            oracle, rel=1e-12
        )

    def test_brute_force_oracle_random(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            size = int(rng.integers(1, 9))
            exps = list(rng.uniform(0.2, 5.0, size=size))
            weights = list(rng.uniform(0.1, 3.0, size=size))
            exponent = int(rng.integers(1, 4))
            assert convex_normalizer(exps, weights, exponent) == pytest.approx(
                brute_force_convex_minimum(exps, weights, exponent), rel=1e-12
            )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            convex_normalizer([1.0, 2.0], [1.0], 1)

    def test_rejects_nonpositive_entries(self):
        with pytest.raises(ValueError):
            convex_normalizer([1.0, -2.0], [1.0, 1.0], 1)
        with pytest.raises(ValueError):
            convex_normalizer([1.0, 2.0], [1.0, 0.0], 1)

    def test_default_weights_geometric(self):
        assert default_weights(4) == (1.0, 0.5, 0.25, 0.125)


class TestDecideEnhanced:
    def context(self, energy=40.0, k=2):
        return ObservationContext(
            energy=energy,
            sample_count=k,
            nominal_variance=1.0,
            variance_bracket=VarianceBracket(low=0.5, high=0.8),
            expected_variance=0.65,
            component_expectations=(0.6, 0.7),
        )

    def test_two_step_clear_interval_single_step(self):
        # energy 40, k=2, bracket [0.5, 0.8] -> interval [25, 40], threshold 20
        result = decide_enhanced(SchemeConfig.two_step(), self.context(), 20.0)
        assert result.decision == Hypothesis.H1
        assert result.steps == 1

    def test_two_step_straddle_matches_expectation_in_two_steps(self):
        scheme = SchemeConfig.two_step()
        context = self.context()
        threshold = 30.0  # inside [25, 40]
        result = decide_enhanced(scheme, context, threshold)
        expectation = decide_enhanced(
            SchemeConfig.expectation(), context, threshold
        )
        assert result.steps == 2
        assert result.interval.outcome == IntervalOutcome.UNDECIDED
        assert result.decision == expectation.decision

    def test_unit_weight_convex_matches_expectation_decision(self):
        rng = np.random.default_rng(6)
        for _ in range(500):
            exps = tuple(rng.uniform(0.3, 3.0, size=int(rng.integers(1, 8))))
            context = ObservationContext(
                energy=float(rng.uniform(0.0, 60.0)),
                sample_count=int(rng.integers(1, 10)),
                expected_variance=float(np.mean(exps)),
                component_expectations=exps,
            )
            threshold = float(rng.uniform(0.1, 20.0))
            convex = decide_enhanced(
                SchemeConfig.convex(weights=np.ones(len(exps))), context, threshold
            )
            expectation = decide_enhanced(
                SchemeConfig.expectation(), context, threshold
            )
            assert convex.decision == expectation.decision

    def test_fixed_single_call(self):
        result = decide_enhanced(SchemeConfig.fixed(), self.context(), 19.0)
        assert result == EnhancedDecision(
            decision=Hypothesis.H1, steps=1, statistic=20.0
        )

    def test_never_more_than_two_steps(self):
        rng = np.random.default_rng(7)
        schemes = [
            SchemeConfig.fixed(),
            SchemeConfig.two_step(),
            SchemeConfig.expectation(),
            SchemeConfig.convex(),
        ]
        for _ in range(400):
            context = self.context(energy=float(rng.uniform(0.0, 80.0)))
            for scheme in schemes:
                result = decide_enhanced(scheme, context, float(rng.uniform(1, 60)))
                assert result.steps in (1, 2)

    @pytest.mark.parametrize(
        "scheme,missing",
        [
            (SchemeConfig.fixed(), "nominal_variance"),
            (SchemeConfig.two_step(), "variance_bracket"),
            (SchemeConfig.expectation(), "expected_variance"),
            (SchemeConfig.convex(), "component_expectations"),
        ],
    )
    def test_missing_context_names_field(self, scheme, missing):
        context = ObservationContext(energy=1.0, sample_count=1)
        with pytest.raises(ValueError, match=missing):
            decide_enhanced(scheme, context, 1.0)

    def test_step_one_agreement_with_midpoint_fixed(self):
        # whenever the interval resolves in step 1, a fixed detector fed the
        # bracket midpoint agrees (the midpoint statistic lies inside the
        # interval), so agreement holds on a strict majority trivially
        rng = np.random.default_rng(8)
        bracket = VarianceBracket(low=0.9, high=1.1)
        resolved = agreed = 0
        for _ in range(10**4):
            snr = float(rng.uniform(1.0, 4.0))
            energy = float((bracket.mean * (1 + snr)) * rng.standard_gamma(4))
            context = ObservationContext(
                energy=energy,
                sample_count=4,
                variance_bracket=bracket,
                expected_variance=bracket.mean,
            )
            result = decide_enhanced(SchemeConfig.two_step(), context, 1.8)
            if result.steps == 1:
                resolved += 1
                fixed = decide(
                    expectation_statistic(energy, bracket.mean, 4), 1.8
                )
                agreed += fixed == result.decision
        assert resolved > 0
        assert agreed > resolved / 2


class TestSchemeConfig:
    def test_kind_coercion_from_string(self):
        assert SchemeConfig(kind="two_step").kind is SchemeKind.TWO_STEP

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            SchemeConfig(kind=SchemeKind.CONVEX, weights=(1.0, -1.0))

    def test_rejects_bad_exponent(self):
        with pytest.raises(ValueError):
            SchemeConfig(kind=SchemeKind.CONVEX, exponent=0)
