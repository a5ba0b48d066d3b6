import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom, norm

from seqbh import (
    BinomialModel,
    DomainError,
    GlrSpec,
    GLRAccumulator,
    LLRAccumulator,
    NormalModel,
    SimpleTestSpec,
    TwoSampleBinomialAccumulator,
    TwoSampleBinomialSpec,
    WaldConfig,
    bernoulli_natural,
    calibrate_ladder_mc,
    fractional_levels,
    glr_statistics,
    kl_info,
    llr_increment,
    rejective_llr_ladder,
    sbh_wald_ladder,
    signed_root,
    two_sample_binomial_glr,
    wald_ab,
)
from seqbh.statistics import INWARD, bernoulli_psi

import oracles

# Frozen values computed with 40-digit arithmetic.
A_W_05_20 = -1.5581446180465498
B_W_05_20 = 2.7725887222397812
K2_A = (-2.2772672850097558, -1.5869650565820418)
K2_B = (3.5835189384561100, 2.8932167100283960)
LOG_1_5 = 0.40546510810816438
PSI_LOGIT_04 = 0.51082562376599068
KL_06_04 = 0.081093021621632876


def random_levels(rng):
    K = int(rng.integers(1, 51))
    alpha = rng.uniform(0.001, 0.5)
    beta = rng.uniform(0.001, 1 - alpha)
    return WaldConfig(alpha, beta, K)


class TestWaldBoundaries:
    def test_closed_form(self):
        lo, hi = wald_ab(0.05, 0.2)
        assert lo == pytest.approx(A_W_05_20, abs=1e-12)
        assert hi == pytest.approx(B_W_05_20, abs=1e-12)

    def test_rho_shifts_outward(self):
        lo, hi = wald_ab(0.05, 0.2, rho=0.583)
        assert lo == pytest.approx(A_W_05_20 - 0.583, abs=1e-12)
        assert hi == pytest.approx(B_W_05_20 + 0.583, abs=1e-12)

    def test_inward_overshoot(self):
        lo, hi = wald_ab(0.05, 0.2, rho=0.583, overshoot=INWARD)
        assert lo == pytest.approx(A_W_05_20 + 0.583, abs=1e-12)
        assert hi == pytest.approx(B_W_05_20 - 0.583, abs=1e-12)

    def test_symmetric_levels_are_degenerate(self):
        with pytest.raises(DomainError, match="degenerate"):
            wald_ab(0.5, 0.5)

    def test_levels_summing_above_one(self):
        with pytest.raises(DomainError):
            wald_ab(0.6, 0.5)

    def test_config_validation(self):
        with pytest.raises(DomainError):
            WaldConfig(0.7, 0.4, 3)
        with pytest.raises(DomainError):
            WaldConfig(0.05, 0.2, 0)
        with pytest.raises(DomainError):
            WaldConfig(0.05, 0.2, 2, rho=-1)
        with pytest.raises(DomainError):
            WaldConfig(0.05, 0.2, 2, overshoot="sideways")


class TestFractionalLevels:
    def test_single_stream_recovers_levels(self):
        assert fractional_levels(WaldConfig(0.05, 0.2, 1), 1) == pytest.approx((0.05, 0.2))

    def test_two_streams(self):
        a1, b1 = fractional_levels(WaldConfig(0.05, 0.2, 2), 1)
        assert a1 == pytest.approx(0.025, abs=1e-15)
        assert b1 == pytest.approx(0.1, abs=1e-15)

    def test_alpha_s_decreasing(self):
        cfg = WaldConfig(0.05, 0.2, 10)
        levels = [fractional_levels(cfg, s)[0] for s in range(1, 11)]
        assert np.all(np.diff(levels) < 0)

    def test_out_of_range_s(self):
        with pytest.raises(DomainError):
            fractional_levels(WaldConfig(0.05, 0.2, 2), 3)


class TestWaldLadder:
    def test_single_stream_is_sprt(self):
        ladder = sbh_wald_ladder(WaldConfig(0.05, 0.2, 1))
        assert ladder.lower[0] == pytest.approx(A_W_05_20, abs=1e-12)
        assert ladder.upper[0] == pytest.approx(B_W_05_20, abs=1e-12)

    def test_two_streams_frozen(self):
        ladder = sbh_wald_ladder(WaldConfig(0.05, 0.2, 2))
        np.testing.assert_allclose(ladder.lower, K2_A, atol=1e-12)
        np.testing.assert_allclose(ladder.upper, K2_B, atol=1e-12)

    def test_identities_on_random_configs(self):
        rng = np.random.default_rng(41)
        for _ in range(300):
            cfg = random_levels(rng)
            ladder = sbh_wald_ladder(cfg)
            K, a, b = cfg.K, cfg.alpha, cfg.beta
            for s in range(1, K + 1):
                a_s, b_s = fractional_levels(cfg, s)
                assert ladder.lower[s - 1] == pytest.approx(wald_ab(a_s, s * b / K)[0], abs=1e-12)
                assert ladder.upper[s - 1] == pytest.approx(wald_ab(s * a / K, b_s)[1], abs=1e-12)
                assert wald_ab(s * a / K, b_s)[0] == pytest.approx(ladder.lower[0], abs=1e-12)
                assert s * a / K + b_s <= 1 + 1e-15
                assert a_s + s * b / K <= 1 + 1e-15

    def test_rho_applies_to_every_rung(self):
        base = sbh_wald_ladder(WaldConfig(0.05, 0.2, 5))
        shifted = sbh_wald_ladder(WaldConfig(0.05, 0.2, 5, rho=0.583))
        np.testing.assert_allclose(shifted.lower, base.lower - 0.583, atol=1e-12)
        np.testing.assert_allclose(shifted.upper, base.upper + 0.583, atol=1e-12)

    def test_rejective_llr_ladder(self):
        ladder = rejective_llr_ladder(0.05, 4)
        np.testing.assert_allclose(ladder.upper, np.log(4 / (np.arange(1, 5) * 0.05)))


class TestExponentialFamilies:
    def test_logit_examples(self):
        assert bernoulli_natural(0.5) == 0.0
        assert bernoulli_natural(0.4) == pytest.approx(-LOG_1_5, abs=1e-15)
        assert bernoulli_psi(bernoulli_natural(0.4)) == pytest.approx(PSI_LOGIT_04, abs=1e-15)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1])
    def test_logit_domain(self, p):
        with pytest.raises(DomainError):
            bernoulli_natural(p)

    def test_kl_examples(self):
        model = BinomialModel((1,))
        th, lam = bernoulli_natural(0.6), bernoulli_natural(0.4)
        assert kl_info(model, th, lam) == pytest.approx(KL_06_04, abs=1e-15)
        assert kl_info(NormalModel(1), 1.0, 0.0) == pytest.approx(0.5)
        assert kl_info(model, th, th) == 0.0

    def test_kl_nonnegative(self):
        rng = np.random.default_rng(0)
        model = BinomialModel((3, 2))
        for _ in range(10_000):
            th, lam = rng.normal(0, 2, 2), rng.normal(0, 2, 2)
            assert kl_info(model, th, lam) >= -1e-12
            assert kl_info(model, th, th) == pytest.approx(0.0, abs=1e-12)

    def test_mean_map_inverts(self):
        rng = np.random.default_rng(1)
        for model in (NormalModel(3), BinomialModel((1, 4, 9))):
            theta = rng.normal(0, 1.5, model.dimension)
            np.testing.assert_allclose(model.grad_psi_inv(model.grad_psi(theta)), theta, atol=1e-8)

    def test_kl_from_mean_agrees_with_natural_form(self):
        model = BinomialModel((5,))
        theta, lam = np.array([0.3]), np.array([-0.7])
        assert model.kl_from_mean(model.grad_psi(theta), lam) == pytest.approx(
            kl_info(model, theta, lam), abs=1e-12
        )


class TestLLR:
    def test_identical_hypotheses_rejected(self):
        with pytest.raises(DomainError):
            SimpleTestSpec.bernoulli(0.4, 0.4)

    def test_bernoulli_increments(self):
        spec = SimpleTestSpec.bernoulli(0.4, 0.6)
        assert llr_increment(spec, 1) == pytest.approx(LOG_1_5, abs=1e-15)
        assert llr_increment(spec, 0) == pytest.approx(-LOG_1_5, abs=1e-15)

    def test_normal_increment(self):
        spec = SimpleTestSpec.normal_mean(0.0, 1.0)
        for x in (-1.3, 0.0, 0.5, 2.7):
            assert llr_increment(spec, x) == pytest.approx(x - 0.5, abs=1e-15)

    def test_accumulated_matches_density_ratio(self):
        rng = np.random.default_rng(2)
        x = (rng.random(500) < 0.55).astype(float)
        acc = LLRAccumulator(SimpleTestSpec.bernoulli(0.4, 0.6))
        path = list(acc.supply(x))
        direct = np.cumsum(binom.logpmf(x, 1, 0.6) - binom.logpmf(x, 1, 0.4))
        np.testing.assert_allclose(path, direct, atol=1e-10)
        assert acc.n == 500 and acc.total[0] == x.sum()

        y = rng.normal(0.3, 1, 500)
        acc = LLRAccumulator(SimpleTestSpec.normal_mean(0.0, 1.0))
        direct = np.cumsum(norm.logpdf(y, 1.0) - norm.logpdf(y, 0.0))
        np.testing.assert_allclose(list(acc.supply(y)), direct, atol=1e-10)

    def test_more_successes_raise_the_statistic(self):
        spec = SimpleTestSpec.bernoulli(0.4, 0.6)
        fewer, more = LLRAccumulator(spec), LLRAccumulator(spec)
        for x in [1, 0, 0, 1, 0]:
            fewer.update(x)
        for x in [1, 0, 1, 1, 0]:
            more.update(x)
        assert more.value > fewer.value


def accumulate(acc, xs):
    for x in xs:
        acc.update(x)
    return acc


class TestGLR:
    def test_normal_closed_form(self):
        rng = np.random.default_rng(3)
        spec = GlrSpec.normal_mean(0.0, 0.5)
        for _ in range(50):
            xs = rng.normal(rng.uniform(-1, 1), 1, int(rng.integers(1, 40)))
            acc = accumulate(GLRAccumulator(spec), xs)
            lam_h, lam_g = glr_statistics(spec, acc)
            n, m = xs.size, xs.mean()
            assert lam_h == pytest.approx(n * m**2 / 2, abs=1e-9)
            assert lam_g == pytest.approx(n * (m - 0.5) ** 2 / 2, abs=1e-9)

    def test_zero_at_null_boundary(self):
        spec = GlrSpec.normal_mean(0.0, 1.0)
        acc = accumulate(GLRAccumulator(spec), [1.0, -1.0])
        assert glr_statistics(spec, acc)[0] == 0.0

    def test_bernoulli_matches_likelihood_oracle(self):
        rng = np.random.default_rng(4)
        spec = GlrSpec.bernoulli(0.4, 0.6)
        for _ in range(50):
            n = int(rng.integers(1, 30))
            xs = (rng.random(n) < 0.5).astype(float)
            acc = accumulate(GLRAccumulator(spec), xs)
            lam_h, lam_g = glr_statistics(spec, acc)
            y = int(xs.sum())
            assert lam_h == pytest.approx(oracles.bernoulli_lr_oracle(y, n, 0.4), abs=1e-9)
            assert lam_g == pytest.approx(oracles.bernoulli_lr_oracle(y, n, 0.6), abs=1e-9)

    def test_two_sample_spec_matches_grid_oracle(self):
        rng = np.random.default_rng(5)
        spec = GlrSpec.two_sample_binomial(2, 3, 0.2)
        for _ in range(20):
            n = int(rng.integers(1, 12))
            steps = np.column_stack([rng.binomial(2, 0.5, n), rng.binomial(3, 0.4, n)])
            acc = accumulate(GLRAccumulator(spec), steps)
            lam_h, lam_g = glr_statistics(spec, acc)
            counts = steps.sum(axis=0)
            assert lam_h == pytest.approx(oracles.two_sample_lr_oracle(counts, n, 2, 3), abs=1e-6)
            assert lam_g == pytest.approx(
                oracles.two_sample_lr_oracle(counts, n, 2, 3, delta=0.2), abs=1e-6
            )

    def test_needs_observations(self):
        spec = GlrSpec.normal_mean(0.0, 1.0)
        with pytest.raises(DomainError):
            glr_statistics(spec, GLRAccumulator(spec))

    def test_spec_needs_ordered_levels(self):
        with pytest.raises(DomainError):
            GlrSpec.normal_mean(1.0, 0.0)

    def test_accumulator_sign(self):
        spec = GlrSpec.normal_mean(0.0, 1.0)
        assert accumulate(GLRAccumulator(spec), [2.0, 2.0]).value > 0
        assert accumulate(GLRAccumulator(spec), [-1.0, 0.0]).value < 0


class TestSignedRoot:
    def test_degenerate_is_zero(self):
        assert signed_root(0.0, 0.0, 0.0, 0.0) == 0.0

    def test_positive_branch(self):
        assert signed_root(2.0, 1.0, 0.3, 0.0) == pytest.approx(2.0)

    def test_negative_when_below_null(self):
        assert signed_root(5.0, 1.0, -0.1, 0.0) == pytest.approx(-math.sqrt(2.0))

    def test_rejects_negative_input(self):
        with pytest.raises(DomainError):
            signed_root(-1.0, 0.0, 0.0, 0.0)


class TestTwoSampleBinomial:
    def test_equal_proportions_give_zero(self):
        spec = TwoSampleBinomialSpec(2, 2)
        assert two_sample_binomial_glr(spec, (6, 6), 5) == pytest.approx(0.0, abs=1e-15)

    def test_grid_oracle_example(self):
        spec = TwoSampleBinomialSpec(1, 1)
        got = two_sample_binomial_glr(spec, (8, 2), 10)
        assert got == pytest.approx(oracles.two_sample_lr_oracle((8, 2), 10, 1, 1), abs=1e-6)

    def test_alternative_at_observed_gap_is_zero(self):
        spec = TwoSampleBinomialSpec(1, 1, delta=0.6)
        assert two_sample_binomial_glr(spec, (8, 2), 10, alternative=True) == 0.0

    def test_weights_unequal_trials(self):
        # With m1 = 3 the first sample carries three trials per step.
        spec = TwoSampleBinomialSpec(3, 1)
        got = two_sample_binomial_glr(spec, (20, 3), 10)
        assert got == pytest.approx(oracles.two_sample_lr_oracle((20, 3), 10, 3, 1), abs=1e-6)

    def test_boundary_counts_are_finite(self):
        spec = TwoSampleBinomialSpec(1, 1, delta=0.3)
        for counts in [(0, 10), (10, 0), (0, 0), (10, 10)]:
            h = two_sample_binomial_glr(spec, counts, 10)
            g = two_sample_binomial_glr(spec, counts, 10, alternative=True)
            assert math.isfinite(h) and math.isfinite(g)
            assert h == pytest.approx(oracles.two_sample_lr_oracle(counts, 10, 1, 1), abs=1e-6)
            assert g == pytest.approx(
                oracles.two_sample_lr_oracle(counts, 10, 1, 1, delta=0.3), abs=1e-6
            )

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            two_sample_binomial_glr(TwoSampleBinomialSpec(1, 1), (1, 1), 0)
        with pytest.raises(DomainError):
            two_sample_binomial_glr(TwoSampleBinomialSpec(1, 1), (11, 1), 10)
        with pytest.raises(DomainError):
            TwoSampleBinomialSpec(0, 1)
        with pytest.raises(DomainError):
            TwoSampleBinomialAccumulator(TwoSampleBinomialSpec(1, 1))

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(1, 8),
        st.integers(1, 3),
        st.integers(1, 3),
        st.floats(0.05, 0.9),
        st.data(),
    )
    def test_random_instances_against_oracle(self, n, m1, m2, delta, data):
        y1 = data.draw(st.integers(0, n * m1))
        y2 = data.draw(st.integers(0, n * m2))
        spec = TwoSampleBinomialSpec(m1, m2, delta)
        assert two_sample_binomial_glr(spec, (y1, y2), n) == pytest.approx(
            oracles.two_sample_lr_oracle((y1, y2), n, m1, m2), abs=1e-6
        )
        assert two_sample_binomial_glr(spec, (y1, y2), n, alternative=True) == pytest.approx(
            oracles.two_sample_lr_oracle((y1, y2), n, m1, m2, delta=delta), abs=1e-6
        )

    def test_signed_root_accumulator(self):
        acc = TwoSampleBinomialAccumulator(TwoSampleBinomialSpec(1, 1, 0.3))
        for y in [(1, 0)] * 10:
            acc.update(y)
        assert acc.value > 0


class TestMonteCarloCalibration:
    @staticmethod
    def sampler(p):
        return lambda rng, horizon: (rng.random(horizon) < p).astype(float)

    def test_rejective_ladder_is_monotone_and_calibrated(self):
        spec = SimpleTestSpec.bernoulli(0.4, 0.6)
        rng = np.random.default_rng(10)
        ladder = calibrate_ladder_mc(
            lambda: LLRAccumulator(spec), self.sampler(0.4), 3, 0.05, 200, 2000, rng
        )
        assert np.all(np.diff(ladder.upper) <= 0)
        # The exact likelihood-ratio bound log(K/(s alpha)) is conservative.
        assert np.all(ladder.upper <= rejective_llr_ladder(0.05, 3).upper + 0.5)

    def test_full_ladder(self):
        spec = SimpleTestSpec.bernoulli(0.4, 0.6)
        rng = np.random.default_rng(11)
        ladder = calibrate_ladder_mc(
            lambda: LLRAccumulator(spec), self.sampler(0.4), 2, 0.05, 200, 1000, rng,
            alt_sampler=self.sampler(0.6), beta=0.2,
        )
        assert ladder.K == 2
        assert ladder.lower[-1] < ladder.upper[-1]

    def test_beta_required_with_alternative(self):
        spec = SimpleTestSpec.bernoulli(0.4, 0.6)
        with pytest.raises(DomainError):
            calibrate_ladder_mc(
                lambda: LLRAccumulator(spec), self.sampler(0.4), 2, 0.05, 10, 10,
                np.random.default_rng(0), alt_sampler=self.sampler(0.6),
            )
