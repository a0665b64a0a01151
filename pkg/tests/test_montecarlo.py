"""Monte Carlo layer: flag ensembles, bit-level protocol runs, attacks."""

import math

import numpy as np
import pytest

from conftest import random_channels
from twoway_qkd import (
    PauliChannelParams,
    ProtocolClassError,
    StepKind,
    StepSequence,
    bb84_family,
    estimate_rates,
    intercept_resend,
    mc_b_step,
    mc_bx_step,
    mc_p_step,
    sample_flags,
    simulate_protocol2_bits,
    sixstate_channel,
)
from twoway_qkd.montecarlo import FlagEnsemble
from twoway_qkd.steps import apply_step


def assert_within_5_sigma(q_hat: float, q_true: float, n: int) -> None:
    sigma = max(math.sqrt(q_true * (1.0 - q_true) / n), 1e-12)
    assert abs(q_hat - q_true) <= 5.0 * sigma


class TestSampleFlags:
    def test_noiseless_channel_gives_no_flags(self):
        e = sample_flags(PauliChannelParams(0, 0, 0), 10_000, seed=0)
        assert not e.x.any()
        assert not e.z.any()

    def test_pure_y_channel_sets_both_flags(self):
        e = sample_flags(PauliChannelParams(0, 1, 0), 10_000, seed=0)
        assert e.x.all()
        assert e.z.all()

    def test_empirical_rates_track_channel(self):
        c = PauliChannelParams(0.1, 0.05, 0.08)
        e = sample_flags(c, 1_000_000, seed=1)
        est = estimate_rates(e)
        assert_within_5_sigma(est.qx_hat, 0.1, est.n)
        assert_within_5_sigma(est.qy_hat, 0.05, est.n)
        assert_within_5_sigma(est.qz_hat, 0.08, est.n)

    def test_zero_draws_rejected(self):
        with pytest.raises(ValueError, match="n >= 1"):
            sample_flags(PauliChannelParams(0, 0, 0), 0, seed=0)

    def test_determinism(self):
        c = PauliChannelParams(0.2, 0.1, 0.05)
        a = sample_flags(c, 5000, seed=7)
        b = sample_flags(c, 5000, seed=7)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.z, b.z)
        other = sample_flags(c, 5000, seed=8)
        assert not (np.array_equal(a.x, other.x) and np.array_equal(a.z, other.z))


class TestEstimateRates:
    def test_all_identity(self):
        e = sample_flags(PauliChannelParams(0, 0, 0), 100, seed=0)
        est = estimate_rates(e)
        assert (est.qx_hat, est.qy_hat, est.qz_hat) == (0.0, 0.0, 0.0)

    def test_all_y(self):
        est = estimate_rates(sample_flags(PauliChannelParams(0, 1, 0), 100, seed=0))
        assert est.qy_hat == 1.0
        assert est.stderr[1] == 0.0

    def test_stderr_formula(self):
        est = estimate_rates(sample_flags(PauliChannelParams(0.2, 0.1, 0.05), 4096, seed=3))
        for q, se in zip((est.qx_hat, est.qy_hat, est.qz_hat), est.stderr):
            assert se == pytest.approx(math.sqrt(q * (1 - q) / est.n), abs=1e-15)

    def test_empty_ensemble_rejected(self):
        empty = FlagEnsemble(
            np.array([], dtype=np.uint8),
            np.array([], dtype=np.uint8),
            seed=0,
            params=PauliChannelParams(0, 0, 0),
        )
        with pytest.raises(ValueError, match="empty"):
            estimate_rates(empty)


class TestFlagSteps:
    def test_b_step_matches_closed_form(self):
        c = PauliChannelParams(0.10, 0.0, 0.10)
        out = mc_b_step(sample_flags(c, 1_000_000, seed=11))
        analytic = apply_step(StepKind.B, c).params_after
        est = estimate_rates(out)
        assert_within_5_sigma(est.qx_hat, analytic.qx, est.n)
        assert_within_5_sigma(est.qy_hat, analytic.qy, est.n)
        assert_within_5_sigma(est.qz_hat, analytic.qz, est.n)
        # survivor fraction ~ ps/2 = 0.41
        assert abs(len(out) / 1_000_000 - 0.41) < 0.005

    def test_b_step_noiseless_keeps_half(self):
        out = mc_b_step(sample_flags(PauliChannelParams(0, 0, 0), 10_001, seed=12))
        assert len(out) == 5000
        assert not out.x.any()
        assert not out.z.any()

    def test_b_step_pure_z_keeps_every_pair(self):
        # no bit-flip flags, so every parity check agrees: exactly n//2 kept
        n = 1_000_000
        out = mc_b_step(sample_flags(PauliChannelParams(0, 0, 0.3), n, seed=13))
        assert len(out) == n // 2
        est = estimate_rates(out)
        assert_within_5_sigma(est.qz_hat, 0.42, est.n)

    def test_p_step_matches_closed_form(self):
        c = PauliChannelParams(0.0, 0.0, 0.1)
        out = mc_p_step(sample_flags(c, 1_000_000, seed=14))
        est = estimate_rates(out)
        assert_within_5_sigma(est.qz_hat, 0.028, est.n)

    def test_p_step_noiseless_keeps_third(self):
        out = mc_p_step(sample_flags(PauliChannelParams(0, 0, 0), 9_999, seed=15))
        assert len(out) == 3333
        assert not out.x.any()

    def test_p_step_bit_error_growth(self):
        out = mc_p_step(sample_flags(PauliChannelParams(0.1, 0, 0), 1_000_000, seed=16))
        est = estimate_rates(out)
        assert_within_5_sigma(est.qx_hat, 0.244, est.n)

    def test_bx_step_mirrors_b_step(self):
        c = PauliChannelParams(0.10, 0.0, 0.10)
        out = mc_bx_step(sample_flags(c, 500_000, seed=17))
        analytic = apply_step(StepKind.BX, c).params_after
        est = estimate_rates(out)
        assert_within_5_sigma(est.qx_hat, analytic.qx, est.n)
        assert_within_5_sigma(est.qz_hat, analytic.qz, est.n)

    def test_steps_deterministic_under_seed(self):
        c = PauliChannelParams(0.1, 0.05, 0.08)
        a = mc_b_step(sample_flags(c, 10_000, seed=18))
        b = mc_b_step(sample_flags(c, 10_000, seed=18))
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.z, b.z)

    def test_round_index_advances(self):
        e = sample_flags(PauliChannelParams(0.05, 0.02, 0.02), 10_000, seed=19)
        e2 = mc_b_step(e)
        assert e2.round_index == 1
        e3 = mc_p_step(e2)
        assert e3.round_index == 2

    def test_population_too_small_rejected(self):
        e = sample_flags(PauliChannelParams(0, 0, 0), 2, seed=0)
        with pytest.raises(ValueError, match="at least 3"):
            mc_p_step(e)
        one = FlagEnsemble(
            np.zeros(1, dtype=np.uint8),
            np.zeros(1, dtype=np.uint8),
            seed=0,
            params=PauliChannelParams(0, 0, 0),
        )
        with pytest.raises(ValueError, match="at least 2"):
            mc_b_step(one)


class TestProtocol2Bits:
    def test_noiseless_run(self):
        rep = simulate_protocol2_bits(bb84_family(0, 0), StepSequence.fixed("BP"), 999, seed=0)
        assert [r.n_kept for r in rep.rounds] == [499, 166]
        assert all(r.disagreements == 0 for r in rep.rounds)

    def test_rounds_track_bit_rate_recursion(self):
        rep = simulate_protocol2_bits(
            bb84_family(0.15, 0.0), StepSequence.fixed("BB"), 1_000_000, seed=0
        )
        assert len(rep.rounds) == 2
        for r in rep.rounds:
            assert abs(r.rate_hat - r.rate_pred) <= 5.0 * r.stderr

    def test_only_bit_error_rate_is_observable(self):
        # (0, 0.15, 0) and (0.15, 0, 0.15) share pz = 0.15: identical statistics
        a = simulate_protocol2_bits(
            bb84_family(0.15, 0.15), StepSequence.fixed("BP"), 50_000, seed=3
        )
        b = simulate_protocol2_bits(
            bb84_family(0.15, 0.0), StepSequence.fixed("BP"), 50_000, seed=3
        )
        assert [(r.n_kept, r.disagreements) for r in a.rounds] == [
            (r.n_kept, r.disagreements) for r in b.rounds
        ]

    def test_bx_rejected(self):
        with pytest.raises(ProtocolClassError):
            simulate_protocol2_bits(
                bb84_family(0.1, 0.0), StepSequence.fixed("BBx"), 100, seed=0
            )

    def test_alternating_realizes_analytic_schedule(self):
        rep = simulate_protocol2_bits(
            sixstate_channel(0.2), StepSequence.alternating(50), 100_000, seed=0
        )
        kinds = [r.kind for r in rep.rounds]
        assert kinds == [r.kind for r in rep.trajectory.records]

    def test_flag_and_bit_level_agree_on_survival(self):
        # both layers must match the analytic B-step keep statistics
        c = bb84_family(0.12, 0.0)
        n = 400_000
        ps = apply_step(StepKind.B, c).survival_prob
        flags = mc_b_step(sample_flags(c, n, seed=5))
        rep = simulate_protocol2_bits(c, StepSequence.fixed("B"), n, seed=5)
        sigma = math.sqrt(0.5 * ps * (1 - 0.5 * ps) / n)
        assert abs(len(flags) / n - 0.5 * ps) <= 5 * sigma
        assert abs(rep.rounds[0].n_kept / n - 0.5 * ps) <= 5 * sigma


class TestInterceptResend:
    def test_bb84_quarter(self):
        r = intercept_resend("bb84", 1_000_000, seed=0)
        assert abs(r.error_rate - 0.25) < 0.005
        assert_within_5_sigma(r.sift_fraction, 0.5, r.n)

    def test_sixstate_third(self):
        r = intercept_resend("sixstate", 1_000_000, seed=0)
        assert abs(r.error_rate - 1.0 / 3.0) < 0.005
        assert_within_5_sigma(r.sift_fraction, 1.0 / 3.0, r.n)

    def test_correct_basis_diagnostic_mode(self):
        r = intercept_resend("bb84", 100_000, seed=1, eve_matches_basis=True)
        assert r.errors == 0
        assert r.error_rate == 0.0

    def test_determinism(self):
        a = intercept_resend("sixstate", 100_000, seed=9)
        b = intercept_resend("sixstate", 100_000, seed=9)
        assert a == b

    def test_validation(self):
        with pytest.raises(ValueError, match="protocol"):
            intercept_resend("b92", 100, seed=0)
        with pytest.raises(ValueError, match="n >= 1"):
            intercept_resend("bb84", 0, seed=0)


class TestFlagStepAgreementSampled:
    def test_twenty_random_channels(self):
        for i, c in enumerate(random_channels(20, seed=42, scale=0.9)):
            for kind, mc_step in ((StepKind.B, mc_b_step), (StepKind.P, mc_p_step)):
                out = mc_step(sample_flags(c, 200_000, seed=700 + i))
                analytic = apply_step(kind, c).params_after
                est = estimate_rates(out)
                assert_within_5_sigma(est.qx_hat, analytic.qx, est.n)
                assert_within_5_sigma(est.qy_hat, analytic.qy, est.n)
                assert_within_5_sigma(est.qz_hat, analytic.qz, est.n)
