import numpy as np
import pytest

from wiretapcodes.leakage import (ClubConfig, EstimatorError, MineConfig,
                                  SampleSet, club_bound, club_estimate,
                                  collect_samples, mine_estimate)
from wiretapcodes.nn import TrainConfig
from wiretapcodes.reliability import CodeConfig, UserSpec, build_codecs

MINI_MINE = MineConfig(hidden=(64,), steps=600, batch_size=250,
                       learning_rate=2e-3, eval_every=10, eval_window=20)
MINI_CLUB = ClubConfig(hidden=(64,), steps=600, batch_size=250,
                       learning_rate=2e-3)


def copy_samples(l, rng, noise=0.0):
    s = rng.integers(0, 2, size=l)
    z = (2.0 * s - 1.0)[:, None]
    if noise:
        z = z + rng.normal(0.0, np.sqrt(noise), size=z.shape)
    return SampleSet(s.astype(float)[:, None], z)


def tiny_config(seed=1):
    return CodeConfig.make(
        n=4,
        users=[UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="01"),
               UserSpec(q=2, power=4.0, h=1.0, g=0.3)],
        sigma2_Y=1.0, sigma2_Z=1.0,
        train=TrainConfig(epochs=1, batch_size=100, learning_rate=1e-3,
                          messages_per_epoch=100, seed=seed))


class TestSampleSet:
    def test_row_alignment_enforced(self):
        with pytest.raises(ValueError):
            SampleSet(np.zeros((5, 1)), np.zeros((4, 2)))

    def test_collect_returns_aligned_rows(self):
        cfg = tiny_config()
        codecs = build_codecs(cfg, "unit")
        samples = collect_samples(codecs, cfg, 10, seed=3)
        assert samples.secrets.shape == (10, 1)
        assert samples.observations.shape == (10, cfg.n)

    def test_collect_deterministic(self):
        cfg = tiny_config()
        codecs = build_codecs(cfg, "unit")
        s1 = collect_samples(codecs, cfg, 50, seed=4)
        s2 = collect_samples(codecs, cfg, 50, seed=4)
        assert np.array_equal(s1.secrets, s2.secrets)
        assert np.array_equal(s1.observations, s2.observations)

    def test_joint_secret_concatenation_for_two_transmitters(self):
        cfg = CodeConfig.make(
            4,
            [UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="01"),
             UserSpec(q=3, power=2.0, h=1.0, g=1.0, k=2, seed_lambda="001"),
             UserSpec(q=2, power=9.0, h=1.0, g=0.3)],
            1.0, 1.0,
            TrainConfig(epochs=1, batch_size=10, learning_rate=1e-3,
                        messages_per_epoch=10, seed=1))
        codecs = build_codecs(cfg, "unit")
        samples = collect_samples(codecs, cfg, 20, seed=5)
        assert samples.secrets.shape == (20, 3)  # k1 + k2
        assert set(np.unique(samples.secrets)) <= {0.0, 1.0}

    def test_zero_eve_gains_give_pure_noise(self):
        cfg = CodeConfig.make(
            4, [UserSpec(q=2, power=1.0, h=1.0, g=0.0, k=1, seed_lambda="01")],
            1.0, 1.0,
            TrainConfig(epochs=1, batch_size=10, learning_rate=1e-3,
                        messages_per_epoch=10, seed=1))
        codecs = build_codecs(cfg, "unit")
        samples = collect_samples(codecs, cfg, 50_000, seed=6)
        assert abs(samples.observations.mean()) < 0.01
        assert abs(samples.observations.var() - cfg.sigma2_Z) < 0.02

    def test_missing_hash_seed_rejected(self):
        cfg = CodeConfig.make(
            4, [UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1)], 1.0, 1.0,
            TrainConfig(epochs=1, batch_size=10, learning_rate=1e-3,
                        messages_per_epoch=10, seed=1))
        codecs = build_codecs(cfg, "unit")
        with pytest.raises(ValueError, match="seed"):
            collect_samples(codecs, cfg, 10, seed=1)

    def test_codec_mismatch_rejected(self):
        cfg = tiny_config()
        codecs = build_codecs(cfg, "unit")
        with pytest.raises(ValueError):
            collect_samples(codecs[:1], cfg, 10, seed=1)


class TestMine:
    def test_deterministic(self):
        rng = np.random.default_rng(0)
        samples = copy_samples(4000, rng, noise=1.0)
        e1 = mine_estimate(samples, MINI_MINE, seed=7)
        e2 = mine_estimate(samples, MINI_MINE, seed=7)
        assert e1.raw_nats == e2.raw_nats

    def test_copy_converges_towards_ln2(self):
        samples = copy_samples(4000, np.random.default_rng(1))
        est = mine_estimate(samples, MINI_MINE, seed=8)
        assert 0.5 < est.raw_nats < 0.75

    def test_independent_pairs_near_zero(self):
        rng = np.random.default_rng(2)
        s = rng.integers(0, 2, size=4000).astype(float)[:, None]
        z = rng.normal(size=(4000, 1))
        est = mine_estimate(SampleSet(s, z), MINI_MINE, seed=9)
        assert abs(est.raw_nats) < 0.1

    def test_clamped_value_nonnegative(self):
        rng = np.random.default_rng(3)
        s = rng.integers(0, 2, size=2000).astype(float)[:, None]
        z = rng.normal(size=(2000, 1))
        est = mine_estimate(SampleSet(s, z), MINI_MINE, seed=10)
        assert est.nats == max(0.0, est.raw_nats)

    def test_too_few_samples_rejected(self):
        samples = copy_samples(100, np.random.default_rng(4))
        with pytest.raises(ValueError):
            mine_estimate(samples, MINI_MINE, seed=1)

    def test_divergence_surfaces_as_estimator_error(self):
        rng = np.random.default_rng(5)
        s = rng.integers(0, 2, size=1000).astype(float)[:, None]
        z = np.full((1000, 1), np.nan)
        with pytest.raises((EstimatorError, Exception)):
            mine_estimate(SampleSet(s, z), MINI_MINE, seed=11)


class TestClubBound:
    def test_matches_bruteforce_double_loop(self):
        from scipy.stats import norm

        rng = np.random.default_rng(6)
        l, n = 40, 3
        mu = rng.normal(size=(l, n))
        logvar = rng.normal(scale=0.3, size=(l, n))
        z = rng.normal(size=(l, n))
        got, floored = club_bound(mu, logvar, z)
        assert floored == 0

        sigma = np.exp(0.5 * logvar)
        logp = np.zeros((l, l))
        for i in range(l):
            for j in range(l):
                logp[i, j] = norm.logpdf(z[j], loc=mu[i], scale=sigma[i]).sum()
        expected = np.mean(np.diag(logp)) - logp.mean()
        assert np.isclose(got, expected, rtol=1e-10)

    def test_variance_floor_counted(self):
        mu = np.zeros((5, 2))
        logvar = np.full((5, 2), -50.0)  # far below the 1e-6 floor
        z = np.zeros((5, 2))
        _, floored = club_bound(mu, logvar, z, var_floor=1e-6)
        assert floored == 10

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            club_bound(np.zeros((3, 2)), np.zeros((3, 2)), np.zeros((4, 2)))


class TestClubEstimate:
    def test_independent_pairs_near_zero(self):
        rng = np.random.default_rng(7)
        s = rng.integers(0, 2, size=5000).astype(float)[:, None]
        z = rng.normal(size=(5000, 1))
        est = club_estimate(SampleSet(s, z), MINI_CLUB, seed=12)
        assert abs(est.raw_nats) < 0.1

    def test_near_deterministic_copy_exceeds_ln2(self):
        samples = copy_samples(5000, np.random.default_rng(8), noise=1e-4)
        est = club_estimate(samples, MINI_CLUB, seed=13)
        assert est.raw_nats >= np.log(2) - 0.05

    def test_upper_bound_at_least_mine_lower_bound(self):
        samples = copy_samples(6000, np.random.default_rng(9), noise=1.0)
        mine = mine_estimate(samples, MINI_MINE, seed=14)
        club = club_estimate(samples, MINI_CLUB, seed=14)
        assert club.raw_nats >= mine.raw_nats - 0.05

    def test_monotone_in_eavesdropper_noise(self):
        # CLUB should not increase when the observation noise grows
        values = []
        for sigma2 in (0.25, 1.0, 4.0):
            samples = copy_samples(5000, np.random.default_rng(10), noise=sigma2)
            est = club_estimate(samples, MINI_CLUB, seed=15)
            values.append(est.raw_nats)
        assert values[0] >= values[1] - 0.05
        assert values[1] >= values[2] - 0.05

    def test_deterministic(self):
        samples = copy_samples(3000, np.random.default_rng(11), noise=1.0)
        e1 = club_estimate(samples, MINI_CLUB, seed=16)
        e2 = club_estimate(samples, MINI_CLUB, seed=16)
        assert e1.raw_nats == e2.raw_nats
