import numpy as np
import pytest

from wiretapcodes import nn
from wiretapcodes.channel import transmit_main
from wiretapcodes.nn import TrainConfig
from wiretapcodes.reliability import (CodeConfig, UserSpec,
                                      baseline_joint_decoding,
                                      baseline_time_sharing, build_codecs,
                                      decode_joint, decode_sic,
                                      encode_messages, train, train_ptp,
                                      train_sic)
from wiretapcodes.rng import derive_rng

TINY_TRAIN = TrainConfig(epochs=30, batch_size=200, learning_rate=2e-3,
                         messages_per_epoch=2000, seed=1)


def tiny_config(seed=1, sigma2_Y=1e-6, n=8):
    return CodeConfig.make(
        n=n,
        users=[UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="01"),
               UserSpec(q=2, power=4.0, h=1.0, g=0.3)],
        sigma2_Y=sigma2_Y, sigma2_Z=1.0,
        train=TrainConfig(epochs=30, batch_size=200, learning_rate=2e-3,
                          messages_per_epoch=2000, seed=seed))


def exhaustive_joint_accuracy(codecs, config, noiseless=True):
    """Decode every message tuple once over a noise-free channel."""
    cards = [u.cardinality for u in config.users]
    grids = np.meshgrid(*[np.arange(c) for c in cards], indexing="ij")
    msgs = [g.reshape(-1) for g in grids]
    x = encode_messages(codecs, msgs)
    y = transmit_main(x, config.channel, derive_rng(0), noiseless=noiseless)
    est = decode_sic(codecs, config, y)
    correct = np.ones(est.shape[0], dtype=bool)
    for i in range(config.num_users):
        correct &= est[:, i] == msgs[i]
    return correct.mean()


class TestConfigValidation:
    def test_make_sorts_by_h_times_p(self):
        strong = UserSpec(q=2, power=4.0, h=1.0, g=1.0)
        weak = UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="01")
        cfg = CodeConfig.make(8, [strong, weak], 1.0, 1.0, TINY_TRAIN)
        assert cfg.users == (weak, strong)

    def test_unsorted_users_rejected(self):
        strong = UserSpec(q=2, power=4.0, h=1.0, g=1.0)
        weak = UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="01")
        with pytest.raises(ValueError, match="ascending"):
            CodeConfig(8, (strong, weak), 1.0, 1.0, TINY_TRAIN)

    def test_tie_keeps_given_order(self):
        a = UserSpec(q=2, power=4.0, h=1.0, g=0.5, k=1, seed_lambda="01")
        b = UserSpec(q=3, power=4.0, h=1.0, g=0.3)
        cfg = CodeConfig.make(8, [a, b], 1.0, 1.0, TINY_TRAIN)
        assert cfg.users == (a, b)

    def test_secret_width_bounded_by_q(self):
        with pytest.raises(ValueError):
            UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=3)

    def test_transmitter_count_capped_at_two(self):
        tx = [UserSpec(q=2, power=float(p), h=1.0, g=1.0, k=1, seed_lambda="01")
              for p in (1, 2, 3)]
        with pytest.raises(ValueError, match="transmitters"):
            CodeConfig.make(8, tx, 1.0, 1.0, TINY_TRAIN)

    def test_blocklength_range(self):
        tx = UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="01")
        with pytest.raises(ValueError):
            CodeConfig.make(65, [tx], 1.0, 1.0, TINY_TRAIN)

    def test_relabeling_invariance(self):
        users = [UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="01"),
                 UserSpec(q=3, power=2.0, h=1.0, g=0.5),
                 UserSpec(q=2, power=9.0, h=1.0, g=0.2)]
        cfg1 = CodeConfig.make(8, users, 1.0, 1.0, TINY_TRAIN)
        cfg2 = CodeConfig.make(8, users[::-1], 1.0, 1.0, TINY_TRAIN)
        assert cfg1 == cfg2


class TestCodewordPower:
    def test_every_emitted_codeword_meets_constraint(self):
        cfg = tiny_config()
        codecs = build_codecs(cfg, "unit")  # untrained: constraint is structural
        for i, user in enumerate(cfg.users):
            msgs = np.arange(user.cardinality)
            x = encode_messages([codecs[i]], [msgs])[0]
            norms = np.sum(x * x, axis=1)
            target = cfg.n * user.power
            assert np.max(np.abs(norms - target) / target) < 1e-9


class TestTraining:
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_sic_noiseless_tiny_config_high_accuracy(self, seed):
        cfg = tiny_config(seed=seed)
        result = train_sic(cfg)
        assert exhaustive_joint_accuracy(result.codecs, cfg) >= 0.999
        # against the actual (tiny-noise) channel, via Monte Carlo
        rng = derive_rng(seed, "mc")
        msgs = [rng.integers(0, u.cardinality, size=4000) for u in cfg.users]
        x = encode_messages(result.codecs, msgs)
        y = transmit_main(x, cfg.channel, rng)
        est = decode_sic(result.codecs, cfg, y)
        acc = np.mean((est[:, 0] == msgs[0]) & (est[:, 1] == msgs[1]))
        assert acc >= 0.999

    def test_ptp_noiseless_tiny_config(self):
        cfg = tiny_config(seed=4)
        result = train_ptp(cfg)
        assert exhaustive_joint_accuracy(result.codecs, cfg) >= 0.999

    def test_single_user_degenerates_to_point_to_point(self):
        tx = UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="01")
        cfg = CodeConfig.make(8, [tx], 1e-6, 1.0,
                              TrainConfig(epochs=20, batch_size=100,
                                          learning_rate=2e-3,
                                          messages_per_epoch=1000, seed=9))
        result = train_ptp(cfg)
        assert len(result.codecs) == 1
        assert exhaustive_joint_accuracy(result.codecs, cfg) == 1.0

    def test_same_seed_identical_weights(self):
        cfg = tiny_config(seed=5)
        cfg = CodeConfig.make(cfg.n, cfg.users, cfg.sigma2_Y, cfg.sigma2_Z,
                              TrainConfig(epochs=2, batch_size=100,
                                          learning_rate=1e-3,
                                          messages_per_epoch=500, seed=5))
        r1, r2 = train_sic(cfg), train_sic(cfg)
        for c1, c2 in zip(r1.codecs, r2.codecs):
            for m1, m2 in zip((c1.encoder, c1.decoder), (c2.encoder, c2.decoder)):
                for l1, l2 in zip(m1.layers, m2.layers):
                    assert np.array_equal(l1.weights, l2.weights)
                    assert np.array_equal(l1.bias, l2.bias)

    def test_unknown_algorithm_rejected(self):
        with pytest.raises(ValueError):
            train(tiny_config(), "magic")


class TestDecodeSic:
    def test_subtracting_correct_estimate_reproduces_residual(self):
        cfg = tiny_config()
        codecs = build_codecs(cfg, "unit")
        rng = derive_rng(3)
        msgs = [rng.integers(0, u.cardinality, size=16) for u in cfg.users]
        x = encode_messages(codecs, msgs)
        y = transmit_main(x, cfg.channel, rng, noiseless=True)
        x2_hat = encode_messages([codecs[1]], [msgs[1]])[0]
        residual = y - np.sqrt(cfg.users[1].h) * x2_hat
        assert np.allclose(residual, np.sqrt(cfg.users[0].h) * x[0],
                           rtol=0, atol=1e-12)

    def test_single_user_is_plain_argmax(self):
        tx = UserSpec(q=3, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="001")
        cfg = CodeConfig.make(6, [tx], 1.0, 1.0, TINY_TRAIN)
        codecs = build_codecs(cfg, "unit")
        y = derive_rng(4).normal(size=(10, 6))
        probs, _ = nn.forward(codecs[0].decoder, y)
        assert np.array_equal(decode_sic(codecs, cfg, y)[:, 0],
                              probs.argmax(axis=1))

    def test_batch_shape(self):
        cfg = tiny_config()
        codecs = build_codecs(cfg, "unit")
        est = decode_sic(codecs, cfg, np.zeros((7, cfg.n)) + 0.1)
        assert est.shape == (7, 2)


class TestTimeSharing:
    def test_boosted_subframe_powers(self):
        cfg = tiny_config()
        result = baseline_time_sharing(cfg, alphas=[0.5], trials=2000, seed=2)
        point = result.points[0]
        assert point.n1 == 4 and point.n2 == 4
        # P1/alpha = 1/0.5, P2/(1-alpha) = 4/0.5
        assert point.boosted_powers == (2.0, 8.0)

    def test_returns_min_error_split(self):
        cfg = tiny_config()
        result = baseline_time_sharing(cfg, alphas=[0.25, 0.5, 0.75],
                                       trials=2000, seed=2)
        assert result.best.joint_error == min(p.joint_error for p in result.points)

    def test_infeasible_split_rejected(self):
        cfg = tiny_config()
        with pytest.raises(ValueError, match="subframe"):
            baseline_time_sharing(cfg, alphas=[0.01], trials=100)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            baseline_time_sharing(tiny_config(), alphas=[], trials=100)

    def test_needs_two_users(self):
        tx = UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="01")
        cfg = CodeConfig.make(8, [tx], 1.0, 1.0, TINY_TRAIN)
        with pytest.raises(ValueError):
            baseline_time_sharing(cfg, alphas=[0.5], trials=100)


class TestJointDecoding:
    def test_heads_are_distributions(self):
        cfg = tiny_config()
        result = baseline_joint_decoding(cfg)
        logits, _ = nn.forward(result.codec.decoder,
                               derive_rng(5).normal(size=(9, cfg.n)))
        c1 = cfg.users[0].cardinality
        p1 = nn.softmax(logits[:, :c1])
        p2 = nn.softmax(logits[:, c1:])
        assert np.max(np.abs(p1.sum(axis=1) - 1)) < 1e-12
        assert np.max(np.abs(p2.sum(axis=1) - 1)) < 1e-12

    def test_noiseless_accuracy(self):
        cfg = tiny_config(seed=6)
        result = baseline_joint_decoding(cfg)
        cards = [u.cardinality for u in cfg.users]
        grids = np.meshgrid(*[np.arange(c) for c in cards], indexing="ij")
        msgs = [g.reshape(-1) for g in grids]
        x = [nn.forward(result.codec.encoders[i],
                        nn.one_hot_rows(msgs[i], cards[i]))[0] for i in range(2)]
        y = transmit_main(x, cfg.channel, derive_rng(0), noiseless=True)
        est = decode_joint(result.codec, y)
        acc = np.mean((est[:, 0] == msgs[0]) & (est[:, 1] == msgs[1]))
        assert acc >= 0.99

    def test_needs_two_users(self):
        tx = UserSpec(q=2, power=1.0, h=1.0, g=1.0, k=1, seed_lambda="01")
        cfg = CodeConfig.make(8, [tx], 1.0, 1.0, TINY_TRAIN)
        with pytest.raises(ValueError):
            baseline_joint_decoding(cfg)


class TestSchemeComparison:
    def test_sic_competitive_with_time_sharing(self):
        # two equal-power users over a noisy channel; SIC should be no worse
        # than twice the best time-sharing split at these rates
        from wiretapcodes.evaluation import sic_joint_error

        train_cfg = TrainConfig(epochs=40, batch_size=250,
                                learning_rate=2e-3, messages_per_epoch=5000,
                                seed=7)
        cfg = CodeConfig.make(
            8,
            [UserSpec(q=2, power=2.0, h=1.0, g=1.0, k=1, seed_lambda="01"),
             UserSpec(q=2, power=2.0, h=1.0, g=1.0)],
            6.0, 1.0, train_cfg)
        sic = train_sic(cfg)
        pe_sic = sic_joint_error(sic.codecs, cfg, trials=40_000, seed=8)
        ts = baseline_time_sharing(cfg, alphas=[0.25, 0.5, 0.75],
                                   trials=40_000, seed=9)
        assert pe_sic <= 2.0 * ts.best.joint_error
