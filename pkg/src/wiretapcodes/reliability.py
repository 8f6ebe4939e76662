"""Reliability layer: codec training, SIC decoding, and baselines.

Each user l gets an encoder (one-hot message -> length-n codeword through a
terminal power normalization, so every emitted codeword meets its average
power constraint with equality) and a decoder (channel vector -> softmax
over the user's messages).

Two training procedures are provided:

``train_sic``
    All codecs trained jointly.  Decoders run strongest-user-first; decoder
    l sees the channel output minus the re-encoded hard estimates of users
    l+1..L, and the sum of all per-user cross-entropy losses is minimized.
    Hard estimates are treated as constants, so each loss still reaches
    every encoder through the superposed channel output.

``train_ptp``
    Point-to-point training: user l's decoder trains on its own signal plus
    the superposition of weaker users' codewords (treated as noise, no
    gradient) plus channel noise, and only user l's encoder/decoder receive
    gradients from loss l.  Cheaper per step than SIC training.

Regardless of the training procedure, test-time decoding always uses the
SIC chain (``decode_sic``).  Users are kept in canonical order: ascending
h_l * P_l with ties broken by position, so the strongest user is decoded
first and the weakest last.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import nn
from .channel import ChannelParams, noise_sample, transmit_main
from .nn import MlpModel, TrainConfig, TrainingError
from .rng import derive_rng, derive_seed

MAX_BLOCKLENGTH = 64


@dataclass(frozen=True)
class UserSpec:
    """One transmitter or helper: message width, power and channel gains."""

    q: int
    power: float
    h: float
    g: float
    k: int | None = None  # secret width; present only for secret transmitters
    seed_lambda: str | None = None  # hash seed bit-string, e.g. "0001"

    def __post_init__(self):
        if not 1 <= self.q <= 16:
            raise ValueError(f"message width q={self.q} outside 1..16")
        if self.power <= 0:
            raise ValueError("user power must be positive")
        if self.h < 0 or self.g < 0:
            raise ValueError("channel gains must be nonnegative")
        if self.k is not None and not 1 <= self.k <= self.q:
            raise ValueError(f"secret width k={self.k} must satisfy 1 <= k <= q={self.q}")
        if self.seed_lambda is not None and len(self.seed_lambda) != self.q:
            raise ValueError("seed bit-string width must equal q")

    @property
    def is_transmitter(self) -> bool:
        return self.k is not None

    @property
    def cardinality(self) -> int:
        return 1 << self.q

    @property
    def sort_key(self) -> float:
        return self.h * self.power


@dataclass(frozen=True)
class CodeConfig:
    """Full code description: blocklength, users, channel, training budget.

    Users must be in canonical order (ascending h*P); use ``CodeConfig.make``
    to sort an arbitrary list.  The strongest user is decoded first under
    SIC, the weakest last.
    """

    n: int
    users: tuple[UserSpec, ...]
    sigma2_Y: float
    sigma2_Z: float
    train: TrainConfig
    hidden: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if not 1 <= self.n <= MAX_BLOCKLENGTH:
            raise ValueError(f"blocklength n={self.n} outside 1..{MAX_BLOCKLENGTH}")
        if not self.users:
            raise ValueError("config needs at least one user")
        keys = [u.sort_key for u in self.users]
        if any(a > b for a, b in zip(keys, keys[1:])):
            raise ValueError("users must be ordered by ascending h*P (use CodeConfig.make)")
        if self.sigma2_Y <= 0 or self.sigma2_Z <= 0:
            raise ValueError("noise variances must be positive")
        # experiments carry 1 or 2 secret transmitters; T=0 appears only in
        # internal sub-problems (e.g. a time-sharing helper subframe)
        if self.num_transmitters > 2:
            raise ValueError(f"at most 2 secret transmitters, got {self.num_transmitters}")

    @classmethod
    def make(cls, n, users: Sequence[UserSpec], sigma2_Y, sigma2_Z, train,
             hidden=None) -> "CodeConfig":
        """Build a config, sorting users into canonical decode order."""
        ordered = sorted(users, key=lambda u: u.sort_key)  # stable: ties keep position
        return cls(n, tuple(ordered), sigma2_Y, sigma2_Z, train, hidden)

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_transmitters(self) -> int:
        return sum(1 for u in self.users if u.is_transmitter)

    @property
    def transmitter_indices(self) -> tuple[int, ...]:
        return tuple(i for i, u in enumerate(self.users) if u.is_transmitter)

    @property
    def channel(self) -> ChannelParams:
        return ChannelParams(
            h=tuple(u.h for u in self.users),
            g=tuple(u.g for u in self.users),
            sigma2_Y=self.sigma2_Y,
            sigma2_Z=self.sigma2_Z,
        )

    def hidden_for(self, cardinality: int) -> tuple[int, ...]:
        if self.hidden is not None:
            return self.hidden
        width = max(128, 2 * cardinality)
        return (width, width)


@dataclass
class CodecPair:
    encoder: MlpModel  # one-hot message -> power-normalized codeword
    decoder: MlpModel  # channel vector -> softmax over messages


@dataclass
class TrainResult:
    codecs: list[CodecPair]
    epoch_losses: list[float]
    seconds: float
    algorithm: str


def build_codecs(config: CodeConfig, rng_label: str) -> list[CodecPair]:
    """Fresh codec pairs for every user, deterministically initialized."""
    codecs = []
    for i, user in enumerate(config.users):
        hidden = config.hidden_for(user.cardinality)
        enc_rng = derive_rng(config.train.seed, rng_label, "init-enc", i)
        dec_rng = derive_rng(config.train.seed, rng_label, "init-dec", i)
        encoder = nn.build_mlp(
            [user.cardinality, *hidden, config.n],
            terminal="power_norm",
            rng=enc_rng,
            norm_energy=config.n * user.power,
        )
        decoder = nn.build_mlp([config.n, *hidden, user.cardinality],
                               terminal="softmax", rng=dec_rng)
        codecs.append(CodecPair(encoder, decoder))
    return codecs


def encode_messages(codecs: Sequence[CodecPair], msgs: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Inference-path encoding: codewords meet their power constraint exactly."""
    out = []
    for codec, m in zip(codecs, msgs):
        onehots = nn.one_hot_rows(np.asarray(m), codec.encoder.input_dim)
        out.append(nn.forward(codec.encoder, onehots)[0])
    return out


def decode_sic(codecs: Sequence[CodecPair], config: CodeConfig, y: np.ndarray) -> np.ndarray:
    """SIC decoding of a batch of channel outputs.

    Users are decoded strongest-first; each hard estimate is re-encoded and
    subtracted (scaled by sqrt(h)) before decoding the next user.  Returns a
    (batch, L) matrix of message indices in canonical user order.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    batch = y.shape[0]
    L = config.num_users
    estimates = np.zeros((batch, L), dtype=np.int64)
    residual = y.copy()
    for l in reversed(range(L)):
        probs, _ = nn.forward(codecs[l].decoder, residual)
        m_hat = probs.argmax(axis=1)
        estimates[:, l] = m_hat
        if l > 0:
            onehots = nn.one_hot_rows(m_hat, config.users[l].cardinality)
            x_hat, _ = nn.forward(codecs[l].encoder, onehots)
            residual = residual - np.sqrt(config.users[l].h) * x_hat
    return estimates


def _steps_per_epoch(train: TrainConfig) -> int:
    return max(1, math.ceil(train.messages_per_epoch / train.batch_size))


def _sample_messages(rng, config: CodeConfig, batch: int) -> list[np.ndarray]:
    return [rng.integers(0, u.cardinality, size=batch) for u in config.users]


def train_sic(config: CodeConfig) -> TrainResult:
    """Joint training with interference cancellation inside the decoder chain."""
    t0 = time.perf_counter()
    codecs = build_codecs(config, "sic")
    adam_enc = [nn.init_adam(c.encoder, config.train.learning_rate) for c in codecs]
    adam_dec = [nn.init_adam(c.decoder, config.train.learning_rate) for c in codecs]
    msg_rng = derive_rng(config.train.seed, "sic", "messages")
    noise_rng = derive_rng(config.train.seed, "sic", "noise")
    params = config.channel
    L = config.num_users
    sqrt_h = [np.sqrt(u.h) for u in config.users]
    batch = config.train.batch_size
    steps = _steps_per_epoch(config.train)

    epoch_losses = []
    for epoch in range(config.train.epochs):
        epoch_loss = 0.0
        for step in range(steps):
            msgs = _sample_messages(msg_rng, config, batch)
            x, enc_caches = [], []
            for l in range(L):
                onehots = nn.one_hot_rows(msgs[l], config.users[l].cardinality)
                out, cache = nn.forward(codecs[l].encoder, onehots, train=True)
                x.append(out)
                enc_caches.append(cache)
            y = transmit_main(x, params, noise_rng)

            residual = y
            grad_sum = np.zeros_like(y)
            dec_grads = [None] * L
            total_loss = 0.0
            for l in reversed(range(L)):
                probs, cache = nn.forward(codecs[l].decoder, residual, train=True)
                loss, dlogits = nn.cross_entropy(probs, msgs[l])
                total_loss += loss
                grads, g_in = nn.backward(codecs[l].decoder, cache, dlogits)
                dec_grads[l] = grads
                grad_sum = grad_sum + g_in
                if l > 0:
                    # hard estimate, re-encoded and subtracted as a constant
                    onehots = nn.one_hot_rows(probs.argmax(axis=1),
                                              config.users[l].cardinality)
                    x_hat, _ = nn.forward(codecs[l].encoder, onehots, train=True)
                    residual = residual - sqrt_h[l] * x_hat

            if not np.isfinite(total_loss):
                raise TrainingError(f"sic training diverged at epoch {epoch} step {step}")
            epoch_loss += total_loss

            for l in range(L):
                enc_grads, _ = nn.backward(codecs[l].encoder, enc_caches[l],
                                           sqrt_h[l] * grad_sum)
                nn.adam_step(codecs[l].encoder, enc_grads, adam_enc[l],
                             context=f"sic encoder {l} epoch {epoch}")
                nn.adam_step(codecs[l].decoder, dec_grads[l], adam_dec[l],
                             context=f"sic decoder {l} epoch {epoch}")
        epoch_losses.append(epoch_loss / steps)
    return TrainResult(codecs, epoch_losses, time.perf_counter() - t0, "sic")


def train_ptp(config: CodeConfig) -> TrainResult:
    """Independent point-to-point training of every user's autoencoder.

    Each user's model draws its own message, noise and interference streams
    (derived from the training seed and the user's position), so user l's
    trajectory depends only on users 1..l.  In particular the transmitter
    (user 1) trains interference-free and ends up with the same weights no
    matter how many helpers are configured.
    """
    t0 = time.perf_counter()
    codecs = build_codecs(config, "ptp")
    adam_enc = [nn.init_adam(c.encoder, config.train.learning_rate) for c in codecs]
    adam_dec = [nn.init_adam(c.decoder, config.train.learning_rate) for c in codecs]
    msg_rngs = [derive_rng(config.train.seed, "ptp", "messages", l)
                for l in range(config.num_users)]
    noise_rngs = [derive_rng(config.train.seed, "ptp", "noise", l)
                  for l in range(config.num_users)]
    L = config.num_users
    sqrt_h = [np.sqrt(u.h) for u in config.users]
    batch = config.train.batch_size
    steps = _steps_per_epoch(config.train)

    epoch_losses = []
    for epoch in range(config.train.epochs):
        epoch_loss = 0.0
        for step in range(steps):
            total_loss = 0.0
            # every model encodes its own fresh messages; user l's decoder
            # input superposes users 1..l, weaker codewords carry no gradient
            msgs, x, enc_caches = [], [], []
            for l in range(L):
                m_l = msg_rngs[l].integers(0, config.users[l].cardinality, size=batch)
                onehots = nn.one_hot_rows(m_l, config.users[l].cardinality)
                x_l, enc_cache = nn.forward(codecs[l].encoder, onehots, train=True)
                msgs.append(m_l)
                x.append(x_l)
                enc_caches.append(enc_cache)
            partial = np.zeros((batch, config.n))
            for l in range(L):
                partial = partial + sqrt_h[l] * x[l]
                y_l = partial + noise_sample(noise_rngs[l], config.sigma2_Y,
                                             (batch, config.n))
                probs, cache = nn.forward(codecs[l].decoder, y_l, train=True)
                loss, dlogits = nn.cross_entropy(probs, msgs[l])
                total_loss += loss
                dec_grads, g_in = nn.backward(codecs[l].decoder, cache, dlogits)
                enc_grads, _ = nn.backward(codecs[l].encoder, enc_caches[l],
                                           sqrt_h[l] * g_in)
                nn.adam_step(codecs[l].encoder, enc_grads, adam_enc[l],
                             context=f"ptp encoder {l} epoch {epoch}")
                nn.adam_step(codecs[l].decoder, dec_grads, adam_dec[l],
                             context=f"ptp decoder {l} epoch {epoch}")
            if not np.isfinite(total_loss):
                raise TrainingError(f"ptp training diverged at epoch {epoch} step {step}")
            epoch_loss += total_loss
        epoch_losses.append(epoch_loss / steps)
    return TrainResult(codecs, epoch_losses, time.perf_counter() - t0, "ptp")


def train(config: CodeConfig, algorithm: str) -> TrainResult:
    if algorithm == "sic":
        return train_sic(config)
    if algorithm == "ptp":
        return train_ptp(config)
    raise ValueError(f"unknown training algorithm {algorithm!r}")


# ---------------------------------------------------------------------------
# Baselines: joint decoding and time sharing (two-user configurations)
# ---------------------------------------------------------------------------

@dataclass
class JointCodec:
    """Per-user encoders with a single two-head decoder."""

    encoders: list[MlpModel]
    decoder: MlpModel  # linear terminal; per-head softmax applied outside
    head_cards: tuple[int, int]


@dataclass
class JointResult:
    codec: JointCodec
    epoch_losses: list[float]
    seconds: float


def _joint_head_probs(codec: JointCodec, logits: np.ndarray) -> list[np.ndarray]:
    c1, _ = codec.head_cards
    return [nn.softmax(logits[:, :c1]), nn.softmax(logits[:, c1:])]


def decode_joint(codec: JointCodec, y: np.ndarray) -> np.ndarray:
    """Simultaneous estimate of both users' messages from Y."""
    logits, _ = nn.forward(codec.decoder, np.atleast_2d(y))
    probs = _joint_head_probs(codec, logits)
    return np.stack([p.argmax(axis=1) for p in probs], axis=1)


def baseline_joint_decoding(config: CodeConfig) -> JointResult:
    """Train the joint-decoding baseline: one decoder estimating both users.

    The decoder shares a trunk and ends in two softmax heads (one per user's
    message set) trained on the summed per-head cross-entropy.
    """
    if config.num_users != 2:
        raise ValueError("joint-decoding baseline is defined for two users")
    t0 = time.perf_counter()
    cards = tuple(u.cardinality for u in config.users)
    hidden = config.hidden_for(max(cards))
    encoders = []
    for i, user in enumerate(config.users):
        enc_rng = derive_rng(config.train.seed, "joint", "init-enc", i)
        encoders.append(
            nn.build_mlp([user.cardinality, *config.hidden_for(user.cardinality), config.n],
                         terminal="power_norm", rng=enc_rng,
                         norm_energy=config.n * user.power)
        )
    dec_rng = derive_rng(config.train.seed, "joint", "init-dec")
    decoder = nn.build_mlp([config.n, *hidden, cards[0] + cards[1]],
                           terminal="linear", rng=dec_rng)
    codec = JointCodec(encoders, decoder, cards)

    adam_enc = [nn.init_adam(e, config.train.learning_rate) for e in encoders]
    adam_dec = nn.init_adam(decoder, config.train.learning_rate)
    msg_rng = derive_rng(config.train.seed, "joint", "messages")
    noise_rng = derive_rng(config.train.seed, "joint", "noise")
    params = config.channel
    sqrt_h = [np.sqrt(u.h) for u in config.users]
    batch = config.train.batch_size
    steps = _steps_per_epoch(config.train)

    epoch_losses = []
    for epoch in range(config.train.epochs):
        epoch_loss = 0.0
        for step in range(steps):
            msgs = _sample_messages(msg_rng, config, batch)
            x, enc_caches = [], []
            for l in range(2):
                onehots = nn.one_hot_rows(msgs[l], cards[l])
                out, cache = nn.forward(encoders[l], onehots, train=True)
                x.append(out)
                enc_caches.append(cache)
            y = transmit_main(x, params, noise_rng)
            logits, cache = nn.forward(decoder, y, train=True)
            probs = _joint_head_probs(codec, logits)
            dlogits = np.zeros_like(logits)
            total_loss = 0.0
            for l, (p, m) in enumerate(zip(probs, msgs)):
                loss, dh = nn.cross_entropy(p, m)
                total_loss += loss
                cols = slice(0, cards[0]) if l == 0 else slice(cards[0], None)
                dlogits[:, cols] = dh
            if not np.isfinite(total_loss):
                raise TrainingError(f"joint training diverged at epoch {epoch} step {step}")
            epoch_loss += total_loss
            dec_grads, g_in = nn.backward(decoder, cache, dlogits)
            nn.adam_step(decoder, dec_grads, adam_dec, context=f"joint decoder epoch {epoch}")
            for l in range(2):
                enc_grads, _ = nn.backward(encoders[l], enc_caches[l], sqrt_h[l] * g_in)
                nn.adam_step(encoders[l], enc_grads, adam_enc[l],
                             context=f"joint encoder {l} epoch {epoch}")
        epoch_losses.append(epoch_loss / steps)
    return JointResult(codec, epoch_losses, time.perf_counter() - t0)


def joint_decoding_error(codec: JointCodec, config: CodeConfig, trials: int,
                         seed: int) -> float:
    """Monte-Carlo P[(V_hat, M_hat) != (V, M)] for the joint decoder."""
    rng = derive_rng(seed, "joint-eval")
    params = config.channel
    errors = 0
    done = 0
    while done < trials:
        batch = min(10_000, trials - done)
        msgs = _sample_messages(rng, config, batch)
        x = [nn.forward(codec.encoders[l],
                        nn.one_hot_rows(msgs[l], codec.head_cards[l]))[0]
             for l in range(2)]
        y = transmit_main(x, params, rng)
        est = decode_joint(codec, y)
        wrong = (est[:, 0] != msgs[0]) | (est[:, 1] != msgs[1])
        errors += int(wrong.sum())
        done += batch
    return errors / trials


@dataclass
class TimeSharingPoint:
    alpha: float
    n1: int
    n2: int
    joint_error: float
    user_errors: tuple[float, float]
    boosted_powers: tuple[float, float]


@dataclass
class TimeSharingResult:
    points: list[TimeSharingPoint]
    best: TimeSharingPoint


def baseline_time_sharing(config: CodeConfig, alphas: Sequence[float],
                          trials: int, seed: int | None = None) -> TimeSharingResult:
    """Time-sharing baseline over a grid of frame splits.

    Each alpha splits the frame into subframes of n1 = round(alpha*n) and
    n2 = n - n1 channel uses; the users transmit alone in their subframe
    with powers boosted to P1/alpha and P2/(1-alpha) (alpha taken as n1/n
    after rounding, preserving total energy).  Every split trains two
    independent point-to-point codes and the split with the smallest joint
    error wins.
    """
    if config.num_users != 2:
        raise ValueError("time-sharing baseline is defined for two users")
    if not alphas:
        raise ValueError("alpha grid must be nonempty")
    if seed is None:
        seed = config.train.seed
    points = []
    for idx, alpha in enumerate(alphas):
        n1 = int(round(alpha * config.n))
        n2 = config.n - n1
        if n1 < 1 or n2 < 1:
            raise ValueError(f"alpha={alpha} leaves an empty subframe for n={config.n}")
        alpha_eff = n1 / config.n
        boosted = (config.users[0].power / alpha_eff,
                   config.users[1].power / (1.0 - alpha_eff))
        user_errors = []
        for l, (user, n_sub, power) in enumerate(
                zip(config.users, (n1, n2), boosted)):
            sub_train = replace(config.train, seed=derive_seed(seed, "ts", idx, l))
            sub = CodeConfig(
                n=n_sub,
                users=(replace(user, power=power),),
                sigma2_Y=config.sigma2_Y,
                sigma2_Z=config.sigma2_Z,
                train=sub_train,
                hidden=config.hidden,
            )
            result = train_ptp(sub)
            user_errors.append(
                _single_user_error(result.codecs[0], sub, trials,
                                   derive_seed(seed, "ts-eval", idx, l))
            )
        p1, p2 = user_errors
        joint = 1.0 - (1.0 - p1) * (1.0 - p2)  # subframes are independent
        points.append(TimeSharingPoint(alpha_eff, n1, n2, joint, (p1, p2), boosted))
    best = min(points, key=lambda p: (p.joint_error, p.alpha))
    return TimeSharingResult(points, best)


def _single_user_error(codec: CodecPair, config: CodeConfig, trials: int,
                       seed: int) -> float:
    rng = derive_rng(seed, "single-eval")
    user = config.users[0]
    errors = 0
    done = 0
    while done < trials:
        batch = min(10_000, trials - done)
        msgs = rng.integers(0, user.cardinality, size=batch)
        x, _ = nn.forward(codec.encoder, nn.one_hot_rows(msgs, user.cardinality))
        y = transmit_main([x], config.channel, rng)
        est = decode_sic([codec], config, y)[:, 0]
        errors += int(np.count_nonzero(est != msgs))
        done += batch
    return errors / trials
