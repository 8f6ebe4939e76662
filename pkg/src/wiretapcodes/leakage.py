"""Neural estimation of the information leaked to the eavesdropper.

Two estimators bracket I(secret; Z^n):

* ``mine_estimate`` trains a statistics network T(s, z) on the
  Donsker-Varadhan objective  E_joint[T] - log E_marginal[e^T]  and reports
  a lower bound.  Marginal samples come from shuffling the observations of
  a joint batch along the batch axis.  The training gradient uses an
  exponential-moving-average denominator (decay 0.99) to reduce the bias of
  the raw DV gradient; the reported value is the median of the last few
  evaluation estimates.

* ``club_estimate`` fits a variational Gaussian model of p(z | s) with two
  subnetworks (predicting the mean and the per-coordinate log variance) by
  maximum likelihood, then evaluates the contrastive log-ratio upper bound

      (1/l) sum_i log p(z_i | s_i)  -  (1/l^2) sum_i sum_j log p(z_j | s_i)

  on a held-out split, with closed-form Gaussian log-likelihoods summed
  over coordinates.

Reported leakage is clamped at zero; the raw estimate is preserved on the
result.  With two secret transmitters the sample secrets are the
concatenation S1 || S2, so the same machinery estimates the joint leakage.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import nn
from .channel import transmit_eve
from .gf2 import GF2Field
from .reliability import CodeConfig, CodecPair
from .rng import derive_rng
from .security import Seed, encode_map

LOG_2PI = float(np.log(2.0 * np.pi))


class EstimatorError(RuntimeError):
    """Raised when estimator training diverges."""


@dataclass
class SampleSet:
    """Row-aligned (secret bits, eavesdropper observation) pairs."""

    secrets: np.ndarray  # (l, k) 0/1 floats
    observations: np.ndarray  # (l, n)

    def __post_init__(self):
        self.secrets = np.asarray(self.secrets, dtype=float)
        self.observations = np.asarray(self.observations, dtype=float)
        if self.secrets.ndim != 2 or self.observations.ndim != 2:
            raise ValueError("secrets and observations must be 2-D")
        if self.secrets.shape[0] != self.observations.shape[0]:
            raise ValueError("secrets and observations must be row-aligned")

    @property
    def size(self) -> int:
        return self.secrets.shape[0]


@dataclass(frozen=True)
class MineConfig:
    """Statistics-network shape and training budget for the DV bound.

    A fraction of the SampleSet is held out and only ever used for the
    periodic evaluation estimates; evaluating the bound on training pairs
    overstates it once the statistics network starts memorizing them.
    """

    hidden: tuple[int, ...] = (400, 400, 400, 400)
    steps: int = 5000
    batch_size: int = 500
    learning_rate: float = 1e-4
    ema_decay: float = 0.99
    eval_every: int = 10
    eval_window: int = 50
    eval_fraction: float = 0.2


@dataclass(frozen=True)
class ClubConfig:
    """Variational-model shape and training budget for the upper bound."""

    hidden: tuple[int, ...] = (400, 400, 400)
    steps: int = 5000
    batch_size: int = 500
    learning_rate: float = 8e-4
    train_fraction: float = 0.8
    var_floor: float = 1e-6


@dataclass(frozen=True)
class EstimatorPreset:
    name: str
    mine: MineConfig
    club: ClubConfig


# Desk presets run in minutes on a CPU; "full" mirrors the reference
# large-scale budgets and is only sensible on serious hardware.
ESTIMATOR_PRESETS: dict[str, EstimatorPreset] = {
    "desk": EstimatorPreset(
        "desk",
        MineConfig(hidden=(128, 128), steps=3000, batch_size=500, learning_rate=1e-3),
        ClubConfig(hidden=(128, 128), steps=2500, batch_size=500, learning_rate=1e-3),
    ),
    "full": EstimatorPreset(
        "full",
        MineConfig(hidden=(400, 400, 400, 400), steps=800_000, batch_size=2500,
                   learning_rate=1e-4),
        ClubConfig(hidden=(400, 400, 400), steps=1_000_000, batch_size=2000,
                   learning_rate=8e-4),
    ),
}


@dataclass
class LeakageEstimate:
    estimator: str
    raw_nats: float
    nats: float  # max(0, raw)
    samples: int
    preset: str | None = None
    diagnostics: dict = field(default_factory=dict)


def _secret_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Width-k bit matrix from integer secrets, left-most bit first."""
    shifts = np.arange(width - 1, -1, -1)
    return ((values[:, None] >> shifts) & 1).astype(float)


def collect_samples(codecs: Sequence[CodecPair], config: CodeConfig, l: int,
                    seed: int, batch: int = 10_000) -> SampleSet:
    """Run the full encode -> eavesdropper-channel pipeline l times.

    Secrets, local randomness and helper messages are all uniform.  Secrets
    of multiple transmitters are concatenated in canonical user order.
    """
    if l <= 0:
        raise ValueError("sample count must be positive")
    if len(codecs) != config.num_users:
        raise ValueError(f"got {len(codecs)} codecs for {config.num_users} users")
    for codec, user in zip(codecs, config.users):
        if codec.encoder.input_dim != user.cardinality or codec.encoder.output_dim != config.n:
            raise ValueError("codec shapes do not match the configuration")

    maps = {}
    for i in config.transmitter_indices:
        user = config.users[i]
        if user.seed_lambda is None:
            raise ValueError(f"transmitter {i} has no hash seed configured")
        fld = GF2Field(user.q)
        maps[i] = encode_map(Seed.from_string(user.seed_lambda), fld, user.k)

    rng = derive_rng(seed, "collect")
    secrets_rows, obs_rows = [], []
    done = 0
    while done < l:
        b = min(batch, l - done)
        msgs = []
        bits = []
        for i, user in enumerate(config.users):
            if user.is_transmitter:
                s = rng.integers(0, 1 << user.k, size=b)
                rand = (rng.integers(0, 1 << (user.q - user.k), size=b)
                        if user.q > user.k else np.zeros(b, dtype=np.int64))
                w = (s << (user.q - user.k)) | rand
                msgs.append(maps[i][w])
                bits.append(_secret_bits(s, user.k))
            else:
                msgs.append(rng.integers(0, user.cardinality, size=b))
        x = [nn.forward(codecs[i].encoder,
                        nn.one_hot_rows(msgs[i], config.users[i].cardinality))[0]
             for i in range(config.num_users)]
        z = transmit_eve(x, config.channel, rng)
        secrets_rows.append(np.concatenate(bits, axis=1))
        obs_rows.append(z)
        done += b
    return SampleSet(np.concatenate(secrets_rows), np.concatenate(obs_rows))


def _marginal_rows(secrets, observations, perm):
    return np.concatenate([secrets, observations[perm]], axis=1)


def mine_estimate(samples: SampleSet, cfg: MineConfig, seed: int) -> LeakageEstimate:
    """Donsker-Varadhan lower bound on I(secret; observation) in nats."""
    l = samples.size
    if l < cfg.batch_size:
        raise ValueError(f"need at least batch_size={cfg.batch_size} samples, got {l}")
    k = samples.secrets.shape[1]
    n = samples.observations.shape[1]
    net = nn.build_mlp([k + n, *cfg.hidden, 1], terminal="linear",
                       rng=derive_rng(seed, "mine", "init"))
    adam = nn.init_adam(net, cfg.learning_rate)
    batch_rng = derive_rng(seed, "mine", "batches")
    eval_rng = derive_rng(seed, "mine", "eval")

    split = eval_rng.permutation(l)
    n_eval = max(1, int(round(cfg.eval_fraction * l)))
    eval_idx, train_idx = split[:n_eval], split[n_eval:]
    if train_idx.size < cfg.batch_size:
        raise ValueError("eval_fraction leaves fewer samples than one batch")
    eval_joint = np.concatenate(
        [samples.secrets[eval_idx], samples.observations[eval_idx]], axis=1)

    ema = None
    history = []
    for step in range(cfg.steps):
        idx = train_idx[batch_rng.integers(0, train_idx.size, size=cfg.batch_size)]
        joint = np.concatenate([samples.secrets[idx], samples.observations[idx]], axis=1)
        idx2 = train_idx[batch_rng.integers(0, train_idx.size, size=cfg.batch_size)]
        perm = batch_rng.permutation(cfg.batch_size)
        marg = _marginal_rows(samples.secrets[idx2], samples.observations[idx2], perm)

        t_joint, cache_j = nn.forward(net, joint, train=True)
        t_marg, cache_m = nn.forward(net, marg, train=True)
        # stable mean of e^T over the marginal batch
        m = t_marg.max()
        batch_mean = float(np.exp(m) * np.mean(np.exp(t_marg - m)))
        if not np.isfinite(batch_mean) or batch_mean <= 0:
            raise EstimatorError(
                f"MINE diverged at step {step}: E[e^T]={batch_mean}")
        ema = batch_mean if ema is None else (
            cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * batch_mean)

        # maximize DV: minimize its negation
        up_joint = np.full_like(t_joint, -1.0 / cfg.batch_size)
        up_marg = np.exp(t_marg) / (cfg.batch_size * ema)
        grads_j, _ = nn.backward(net, cache_j, up_joint)
        grads_m, _ = nn.backward(net, cache_m, up_marg)
        grads = [(gj[0] + gm[0], gj[1] + gm[1]) for gj, gm in zip(grads_j, grads_m)]
        nn.adam_step(net, grads, adam, context=f"mine step {step}")

        if (step + 1) % cfg.eval_every == 0:
            t_j, _ = nn.forward(net, eval_joint)
            perm = eval_rng.permutation(eval_idx.size)
            marg_eval = _marginal_rows(samples.secrets[eval_idx],
                                       samples.observations[eval_idx], perm)
            t_m, _ = nn.forward(net, marg_eval)
            m = t_m.max()
            log_mean = float(m + np.log(np.mean(np.exp(t_m - m))))
            est = float(t_j.mean()) - log_mean
            if not np.isfinite(est):
                raise EstimatorError(f"MINE evaluation diverged at step {step}: {est}")
            history.append(est)

    raw = float(np.median(history[-cfg.eval_window:]))
    return LeakageEstimate(
        estimator="mine",
        raw_nats=raw,
        nats=max(0.0, raw),
        samples=l,
        diagnostics={"history_tail": history[-cfg.eval_window:], "steps": cfg.steps},
    )


def _gaussian_quad(z, mu, inv_var):
    """(z - mu)^2 / var summed over coordinates, for aligned rows."""
    d = z - mu
    return np.sum(d * d * inv_var, axis=1)


def club_bound(mu: np.ndarray, logvar: np.ndarray, z: np.ndarray,
               var_floor: float = 1e-6) -> tuple[float, int]:
    """Evaluate the contrastive bound given per-row Gaussian parameters.

    Positive term: mean conditional log-likelihood of aligned pairs.
    Negative term: mean over all (i, j) pairs of log p(z_j | s_i).
    Returns (bound in nats, number of variance entries floored).
    """
    mu = np.asarray(mu, dtype=float)
    logvar = np.asarray(logvar, dtype=float)
    z = np.asarray(z, dtype=float)
    if mu.shape != logvar.shape or mu.shape != z.shape:
        raise ValueError("mu, logvar and z must have identical shapes")
    n = z.shape[1]
    log_floor = float(np.log(var_floor))
    floored = int(np.count_nonzero(logvar < log_floor))
    lv = np.maximum(logvar, log_floor)
    inv_var = np.exp(-lv)
    const = np.sum(lv, axis=1) + n * LOG_2PI  # per-row additive term

    pos = -0.5 * float(np.mean(_gaussian_quad(z, mu, inv_var) + const))
    # pairwise quadratic forms (z_j - mu_i)^2 / var_i via three matmuls
    quad = (inv_var @ (z**2).T
            - 2.0 * (mu * inv_var) @ z.T
            + np.sum(mu * mu * inv_var, axis=1, keepdims=True))
    neg = -0.5 * float(np.mean(quad + const[:, None]))
    return pos - neg, floored


def club_estimate(samples: SampleSet, cfg: ClubConfig, seed: int) -> LeakageEstimate:
    """Contrastive log-ratio upper bound on I(secret; observation) in nats."""
    l = samples.size
    if l < 10:
        raise ValueError("too few samples for a train/eval split")
    k = samples.secrets.shape[1]
    n = samples.observations.shape[1]
    mu_net = nn.build_mlp([k, *cfg.hidden, n], terminal="linear",
                          rng=derive_rng(seed, "club", "init-mu"))
    lv_net = nn.build_mlp([k, *cfg.hidden, n], terminal="linear",
                          rng=derive_rng(seed, "club", "init-lv"))
    adam_mu = nn.init_adam(mu_net, cfg.learning_rate)
    adam_lv = nn.init_adam(lv_net, cfg.learning_rate)

    split_rng = derive_rng(seed, "club", "split")
    perm = split_rng.permutation(l)
    n_train = max(1, int(round(cfg.train_fraction * l)))
    train_idx, eval_idx = perm[:n_train], perm[n_train:]
    if eval_idx.size == 0:
        raise ValueError("train_fraction leaves no evaluation samples")

    log_floor = float(np.log(cfg.var_floor))
    floor_events = 0
    batch_rng = derive_rng(seed, "club", "batches")
    for step in range(cfg.steps):
        idx = train_idx[batch_rng.integers(0, n_train, size=min(cfg.batch_size, n_train))]
        s = samples.secrets[idx]
        z = samples.observations[idx]
        mu, cache_mu = nn.forward(mu_net, s, train=True)
        logvar, cache_lv = nn.forward(lv_net, s, train=True)
        clamped = logvar < log_floor
        floor_events += int(np.count_nonzero(clamped))
        lv = np.maximum(logvar, log_floor)
        inv_var = np.exp(-lv)
        b = s.shape[0]
        nll = 0.5 * float(np.mean(np.sum((z - mu) ** 2 * inv_var + lv + LOG_2PI, axis=1)))
        if not np.isfinite(nll):
            raise EstimatorError(f"CLUB likelihood training diverged at step {step}")
        d_mu = (mu - z) * inv_var / b
        d_lv = 0.5 * (1.0 - (z - mu) ** 2 * inv_var) / b
        d_lv[clamped] = 0.0
        grads_mu, _ = nn.backward(mu_net, cache_mu, d_mu)
        grads_lv, _ = nn.backward(lv_net, cache_lv, d_lv)
        nn.adam_step(mu_net, grads_mu, adam_mu, context=f"club mu step {step}")
        nn.adam_step(lv_net, grads_lv, adam_lv, context=f"club logvar step {step}")

    # evaluate the bound on the held-out split
    s = samples.secrets[eval_idx]
    z = samples.observations[eval_idx]
    mu, _ = nn.forward(mu_net, s)
    logvar, _ = nn.forward(lv_net, s)
    raw, eval_floored = club_bound(mu, logvar, z, cfg.var_floor)
    floor_events += eval_floored
    return LeakageEstimate(
        estimator="club",
        raw_nats=raw,
        nats=max(0.0, raw),
        samples=l,
        diagnostics={
            "var_floor_events": floor_events,
            "train_samples": int(n_train),
            "eval_samples": int(eval_idx.size),
        },
    )


def estimate_leakage(samples: SampleSet, preset: EstimatorPreset, seed: int,
                     estimators: Sequence[str] = ("mine",)) -> list[LeakageEstimate]:
    """Run the requested estimators on one SampleSet."""
    out = []
    for name in estimators:
        t0 = time.perf_counter()
        if name == "mine":
            est = mine_estimate(samples, preset.mine, seed)
        elif name == "club":
            est = club_estimate(samples, preset.club, seed)
        else:
            raise ValueError(f"unknown estimator {name!r}")
        est.preset = preset.name
        est.diagnostics["seconds"] = time.perf_counter() - t0
        out.append(est)
    return out
