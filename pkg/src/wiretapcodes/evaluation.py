"""Monte-Carlo evaluation: error rates, achievability tuples, sweeps.

The measurement pipeline mirrors deployment exactly: secrets and local
randomness map through the hash layer to reliability-layer messages, all
users encode, the superposition crosses the main channel, the receiver runs
SIC, and each transmitter's secret estimate is the hash decode of its
recovered message.  Error rates average uniformly over messages because the
inputs are drawn uniformly.

Rates come with Wald confidence half-widths (z = 1.96).  Rates estimated
from fewer than 10 observed errors are unstable, so the half-width
computation floors the error count at 10; the point estimate itself is
never adjusted.

CSV schema (exact header, one row per metric):

    config_hash,n,L,T,user,metric,value,ci_halfwidth,samples,preset
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nn
from .channel import transmit_main
from .gf2 import GF2Field
from .leakage import (ESTIMATOR_PRESETS, LeakageEstimate, collect_samples,
                      estimate_leakage)
from .nn import TrainingError
from .reliability import CodeConfig, CodecPair, decode_sic, train
from .rng import derive_rng, derive_seed
from .security import Seed, decode_map, encode_map

CSV_HEADER = "config_hash,n,L,T,user,metric,value,ci_halfwidth,samples,preset"

WALD_Z = 1.96
WALD_ERROR_FLOOR = 10

SWEEP_AXES = ("blocklength", "helper_count", "power", "gains")


def worker_count() -> int:
    """Worker cap for Monte-Carlo fan-out, from WIRETAP_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("WIRETAP_THREADS", "1")))
    except ValueError:
        return 1


def config_digest(config: CodeConfig) -> str:
    """Stable 16-hex-digit identity of a code configuration."""
    doc = {
        "n": config.n,
        "users": [
            {"q": u.q, "power": u.power, "h": u.h, "g": u.g, "k": u.k,
             "seed_lambda": u.seed_lambda}
            for u in config.users
        ],
        "sigma2_Y": config.sigma2_Y,
        "sigma2_Z": config.sigma2_Z,
        "train": {
            "epochs": config.train.epochs,
            "batch_size": config.train.batch_size,
            "learning_rate": config.train.learning_rate,
            "messages_per_epoch": config.train.messages_per_epoch,
            "seed": config.train.seed,
        },
        "hidden": list(config.hidden) if config.hidden else None,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def wald_halfwidth(p: float, trials: int, z: float = WALD_Z,
                   error_floor: int = WALD_ERROR_FLOOR) -> float:
    """Normal-approximation half-width with the documented error floor."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p_eff = min(max(p, error_floor / trials), 1.0 - min(0.5, error_floor / trials))
    return z * float(np.sqrt(p_eff * (1.0 - p_eff) / trials))


@dataclass
class MetricRow:
    user: int  # canonical 1-based user index; 0 for secret-set leakage rows
    metric: str
    value: float
    ci_halfwidth: float
    samples: int


@dataclass
class EvalReport:
    config_hash: str
    n: int
    L: int
    T: int
    preset: str
    rows: list[MetricRow]
    runtime_seconds: float
    train_seed: int
    # (q, k or None, power) per user, for achievability packaging
    user_summaries: tuple = ()
    raw_leakage: dict = field(default_factory=dict)

    def find(self, metric: str, user: int | None = None) -> MetricRow | None:
        for row in self.rows:
            if row.metric == metric and (user is None or row.user == user):
                return row
        return None


def _error_counts_batch(codecs, config, batch, rng, enc_maps, dec_maps):
    """One Monte-Carlo batch; returns per-user error counts."""
    msgs = []
    truths = []
    for i, user in enumerate(config.users):
        if user.is_transmitter:
            s = rng.integers(0, 1 << user.k, size=batch)
            rand = (rng.integers(0, 1 << (user.q - user.k), size=batch)
                    if user.q > user.k else np.zeros(batch, dtype=np.int64))
            v = enc_maps[i][(s << (user.q - user.k)) | rand]
            msgs.append(v)
            truths.append(s)
        else:
            m = rng.integers(0, user.cardinality, size=batch)
            msgs.append(m)
            truths.append(m)
    x = [nn.forward(codecs[i].encoder,
                    nn.one_hot_rows(msgs[i], config.users[i].cardinality))[0]
         for i in range(config.num_users)]
    y = transmit_main(x, config.channel, rng)
    est = decode_sic(codecs, config, y)
    counts = np.zeros(config.num_users, dtype=np.int64)
    for i, user in enumerate(config.users):
        got = dec_maps[i][est[:, i]] if user.is_transmitter else est[:, i]
        counts[i] = int(np.count_nonzero(got != truths[i]))
    return counts


def estimate_error_rates(codecs: Sequence[CodecPair], config: CodeConfig,
                         trials: int, seed: int, preset: str = "desk",
                         batch: int = 10_000) -> EvalReport:
    """Measure every user's message/secret error rate over `trials` runs."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    t0 = time.perf_counter()
    enc_maps, dec_maps = {}, {}
    for i in config.transmitter_indices:
        user = config.users[i]
        if user.seed_lambda is None:
            raise ValueError(f"transmitter {i} has no hash seed configured")
        fld = GF2Field(user.q)
        hash_seed = Seed.from_string(user.seed_lambda)
        enc_maps[i] = encode_map(hash_seed, fld, user.k)
        dec_maps[i] = decode_map(hash_seed, fld, user.k)

    sizes = [min(batch, trials - start) for start in range(0, trials, batch)]
    rngs = [derive_rng(seed, "eval-batch", bi) for bi in range(len(sizes))]
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(
                lambda args: _error_counts_batch(codecs, config, args[0], args[1],
                                                 enc_maps, dec_maps),
                zip(sizes, rngs)))
    else:
        counts = [_error_counts_batch(codecs, config, b, r, enc_maps, dec_maps)
                  for b, r in zip(sizes, rngs)]
    totals = np.sum(counts, axis=0)

    rows = []
    for i, user in enumerate(config.users):
        rate = totals[i] / trials
        rows.append(MetricRow(
            user=i + 1,
            metric="pe_secret" if user.is_transmitter else "pe_message",
            value=float(rate),
            ci_halfwidth=wald_halfwidth(rate, trials),
            samples=trials,
        ))
    return EvalReport(
        config_hash=config_digest(config),
        n=config.n,
        L=config.num_users,
        T=config.num_transmitters,
        preset=preset,
        rows=rows,
        runtime_seconds=time.perf_counter() - t0,
        train_seed=config.train.seed,
        user_summaries=tuple((u.q, u.k, u.power) for u in config.users),
    )


def sic_joint_error(codecs: Sequence[CodecPair], config: CodeConfig,
                    trials: int, seed: int, batch: int = 10_000) -> float:
    """P[(all reliability-layer messages) decoded wrong anywhere], no hash layer."""
    rng = derive_rng(seed, "joint-sic-eval")
    errors = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        msgs = [rng.integers(0, u.cardinality, size=b) for u in config.users]
        x = [nn.forward(codecs[i].encoder,
                        nn.one_hot_rows(msgs[i], config.users[i].cardinality))[0]
             for i in range(config.num_users)]
        y = transmit_main(x, config.channel, rng)
        est = decode_sic(codecs, config, y)
        wrong = np.zeros(b, dtype=bool)
        for i in range(config.num_users):
            wrong |= est[:, i] != msgs[i]
        errors += int(wrong.sum())
        done += b
    return errors / trials


def attach_leakage(report: EvalReport, estimates: Sequence[LeakageEstimate]) -> EvalReport:
    """Append leakage rows (clamped and raw) to an existing report."""
    for est in estimates:
        report.rows.append(MetricRow(0, f"leakage_{est.estimator}", est.nats, 0.0,
                                     est.samples))
        report.rows.append(MetricRow(0, f"leakage_{est.estimator}_raw", est.raw_nats,
                                     0.0, est.samples))
        report.raw_leakage[est.estimator] = est.raw_nats
    return report


@dataclass(frozen=True)
class AchievabilityTuple:
    """Rates, measured error bounds, leakage bound and powers, per user order."""

    rates: tuple[float, ...]  # k/n for transmitters, q/n for helpers
    epsilons: tuple[float, ...]
    delta: float
    powers: tuple[float, ...]


def achievability_report(report: EvalReport, leakage: float | None = None) -> AchievabilityTuple:
    """Package the achievability tuple from a completed report.

    ``leakage`` overrides the report's own leakage rows; if omitted, the
    CLUB row is preferred (it is the upper bound) and MINE used otherwise.
    A report with no leakage at all is an error.
    """
    if not report.user_summaries:
        raise ValueError("report carries no user summaries")
    if leakage is None:
        for metric in ("leakage_club", "leakage_mine"):
            row = report.find(metric)
            if row is not None:
                leakage = row.value
                break
    if leakage is None:
        raise ValueError("no leakage entry available for the achievability tuple")
    rates, epsilons, powers = [], [], []
    for i, (q, k, power) in enumerate(report.user_summaries):
        rates.append((k if k is not None else q) / report.n)
        metric = "pe_secret" if k is not None else "pe_message"
        row = report.find(metric, user=i + 1)
        if row is None:
            raise ValueError(f"report is missing {metric} for user {i + 1}")
        epsilons.append(row.value)
        powers.append(power)
    return AchievabilityTuple(tuple(rates), tuple(epsilons), float(leakage),
                              tuple(powers))


# ---------------------------------------------------------------------------
# Parameter sweeps
# ---------------------------------------------------------------------------

def _apply_axis(config: CodeConfig, axis: str, value) -> CodeConfig:
    if axis == "blocklength":
        return replace(config, n=int(value))
    transmitters = [u for u in config.users if u.is_transmitter]
    helpers = [u for u in config.users if not u.is_transmitter]
    if axis == "helper_count":
        count = int(value)
        if count < 0:
            raise ValueError("helper count cannot be negative")
        if count > 0 and not helpers:
            raise ValueError("base config has no helper to replicate")
        users = transmitters + [helpers[-1]] * count
        return CodeConfig.make(config.n, users, config.sigma2_Y, config.sigma2_Z,
                               config.train, config.hidden)
    if axis == "power":
        # adjusts the helpers (the cooperative knob); transmitter if no helpers
        if helpers:
            users = transmitters + [replace(u, power=float(value)) for u in helpers]
        else:
            users = [replace(u, power=float(value)) for u in transmitters]
        return CodeConfig.make(config.n, users, config.sigma2_Y, config.sigma2_Z,
                               config.train, config.hidden)
    if axis == "gains":
        # eavesdropper-side gain of the helpers; transmitter if no helpers
        if helpers:
            users = transmitters + [replace(u, g=float(value)) for u in helpers]
        else:
            users = [replace(u, g=float(value)) for u in transmitters]
        return CodeConfig.make(config.n, users, config.sigma2_Y, config.sigma2_Z,
                               config.train, config.hidden)
    raise ValueError(f"unknown sweep axis {axis!r} (choose from {SWEEP_AXES})")


def sweep(axis: str, grid: Sequence, base_config: CodeConfig, *,
          algorithm: str = "ptp", trials: int = 100_000,
          leakage_samples: int = 20_000, estimators: Sequence[str] = ("mine",),
          preset: str = "desk", master_seed: int = 0) -> list[EvalReport]:
    """Train/evaluate one code per grid point along the given axis.

    Training failures do not abort the sweep: the failed point contributes a
    single ``training_failure`` row and the sweep continues.
    """
    if not grid:
        raise ValueError("sweep grid must not be empty")
    preset_cfg = ESTIMATOR_PRESETS[preset] if isinstance(preset, str) else preset
    reports = []
    for pi, value in enumerate(grid):
        point = _apply_axis(base_config, axis, value)
        point = replace(point, train=replace(
            point.train, seed=derive_seed(master_seed, "sweep", axis, pi)))
        try:
            result = train(point, algorithm)
        except TrainingError as exc:
            reports.append(EvalReport(
                config_hash=config_digest(point),
                n=point.n, L=point.num_users, T=point.num_transmitters,
                preset=preset_cfg.name,
                rows=[MetricRow(0, "training_failure", 1.0, 0.0, 0)],
                runtime_seconds=0.0,
                train_seed=point.train.seed,
                user_summaries=tuple((u.q, u.k, u.power) for u in point.users),
                raw_leakage={"error": str(exc)},
            ))
            continue
        report = estimate_error_rates(
            result.codecs, point, trials,
            seed=derive_seed(master_seed, "sweep-eval", axis, pi),
            preset=preset_cfg.name)
        if leakage_samples > 0 and estimators:
            samples = collect_samples(
                result.codecs, point, leakage_samples,
                seed=derive_seed(master_seed, "sweep-samples", axis, pi))
            estimates = estimate_leakage(
                samples, preset_cfg,
                seed=derive_seed(master_seed, "sweep-leakage", axis, pi),
                estimators=estimators)
            attach_leakage(report, estimates)
        reports.append(report)
    return reports


# ---------------------------------------------------------------------------
# CSV persistence
# ---------------------------------------------------------------------------

def report_csv_rows(report: EvalReport) -> list[str]:
    rows = []
    for row in report.rows:
        rows.append(",".join([
            report.config_hash,
            repr(report.n),
            repr(report.L),
            repr(report.T),
            repr(row.user),
            row.metric,
            repr(float(row.value)),
            repr(float(row.ci_halfwidth)),
            repr(row.samples),
            report.preset,
        ]))
    return rows


def write_csv(path: str | Path, reports: Sequence[EvalReport], append: bool = False) -> None:
    path = Path(path)
    lines = []
    if not (append and path.exists()):
        lines.append(CSV_HEADER)
    for report in reports:
        lines.extend(report_csv_rows(report))
    text = "\n".join(lines) + "\n"
    if append and path.exists():
        with path.open("a") as fh:
            fh.write(text)
    else:
        path.write_text(text)
