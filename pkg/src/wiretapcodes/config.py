"""Experiment configuration files, checkpoint manifests, integrity checks.

Configs are JSON.  Example:

    {
      "scenario": "wiretap_helper",
      "n": 12,
      "sigma2_Y": 1.0,
      "sigma2_Z": 1.0,
      "users": [
        {"q": 4, "k": 1, "power": 2.0, "h": 1.0, "g": 1.0, "seed_lambda": "0001"},
        {"q": 4, "power": 12.0, "h": 1.0, "g": 0.3}
      ],
      "train": {"preset": "desk"},
      "estimator_preset": "desk",
      "master_seed": 7
    }

Users may appear in any order; they are canonicalized (ascending h*P) on
load.  ``seed_lambda`` is the hash seed as a binary string, width q.  The
``train`` block is either a named preset or explicit fields (epochs,
batch_size, learning_rate, messages_per_epoch).

A training run writes one JSON checkpoint per network plus ``manifest.json``
binding the experiment to the checkpoint files via SHA-256 digests and the
code-config digest.  Loading verifies both; any mismatch is an integrity
error, never silently accepted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import nn
from .evaluation import config_digest
from .leakage import ESTIMATOR_PRESETS
from .nn import TrainConfig
from .reliability import CodeConfig, CodecPair, UserSpec

MANIFEST_FORMAT = "wiretapcodes-manifest-v1"

SCENARIOS = ("wiretap_helper", "multi_helper", "mac_wiretap")

TRAIN_PRESETS: dict[str, dict] = {
    # acceptance-friendly budget: >=100 epochs, >=5e4 fresh messages per epoch
    "desk": dict(epochs=100, batch_size=500, learning_rate=1e-3,
                 messages_per_epoch=50_000),
    # reference budget of the large-scale experiments
    "full": dict(epochs=600, batch_size=500, learning_rate=1e-4,
                 messages_per_epoch=200_000),
    # seconds-long budget for wiring tests
    "smoke": dict(epochs=3, batch_size=200, learning_rate=2e-3,
                  messages_per_epoch=2_000),
}


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


class IntegrityError(RuntimeError):
    """Checkpoint/config binding mismatch."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    code: CodeConfig
    estimator_preset: str
    master_seed: int
    raw: dict  # original JSON document, reproduced in manifests

    @property
    def hash(self) -> str:
        return experiment_hash(self.raw)


def experiment_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _parse_train(doc: dict, master_seed: int) -> TrainConfig:
    doc = dict(doc)
    preset = doc.pop("preset", None)
    fields = dict(TRAIN_PRESETS.get(preset, {})) if preset else {}
    if preset and preset not in TRAIN_PRESETS:
        raise ConfigError(f"unknown train preset {preset!r} (have {sorted(TRAIN_PRESETS)})")
    fields.update(doc)
    fields.setdefault("seed", master_seed)
    try:
        return TrainConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train block: {exc}") from exc


def _parse_user(doc: dict, index: int) -> UserSpec:
    try:
        return UserSpec(
            q=int(doc["q"]),
            power=float(doc["power"]),
            h=float(doc["h"]),
            g=float(doc["g"]),
            k=int(doc["k"]) if "k" in doc and doc["k"] is not None else None,
            seed_lambda=doc.get("seed_lambda"),
        )
    except KeyError as exc:
        raise ConfigError(f"user {index}: missing field {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"user {index}: {exc}") from exc


def parse_experiment(raw: dict) -> ExperimentConfig:
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    if "master_seed" not in raw:
        raise ConfigError("config needs a master_seed")
    master_seed = int(raw["master_seed"])
    users = [_parse_user(u, i) for i, u in enumerate(raw.get("users", []))]
    if not users:
        raise ConfigError("config needs at least one user")
    train = _parse_train(raw.get("train", {"preset": "desk"}), master_seed)
    hidden = tuple(raw["hidden"]) if raw.get("hidden") else None
    try:
        code = CodeConfig.make(
            n=int(raw["n"]),
            users=users,
            sigma2_Y=float(raw["sigma2_Y"]),
            sigma2_Z=float(raw["sigma2_Z"]),
            train=train,
            hidden=hidden,
        )
    except KeyError as exc:
        raise ConfigError(f"missing field {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    t = code.num_transmitters
    L = code.num_users
    if scenario == "wiretap_helper" and not (t == 1 and L <= 2):
        raise ConfigError("wiretap_helper takes one transmitter and at most one helper")
    if scenario == "multi_helper" and t != 1:
        raise ConfigError("multi_helper takes exactly one transmitter")
    if scenario == "mac_wiretap" and t != 2:
        raise ConfigError("mac_wiretap takes exactly two transmitters")
    for i in code.transmitter_indices:
        if code.users[i].seed_lambda is None:
            raise ConfigError(f"transmitter (user {i + 1}) needs a seed_lambda")

    preset = raw.get("estimator_preset", "desk")
    if preset not in ESTIMATOR_PRESETS:
        raise ConfigError(f"unknown estimator preset {preset!r}")
    return ExperimentConfig(scenario, code, preset, master_seed, raw)


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_experiment(raw)


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: str | Path, experiment: ExperimentConfig,
                   algorithm: str, codecs: Sequence[CodecPair]) -> Path:
    """Persist codecs and the manifest binding them to the experiment."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_digest(experiment.code)
    entries = []
    for i, codec in enumerate(codecs):
        names = {}
        for role, model in (("encoder", codec.encoder), ("decoder", codec.decoder)):
            fname = f"{role}_{i + 1:02d}.json"
            nn.save_checkpoint(
                out_dir / fname, model,
                rng_seed=experiment.code.train.seed,
                metadata={"config_digest": digest, "user": i + 1, "role": role,
                          "algorithm": algorithm},
            )
            names[role] = fname
            names[f"{role}_sha256"] = _sha256_file(out_dir / fname)
        entries.append({"user": i + 1, **names})
    manifest = {
        "format": MANIFEST_FORMAT,
        "experiment": experiment.raw,
        "experiment_hash": experiment.hash,
        "config_digest": digest,
        "algorithm": algorithm,
        "checkpoints": entries,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return path


def load_manifest(path: str | Path) -> tuple[ExperimentConfig, list[CodecPair], dict]:
    """Load and verify a manifest; returns (experiment, codecs, manifest doc)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"unsupported manifest format: {doc.get('format')!r}")
    experiment = parse_experiment(doc["experiment"])
    if experiment.hash != doc.get("experiment_hash"):
        raise IntegrityError("manifest experiment_hash does not match its config")
    digest = config_digest(experiment.code)
    if digest != doc.get("config_digest"):
        raise IntegrityError("manifest config_digest does not match its config")
    base = path.parent
    codecs = []
    for entry in doc["checkpoints"]:
        models = {}
        for role in ("encoder", "decoder"):
            fpath = base / entry[role]
            if not fpath.is_file():
                raise IntegrityError(f"missing checkpoint file {fpath}")
            if _sha256_file(fpath) != entry[f"{role}_sha256"]:
                raise IntegrityError(f"checkpoint {fpath.name} does not match its recorded hash")
            model, meta = nn.load_checkpoint(fpath)
            if meta["metadata"].get("config_digest") != digest:
                raise IntegrityError(
                    f"checkpoint {fpath.name} was trained for a different configuration")
            models[role] = model
        codecs.append(CodecPair(models["encoder"], models["decoder"]))
    if len(codecs) != experiment.code.num_users:
        raise IntegrityError("manifest checkpoint count does not match user count")
    return experiment, codecs, doc
