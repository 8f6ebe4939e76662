"""Command-line entry points.

Subcommands:

    wiretap train              train codecs (--algo sic|ptp), write manifest
    wiretap eval               Monte-Carlo error rates -> CSV + achievability
    wiretap leakage            MINE/CLUB leakage rows -> CSV
    wiretap sweep              parameter sweep along one axis -> CSV
    wiretap compare-baselines  SIC vs joint decoding vs time sharing -> CSV

Exit codes: 0 success, 2 configuration/usage, 3 artifact integrity,
4 training/estimation failure.  The environment variable WIRETAP_THREADS
caps Monte-Carlo worker fan-out (default 1).
"""

from __future__ import annotations

import argparse
import sys

from .config import (ConfigError, IntegrityError, load_experiment_config,
                     load_manifest, write_manifest)
from .evaluation import (EvalReport, MetricRow, achievability_report,
                         attach_leakage, config_digest, estimate_error_rates,
                         sic_joint_error, sweep, write_csv)
from .leakage import ESTIMATOR_PRESETS, EstimatorError, collect_samples, estimate_leakage
from .nn import TrainingError
from .reliability import baseline_joint_decoding, baseline_time_sharing, joint_decoding_error, train
from .rng import derive_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRITY = 3
EXIT_TRAINING = 4


def _load_config(args):
    experiment = load_experiment_config(args.config)
    if getattr(args, "seed", None) is not None:
        raw = dict(experiment.raw)
        raw["master_seed"] = args.seed
        from .config import parse_experiment

        experiment = parse_experiment(raw)
    return experiment


def cmd_train(args) -> int:
    experiment = _load_config(args)
    result = train(experiment.code, args.algo)
    manifest = write_manifest(args.out, experiment, args.algo, result.codecs)
    print(f"trained {len(result.codecs)} codec pair(s) with algorithm={args.algo}")
    print(f"training wall-clock: {result.seconds:.2f} s")
    print(f"final epoch loss: {result.epoch_losses[-1]:.6f}")
    print(f"manifest: {manifest}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.trials <= 0:
        raise ConfigError("--trials must be positive")
    experiment, codecs, _ = load_manifest(args.manifest)
    code = experiment.code
    report = estimate_error_rates(
        codecs, code, args.trials,
        seed=derive_seed(experiment.master_seed, "cli-eval"),
        preset=experiment.estimator_preset)
    write_csv(args.out, [report])
    print(f"wrote {args.out}")
    for row in report.rows:
        print(f"user {row.user} {row.metric}: {row.value:.6g} "
              f"(+-{row.ci_halfwidth:.2g}, {row.samples} trials)")
    try:
        tup = achievability_report(report)
        print(f"achievability: rates={tup.rates} epsilons={tup.epsilons} "
              f"delta={tup.delta} powers={tup.powers}")
    except ValueError:
        print("achievability: run `wiretap leakage` for the delta component")
    return EXIT_OK


def cmd_leakage(args) -> int:
    if args.samples <= 0:
        raise ConfigError("--samples must be positive")
    experiment, codecs, _ = load_manifest(args.manifest)
    code = experiment.code
    estimators = ("mine", "club") if args.estimator == "both" else (args.estimator,)
    samples = collect_samples(
        codecs, code, args.samples,
        seed=derive_seed(experiment.master_seed, "cli-samples"))
    estimates = estimate_leakage(
        samples, ESTIMATOR_PRESETS[experiment.estimator_preset],
        seed=derive_seed(experiment.master_seed, "cli-leakage"),
        estimators=estimators)
    report = EvalReport(
        config_hash=config_digest(code),
        n=code.n, L=code.num_users, T=code.num_transmitters,
        preset=experiment.estimator_preset,
        rows=[], runtime_seconds=0.0, train_seed=code.train.seed,
        user_summaries=tuple((u.q, u.k, u.power) for u in code.users))
    attach_leakage(report, estimates)
    write_csv(args.out, [report], append=args.append)
    for est in estimates:
        print(f"{est.estimator}: {est.nats:.4f} nats (raw {est.raw_nats:.4f}, "
              f"{est.samples} samples)")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    experiment = _load_config(args)
    grid = [float(v) if "." in v else int(v) for v in args.grid.split(",") if v]
    if not grid:
        raise ConfigError("--grid must list at least one value")
    estimators = () if args.estimator == "none" else (
        ("mine", "club") if args.estimator == "both" else (args.estimator,))
    reports = sweep(
        args.axis, grid, experiment.code,
        algorithm=args.algo,
        trials=args.trials,
        leakage_samples=args.samples,
        estimators=estimators,
        preset=experiment.estimator_preset,
        master_seed=experiment.master_seed)
    write_csv(args.out, reports)
    print(f"wrote {args.out} ({len(reports)} grid points)")
    return EXIT_OK


def cmd_compare_baselines(args) -> int:
    experiment = _load_config(args)
    code = experiment.code
    if code.num_users != 2:
        raise ConfigError("compare-baselines needs a two-user configuration")
    alphas = [float(a) for a in args.alphas.split(",") if a]
    master = experiment.master_seed

    sic_result = train(code, "sic")
    print(f"sic training: {sic_result.seconds:.2f} s")
    pe_sic = sic_joint_error(sic_result.codecs, code, args.trials,
                             derive_seed(master, "bl-sic"))
    joint_result = baseline_joint_decoding(code)
    print(f"joint-decoding training: {joint_result.seconds:.2f} s")
    pe_joint = joint_decoding_error(joint_result.codec, code, args.trials,
                                    derive_seed(master, "bl-joint"))
    ts = baseline_time_sharing(code, alphas, args.trials,
                               seed=derive_seed(master, "bl-ts"))
    report = EvalReport(
        config_hash=config_digest(code),
        n=code.n, L=code.num_users, T=code.num_transmitters,
        preset=experiment.estimator_preset,
        rows=[
            MetricRow(0, "pe_joint_sic", pe_sic, 0.0, args.trials),
            MetricRow(0, "pe_joint_decoding", pe_joint, 0.0, args.trials),
            MetricRow(0, "pe_joint_time_sharing", ts.best.joint_error, 0.0, args.trials),
            MetricRow(0, "time_sharing_best_alpha", ts.best.alpha, 0.0, args.trials),
        ],
        runtime_seconds=0.0,
        train_seed=code.train.seed,
        user_summaries=tuple((u.q, u.k, u.power) for u in code.users))
    write_csv(args.out, [report])
    print(f"sic={pe_sic:.4g}  joint-decoding={pe_joint:.4g}  "
          f"time-sharing={ts.best.joint_error:.4g} (alpha={ts.best.alpha:.3f})")
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wiretap",
        description="Short-blocklength wiretap codes with helpers: train, "
                    "evaluate, estimate leakage.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train codecs and write a checkpoint manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--algo", choices=("sic", "ptp"), default="sic")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Monte-Carlo error rates from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("leakage", help="estimate information leakage")
    p.add_argument("--manifest", required=True)
    p.add_argument("--estimator", choices=("mine", "club", "both"), default="mine")
    p.add_argument("--samples", type=int, default=20_000)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--append", action="store_true",
                   help="append rows to an existing CSV instead of overwriting")
    p.set_defaults(func=cmd_leakage)

    p = sub.add_parser("sweep", help="parameter sweep along one axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True,
                   choices=("blocklength", "helper_count", "power", "gains"))
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--algo", choices=("sic", "ptp"), default="ptp")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--samples", type=int, default=20_000,
                   help="leakage sample count per grid point (0 disables)")
    p.add_argument("--estimator", choices=("mine", "club", "both", "none"),
                   default="mine")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare-baselines",
                       help="SIC vs joint decoding vs time sharing on a 2-user config")
    p.add_argument("--config", required=True)
    p.add_argument("--alphas", default="0.25,0.5,0.75")
    p.add_argument("--trials", type=int, default=50_000)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.set_defaults(func=cmd_compare_baselines)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (TrainingError, EstimatorError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
