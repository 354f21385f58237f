"""Command-line entry point: synth, train, predict, eval, gradcheck, ablate.

Exit codes: 0 success, 1 gradient check above tolerance, 2 usage or config
error, 3 divergence, 4 checkpoint error, 5 missing or unreadable data.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Callable, List

from .ablation import parse_variants, run_ablation, write_ablation
from .checkpoint import load_checkpoint
from .config import RunConfig
from .data.manifest import read_manifest, write_manifest
from .data.synth import generate_synthetic
from .errors import (
    AmuletError,
    CheckpointError,
    ConfigError,
    DivergenceError,
    GradCheckError,
    InputError,
    ManifestError,
    NetpbmError,
    ReportError,
)
from .evaluation import evaluate_dataset
from .gradcheck import check_network
from .network import parameter_layout
from .predict import predict_samples, write_predictions
from .telemetry import RunTelemetry
from .training import TrainingLog, train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_CHECKPOINT = 4
EXIT_DATA = 5

GRADCHECK_MAX_PARAMETERS = 50_000
CONFIG_ECHO = "config.json"
TRAIN_LOG = "train_log.csv"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _load_config(path: Path | None) -> RunConfig:
    if path is None:
        config = RunConfig()
        config.apply_environment(os.environ)
        return config
    return RunConfig.load(path)


def cmd_synth(args: argparse.Namespace) -> int:
    if args.count < 1:
        logger.error("synth: --count must be >= 1, got %d", args.count)
        return EXIT_USAGE
    config = _load_config(args.spec)
    samples = generate_synthetic(config.data.synth, args.count)
    manifest = write_manifest(samples, args.out)
    print(manifest)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    samples = read_manifest(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config.dump(out / CONFIG_ECHO)
    resume = load_checkpoint(args.resume) if args.resume is not None else None

    telemetry = RunTelemetry()
    log = TrainingLog()
    try:
        result = train(
            samples,
            config.network,
            config.loss,
            config.optim,
            config.augment,
            config.data.seed,
            out,
            checkpoint_every=config.data.checkpoint_every,
            log_every=config.data.log_every,
            resume=resume,
            telemetry=telemetry,
            prefetch=args.prefetch,
            log=log,
        )
    finally:
        log.write_csv(out / TRAIN_LOG)
        telemetry.write(out)
    logger.info(
        "train: finished at iteration %d with %d parameters", result.state.iteration, result.store.parameter_count()
    )
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.ckpt)
    checkpoint.store.validate(parameter_layout(checkpoint.network))
    samples = read_manifest(args.data)
    telemetry = RunTelemetry()
    predictions = predict_samples(samples, checkpoint.store, checkpoint.network, jobs=args.jobs, telemetry=telemetry)
    write_predictions(predictions, args.out, attention=args.attention)
    telemetry.write(args.out)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    telemetry = RunTelemetry()
    report = evaluate_dataset(args.pred, args.data, jobs=args.jobs, telemetry=telemetry)
    print(report.write_csv(args.out))
    if args.pr is not None:
        print(report.write_pr_csv(args.pr))
    telemetry.write(Path(args.out).parent)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    count = sum(math.prod(dims) for dims in parameter_layout(config.network).values())
    if count > GRADCHECK_MAX_PARAMETERS:
        raise ConfigError(
            f"gradcheck: network has {count} parameters, limit is {GRADCHECK_MAX_PARAMETERS}", "network"
        )
    config.network.check_batch(1, "network.input_hw")
    error = check_network(config.network, config.loss, config.data.seed, max_entries=args.max_entries)
    print(f"max relative error: {error:.3e}")
    if error < args.tolerance:
        return EXIT_OK
    logger.error("gradcheck: %.3e is not below tolerance %.3e", error, args.tolerance)
    return EXIT_TOLERANCE


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    variants = parse_variants(args.variants)
    samples = read_manifest(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config.dump(out / CONFIG_ECHO)
    rows = run_ablation(samples, config, variants, args.seeds, jobs=args.jobs)
    for path in write_ablation(rows, out):
        print(path)
    return EXIT_OK


def _parse_args(argv: List[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="pyamulet", description="Salient object detection at desk scale.")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic dataset")
    synth.add_argument("--spec", type=Path, default=None, help="run config whose data.synth section is used")
    synth.add_argument("--out", type=Path, required=True)
    synth.add_argument("--count", type=int, required=True)
    synth.set_defaults(handler=cmd_synth)

    training = commands.add_parser("train", help="train a network")
    training.add_argument("--config", type=Path, default=None)
    training.add_argument("--data", type=Path, required=True, help="manifest of training samples")
    training.add_argument("--out", type=Path, required=True)
    training.add_argument("--resume", type=Path, default=None, help="checkpoint to continue from")
    training.add_argument("--prefetch", action="store_true", help="build batches on a background thread")
    training.set_defaults(handler=cmd_train)

    predict = commands.add_parser("predict", help="write saliency maps for a manifest")
    predict.add_argument("--ckpt", type=Path, required=True)
    predict.add_argument("--data", type=Path, required=True)
    predict.add_argument("--out", type=Path, required=True)
    predict.add_argument("--attention", action="store_true", help="also export per-level attention maps")
    predict.add_argument("--jobs", type=int, default=1)
    predict.set_defaults(handler=cmd_predict)

    evaluate = commands.add_parser("eval", help="score saliency maps against a manifest")
    evaluate.add_argument("--pred", type=Path, required=True)
    evaluate.add_argument("--data", type=Path, required=True)
    evaluate.add_argument("--out", type=Path, required=True, help="report CSV")
    evaluate.add_argument("--pr", type=Path, default=None, help="PR curve CSV")
    evaluate.add_argument("--jobs", type=int, default=1)
    evaluate.set_defaults(handler=cmd_eval)

    gradcheck = commands.add_parser("gradcheck", help="finite-difference check of the full network")
    gradcheck.add_argument("--config", type=Path, default=None)
    gradcheck.add_argument("--tolerance", type=float, default=1e-4)
    gradcheck.add_argument("--max-entries", type=int, default=None, help="entries sampled per parameter")
    gradcheck.set_defaults(handler=cmd_gradcheck)

    ablate = commands.add_parser("ablate", help="train and score architecture variants")
    ablate.add_argument("--config", type=Path, default=None)
    ablate.add_argument("--data", type=Path, required=True)
    ablate.add_argument("--out", type=Path, required=True)
    ablate.add_argument("--variants", default="a,b,c,d,e")
    ablate.add_argument("--seeds", type=int, default=3)
    ablate.add_argument("--jobs", type=int, default=1)
    ablate.set_defaults(handler=cmd_ablate)

    return parser.parse_args(argv)


_EXIT_CODES: List[tuple[type, int]] = [
    (ConfigError, EXIT_USAGE),
    (DivergenceError, EXIT_DIVERGED),
    (CheckpointError, EXIT_CHECKPOINT),
    (ManifestError, EXIT_DATA),
    (ReportError, EXIT_DATA),
    (NetpbmError, EXIT_DATA),
    (InputError, EXIT_DATA),
    (OSError, EXIT_DATA),
    (GradCheckError, EXIT_TOLERANCE),
    # shape, arity and conv-spec errors only arise from an unusable configuration
    (AmuletError, EXIT_USAGE),
]


def main(argv: List[str] | None = None) -> int:
    try:
        args = _parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except tuple(cls for cls, _ in _EXIT_CODES) as exc:
        code = next(code for cls, code in _EXIT_CODES if isinstance(exc, cls))
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


__all__ = ["main"]
