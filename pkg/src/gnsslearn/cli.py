"""Command-line interface: simulate, train, solve, evaluate, inspect.

Exit codes: 0 on success, 1 on usage errors, 2 on data/model errors. All
diagnostics go to stderr; results go to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__
from .dataset import load_dataset, save_dataset
from .errors import GnssLearnError
from .network import load_model, save_model
from .pipeline import (
    ALL_METHODS,
    ARCH_TO_MODE,
    BATCH_FULL,
    BATCH_PER_EPOCH,
    EvalConfig,
    TDL_METHODS,
    TrainConfig,
    evaluate,
    export_report,
    inspect_epoch,
    solve_series,
    train,
)
from .simulate import PRESETS, ScenarioConfig, generate_dataset
from .solver import SolverConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage failures exit 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _resolve_seed(args) -> int:
    if args.seed is None:
        _log("no --seed given; using default seed 0")
        return 0
    return args.seed


def _solver_config(args) -> SolverConfig:
    return SolverConfig(max_iterations=args.max_iterations, step_tolerance=args.step_tolerance)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-iterations", type=int, default=20, help="solver iteration cap (default 20)")
    p.add_argument("--step-tolerance", type=float, default=1e-4, help="solver halt threshold in meters (default 1e-4)")


def build_parser() -> _Parser:
    parser = _Parser(prog="gnsslearn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gnsslearn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic dataset file")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0, logged)")
    p.add_argument("--epochs", type=int, default=100, help="number of epochs to generate")
    p.add_argument("--out", required=True, help="output dataset path (JSON lines)")
    p.add_argument("--preset", choices=sorted(PRESETS), default="light-urban", help="scenario preset")
    p.add_argument("--nlos-fraction", type=float, default=None, help="override NLOS fraction")
    p.add_argument("--noise-sigma", type=float, default=None, help="override pseudorange noise sigma (m)")
    p.add_argument("--trajectory", choices=["static", "random-walk"], default=None, help="override trajectory model")
    p.add_argument("--sats-min", type=int, default=None, help="override min satellites per epoch")
    p.add_argument("--sats-max", type=int, default=None, help="override max satellites per epoch")

    p = sub.add_parser("train", help="train a network on a dataset with ground truth")
    p.add_argument("--mode", choices=list(TDL_METHODS), required=True, help="network flavor")
    p.add_argument("--train", dest="train_path", required=True, metavar="PATH", help="training dataset")
    p.add_argument("--checkpoint", required=True, help="output checkpoint path")
    p.add_argument("--epochs", type=int, default=None, help="training epochs (default: 500, or 100 for tdl-bw)")
    p.add_argument("--learning-rate", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=None, help="parameter init seed (default 0, logged)")
    p.add_argument("--batch", choices=[BATCH_PER_EPOCH, BATCH_FULL], default=BATCH_PER_EPOCH)
    p.add_argument("--log", dest="log_path", default=None, help="write per-epoch mean loss CSV here")
    p.add_argument("--log-every", type=int, default=0, help="stderr progress cadence in epochs (0: silent)")
    _add_solver_flags(p)

    p = sub.add_parser("solve", help="per-epoch solutions for one method, JSON lines")
    p.add_argument("--method", choices=list(ALL_METHODS), default="equal")
    p.add_argument("--test", dest="test_path", required=True, metavar="PATH", help="dataset to solve")
    p.add_argument("--checkpoint", default=None, help="checkpoint for tdl-* methods")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--no-fallback", action="store_true", help="disable the tdl-bw bias-only fallback")
    _add_solver_flags(p)

    p = sub.add_parser("evaluate", help="compare methods on a dataset and write a report")
    p.add_argument("--methods", required=True, help="comma list from: " + ",".join(ALL_METHODS))
    p.add_argument("--test", dest="test_path", required=True, metavar="PATH", help="evaluation dataset")
    p.add_argument(
        "--checkpoint",
        action="append",
        default=[],
        metavar="[MODE=]PATH",
        help="checkpoint for a tdl method; repeatable, mode inferred from the file when omitted",
    )
    p.add_argument("--out", required=True, help="report output path")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--series", default=None, help="also write the per-epoch error series CSV here")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: machine parallelism)")
    p.add_argument("--no-fallback", action="store_true", help="disable the tdl-bw bias-only fallback")
    _add_solver_flags(p)

    p = sub.add_parser("inspect", help="print the per-satellite weight/bias table for one epoch")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint")
    p.add_argument("--test", dest="test_path", required=True, metavar="PATH", help="dataset holding the epoch")
    p.add_argument("--epoch-index", type=int, default=0)
    _add_solver_flags(p)

    return parser


def _scenario_from_args(args) -> ScenarioConfig:
    cfg = PRESETS[args.preset]
    overrides = {"seed": _resolve_seed(args), "epochs": args.epochs}
    if args.nlos_fraction is not None:
        overrides["nlos_fraction"] = args.nlos_fraction
    if args.noise_sigma is not None:
        overrides["noise_sigma"] = args.noise_sigma
    if args.trajectory is not None:
        overrides["trajectory"] = args.trajectory
    if args.sats_min is not None:
        overrides["satellites_min"] = args.sats_min
    if args.sats_max is not None:
        overrides["satellites_max"] = args.sats_max
    import dataclasses

    return dataclasses.replace(cfg, **overrides)


def _cmd_simulate(args) -> int:
    cfg = _scenario_from_args(args)
    epochs = generate_dataset(cfg)
    save_dataset(epochs, args.out, config_echo=cfg.to_dict())
    _log(f"wrote {len(epochs)} epochs to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    epochs, _ = load_dataset(args.train_path)
    cfg = TrainConfig(
        mode=args.mode,
        epochs_count=args.epochs,
        learning_rate=args.learning_rate,
        seed=_resolve_seed(args),
        batch_mode=args.batch,
        solver=_solver_config(args),
        log_every=args.log_every,
    )
    if args.log_every:
        import logging

        logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    model, training_log = train(epochs, cfg)
    save_model(model, args.checkpoint)
    if args.log_path:
        training_log.save(args.log_path)
    _log(
        f"trained {args.mode} for {cfg.resolved_epochs()} epochs on {len(epochs)} data epochs "
        f"(final mean loss {training_log.losses[-1]:.4f} m^2); checkpoint: {args.checkpoint}"
    )
    return EXIT_OK


def _eval_config(args) -> EvalConfig:
    models = {}
    paths = args.checkpoint if isinstance(args.checkpoint, list) else ([args.checkpoint] if args.checkpoint else [])
    for item in paths:
        mode, sep, path = item.partition("=")
        if sep and mode in TDL_METHODS:
            model = load_model(path)
        else:
            model = load_model(item)
            mode = ARCH_TO_MODE[model.architecture]
        models[mode] = model
    return EvalConfig(
        solver=_solver_config(args),
        models=models,
        enable_fallback=not getattr(args, "no_fallback", False),
        threads=getattr(args, "threads", 1),
    )


def _cmd_solve(args) -> int:
    epochs, _ = load_dataset(args.test_path)
    cfg = _eval_config(args)
    records = solve_series(args.method, epochs, cfg)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for rec in records:
            out.write(json.dumps(rec, separators=(",", ":")) + "\n")
    finally:
        if args.out:
            out.close()
    n_ok = sum(1 for r in records if r["converged"])
    _log(f"solved {n_ok}/{len(records)} epochs with {args.method}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    epochs, _ = load_dataset(args.test_path)
    cfg = _eval_config(args)
    report = evaluate(methods, epochs, cfg)
    export_report(report, args.out, fmt=args.format, series_path=args.series)
    for method in report.methods:
        res = report.results[method]
        _log(
            f"{method}: mean2d={res.mean_2d:.3f} m mean3d={res.mean_3d:.3f} m "
            f"used={res.epochs_used} skipped={res.epochs_skipped} fallbacks={res.fallbacks}"
        )
    _log(f"report: {args.out}")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    epochs, _ = load_dataset(args.test_path)
    if not 0 <= args.epoch_index < len(epochs):
        raise GnssLearnError(f"--epoch-index {args.epoch_index} out of range (dataset has {len(epochs)} epochs)")
    model = load_model(args.checkpoint)
    cfg = EvalConfig(solver=_solver_config(args))
    rows = inspect_epoch(model, epochs[args.epoch_index], cfg)
    has_truth = any(r["los_truth"] is not None for r in rows)
    header = f"{'sat':>4}  {'weight':>6}  {'bias_m':>7}  {'cn0':>5}  {'elev_deg':>8}"
    if has_truth:
        header += "  los"
    print(header)
    for r in rows:
        line = (
            f"{r['sat_id']:>4}  {r['weight']:6.2f}  {r['bias_m']:7.2f}  "
            f"{r['cn0']:5.1f}  {math.degrees(r['elevation']):8.2f}"
        )
        if has_truth:
            line += f"  {'LOS' if r['los_truth'] else 'NLOS'}"
        print(line)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "solve": _cmd_solve,
    "evaluate": _cmd_evaluate,
    "inspect": _cmd_inspect,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (GnssLearnError, OSError) as exc:
        print(f"gnsslearn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
