from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv
from rich.console import Console

from qcnn_gait._exceptions import (
    CheckpointError,
    ConfigurationError,
    ContractViolation,
    DatasetFormatError,
    QuaternionDomainError,
)
from qcnn_gait.api.api import (
    evaluate_checkpoint,
    generate_dataset_file,
    run_flip_from_config,
    run_matrix_from_config,
    train_from_config,
    visualize_checkpoint,
)
from qcnn_gait.api.cli_errors import format_settings_error, render_config_error_panel
from qcnn_gait.api.settings import LOG_LEVEL_ENV, SettingsError
from qcnn_gait.verification import (
    LAYER_TOLERANCE,
    check_equivariance_suite,
    grad_check_small_qcnn,
)

logger = logging.getLogger(__name__)
console = Console()

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTERNAL_ERROR = 2

USER_ERRORS = (
    ConfigurationError,
    ContractViolation,
    DatasetFormatError,
    CheckpointError,
    QuaternionDomainError,
    FileNotFoundError,
)


class UsageError(Exception):
    """Raised instead of exiting when argument parsing fails."""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _configure_logging(verbose: bool) -> None:
    """Configure root logging for CLI runs."""
    level = logging.DEBUG if verbose else os.environ.get(LOG_LEVEL_ENV, "INFO").upper()
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Random seed for this run.")
    common.add_argument("--config", type=Path, default=None, help="Path to a config file.")
    common.add_argument("--out", type=Path, default=None, help="Output file or directory.")
    common.add_argument(
        "--env-file",
        type=Path,
        default=None,
        help="Optional .env file path (default: <config-dir>/.env).",
    )
    common.add_argument("--verbose", action="store_true", help="Enable debug logging.")
    return common


def _build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _ArgumentParser(
        prog="qcnn-gait",
        description="Rotation-equivariant quaternion CNNs for gait-cycle classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    gen = sub.add_parser("gen-data", parents=[common], help="Write a synthetic gait dataset.")
    gen.add_argument("--classes", type=int, default=10, help="Number of classes (default: 10).")
    gen.add_argument("--per-class", type=int, default=120, help="Cycles per class.")
    gen.add_argument("--noise", type=float, default=0.05, help="Gaussian noise sigma.")
    gen.add_argument(
        "--max-phase-shift",
        type=float,
        default=0.05,
        help="Largest random time shift as a fraction of one cycle.",
    )
    gen.add_argument(
        "--split", choices=["train", "val", "test"], default="train", help="Split tag."
    )

    train = sub.add_parser(
        "train", parents=[common], help="Train from a JSON/YAML config; writes checkpoint + CSV."
    )
    train.add_argument("--dataset", type=Path, default=None, help="Override the config dataset.")

    evaluate = sub.add_parser("eval", parents=[common], help="Evaluate a checkpoint.")
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--dataset", type=Path, required=True)

    sub.add_parser(
        "experiment-matrix", parents=[common], help="Train/test orientation matrix (CSV + text)."
    )

    flip = sub.add_parser("flip-experiment", parents=[common], help="Half-turn flip experiment.")
    flip.add_argument("--trials", type=int, default=None, help="Independent training runs.")
    flip.add_argument(
        "--axis", type=float, nargs=3, default=None, metavar=("X", "Y", "Z"), help="Flip axis."
    )

    equiv = sub.add_parser(
        "check-equivariance", parents=[common], help="Random-trial equivariance suite."
    )
    equiv.add_argument("--trials", type=int, default=100, help="Random trials (default: 100).")

    grad = sub.add_parser(
        "grad-check", parents=[common], help="Finite-difference check of a small QCNN."
    )
    grad.add_argument("--h", type=float, default=1e-6, help="Central-difference step.")

    viz = sub.add_parser(
        "viz-kernels", parents=[common], help="Maximally activating trajectory fragments."
    )
    viz.add_argument("--checkpoint", type=Path, required=True)
    viz.add_argument("--layer", type=int, default=0, help="Index of a qconv layer.")
    viz.add_argument("--channels", type=int, nargs="+", default=None, help="Output channels.")
    viz.add_argument("--steps", type=int, default=2000, help="Ascent steps (default: 2000).")
    viz.add_argument("--step-size", type=float, default=0.05, help="Ascent step size.")
    viz.add_argument("--trace-dataset", type=Path, default=None, help="Dataset for traces.")
    viz.add_argument("--trace-index", type=int, default=0, help="Cycle index for traces.")
    viz.add_argument("--svg", type=Path, default=None, help="Also render small multiples.")
    viz.add_argument("--workers", type=int, default=None, help="Concurrent kernels.")
    return parser


def _require_config(args: argparse.Namespace) -> Path:
    if args.config is None:
        raise UsageError(f"{args.command} requires --config")
    return args.config


def _cmd_gen_data(args: argparse.Namespace) -> int:
    out = args.out or Path("data/gait.qgc1")
    seed = 0 if args.seed is None else args.seed
    dataset = generate_dataset_file(
        out,
        num_classes=args.classes,
        cycles_per_class=args.per_class,
        noise_sigma=args.noise,
        seed=seed,
        max_phase_shift=args.max_phase_shift,
        split=args.split,
    )
    console.print(f"[green]✓[/green] Wrote {len(dataset)} cycles to [bold]{out}[/bold]")
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    config_path = _require_config(args)
    console.print(f"[green]✓[/green] Loaded config: [bold]{config_path.resolve()}[/bold]")
    outputs = train_from_config(
        config_path,
        out_dir=args.out or Path("runs/train"),
        dataset_path=args.dataset,
        seed=args.seed,
        env_file=args.env_file,
    )
    console.print(
        f"[green]✓[/green] Best val top-1 {outputs.result.checkpoint.metadata['val_top1']:.4f} "
        f"at epoch {outputs.result.best_epoch}"
    )
    console.print(f"Checkpoint: [bold]{outputs.checkpoint_path}[/bold]")
    console.print(f"Metrics: [bold]{outputs.metrics_path}[/bold]")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    report = evaluate_checkpoint(args.checkpoint, args.dataset, args.out)
    console.print(
        f"top1 {report.top1:.4f}  top5 {report.top5:.4f}  ({report.num_samples} cycles)"
    )
    return EXIT_OK


def _cmd_experiment_matrix(args: argparse.Namespace) -> int:
    table, csv_path, _ = run_matrix_from_config(
        args.config, out_dir=args.out, seed=args.seed, env_file=args.env_file
    )
    console.print(table.render())
    console.print(f"Results: [bold]{csv_path}[/bold]")
    return EXIT_OK


def _cmd_flip_experiment(args: argparse.Namespace) -> int:
    table, csv_path, _ = run_flip_from_config(
        args.config,
        out_dir=args.out,
        seed=args.seed,
        trials=args.trials,
        axis=tuple(args.axis) if args.axis else None,
        env_file=args.env_file,
    )
    console.print(table.render())
    console.print(f"Results: [bold]{csv_path}[/bold]")
    return EXIT_OK


def _cmd_check_equivariance(args: argparse.Namespace) -> int:
    reports = check_equivariance_suite(args.trials, 0 if args.seed is None else args.seed)
    for report in reports:
        mark = "[green]✓[/green]" if report.passed else "[red]✗[/red]"
        console.print(
            f"{mark} {report.name}: max deviation {report.max_deviation:.3e} "
            f"(tolerance {report.tolerance:.0e}, {report.trials} trials)"
        )
    layer_max = max(r.max_deviation for r in reports if r.tolerance == LAYER_TOLERANCE)
    console.print(f"max deviation {layer_max:.3e}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_INTERNAL_ERROR


def _cmd_grad_check(args: argparse.Namespace) -> int:
    report = grad_check_small_qcnn(0 if args.seed is None else args.seed, args.h)
    console.print(
        f"max relative gradient error {report.max_deviation:.3e} "
        f"over {report.trials} parameters (tolerance {report.tolerance:.0e})"
    )
    return EXIT_OK if report.passed else EXIT_INTERNAL_ERROR


def _cmd_viz_kernels(args: argparse.Namespace) -> int:
    out = args.out or Path("viz/kernels.json")
    document = visualize_checkpoint(
        args.checkpoint,
        out,
        layer=args.layer,
        seed=0 if args.seed is None else args.seed,
        channels=args.channels,
        steps=args.steps,
        step_size=args.step_size,
        trace_dataset=args.trace_dataset,
        trace_index=args.trace_index,
        svg_path=args.svg,
        max_workers=args.workers,
    )
    console.print(
        f"[green]✓[/green] Wrote {len(document['fragments'])} fragments to [bold]{out}[/bold]"
    )
    return EXIT_OK


COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "experiment-matrix": _cmd_experiment_matrix,
    "flip-experiment": _cmd_flip_experiment,
    "check-equivariance": _cmd_check_equivariance,
    "grad-check": _cmd_grad_check,
    "viz-kernels": _cmd_viz_kernels,
}


def main(argv: list[str] | None = None) -> int:
    """Entry point for `qcnn-gait`."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        console.print(f"[bold red]Usage error:[/bold red] {exc}")
        return EXIT_USER_ERROR
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_OK

    load_dotenv(args.env_file or Path.cwd() / ".env")
    _configure_logging(args.verbose)

    try:
        console.rule(f"[bold cyan]qcnn-gait {args.command}[/bold cyan]")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        console.print(f"[bold red]Usage error:[/bold red] {exc}")
        return EXIT_USER_ERROR
    except SettingsError as exc:
        error_config_path = exc.config_path or args.config or Path("config.yaml")
        message = format_settings_error(exc, config_path=error_config_path)
        console.print(render_config_error_panel(message))
        logger.error("Configuration error")
        if args.verbose:
            logger.error("Configuration details: %s", message)
        return EXIT_USER_ERROR
    except USER_ERRORS as exc:
        console.print(f"[bold red]Error:[/bold red] {exc}")
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_USER_ERROR
    except Exception as exc:  # noqa: BLE001
        console.print(f"[bold red]{args.command} failed:[/bold red] {exc}")
        logger.exception("%s failed: %s", args.command, exc)
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
