import argparse
from pathlib import Path
from typing import Any

from app.core.config import settings
from app.models.enums import CertifyMode


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def add_common_arguments(parser: argparse.ArgumentParser, epsilon: float = 0.5, steps: bool = False) -> None:
    """Flags shared by every subcommand; `--t` only where the caller may fix the step count."""
    parser.add_argument("--epsilon", type=float, default=epsilon, help="accuracy parameter")
    if steps:
        parser.add_argument("--t", type=positive_int, default=None, help="number of greedy steps")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized stages")
    parser.add_argument(
        "--threads", type=positive_int, default=settings.THREADS, help="worker threads for kernels"
    )
    parser.add_argument(
        "--certify",
        choices=[mode.value for mode in CertifyMode],
        default=CertifyMode.ON.value,
        help="certify the result by a direct eigensolve",
    )
    parser.add_argument("--out", type=Path, default=None, help="also write the JSON report here")
    parser.add_argument("--log-level", default=None, help="loguru level for stderr logs")


def certify_enabled(args: argparse.Namespace) -> bool:
    return args.certify == CertifyMode.ON.value


def echo_inputs(args: argparse.Namespace) -> dict[str, Any]:
    """Parameters of the run as they appear in the report."""
    skip = {"handler", "out", "log_level", "threads"}
    return {
        key: str(value) if isinstance(value, Path) else value
        for key, value in sorted(vars(args).items())
        if key not in skip
    }
