import sys
import time

from loguru import logger
from pydantic import ValidationError

from .cli.options import echo_inputs
from .cli.router import UsageError, build_parser
from .core.exceptions import CertificationError, InputError, ToolkitError
from .core.logging import setup_logging
from .schemas.report import Certification, RunReport

EXIT_OK = 0
EXIT_CERTIFICATION = CertificationError.exit_code


def _emit(report: RunReport, out) -> None:
    text = report.render()
    sys.stdout.write(text + "\n")
    if out is not None:
        out.write_text(text + "\n")


def run(argv: list[str] | None = None) -> int:
    """
    Parse argv, dispatch to the subcommand and print its JSON report.

    Returns 0 when every certification passed, 2 on input or numerical
    errors (usage errors included) and 3 when a certification failed.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return EXIT_OK if exc.status == 0 else InputError.exit_code

    setup_logging(args.log_level)
    start = time.perf_counter()
    try:
        report = args.handler(args)
    except CertificationError as exc:
        logger.error(exc.detail)
        report = RunReport(
            subcommand=args.subcommand,
            inputs=echo_inputs(args),
            certification=[Certification(metric=exc.metric, value=exc.value, bound=exc.bound)],
        )
        report.timing = time.perf_counter() - start
        _emit(report, args.out)
        return exc.exit_code
    except ToolkitError as exc:
        logger.error(exc.detail)
        return exc.exit_code
    except ValidationError as exc:
        logger.error(f"Invalid input: {exc}")
        return InputError.exit_code

    report.timing = time.perf_counter() - start
    _emit(report, args.out)
    return EXIT_OK if report.passed else EXIT_CERTIFICATION


if __name__ == "__main__":
    sys.exit(run())
