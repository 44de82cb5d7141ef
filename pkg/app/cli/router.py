import argparse

from app.cli.commands import balance, cayley, elementwise, graph, isotropic, sdd, spectral, verify
from app.core.config import settings


class UsageError(Exception):
    """argparse rejected the command line; the usage text is already printed."""

    def __init__(self, status: int):
        super().__init__(status)
        self.status = status


class ToolkitParser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        # prefixes would let `--t` pass as `--threads`
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def exit(self, status: int = 0, message: str | None = None):
        if message:
            self._print_message(message)
        raise UsageError(status)


def build_parser() -> argparse.ArgumentParser:
    parser = ToolkitParser(
        prog="python -m app.main",
        description=f"{settings.PROJECT_NAME} {settings.VERSION}: greedy matrix hyperbolic cosine "
        "algorithms with certified outputs. Reports go to stdout as JSON, logs to stderr.",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True, parser_class=ToolkitParser)
    balance.register(subparsers)
    cayley.register(subparsers)
    isotropic.register(subparsers)
    spectral.register(subparsers)
    graph.register(subparsers)
    elementwise.register(subparsers)
    sdd.register(subparsers)
    verify.register(subparsers)
    return parser
