import argparse
from pathlib import Path

import numpy as np

from app.cli.commands.elementwise import sparsified_certification, sparsified_outputs
from app.cli.options import add_common_arguments, certify_enabled, echo_inputs
from app.core.utils import read_matrix, write_matrix_market
from app.models.enums import SddMode, Subcommand
from app.schemas.report import RunReport
from app.services.elementwise_service import ElementwiseService, power_norm


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.SDD.value,
        help=Subcommand.SDD.label,
        description="Sparsify a symmetric theta-SDD matrix through A = CC^T + diag(A) - R.",
    )
    add_common_arguments(parser, epsilon=0.4)
    parser.add_argument("--matrix", type=Path, required=True, help="dense or Matrix Market file")
    parser.add_argument(
        "--mode",
        choices=[mode.value for mode in SddMode],
        default=SddMode.DETERMINISTIC.value,
        help=", ".join(f"{value}: {label}" for value, label in SddMode.options()),
    )
    parser.add_argument(
        "--norm", type=float, default=None, help="estimate of ||A|| for --mode rand (power iteration if unset)"
    )
    parser.add_argument("--matrix-out", type=Path, default=None, help="write A~ as Matrix Market")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> RunReport:
    """
    Randomized, deterministic or barrier-only SDD sparsification
    """
    a = read_matrix(args.matrix)
    service = ElementwiseService(threads=args.threads)
    certify = certify_enabled(args)
    mode = SddMode(args.mode)
    norm_source = None

    if mode == SddMode.RANDOMIZED:
        norm = args.norm
        norm_source = "argument"
        if norm is None:
            # power iteration underestimates; ||A||_inf caps the symmetric norm from above
            estimate = power_norm(a, service.settings.POWER_ITERATIONS, args.seed)
            norm = min(1.01 * estimate, float(np.max(np.abs(a).sum(axis=1))))
            norm_source = "power_iteration"
        result = service.sdd_sparsify_randomized(a, norm, args.epsilon, args.seed, certify=certify)
    elif mode == SddMode.DETERMINISTIC:
        result = service.sdd_sparsify_deterministic(a, args.epsilon, certify=certify)
    else:
        result = service.sdd_sparsify_bss(a, args.epsilon, certify=certify)

    if args.matrix_out is not None:
        write_matrix_market(args.matrix_out, result.rows, result.cols, result.values, result.n)

    outputs = sparsified_outputs(result)
    outputs["mode"] = mode.value
    if mode == SddMode.RANDOMIZED:
        outputs["seed"] = args.seed
        outputs["norm_source"] = norm_source
    certification = sparsified_certification(result, args.epsilon) if certify else []
    return RunReport(
        subcommand=Subcommand.SDD,
        inputs=echo_inputs(args),
        outputs=outputs,
        certification=certification,
    )
