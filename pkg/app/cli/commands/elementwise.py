import argparse
from pathlib import Path

from app.cli.options import add_common_arguments, certify_enabled, echo_inputs
from app.core.utils import read_matrix, write_matrix_market
from app.models.enums import Subcommand
from app.models.sdd import SparsifiedMatrix
from app.schemas.report import Certification, RunReport
from app.services.elementwise_service import ElementwiseService, stable_rank


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.ELEMENTWISE.value,
        help=Subcommand.ELEMENTWISE.label,
        description="Sparse A~ with |A - A~| <= eps |A| by derandomized entry sampling.",
    )
    add_common_arguments(parser)
    parser.add_argument("--matrix", type=Path, required=True, help="dense or Matrix Market file")
    parser.add_argument("--matrix-out", type=Path, default=None, help="write A~ as Matrix Market")
    parser.set_defaults(handler=handle)


def sparsified_outputs(result: SparsifiedMatrix) -> dict:
    return {
        "nnz": result.nnz,
        "budget": result.budget,
        "error": result.error,
        "relative_error": result.relative_error,
        "theta": result.theta,
        "scale": result.scale,
        "t": result.t,
        "symmetric": result.symmetric,
        "entries": [[i + 1, j + 1, v] for i, j, v in result.entries()],
    }


def sparsified_certification(result: SparsifiedMatrix, epsilon: float) -> list[Certification]:
    return [
        Certification.against("relative_error", result.relative_error, epsilon),
        Certification.against("nnz", result.nnz, result.budget),
    ]


def handle(args: argparse.Namespace) -> RunReport:
    """
    Generic element-wise sparsification of a square matrix
    """
    a = read_matrix(args.matrix)
    service = ElementwiseService(threads=args.threads)
    result = service.sparsify_generic(a, args.epsilon, certify=certify_enabled(args))
    if args.matrix_out is not None:
        write_matrix_market(args.matrix_out, result.rows, result.cols, result.values, result.n)

    outputs = sparsified_outputs(result)
    outputs["stable_rank"] = stable_rank(a)
    certification = sparsified_certification(result, args.epsilon) if certify_enabled(args) else []
    return RunReport(
        subcommand=Subcommand.ELEMENTWISE,
        inputs=echo_inputs(args),
        outputs=outputs,
        certification=certification,
    )
