import argparse
from pathlib import Path

from app.cli.options import add_common_arguments, certify_enabled, echo_inputs
from app.core.utils import read_matrix
from app.models.enums import Subcommand
from app.models.outer import OuterProductSum
from app.schemas.report import Certification, RunReport
from app.services.spectral_service import SpectralResult, SpectralService


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.SPECTRAL.value,
        help=Subcommand.SPECTRAL.label,
        description="Weights s with (1-eps)^3 A <= sum s_i v_i v_i^T <= (1+eps)^3 A.",
    )
    add_common_arguments(parser)
    parser.add_argument("--vectors", type=Path, required=True, help="m x n matrix, one vector per row")
    parser.set_defaults(handler=handle)


def spectral_outputs(result: SpectralResult) -> dict:
    support = result.weights.support
    return {
        "support": support + 1,
        "weights": result.weights.s[support],
        "support_size": result.weights.support_size,
        "rank": result.rank,
        "budget": result.budget,
        "isotropic_t": result.isotropic_t,
        "relative_min": result.low,
        "relative_max": result.high,
    }


def spectral_certification(result: SpectralResult) -> list[Certification]:
    epsilon = result.epsilon
    return [
        Certification.against("relative_min_shortfall", (1 - epsilon) ** 3 - result.low, 0.0),
        Certification.against("relative_max", result.high, (1 + epsilon) ** 3),
        Certification.against("support", result.weights.support_size, result.budget),
    ]


def handle(args: argparse.Namespace) -> RunReport:
    """
    Spectrally sparsify a sum of outer products
    """
    ops = OuterProductSum.from_vectors(read_matrix(args.vectors))
    service = SpectralService(threads=args.threads)
    result = service.spectral_sparsify(ops, args.epsilon, certify=certify_enabled(args))
    certification = spectral_certification(result) if certify_enabled(args) else []
    return RunReport(
        subcommand=Subcommand.SPECTRAL,
        inputs=echo_inputs(args),
        outputs=spectral_outputs(result),
        certification=certification,
    )
