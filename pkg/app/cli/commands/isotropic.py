import argparse
from pathlib import Path

from app.cli.options import add_common_arguments, certify_enabled, echo_inputs
from app.core.utils import read_matrix
from app.models.enums import Subcommand
from app.models.rows import RowFamily
from app.schemas.report import Certification, RunReport
from app.services.isotropic_service import IsotropicService


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.ISOTROPIC.value,
        help=Subcommand.ISOTROPIC.label,
        description="Rows k_i and scalars c_i with |sum c_i a_i a_i^T - I| <= eps for isotropic rows.",
    )
    add_common_arguments(parser, steps=True)
    parser.add_argument("--rows", type=Path, required=True, help="m x n matrix with A^T A = I")
    parser.add_argument(
        "--audit-t", type=int, default=None, help="compare the first steps with the generic greedy"
    )
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> RunReport:
    """
    Sparsify a family of rows in isotropic position
    """
    family = RowFamily.from_rows(read_matrix(args.rows))
    service = IsotropicService(threads=args.threads)
    result = service.isotropic_sparsify(family, args.epsilon, t=args.t, certify=certify_enabled(args))

    outputs = {
        "indices": family.source_index[result.indices] + 1,
        "scalars": result.scalars,
        "residual": result.residual,
        "t": result.t,
        "budget": result.budget,
        "c": result.c,
    }
    certification = []
    if certify_enabled(args):
        certification.append(Certification.against("residual", result.residual, args.epsilon))
    if args.audit_t is not None:
        outputs["equivalence"] = service.equivalence_audit(family, args.epsilon, args.audit_t)
        mismatch = 0.0 if outputs["equivalence"] else 1.0
        certification.append(Certification.against("equivalence_mismatch", mismatch, 0.0))
    return RunReport(
        subcommand=Subcommand.ISOTROPIC,
        inputs=echo_inputs(args),
        outputs=outputs,
        certification=certification,
    )
