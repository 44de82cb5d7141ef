import argparse
from pathlib import Path

from app.cli.options import add_common_arguments, echo_inputs
from app.core.config import settings
from app.core.utils import read_group_table, read_matrix, read_matrix_list
from app.models.enums import GroupKind, Subcommand
from app.models.family import BalancingFamily, SampleFamily
from app.models.group import CayleyFamily, generate_table
from app.models.rows import IsotropicFamily, RowFamily
from app.schemas.report import Certification, RunReport
from app.services.elementwise_service import ElementwiseService
from app.services.hypercosine_service import FamilyReport, HypercosineService
from app.services.verify_service import VerifyService


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.VERIFY.value,
        help=Subcommand.VERIFY.label,
        description="Randomized identity suites plus the norm, mean and variance conditions "
        "of the sample families built from the given inputs.",
    )
    add_common_arguments(parser)
    parser.add_argument("--trials", type=int, default=100, help="random trials per identity")
    parser.add_argument("--matrices", type=Path, default=None, help="balancing family input")
    parser.add_argument("--table", type=Path, default=None, help="Cayley family group table")
    parser.add_argument("--group", choices=[kind.value for kind in GroupKind], default=None)
    parser.add_argument("--order", type=int, default=None)
    parser.add_argument("--rows", type=Path, default=None, help="isotropic family rows")
    parser.add_argument("--matrix", type=Path, default=None, help="entry dilation family matrix")
    parser.set_defaults(handler=handle)


def _families(args: argparse.Namespace) -> list[tuple[str, SampleFamily]]:
    families: list[tuple[str, SampleFamily]] = []
    if args.matrices is not None:
        families.append(("balancing", BalancingFamily(read_matrix_list(args.matrices))))
    if args.table is not None:
        families.append(("cayley", CayleyFamily(read_group_table(args.table))))
    elif args.group is not None and args.order is not None:
        families.append(("cayley", CayleyFamily(generate_table(args.group, args.order))))
    if args.rows is not None:
        families.append(("isotropic", IsotropicFamily(RowFamily.from_rows(read_matrix(args.rows)))))
    if args.matrix is not None:
        family = ElementwiseService.dilation_family(read_matrix(args.matrix), args.epsilon)
        families.append(("entry_dilation", family))
    return families


def _family_summary(name: str, report: FamilyReport, moment: tuple[float, float]) -> dict:
    return {
        "family": name,
        "m": report.m,
        "n": report.n,
        "steps_checked": report.steps_checked,
        "gamma": report.gamma,
        "rho_sq": report.rho_sq,
        "max_norm": report.max_norm,
        "mean_residual": report.mean_residual,
        "variance_norm": report.variance_norm,
        "moment": moment[0],
        "moment_ceiling": moment[1],
    }


def handle(args: argparse.Namespace) -> RunReport:
    """
    Run the identity suites and check every requested family
    """
    checks = VerifyService(threads=args.threads).run_identities(args.trials, args.seed)
    certification = [Certification.against(c.name, c.max_violation, c.tolerance) for c in checks]
    outputs = {
        "identities": [
            {"name": c.name, "trials": c.trials, "max_violation": c.max_violation, "passed": c.passed}
            for c in checks
        ]
    }

    service = HypercosineService(threads=args.threads)
    summaries = []
    for name, family in _families(args):
        report = service.verify_family(family)
        moment = service.moment_bound(family, args.epsilon)
        summaries.append(_family_summary(name, report, moment))
        norm_slack = 1 + settings.FAMILY_NORM_SLACK
        certification += [
            Certification.against(f"{name}_max_norm", report.max_norm, report.gamma * norm_slack),
            Certification.against(
                f"{name}_mean_residual", report.mean_residual, settings.FAMILY_MEAN_TOL
            ),
            Certification.against(f"{name}_variance", report.variance_norm, report.rho_sq * norm_slack),
            Certification.against(
                f"{name}_moment", moment[0], moment[1] * (1 + settings.FAMILY_MEAN_TOL)
            ),
        ]
    if summaries:
        outputs["families"] = summaries
    return RunReport(
        subcommand=Subcommand.VERIFY,
        inputs=echo_inputs(args),
        outputs=outputs,
        certification=certification,
    )
