import argparse
import math
from pathlib import Path

from app.cli.options import add_common_arguments, certify_enabled, echo_inputs
from app.core.utils import read_matrix_list
from app.models.enums import Subcommand
from app.schemas.report import Certification, RunReport
from app.services.hypercosine_service import HypercosineService


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.BALANCE.value,
        help=Subcommand.BALANCE.label,
        description="Signs s_i with |sum s_i M_i| <= 2 sqrt(N ln 2d) for N symmetric d x d "
        "matrices of norm at most 1.",
    )
    add_common_arguments(parser)
    parser.add_argument("--matrices", type=Path, required=True, help='"N d" then N blocks of d rows')
    parser.add_argument("--azuma", action="store_true", help="use eps = sqrt(10 ln(4d) / N)")
    parser.add_argument(
        "--baseline-seeds", type=int, default=0, help="random sign baselines from --seed onwards"
    )
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> RunReport:
    """
    Play the balancing game and optionally compare with random signs
    """
    matrices = read_matrix_list(args.matrices)
    service = HypercosineService(threads=args.threads)
    result = service.balance_matrices(matrices, azuma=args.azuma, certify=certify_enabled(args))

    outputs = {
        "signs": result.signs,
        "value": result.value,
        "bound": result.bound,
        "epsilon": result.selection.epsilon,
        "t": result.selection.t,
    }
    if args.baseline_seeds > 0:
        count = len(matrices)
        baseline = [
            service.balance_value(matrices, service.random_signs_baseline(matrices, seed))
            for seed in range(args.seed, args.seed + args.baseline_seeds)
        ]
        outputs["baseline_values"] = baseline
        outputs["baseline_bound"] = 4 * math.sqrt(count * math.log(max(count, 2)))

    certification = []
    if certify_enabled(args):
        certification.append(Certification.against("value", result.value, result.bound))
    return RunReport(
        subcommand=Subcommand.BALANCE,
        inputs=echo_inputs(args),
        outputs=outputs,
        certification=certification,
    )
