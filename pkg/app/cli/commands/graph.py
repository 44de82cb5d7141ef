import argparse
from pathlib import Path

import numpy as np

from app.cli.commands.spectral import spectral_certification, spectral_outputs
from app.cli.options import add_common_arguments, certify_enabled, echo_inputs
from app.core.utils import format_edge_list, read_edge_list
from app.models.enums import Subcommand
from app.schemas.report import Certification, RunReport
from app.services.spectral_service import CUT_ENUMERATION_MAX_N, SpectralService


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.GRAPH.value,
        help=Subcommand.GRAPH.label,
        description="Reweighted sparse subgraph whose Laplacian sandwiches the input Laplacian.",
    )
    add_common_arguments(parser)
    parser.add_argument("--edges", type=Path, required=True, help='"n m" then m lines "i j w"')
    parser.add_argument("--edges-out", type=Path, default=None, help="write the sparsified edge list")
    parser.add_argument(
        "--check-cuts",
        action="store_true",
        help=f"compare every cut by enumeration (n <= {CUT_ENUMERATION_MAX_N})",
    )
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> RunReport:
    """
    Sparsify a weighted graph through its Laplacian
    """
    n, edges = read_edge_list(args.edges)
    service = SpectralService(threads=args.threads)
    ops = service.laplacian_from_graph(edges, n)
    result = service.spectral_sparsify(ops, args.epsilon, certify=certify_enabled(args))

    sparse = service.sparsified_edges(edges, result.weights)
    outputs = spectral_outputs(result)
    outputs["edges_kept"] = len(sparse)
    if args.edges_out is not None:
        args.edges_out.write_text(format_edge_list(n, sparse))

    certification = spectral_certification(result) if certify_enabled(args) else []
    if args.check_cuts:
        original = service.cut_values(np.ones(len(edges)), edges, n)
        reduced = service.cut_values(result.weights.s, edges, n)
        crossing = original > 0
        ratios = reduced[crossing] / original[crossing]
        outputs["cut_ratio_min"] = float(ratios.min())
        outputs["cut_ratio_max"] = float(ratios.max())
        epsilon = args.epsilon
        certification += [
            Certification.against("cut_ratio_min_shortfall", (1 - epsilon) ** 3 - float(ratios.min()), 0.0),
            Certification.against("cut_ratio_max", float(ratios.max()), (1 + epsilon) ** 3),
        ]
    return RunReport(
        subcommand=Subcommand.GRAPH,
        inputs=echo_inputs(args),
        outputs=outputs,
        certification=certification,
    )
