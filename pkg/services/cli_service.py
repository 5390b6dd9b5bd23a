"""Module that contains the command-line interface."""

import argparse
import asyncio
import itertools
import json
import math
from datetime import datetime
from pathlib import Path

import numpy as np

from bounds.bounds import (
    ConfidenceKind,
    dudley_bound,
    equivariant_bound,
    invariant_bound,
    nontransitive_equivariant_bound,
    theory_curves,
    volume_table,
)
from common.constants import curve_m_range, curve_points
from common.exceptions import InvalidParameterError
from common.settings import Settings
from covering.covering import (
    CubeDomain,
    analytic_covering_bound,
    boundary_cube_count,
    cube_count,
    invariant_class_log_covering,
    mc_fundamental_volume,
)
from database.database_manager import DatabaseManager, sqlite_url
from experiment.experiment import (
    ExperimentConfig,
    GapRecord,
    build_report,
    run_experiment_async,
    summarize,
)
from logger.logger import logger
from permgroup.permgroup import GroupKind, PermGroup, named_group
from qfs.qfs import canonical_rep, orbit, quotient_distance, sn_domain_cosets
from relunet.relunet import evaluate, sort_network
from services.export_service import (
    emit_loss_histories,
    emit_plot_data,
    write_csv,
    write_json,
)
from util.util import random_rows_with_ties

group_aliases = {
    "sn": GroupKind.SYMMETRIC,
    "cn": GroupKind.CYCLIC,
    "trivial": GroupKind.TRIVIAL,
}


def parse_group(group_name: str, n: int | None, cap: int) -> PermGroup:
    """
    ``sn``, ``cn`` or ``trivial`` with --n, or ``gens@file.json`` holding
    {"degree": n, "generators": [[...], ...]} in 1-based one-line notation.
    """
    if group_name.startswith("gens@"):
        with open(group_name[len("gens@") :], encoding="utf-8") as file:
            return PermGroup.from_dict(json.load(file), cap=cap)
    if group_name not in group_aliases:
        raise InvalidParameterError(
            f"Unknown group {group_name!r}; use sn, cn, trivial or gens@file."
        )
    if n is None:
        raise InvalidParameterError(f"Group {group_name!r} needs --n.")
    return named_group(group_aliases[group_name], n, cap=cap)


def parse_vector(text: str) -> np.ndarray:
    """Comma-separated floats."""
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as e:
        raise InvalidParameterError(f"Cannot parse vector {text!r}.") from e


def print_json(data):
    """Writes JSON to stdout."""
    print(json.dumps(data, indent=2))


def build_parser() -> argparse.ArgumentParser:
    """
    Builds the argument parser with all subcommands.
    """
    parser = argparse.ArgumentParser(
        prog="qfslab",
        description=(
            "Quotient feature spaces, covering numbers and generalization bounds."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    bounds = commands.add_parser("bounds", help="Evaluate generalization bounds.")
    bounds.add_argument("--n", type=int, required=True)
    bounds.add_argument("--group-order", type=int, help="|G|, default n!")
    bounds.add_argument("--m", type=float, default=9843)
    bounds.add_argument("--eps", type=float, default=0.05)
    bounds.add_argument("--C", type=float, default=1.0)
    bounds.add_argument("--equivariant", action="store_true")
    bounds.add_argument("--stab", type=int, help="|St(G)|, default (n-1)!")
    bounds.add_argument("--orbits", help="Comma-separated stabilizer orders per orbit.")
    bounds.add_argument(
        "--confidence", choices=[str(c) for c in ConfidenceKind], default="half_eps"
    )
    bounds.add_argument("--curves", type=float, nargs=2, metavar=("M_MIN", "M_MAX"))
    bounds.add_argument("--curve-n", help="Comma-separated n values for --curves.")
    bounds.add_argument(
        "--dudley", action="store_true", help="Also evaluate the entropy integral."
    )
    bounds.add_argument(
        "--volume-table", help="Comma-separated group names, e.g. sn,cn,trivial."
    )
    bounds.add_argument("--out", help="CSV path for --curves or --volume-table.")

    covering = commands.add_parser("covering", help="Covering numbers and volumes.")
    covering.add_argument(
        "--mode", choices=["lattice", "mc", "analytic", "boundary"], required=True
    )
    covering.add_argument("--group", default="sn")
    covering.add_argument("--n", type=int)
    covering.add_argument("--q", type=int, default=8)
    covering.add_argument("--samples", type=int, default=1_000_000)
    covering.add_argument("--seed", type=int, default=1)
    covering.add_argument("--eps", type=float, default=0.1)
    covering.add_argument("--C", type=float, default=1.0)
    covering.add_argument(
        "--domain", choices=[str(d) for d in CubeDomain], default="tilde_delta_G"
    )

    qfs = commands.add_parser("qfs", help="Quotient geometry of a point.")
    qfs.add_argument("action", choices=["dist", "canon", "orbit"])
    qfs.add_argument("--group", default="sn")
    qfs.add_argument("--x", required=True)
    qfs.add_argument("--y", help="Second point for dist.")

    sortnet = commands.add_parser(
        "sortnet", help="Build and check the ReLU sort network."
    )
    sortnet.add_argument("--n", type=int, required=True)
    sortnet.add_argument("--check", choices=["exhaustive", "random"])
    sortnet.add_argument("--samples", type=int, default=10_000)
    sortnet.add_argument("--seed", type=int, default=1)
    sortnet.add_argument("--emit", help="Write the network JSON to this path.")

    experiment = commands.add_parser(
        "experiment", help="Generalization-gap experiment."
    )
    experiment_commands = experiment.add_subparsers(dest="action", required=True)
    run = experiment_commands.add_parser("run")
    run.add_argument("--config", help="JSON file mirroring ExperimentConfig.")
    run.add_argument("--out", required=True)
    plotdata = experiment_commands.add_parser("plotdata")
    plotdata.add_argument("--out", required=True)
    plotdata.add_argument("--run-id", type=int)

    return parser


def run_bounds(args, settings: Settings):
    """Handles the bounds subcommand."""
    if args.volume_table:
        groups = [
            parse_group(group_name, args.n, settings.group_cap)
            for group_name in args.volume_table.split(",")
        ]
        table = volume_table(groups)
        if args.out:
            write_csv(table, Path(args.out))
        else:
            print(table.to_csv(index=False, lineterminator="\n"), end="")
        return

    if args.curves:
        n_list = [int(v) for v in args.curve_n.split(",")] if args.curve_n else [args.n]
        table = theory_curves(
            n_list,
            (args.curves[0], args.curves[1]),
            C=args.C,
            epsilon=args.eps,
            points=curve_points,
            equivariant=args.equivariant,
            confidence=args.confidence,
        )
        if args.out:
            write_csv(table, Path(args.out))
        else:
            print(table.to_csv(index=False, lineterminator="\n"), end="")
        return

    if args.orbits:
        stabs = [int(v) for v in args.orbits.split(",")]
        report = nontransitive_equivariant_bound(
            args.n, stabs, args.m, args.eps, args.C, confidence=args.confidence
        )
    elif args.equivariant:
        stab = args.stab or math.factorial(args.n - 1)
        report = equivariant_bound(
            args.n, stab, args.m, args.eps, args.C, confidence=args.confidence
        )
    else:
        order = args.group_order or math.factorial(args.n)
        report = invariant_bound(
            args.n, order, args.m, args.eps, args.C, confidence=args.confidence
        )

    data = report.to_dict()
    if args.dudley:
        order = args.group_order or math.factorial(args.n)
        data["dudley"] = dudley_bound(
            invariant_class_log_covering(args.n, order, C=args.C),
            args.m,
            args.eps,
            confidence=args.confidence,
        )
    print_json(data)


def run_covering(args, settings: Settings):
    """Handles the covering subcommand."""
    match args.mode:
        case "boundary":
            print_json(boundary_cube_count(args.n, args.q).to_dict())
        case "analytic":
            G = parse_group(args.group, args.n, settings.group_cap)
            value = analytic_covering_bound(
                G.degree, G.order, args.eps, args.C, log10=True
            )
            print_json(
                {"value_log10": value, "method": "analytic", "parameter": args.eps}
            )
        case "mc":
            G = parse_group(args.group, args.n, settings.group_cap)
            estimate = mc_fundamental_volume(
                G, args.samples, args.seed, settings.threads
            )
            print_json(estimate.to_dict())
        case _:
            G = parse_group(args.group, args.n, settings.group_cap)
            cosets = None
            if args.domain == CubeDomain.TILDE_DELTA_G:
                cosets = sn_domain_cosets(G)
            estimate = cube_count(
                args.domain, G.degree, args.q, cosets=cosets, threads=settings.threads
            )
            print_json(estimate.to_dict())


def run_qfs(args, settings: Settings):
    """Handles the qfs subcommand."""
    x = parse_vector(args.x)
    G = parse_group(args.group, len(x), settings.group_cap)
    match args.action:
        case "dist":
            if args.y is None:
                raise InvalidParameterError("dist needs --y.")
            print_json({"distance": quotient_distance(G, x, parse_vector(args.y))})
        case "canon":
            rep = canonical_rep(G, x)
            print_json(
                {
                    "canonical": rep.canonical.tolist(),
                    "stabilized_by": rep.stabilized_by,
                }
            )
        case _:
            print_json({"orbit": orbit(G, x).tolist()})


def run_sortnet(args, _settings: Settings):
    """Handles the sortnet subcommand."""
    net = sort_network(args.n)
    data = {
        "n": args.n,
        "depth": net.depth,
        "nonzero_parameters": net.nonzero_parameters,
    }

    if args.check:
        if args.check == "exhaustive":
            values = range(1, args.n + 1)
            inputs = np.array(list(itertools.permutations(values)), dtype=float)
        else:
            inputs = random_rows_with_ties(args.n, args.samples, args.seed)
        outputs = evaluate(net, inputs)
        expected = -np.sort(-inputs, axis=1)
        data["checked"] = int(inputs.shape[0])
        data["mismatches"] = int(np.any(outputs != expected, axis=1).sum())

    if args.emit:
        write_json(net.to_dict(), Path(args.emit))
    print_json(data)


async def run_and_store(config: ExperimentConfig, out: Path, settings: Settings):
    """
    Runs the experiment, stores it and writes the plot data.
    """
    started = datetime.now()
    result = await run_experiment_async(config, workers=settings.threads)

    database_manager = DatabaseManager(url=sqlite_url(settings.database_path))
    await database_manager.create_models()
    run_id = await database_manager.save_run(
        config.to_dict(), [r.to_dict() for r in result.records], started
    )
    await database_manager.cleanup()
    logger.info("Run %s stored in %s.", run_id, settings.database_path)

    report = build_report(result.records, result.summary)
    curves = theory_curves(config.n_list, curve_m_range)
    emit_plot_data(result.records, result.summary, curves, out, report.to_dict())
    emit_loss_histories(result.histories, out)


async def load_and_emit(run_id: int | None, out: Path, settings: Settings):
    """
    Emits the plot data of a stored run without retraining.
    """
    database_manager = DatabaseManager(url=sqlite_url(settings.database_path))
    await database_manager.create_models()
    if run_id is None:
        run_id = await database_manager.get_latest_run_id()
    if run_id is None:
        await database_manager.cleanup()
        raise InvalidParameterError(f"No stored runs in {settings.database_path}.")
    config_data = await database_manager.get_run_config(run_id)
    rows = await database_manager.get_records(run_id)
    await database_manager.cleanup()
    if config_data is None or not rows:
        raise InvalidParameterError(f"Run {run_id} not found.")

    config = ExperimentConfig.from_dict(config_data)
    records = [GapRecord(**row) for row in rows]
    summary = summarize(records, config.m_train)
    report = build_report(records, summary)
    curves = theory_curves(config.n_list, curve_m_range)
    emit_plot_data(records, summary, curves, out, report.to_dict())


def run_experiment_command(args, settings: Settings):
    """Handles the experiment subcommand."""
    out = Path(args.out)
    if args.action == "run":
        config = (
            ExperimentConfig.from_file(args.config)
            if args.config
            else ExperimentConfig()
        )
        asyncio.run(run_and_store(config, out, settings))
    else:
        asyncio.run(load_and_emit(args.run_id, out, settings))


handlers = {
    "bounds": run_bounds,
    "covering": run_covering,
    "qfs": run_qfs,
    "sortnet": run_sortnet,
    "experiment": run_experiment_command,
}


def run_cli(argv: list[str] | None, settings: Settings) -> int:
    """
    Parses argv and dispatches to the matching handler.
    :return: exit status
    """
    args = build_parser().parse_args(argv)
    handlers[args.command](args, settings)
    return 0

