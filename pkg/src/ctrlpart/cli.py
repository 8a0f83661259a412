"""Command-line entry point wiring all modules together.

Subcommands: gen, graph, fsu, partition, metrics, sweep, simulate,
export-dot. Commands read their main input from --system/--fsus paths
or stdin ("-"), and write JSON to --out or stdout, so they compose in
pipelines. Domain errors exit with status 1 (as a JSON object on
stderr under --format json), usage errors with status 2; `partition
exact` exits 3 when the result is anytime rather than proven optimal.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import exact, fsu, generators, graphs, greedy, metrics, mpc, systems
from .errors import CtrlPartError

log = logging.getLogger("ctrlpart")


def _read_json(path: str):
    if path in (None, "-"):
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _write_json(obj, path: str):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_text(text: str, path: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_system(args):
    return systems.system_from_json(_read_json(getattr(args, "system", None)))


def _load_collection(args):
    """Unit collection from --fsus if given, else by selection on --system."""
    if getattr(args, "fsus", None):
        return fsu.collection_from_json(_read_json(args.fsus))
    model = _load_system(args)
    if isinstance(model, systems.PwaSystem):
        graph = graphs.build_pwa_graph(model, 1)
    else:
        graph = graphs.build_linear_graph(model)
    return fsu.select_fsus(graph)


def _cfg(args):
    if getattr(args, "kappa", None) is not None:
        return metrics.IndexConfig(kappa=args.kappa)
    return metrics.IndexConfig(alpha=args.alpha)


def _cmd_gen(args):
    if args.family == "modular":
        model = generators.gen_modular(
            generators.ModularSpec(
                levels=args.levels,
                base_size=args.base_size,
                strong_w=args.strong,
                weak_w=args.weak,
            )
        )
    elif args.family == "random":
        model = generators.gen_random_fsu(
            generators.RandomFsuSpec(
                n_fsus=args.n_fsus,
                edge_density=args.density,
                weight_lo=args.weight_lo,
                weight_hi=args.weight_hi,
                seed=args.seed,
                pwa=args.pwa,
            )
        )
    else:
        model = generators.gen_generic(
            generators.GenericSpec(
                n=args.n, p=args.p, density=args.density, seed=args.seed, planted=args.planted
            )
        )
    _write_json(systems.system_to_json(model), args.out)
    return 0


def _cmd_graph(args):
    model = _load_system(args)
    if isinstance(model, systems.PwaSystem):
        g = graphs.build_pwa_graph(model, args.mode)
    else:
        g = graphs.build_linear_graph(model)
    _write_json(graphs.graph_to_json(g), args.out)
    return 0


def _cmd_fsu(args):
    coll = _load_collection(args)
    if args.dot:
        g = coll.graph
        groups = {f.id: sorted(f.nodes) for f in coll.fsus}
        _write_text(graphs.graph_to_dot(g, groups=groups, title="fsus"), args.dot)
    _write_json(fsu.collection_to_json(coll), args.out)
    return 0


def _cmd_partition(args):
    coll = _load_collection(args)
    cfg = _cfg(args)
    trace: list = [] if args.trace else None
    status = 0
    if args.engine == "greedy":
        part = greedy.greedy_partition(coll, cfg, objective=args.ratio_weights, trace=trace)
    elif args.engine == "refined":
        part = greedy.greedy_refined(coll, cfg, objective=args.ratio_weights, trace=trace)
    else:  # exact
        if args.exact_engine == "brute":
            part, _ = exact.brute_force_partition(coll, cfg, objective=args.objective)
        else:
            res = exact.branch_and_bound(
                coll,
                cfg,
                time_limit=args.time_limit,
                gap_tol=args.gap,
                objective=args.objective,
            )
            part = res.partition
            if not res.proven:
                log.warning("anytime result, relative gap %.4f", res.gap)
                status = 3
    if args.trace and trace is not None:
        with open(args.trace, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["iteration", "fsu", "block", "gain", "index"])
            writer.writeheader()
            writer.writerows(trace)
    _write_json(metrics.partition_to_json(part), args.out)
    return status


def _cmd_metrics(args):
    coll = _load_collection(args)
    part = metrics.partition_from_json(_read_json(args.partition), coll)
    cfg = _cfg(args)
    delta = metrics.delta_from_partition(part)
    rows = [
        ("w_intra", metrics.w_intra(part)),
        ("w_inter", metrics.w_inter(part)),
        ("w_size", metrics.w_size(part)),
        ("index_ratio", metrics.index_ratio(part, cfg)),
        ("index_quadratic", metrics.index_quadratic(delta, coll, cfg)),
    ]
    if args.format == "json":
        _write_json(dict(rows), args.out)
    else:
        text = "metric,value\n" + "".join(f"{k},{v:.12g}\n" for k, v in rows)
        _write_text(text, args.out)
    return 0


def _cmd_sweep(args):
    coll = _load_collection(args)
    kappas = [float(v) for v in args.kappas.split(",")]
    results = exact.alpha_sweep(
        coll, kappas, engine=args.engine, objective=args.objective, time_limit=args.time_limit
    )
    out = [
        {"alpha": alpha, "n_blocks": part.n_blocks, "blocks": [sorted(b) for b in part.blocks]}
        for alpha, part in results
    ]
    _write_json({"distinct_partitions": out}, args.out)
    return 0


def _cmd_simulate(args):
    model = _load_system(args)
    coll = _load_collection(args)
    part = metrics.partition_from_json(_read_json(args.partition), coll)
    scen = mpc.scenario_from_json(_read_json(args.scenario)) if args.scenario else mpc.Scenario()
    run = mpc.simulate(model, part, scen, coll)
    header = "step,stage_cost,cum_cost,admm_iters,max_core_time,core_seconds_cum\n"
    lines = [header]
    cum_cost = 0.0
    cum_cs = 0.0
    for k, cost in enumerate(run.step_costs):
        cum_cost += cost
        cum_cs += run.core_seconds_steps[k]
        lines.append(
            f"{k},{cost:.9g},{cum_cost:.9g},{run.admm_iterations[k]},"
            f"{run.max_core_times[k]:.9g},{cum_cs:.9g}\n"
        )
    _write_text("".join(lines), args.out)
    if args.traces:
        tdir = Path(args.traces)
        tdir.mkdir(parents=True, exist_ok=True)
        with open(tdir / "core_times.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "iteration", "core", "seconds"])
            for k, its in enumerate(run.iteration_core_times):
                for it, times in enumerate(its):
                    for core, sec in enumerate(times):
                        writer.writerow([k, it, core, f"{sec:.9g}"])
        with open(tdir / "residuals.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "iteration", "residual"])
            for k, res in enumerate(run.residuals):
                for it, r in enumerate(res):
                    writer.writerow([k, it, f"{r:.9g}"])
        with open(tdir / "trajectory.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "states", "inputs"])
            for k in range(len(run.states)):
                writer.writerow(
                    [k, " ".join(f"{v:.9g}" for v in run.states[k]), " ".join(f"{v:.9g}" for v in run.inputs[k])]
                )
    return 0


def _cmd_export_dot(args):
    model = _load_system(args)
    if isinstance(model, systems.PwaSystem):
        g = graphs.build_pwa_graph(model, args.mode)
    else:
        g = graphs.build_linear_graph(model)
    groups = None
    if args.fsus:
        coll = fsu.collection_from_json(_read_json(args.fsus))
        groups = {f.id: sorted(f.nodes) for f in coll.fsus}
        if args.partition:
            part = metrics.partition_from_json(_read_json(args.partition), coll)
            groups = {b: sorted(part.block_nodes(b)) for b in range(part.n_blocks)}
    _write_text(graphs.graph_to_dot(g, groups=groups), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="ctrlpart", description=__doc__)
    top.add_argument("--log-level", default="warning")
    top.add_argument("--format", choices=["json", "csv"], default="json")
    sub = top.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate benchmark systems")
    gsub = gen.add_subparsers(dest="family", required=True)
    g_mod = gsub.add_parser("modular")
    g_mod.add_argument("--levels", type=int, required=True)
    g_mod.add_argument("--base-size", dest="base_size", type=int, default=4)
    g_mod.add_argument("--strong", type=float, default=0.1)
    g_mod.add_argument("--weak", type=float, default=0.01)
    g_rand = gsub.add_parser("random")
    g_rand.add_argument("--n-fsus", dest="n_fsus", type=int, required=True)
    g_rand.add_argument("--density", type=float, default=0.2)
    g_rand.add_argument("--weight-lo", dest="weight_lo", type=float, default=0.01)
    g_rand.add_argument("--weight-hi", dest="weight_hi", type=float, default=0.1)
    g_rand.add_argument("--seed", type=int, default=0)
    g_rand.add_argument("--pwa", action="store_true")
    g_gen = gsub.add_parser("generic")
    g_gen.add_argument("--n", type=int, required=True)
    g_gen.add_argument("--p", type=int, required=True)
    g_gen.add_argument("--density", type=float, default=0.05)
    g_gen.add_argument("--seed", type=int, default=0)
    g_gen.add_argument("--planted", action="store_true")
    for g in (g_mod, g_rand, g_gen):
        g.add_argument("--out", default="-")

    graph_p = sub.add_parser("graph", help="equivalent graph as JSON")
    graph_p.add_argument("--system", default="-")
    graph_p.add_argument("--mode", type=int, default=1, help="PWA mode (1-based)")
    graph_p.add_argument("--out", default="-")

    fsu_p = sub.add_parser("fsu", help="select fundamental units")
    fsu_p.add_argument("--system", default="-")
    fsu_p.add_argument("--out", default="-")
    fsu_p.add_argument("--dot", default=None, help="also write a grouped DOT file")

    part_p = sub.add_parser("partition", help="aggregate units into blocks")
    part_p.add_argument("engine", choices=["greedy", "refined", "exact"])
    part_p.add_argument("--system", default=None)
    part_p.add_argument("--fsus", default=None)
    part_p.add_argument("--alpha", type=float, default=None)
    part_p.add_argument("--kappa", type=float, default=None)
    part_p.add_argument(
        "--ratio-weights",
        dest="ratio_weights",
        choices=[metrics.RATIO_COUPLING, metrics.RATIO_FULL],
        default=metrics.RATIO_COUPLING,
        help="ratio-index weighting used by greedy/refined",
    )
    part_p.add_argument("--objective", choices=[metrics.QUADRATIC, metrics.RATIO_COUPLING, metrics.RATIO_FULL], default=metrics.QUADRATIC)
    part_p.add_argument("--engine", dest="exact_engine", choices=["brute", "bnb"], default="bnb")
    part_p.add_argument("--time-limit", dest="time_limit", type=float, default=None)
    part_p.add_argument("--gap", type=float, default=0.0)
    part_p.add_argument("--trace", default=None)
    part_p.add_argument("--out", default="-")

    met_p = sub.add_parser("metrics", help="score a partition")
    met_p.add_argument("--system", default=None)
    met_p.add_argument("--fsus", default=None)
    met_p.add_argument("--partition", required=True)
    met_p.add_argument("--alpha", type=float, default=None)
    met_p.add_argument("--kappa", type=float, default=None)
    met_p.add_argument("--out", default="-")

    sweep_p = sub.add_parser("sweep", help="granularity sweep over kappa values")
    sweep_p.add_argument("--system", default=None)
    sweep_p.add_argument("--fsus", default=None)
    sweep_p.add_argument("--kappas", required=True, help="comma-separated kappa list")
    sweep_p.add_argument("--engine", choices=["bnb", "brute", "greedy"], default="bnb")
    sweep_p.add_argument("--objective", choices=[metrics.QUADRATIC, metrics.RATIO_COUPLING, metrics.RATIO_FULL], default=metrics.QUADRATIC)
    sweep_p.add_argument("--time-limit", dest="time_limit", type=float, default=None)
    sweep_p.add_argument("--out", default="-")

    sim_p = sub.add_parser("simulate", help="closed-loop MPC run of a partition")
    sim_p.add_argument("--system", required=True)
    sim_p.add_argument("--fsus", default=None)
    sim_p.add_argument("--partition", required=True)
    sim_p.add_argument("--scenario", default=None)
    sim_p.add_argument("--out", default="-")
    sim_p.add_argument("--traces", default=None)

    dot_p = sub.add_parser("export-dot", help="render a system graph as DOT")
    dot_p.add_argument("--system", default="-")
    dot_p.add_argument("--mode", type=int, default=1)
    dot_p.add_argument("--fsus", default=None)
    dot_p.add_argument("--partition", default=None)
    dot_p.add_argument("--out", default="-")

    return top


_HANDLERS = {
    "gen": _cmd_gen,
    "graph": _cmd_graph,
    "fsu": _cmd_fsu,
    "partition": _cmd_partition,
    "metrics": _cmd_metrics,
    "sweep": _cmd_sweep,
    "simulate": _cmd_simulate,
    "export-dot": _cmd_export_dot,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING))
    try:
        return _HANDLERS[args.command](args)
    except CtrlPartError as exc:
        if args.format == "json":
            sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        else:
            sys.stderr.write(f"error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
