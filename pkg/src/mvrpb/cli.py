"""Command line entry point: ``mvrpb <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .balance import optimize_balance
from .cvrp import solve_all_periods
from .errors import MvrpbError
from .harness import emit_reports, run_horizon_study, run_pipeline
from .instances import (
    derive_driver_count,
    format_cvrp,
    generate_mvrpb,
    load_instance,
    load_plans,
    read_cvrp,
    save_instance,
    save_plans,
    synthetic_base,
)
from .model import Budget

log = logging.getLogger("mvrpb")


def _budget(args) -> Budget:
    return Budget(
        iterations=getattr(args, "iterations", 300),
        time_limit=getattr(args, "time_limit", None),
        max_clients=getattr(args, "max_clients", 12),
        nodes=getattr(args, "node_limit", None),
    )


def _add_solver_opts(p, seed=True):
    p.add_argument("--mode", choices=("heuristic", "exact"), default="heuristic")
    p.add_argument("--time-limit", type=float, default=None, help="hard stop per period solve, seconds")
    p.add_argument("--iterations", type=int, default=300, help="perturbation rounds per period (heuristic)")
    p.add_argument("--max-clients", type=int, default=12, help="size cap for --mode exact")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1, help="processes; results do not depend on it")


def _add_node_limit(p):
    p.add_argument("--node-limit", type=int, default=None,
                   help="search nodes per feasibility probe before giving up (default: unlimited)")


def cmd_synth_base(args):
    base = synthetic_base(args.clients, args.seed, capacity=args.capacity, max_demand=args.max_demand,
                          depot=args.depot)
    Path(args.out).write_text(format_cvrp(base))
    log.info("wrote %s (%d clients, Q=%d)", args.out, base.n_clients, base.capacity)


def cmd_generate(args):
    base = read_cvrp(args.base)
    inst = generate_mvrpb(base, args.periods, args.clients_per_period, args.seed)
    save_instance(inst, args.out)
    log.info("wrote %s (%d periods, %d clamped demands)", args.out, inst.horizon, inst.meta["clamped"])


def cmd_solve(args):
    inst = load_instance(args.instance)
    plans = solve_all_periods(inst, args.mode, _budget(args), args.seed, args.workers)
    save_plans(plans, args.out, inst.name)
    for t, p in enumerate(plans):
        log.info("period %d: %d routes, distance %d (%.2fs)", t, len(p.routes), p.total_distance, p.elapsed)


def cmd_balance(args):
    plans, name = load_plans(args.plans)
    m = args.drivers or derive_driver_count(plans)
    res = optimize_balance(plans, m, args.node_limit)
    out = {
        "format": "mvrpb-balance",
        "version": 1,
        "instance": name,
        "m": m,
        "lb": res.lb,
        "ub": res.ub,
        "opt": res.opt,
        "opt_lower": res.opt if res.opt_lower is None else res.opt_lower,
        "exact": res.exact,
        "iterations": res.iterations,
        "probes": [{"cap": p.cap, "verdict": p.status, "nodes": p.nodes} for p in res.probes],
        "loads": list(res.loads),
        "assignment": [list(a) for a in res.assignment],
    }
    Path(args.out).write_text(json.dumps(out, indent=1) + "\n")
    log.info("LB=%d UB=%d Opt=%d in %d probes (%.2fs)", res.lb, res.ub, res.opt, res.iterations,
             sum(res.phase_times.values()))


def cmd_pipeline(args):
    rec = run_pipeline(args.instance, args.mode, _budget(args), args.seed, args.drivers, args.workers)
    paths = emit_reports([rec], args.out_dir)
    sys.stdout.write(paths["summary.txt"].read_text())


def cmd_study(args):
    base = read_cvrp(args.base)
    horizons = [int(h) for h in args.horizons.split(",") if h.strip()]
    records = run_horizon_study(base, args.clients_per_period, horizons, args.replicates, args.seed,
                                args.mode, _budget(args), args.workers)
    paths = emit_reports(records, args.out_dir)
    sys.stdout.write(paths["summary.txt"].read_text())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvrpb", description="Multi-period VRP with driver workload balance.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-base", help="write a random CVRP base file")
    p.add_argument("--clients", type=int, default=60)
    p.add_argument("--capacity", type=int, default=250)
    p.add_argument("--max-demand", type=int, default=100)
    p.add_argument("--depot", choices=("center", "random"), default="center")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_base)

    p = sub.add_parser("generate", help="multi-period instance from a CVRP base file")
    p.add_argument("--base", required=True)
    p.add_argument("--periods", type=int, required=True)
    p.add_argument("--clients-per-period", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="phase 1: route every period")
    p.add_argument("--instance", required=True)
    _add_solver_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("balance", help="phase 2: allocate routes to drivers")
    p.add_argument("--plans", required=True)
    p.add_argument("--drivers", type=int, default=None, help="default: most routes in any period")
    _add_node_limit(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("pipeline", help="both phases on one instance, with reports")
    p.add_argument("--instance", required=True)
    p.add_argument("--drivers", type=int, default=None)
    _add_solver_opts(p)
    _add_node_limit(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("study", help="equity vs planning-horizon experiment")
    p.add_argument("--base", required=True)
    p.add_argument("--clients-per-period", type=int, required=True)
    p.add_argument("--horizons", default="2,3,5,7,10")
    p.add_argument("--replicates", type=int, default=10)
    _add_solver_opts(p)
    _add_node_limit(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_study)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (MvrpbError, OSError, ValueError) as e:
        print(f"mvrpb: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
