"""Two-phase pipeline runs, horizon studies and report files.

CSV columns (frozen):

raw.csv          instance, T, clients_per_period, m, total_distance, lb, ub,
                 opt, opt_lower, exact, iterations, gap
by_horizon.csv   T, n, mean_lb, mean_ub, mean_opt, mean_iterations,
                 mean_gap, min_gap, q1_gap, median_gap, q3_gap, max_gap
boxplot_data.csv T, n, q1, median, q3, iqr, whisker_low, whisker_high,
                 min, max, outliers

Wall-clock times are not reproducible, so they stay out of every CSV file:
they go to timings.json (per run) and summary.txt (per-horizon means).
Quartiles use linear interpolation between order statistics.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .balance import BalanceResult, gap_percent, optimize_balance
from .cvrp import parallel_map, solve_all_periods
from .errors import DegenerateBound, StageError
from .instances import derive_driver_count, generate_mvrpb, load_instance
from .model import Budget, CvrpBase, MvrpbInstance, PeriodPlan

RAW_COLUMNS = [
    "instance", "T", "clients_per_period", "m", "total_distance",
    "lb", "ub", "opt", "opt_lower", "exact", "iterations", "gap",
]
BY_HORIZON_COLUMNS = [
    "T", "n", "mean_lb", "mean_ub", "mean_opt", "mean_iterations",
    "mean_gap", "min_gap", "q1_gap", "median_gap", "q3_gap", "max_gap",
]
BOXPLOT_COLUMNS = [
    "T", "n", "q1", "median", "q3", "iqr", "whisker_low", "whisker_high", "min", "max", "outliers",
]


@dataclass(frozen=True)
class RunRecord:
    instance: str
    T: int
    clients_per_period: int
    m: int
    total_distance: int
    lb: int
    ub: int
    opt: int
    opt_lower: int
    exact: bool
    iterations: int
    gap: Optional[Decimal]
    phase1_s: float = 0.0
    phase2_s: float = 0.0

    def raw_row(self) -> dict[str, str]:
        return {
            "instance": self.instance,
            "T": str(self.T),
            "clients_per_period": str(self.clients_per_period),
            "m": str(self.m),
            "total_distance": str(self.total_distance),
            "lb": str(self.lb),
            "ub": str(self.ub),
            "opt": str(self.opt),
            "opt_lower": str(self.opt_lower),
            "exact": "1" if self.exact else "0",
            "iterations": str(self.iterations),
            "gap": "" if self.gap is None else f"{self.gap:.2f}",
        }


def _record(name: str, plans: Sequence[PeriodPlan], m: int, result: BalanceResult,
            clients_per_period: int, phase1_s: float, phase2_s: float) -> RunRecord:
    try:
        gap = gap_percent(result.opt, result.lb)
    except DegenerateBound:
        gap = None
    return RunRecord(
        instance=name,
        T=len(plans),
        clients_per_period=clients_per_period,
        m=m,
        total_distance=sum(p.total_distance for p in plans),
        lb=result.lb,
        ub=result.ub,
        opt=result.opt,
        opt_lower=result.opt if result.opt_lower is None else result.opt_lower,
        exact=result.exact,
        iterations=result.iterations,
        gap=gap,
        phase1_s=round(phase1_s, 2),
        phase2_s=round(phase2_s, 2),
    )


def _clients_per_period(inst: MvrpbInstance) -> int:
    sizes = {len(p.clients) for p in inst.periods}
    return sizes.pop() if len(sizes) == 1 else max(sizes)


def run_pipeline(
    instance,
    mode: str = "heuristic",
    budget: Budget = Budget(),
    seed: int = 0,
    m: Optional[int] = None,
    workers: int = 1,
    name: Optional[str] = None,
) -> RunRecord:
    """Solve every period, then balance. ``instance`` is a path or an instance.

    ``m`` overrides the driver count; otherwise the instance's own ``m`` is
    used, and failing that the largest route count of the phase-1 plans.
    """
    if not isinstance(instance, MvrpbInstance):
        try:
            inst = load_instance(instance)
        except Exception as e:
            raise StageError("load", e) from e
        name = name or Path(instance).stem
    else:
        inst = instance
    name = name or inst.name
    t0 = time.perf_counter()
    try:
        plans = solve_all_periods(inst, mode, budget, seed, workers)
    except Exception as e:
        raise StageError("routing", e) from e
    phase1 = time.perf_counter() - t0
    m = m or inst.m or derive_driver_count(plans)
    t1 = time.perf_counter()
    try:
        result = optimize_balance(plans, m, budget.nodes)
    except Exception as e:
        raise StageError("balancing", e) from e
    phase2 = time.perf_counter() - t1
    return _record(name, plans, m, result, _clients_per_period(inst), phase1, phase2)


def _balance_job(args):
    name, plans, m, node_limit, k, phase1 = args
    t = time.perf_counter()
    result = optimize_balance(plans, m, node_limit)
    return _record(name, plans, m, result, k, phase1, time.perf_counter() - t)


def _master_job(args):
    base, T, k, seed, mode, budget = args
    inst = generate_mvrpb(base, T, k, seed)
    plans = solve_all_periods(inst, mode, budget, seed)
    return plans


def replicate_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence([seed, r, 0x57D]).generate_state(1)[0])


def run_horizon_study(
    base: CvrpBase,
    clients_per_period: int,
    horizons: Sequence[int],
    replicates: int,
    seed: int = 0,
    mode: str = "heuristic",
    budget: Budget = Budget(),
    workers: int = 1,
    plans_out: Optional[dict] = None,
) -> list[RunRecord]:
    """Raw records for every (replicate, horizon), canonically ordered.

    Each replicate draws one master instance at the longest horizon; shorter
    horizons are its prefixes and share its driver count, fixed from the
    master's phase-1 plans. Period plans depend only on (seed, period), so a
    truncated instance's plans are the master's plan prefix and are reused.
    ``phase1_s`` of a truncation is the summed solve time of its periods.
    Pass a dict as ``plans_out`` to receive each master's plans and driver
    count keyed by instance id.
    """
    horizons = sorted(set(int(h) for h in horizons))
    if not horizons or horizons[0] < 1:
        raise ValueError("horizons must be positive")
    Tmax = horizons[-1]
    seeds = [replicate_seed(seed, r) for r in range(replicates)]
    masters = parallel_map(
        _master_job, [(base, Tmax, clients_per_period, s, mode, budget) for s in seeds], workers
    )
    jobs = []
    for r, plans in enumerate(masters):
        m = derive_driver_count(plans)
        name = f"{base.name}-k{clients_per_period}-r{r:03d}"
        if plans_out is not None:
            plans_out[name] = (plans, m)
        for T in horizons:
            phase1 = sum(p.elapsed for p in plans[:T])
            jobs.append((name, plans[:T], m, budget.nodes, clients_per_period, phase1))
    records = parallel_map(_balance_job, jobs, workers)
    return sorted(records, key=lambda rec: (rec.instance, rec.T))


# -- aggregation -------------------------------------------------------------

def quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75], method="linear")
    return float(q1), float(med), float(q3)


def box_stats(values: Sequence[float]) -> dict:
    """Box-and-whisker statistics: whiskers at 1.5 IQR, clipped to the data."""
    v = sorted(float(x) for x in values)
    q1, med, q3 = quartiles(v)
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = [x for x in v if lo_fence <= x <= hi_fence]
    return {
        "q1": q1, "median": med, "q3": q3, "iqr": iqr,
        "whisker_low": min(inside), "whisker_high": max(inside),
        "min": v[0], "max": v[-1],
        "outliers": [x for x in v if x < lo_fence or x > hi_fence],
    }


def _f(x: float, nd: int = 2) -> str:
    s = f"{x:.{nd}f}"
    return "0.00" if s == "-0.00" else s


def aggregate_rows(rows: Iterable[dict]) -> tuple[list[dict], list[dict]]:
    """Per-horizon aggregate rows and boxplot rows from raw CSV rows (strings).

    Rows with an empty gap (degenerate bound) are left out of gap statistics.
    """
    groups: dict[int, list[dict]] = {}
    for row in rows:
        groups.setdefault(int(row["T"]), []).append(row)
    agg, box = [], []
    for T in sorted(groups):
        g = groups[T]
        gaps = [float(r["gap"]) for r in g if r["gap"] != ""]

        def mean(col):
            return sum(int(r[col]) for r in g) / len(g)

        row = {
            "T": str(T),
            "n": str(len(g)),
            "mean_lb": _f(mean("lb"), 1),
            "mean_ub": _f(mean("ub"), 1),
            "mean_opt": _f(mean("opt"), 1),
            "mean_iterations": _f(mean("iterations"), 1),
        }
        if gaps:
            q1, med, q3 = quartiles(gaps)
            row.update(
                mean_gap=_f(sum(gaps) / len(gaps)), min_gap=_f(min(gaps)), q1_gap=_f(q1),
                median_gap=_f(med), q3_gap=_f(q3), max_gap=_f(max(gaps)),
            )
            b = box_stats(gaps)
            box.append({
                "T": str(T), "n": str(len(gaps)),
                **{k: _f(b[k]) for k in ("q1", "median", "q3", "iqr", "whisker_low", "whisker_high", "min", "max")},
                "outliers": ";".join(_f(x) for x in b["outliers"]),
            })
        else:
            row.update({k: "" for k in BY_HORIZON_COLUMNS[6:]})
        agg.append(row)
    return agg, box


def _csv_text(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary_text(records: Sequence[RunRecord]) -> str:
    """Plain-text table, one line per horizon: LB, UB, Opt, #It, T(s), Gap."""
    groups: dict[int, list[RunRecord]] = {}
    for r in records:
        groups.setdefault(r.T, []).append(r)
    head = f"{'T':>3} {'n':>4} {'LB':>10} {'UB':>10} {'Opt':>10} {'#It':>6} {'T(s)':>8} {'Gap%':>7} {'exact':>6}"
    lines = [head, "-" * len(head)]
    for T in sorted(groups):
        g = groups[T]
        n = len(g)
        gaps = [float(r.gap) for r in g if r.gap is not None]
        lines.append(
            f"{T:>3} {n:>4} {sum(r.lb for r in g) / n:>10.1f} {sum(r.ub for r in g) / n:>10.1f} "
            f"{sum(r.opt for r in g) / n:>10.1f} {sum(r.iterations for r in g) / n:>6.1f} "
            f"{sum(r.phase2_s for r in g) / n:>8.2f} "
            f"{(sum(gaps) / len(gaps) if gaps else float('nan')):>7.2f} {sum(r.exact for r in g):>3}/{n}"
        )
    lines.append("")
    lines.append("T(s): mean phase-2 wall time; per-run times of both phases are in timings.json.")
    return "\n".join(lines) + "\n"


def emit_reports(records: Sequence[RunRecord], out_dir) -> dict[str, Path]:
    """Write raw.csv, by_horizon.csv, boxplot_data.csv, summary.txt and timings.json."""
    if not records:
        raise ValueError("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=lambda r: (r.instance, r.T))
    raw = [r.raw_row() for r in records]
    raw_text = _csv_text(RAW_COLUMNS, raw)
    # aggregates are computed from the raw CSV as written
    agg, box = aggregate_rows(csv.DictReader(io.StringIO(raw_text)))
    files = {
        "raw.csv": raw_text,
        "by_horizon.csv": _csv_text(BY_HORIZON_COLUMNS, agg),
        "boxplot_data.csv": _csv_text(BOXPLOT_COLUMNS, box),
        "timings.json": json.dumps(
            [{"instance": r.instance, "T": r.T, "phase1_s": r.phase1_s, "phase2_s": r.phase2_s} for r in records],
            indent=1,
        ) + "\n",
        "summary.txt": summary_text(records),
    }
    paths = {}
    for fname, text in files.items():
        p = out / fname
        p.write_text(text)
        paths[fname] = p
    return paths


def record_dict(rec: RunRecord) -> dict:
    d = asdict(rec)
    d["gap"] = None if rec.gap is None else str(rec.gap)
    return d
