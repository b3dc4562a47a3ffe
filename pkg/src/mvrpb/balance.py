"""Phase 2: allocate fixed per-period routes to ``m`` drivers, min-max workload.

The optimum is located by binary search over the workload cap: probe the
perfect-equity bound first, fall back to an LPT-with-conflicts allocation for
an upper bound, then halve the bracket with an exact feasibility search.

The feasibility search walks the period-layered structure a single driver
schedule follows (at most one route per period, or none) for all drivers at
once: periods in order, routes within a period by decreasing distance, each
route given to a driver that is still free in that period and stays under
the cap.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import DegenerateBound, InsufficientDrivers, TooLarge
from .model import Assignment, PeriodPlan, driver_loads

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNKNOWN = "unknown"

Plans = Sequence[Union[PeriodPlan, Sequence[int]]]


def _distances(plans: Plans) -> list[list[int]]:
    out = []
    for p in plans:
        ds = p.distances if isinstance(p, PeriodPlan) else list(p)
        if any(int(d) != d or d < 0 for d in ds):
            raise ValueError("route distances must be non-negative integers")
        out.append([int(d) for d in ds])
    return out


def _check_drivers(dist: list[list[int]], m: int) -> None:
    if m < 1:
        raise InsufficientDrivers(f"m must be >= 1, got {m}")
    worst = max((len(p) for p in dist), default=0)
    if worst > m:
        raise InsufficientDrivers(f"a period has {worst} routes but only {m} drivers")


@dataclass(frozen=True)
class FeasibilityOutcome:
    status: str
    cap: int
    witness: Optional[Assignment] = None
    nodes: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


@dataclass(frozen=True)
class Probe:
    cap: int
    status: str
    nodes: int
    seconds: float


@dataclass(frozen=True)
class BalanceResult:
    lb: int
    ub: int
    opt: int
    iterations: int
    assignment: Assignment
    loads: tuple[int, ...]
    probes: tuple[Probe, ...] = ()
    phase_times: dict = field(default_factory=dict, compare=False)
    # opt is proven optimal iff opt_lower == opt; otherwise opt is the best
    # witness found and the optimum lies in [opt_lower, opt]
    opt_lower: Optional[int] = None

    @property
    def exact(self) -> bool:
        return self.opt_lower is None or self.opt_lower == self.opt


def workload_lower_bound(plans: Plans, m: int) -> int:
    """Ceiling of total route distance over ``m``."""
    dist = _distances(plans)
    _check_drivers(dist, m)
    total = sum(map(sum, dist))
    return -(-total // m)


def construct_initial(plans: Plans, m: int) -> tuple[Assignment, int]:
    """LPT with per-period conflicts.

    Routes go in decreasing distance (ties: earlier period, lower route index)
    to the least-loaded driver without a route in that period (ties: lowest
    driver index). Returns the assignment and its maximum load.
    """
    dist = _distances(plans)
    _check_drivers(dist, m)
    items = sorted(
        ((d, t, r) for t, ds in enumerate(dist) for r, d in enumerate(ds)),
        key=lambda x: (-x[0], x[1], x[2]),
    )
    loads = [0] * m
    busy = [set() for _ in dist]
    asg = [[-1] * len(ds) for ds in dist]
    for d, t, r in items:
        k = min((k for k in range(m) if k not in busy[t]), key=lambda k: (loads[k], k))
        asg[t][r] = k
        busy[t].add(k)
        loads[k] += d
    return tuple(map(tuple, asg)), max(loads)


class _Abort(Exception):
    pass


def feasible(plans: Plans, m: int, cap: int, node_limit: Optional[int] = None) -> FeasibilityOutcome:
    """Decide whether some assignment keeps every driver's workload <= ``cap``.

    Exact unless ``node_limit`` search nodes are exhausted, in which case the
    outcome status is ``UNKNOWN``.
    """
    if cap < 0:
        raise ValueError("cap must be >= 0")
    dist = _distances(plans)
    _check_drivers(dist, m)
    T = len(dist)
    total = sum(map(sum, dist))
    if total > m * cap or any(d > cap for ds in dist for d in ds):
        return FeasibilityOutcome(INFEASIBLE, cap, None, 0)

    order = [sorted(range(len(ds)), key=lambda r: (-ds[r], r)) for ds in dist]
    seq = [[dist[t][r] for r in order[t]] for t in range(T)]
    full = (1 << (cap + 1)) - 1

    # reach[t]: bitset of workloads one driver can still pick up from periods
    # t.. (at most one route each); part[t][j]: same, with only positions >= j
    # of period t still open
    reach = [0] * (T + 1)
    reach[T] = 1
    part = [None] * T
    for t in range(T - 1, -1, -1):
        nxt = reach[t + 1]
        row = [0] * (len(seq[t]) + 1)
        acc = nxt
        row[len(seq[t])] = acc
        for j in range(len(seq[t]) - 1, -1, -1):
            acc |= (nxt << seq[t][j]) & full
            row[j] = acc
        part[t] = row
        reach[t] = row[0]
    remaining_after = [0] * (T + 1)
    for t in range(T - 1, -1, -1):
        remaining_after[t] = remaining_after[t + 1] + sum(seq[t])
    suffix_in_period = [list(itertools.accumulate(reversed(s)))[::-1] + [0] for s in seq]

    loads = [0] * m
    busy = [[False] * m for _ in range(T)]
    pick = [[-1] * len(s) for s in seq]
    failed: set = set()
    nodes = 0

    def absorbable(t: int, j: int) -> int:
        open_row = part[t][j]
        closed = reach[t + 1]
        used = busy[t]
        tot = 0
        for k in range(m):
            bits = (closed if used[k] else open_row) & ((1 << (cap - loads[k] + 1)) - 1)
            tot += bits.bit_length() - 1
        return tot

    def search(t: int, j: int) -> bool:
        nonlocal nodes
        nodes += 1
        if node_limit is not None and nodes > node_limit:
            raise _Abort
        if j == len(seq[t]):
            if t + 1 == T:
                return True
            # only the multiset of loads matters from here on
            key = (t + 1, tuple(sorted(loads)))
            if key in failed:
                return False
            if search(t + 1, 0):
                return True
            failed.add(key)
            return False
        if absorbable(t, j) < suffix_in_period[t][j] + remaining_after[t + 1]:
            return False
        w = seq[t][j]
        used = busy[t]
        tried = set()
        for k in sorted(range(m), key=lambda k: (loads[k], k)):
            if used[k] or loads[k] + w > cap or loads[k] in tried:
                continue
            # free drivers with equal load are interchangeable
            tried.add(loads[k])
            loads[k] += w
            used[k] = True
            pick[t][j] = k
            if search(t, j + 1):
                return True
            loads[k] -= w
            used[k] = False
        return False

    try:
        ok = T == 0 or search(0, 0)
    except _Abort:
        return FeasibilityOutcome(UNKNOWN, cap, None, nodes)
    if not ok:
        return FeasibilityOutcome(INFEASIBLE, cap, None, nodes)
    asg = []
    for t in range(T):
        row = [-1] * len(seq[t])
        for j, r in enumerate(order[t]):
            row[r] = pick[t][j]
        asg.append(tuple(row))
    return FeasibilityOutcome(FEASIBLE, cap, tuple(asg), nodes)


def optimize_balance(plans: Plans, m: int, node_limit: Optional[int] = None) -> BalanceResult:
    """Minimum achievable maximum driver workload for fixed routes.

    Probes the lower bound first; if that fails, brackets the optimum between
    it and the constructive upper bound and halves the bracket, keeping the
    low end infeasible and the high end feasible. ``iterations`` counts
    feasibility probes. With ``node_limit`` set, a probe may come back
    unknown; the result then carries the best witness and a proven lower end
    in ``opt_lower``.
    """
    dist = _distances(plans)
    _check_drivers(dist, m)
    times = {}
    t0 = time.perf_counter()
    lb = workload_lower_bound(dist, m)
    times["bound"] = time.perf_counter() - t0
    probes: list[Probe] = []

    def probe(cap: int) -> FeasibilityOutcome:
        s = time.perf_counter()
        out = feasible(dist, m, cap, node_limit)
        probes.append(Probe(cap, out.status, out.nodes, time.perf_counter() - s))
        return out

    first = probe(lb)
    # the constructive bound is reported even when it is not needed
    t1 = time.perf_counter()
    lpt_asg, ub = construct_initial(dist, m)
    times["construct"] = time.perf_counter() - t1
    if first.feasible:
        times["search"] = sum(p.seconds for p in probes)
        asg = first.witness
        return BalanceResult(lb, ub, lb, 1, asg, tuple(driver_loads(dist, asg, m)), tuple(probes), times, None)

    best_asg = lpt_asg
    lo, hi = lb, ub
    # lb - 1 is infeasible by the averaging argument
    proven_lo = lb if first.status == INFEASIBLE else lb - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        out = probe(mid)
        if out.feasible:
            hi, best_asg = mid, out.witness
        else:
            lo = mid
            if out.status == INFEASIBLE:
                proven_lo = max(proven_lo, mid)
    times["search"] = sum(p.seconds for p in probes)
    loads = tuple(driver_loads(dist, best_asg, m))
    return BalanceResult(lb, ub, hi, len(probes), best_asg, loads, tuple(probes), times, proven_lo + 1)


def gap_percent(opt: int, lb: int) -> Decimal:
    """100 * (opt - lb) / lb, rounded half-up to two decimals."""
    if lb <= 0:
        raise DegenerateBound(f"gap undefined for lower bound {lb}")
    exact = Fraction(100 * (opt - lb), lb)
    return (Decimal(exact.numerator) / Decimal(exact.denominator)).quantize(Decimal("0.01"), ROUND_HALF_UP)


BRUTE_FORCE_CAP = 10**7


def brute_force_balance(plans: Plans, m: int, cap: int = BRUTE_FORCE_CAP) -> int:
    """Optimal min-max workload by enumerating every assignment (test oracle)."""
    dist = _distances(plans)
    _check_drivers(dist, m)
    count = 1
    for ds in dist:
        count *= math.perm(m, len(ds))
    if count > cap:
        raise TooLarge(f"{count} assignments exceed the enumeration cap {cap}")
    per_period = [list(itertools.permutations(range(m), len(ds))) for ds in dist]
    best = None
    for combo in itertools.product(*per_period):
        loads = [0] * m
        for ds, drivers in zip(dist, combo):
            for d, k in zip(ds, drivers):
                loads[k] += d
        v = max(loads)
        if best is None or v < best:
            best = v
    return best
