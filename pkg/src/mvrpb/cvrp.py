"""Phase 1: one CVRP per period.

``solve_exact_small`` gives proven optima for up to ~12 clients (Held-Karp
tours over capacity-feasible subsets, then a set-partition DP over bitmasks).
``solve_heuristic`` is an iterated local search: Clarke-Wright savings,
then relocate / swap / 2-opt / 2-opt* to a local optimum, then repeated
ruin-and-recreate perturbations keeping the incumbent.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleClient, PeriodError, Timeout, TooLarge
from .model import Budget, MvrpbInstance, PeriodPlan, PeriodProblem, Route

DEFAULT_MAX_CLIENTS = 12
_INF = 1 << 60


def _check_demands(problem: PeriodProblem) -> None:
    for c, q in zip(problem.clients, problem.demands):
        if q > problem.capacity:
            raise InfeasibleClient(f"client {c} demand {q} exceeds capacity {problem.capacity}")


def _local_matrix(problem: PeriodProblem) -> np.ndarray:
    idx = np.array((0, *problem.clients), dtype=np.int64)
    return np.asarray(problem.matrix)[np.ix_(idx, idx)].astype(np.int64)


def _to_plan(problem: PeriodProblem, local_routes, proven: bool, elapsed: float) -> PeriodPlan:
    """Map local routes (1-based client positions) back to global ids, canonically ordered."""
    demand_of = dict(zip(problem.clients, problem.demands))
    routes = []
    for lr in local_routes:
        if not lr:
            continue
        g = [problem.clients[i - 1] for i in lr]
        if g[0] > g[-1]:
            g.reverse()
        routes.append(g)
    routes.sort(key=min)
    built = tuple(Route.build(g, problem.matrix, demand_of) for g in routes)
    return PeriodPlan(built, proven, elapsed=elapsed)


# -- exact -------------------------------------------------------------------

def solve_exact_small(
    problem: PeriodProblem,
    max_clients: int = DEFAULT_MAX_CLIENTS,
    time_limit: Optional[float] = None,
) -> PeriodPlan:
    """Proven-optimal plan by exhaustive dynamic programming.

    Raises ``TooLarge`` above ``max_clients`` and ``Timeout`` when
    ``time_limit`` seconds elapse before the DP completes.
    """
    start = time.perf_counter()
    n = len(problem.clients)
    if n > max_clients:
        raise TooLarge(f"{n} clients exceed the exact cap of {max_clients}")
    _check_demands(problem)
    if n == 0:
        return PeriodPlan((), True, elapsed=0.0)
    deadline = None if time_limit is None else start + time_limit

    def tick():
        if deadline is not None and time.perf_counter() > deadline:
            raise Timeout(f"exact solve exceeded {time_limit}s")

    D = _local_matrix(problem)
    Dc = D[1:, 1:]
    Q = problem.capacity
    q = problem.demands
    full = 1 << n

    load = [0] * full
    for mask in range(1, full):
        low = mask & -mask
        load[mask] = load[mask ^ low] + q[low.bit_length() - 1]

    # dp[mask, j]: shortest depot -> ... -> j path visiting exactly mask
    dp = np.full((full, n), _INF, dtype=np.int64)
    for j in range(n):
        if q[j] <= Q:
            dp[1 << j, j] = D[0, j + 1]
    tour = np.full(full, _INF, dtype=np.int64)
    back = D[1:, 0]
    for mask in range(1, full):
        if load[mask] > Q:
            continue
        if not mask & 0xFF:
            tick()
        row = dp[mask]
        tour[mask] = (row + back).min()
        ext = (row[:, None] + Dc).min(axis=0)
        for k in range(n):
            bit = 1 << k
            if mask & bit or load[mask | bit] > Q:
                continue
            nm = mask | bit
            if ext[k] < dp[nm, k]:
                dp[nm, k] = ext[k]

    tour_l = tour.tolist()
    best = [_INF] * full
    pick = [0] * full
    best[0] = 0
    for S in range(1, full):
        if not S & 0x3FF:
            tick()
        low = S & -S
        rest = S ^ low
        b, p = _INF, 0
        sub = rest
        while True:
            T = sub | low
            c = tour_l[T]
            if c < _INF:
                v = c + best[S ^ T]
                if v < b:
                    b, p = v, T
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[S] = b
        pick[S] = p

    routes = []
    S = full - 1
    while S:
        T = pick[S]
        routes.append(_tour_order(T, dp, D, n))
        S ^= T
    return _to_plan(problem, routes, True, time.perf_counter() - start)


def _tour_order(mask: int, dp: np.ndarray, D: np.ndarray, n: int) -> list[int]:
    """Recover the optimal visiting order of ``mask`` from the Held-Karp table."""
    members = [j for j in range(n) if mask >> j & 1]
    j = min(members, key=lambda j: (int(dp[mask, j]) + int(D[j + 1, 0]), j))
    order = [j]
    cur = mask
    while cur != 1 << j:
        target = int(dp[cur, j])
        prev = cur ^ (1 << j)
        for i in range(n):
            if prev >> i & 1 and int(dp[prev, i]) + int(D[i + 1, j + 1]) == target:
                break
        order.append(i)
        cur, j = prev, i
    return [k + 1 for k in reversed(order)]


# -- heuristic ---------------------------------------------------------------

class _Search:
    """Mutable working state of the local search over local node indices."""

    def __init__(self, D: list[list[int]], q: list[int], Q: int):
        self.D = D
        self.q = q
        self.Q = Q
        self.routes: list[list[int]] = []
        self.cost: list[int] = []
        self.load: list[int] = []

    def route_cost(self, r: Sequence[int]) -> int:
        if not r:
            return 0
        D = self.D
        c = D[0][r[0]] + D[r[-1]][0]
        for a, b in zip(r, r[1:]):
            c += D[a][b]
        return c

    def set_routes(self, routes):
        self.routes = [list(r) for r in routes if r]
        self.cost = [self.route_cost(r) for r in self.routes]
        self.load = [sum(self.q[i] for i in r) for r in self.routes]

    def total(self) -> int:
        return sum(self.cost)

    def _commit(self, changed: dict[int, list[int]]):
        for ri, r in changed.items():
            if ri == len(self.routes):
                self.routes.append(r)
                self.cost.append(0)
                self.load.append(0)
            self.routes[ri] = r
            self.cost[ri] = self.route_cost(r)
            self.load[ri] = sum(self.q[i] for i in r)
        if any(not r for r in self.routes):
            keep = [i for i, r in enumerate(self.routes) if r]
            self.routes = [self.routes[i] for i in keep]
            self.cost = [self.cost[i] for i in keep]
            self.load = [self.load[i] for i in keep]

    # each move applies the first improving neighbour found and returns True

    def relocate(self) -> bool:
        D, q, Q = self.D, self.q, self.Q
        routes = self.routes
        R = len(routes)
        for ra in range(R):
            A = routes[ra]
            for i, u in enumerate(A):
                pu = A[i - 1] if i else 0
                nu = A[i + 1] if i + 1 < len(A) else 0
                gain = D[pu][u] + D[u][nu] - D[pu][nu]
                for rb in range(R):
                    if rb == ra or self.load[rb] + q[u] > Q:
                        continue
                    B = routes[rb]
                    prev = 0
                    for j in range(len(B) + 1):
                        nxt = B[j] if j < len(B) else 0
                        if D[prev][u] + D[u][nxt] - D[prev][nxt] < gain:
                            self._commit({ra: A[:i] + A[i + 1:], rb: B[:j] + [u] + B[j:]})
                            return True
                        prev = nxt
                if len(A) > 1 and 2 * D[0][u] < gain:
                    self._commit({ra: A[:i] + A[i + 1:], R: [u]})
                    return True
                A2 = A[:i] + A[i + 1:]
                prev = 0
                for j in range(len(A2) + 1):
                    nxt = A2[j] if j < len(A2) else 0
                    if j != i and D[prev][u] + D[u][nxt] - D[prev][nxt] < gain:
                        self._commit({ra: A2[:j] + [u] + A2[j:]})
                        return True
                    prev = nxt
        return False

    def swap(self) -> bool:
        D, q, Q = self.D, self.q, self.Q
        routes = self.routes
        R = len(routes)
        for ra in range(R):
            A = routes[ra]
            for i, u in enumerate(A):
                pu = A[i - 1] if i else 0
                nu = A[i + 1] if i + 1 < len(A) else 0
                out_u = D[pu][u] + D[u][nu]
                for rb in range(ra + 1, R):
                    B = routes[rb]
                    for j, v in enumerate(B):
                        if self.load[ra] - q[u] + q[v] > Q or self.load[rb] - q[v] + q[u] > Q:
                            continue
                        pv = B[j - 1] if j else 0
                        nv = B[j + 1] if j + 1 < len(B) else 0
                        delta = (D[pu][v] + D[v][nu] - out_u) + (D[pv][u] + D[u][nv] - D[pv][v] - D[v][nv])
                        if delta < 0:
                            A2, B2 = A[:], B[:]
                            A2[i], B2[j] = v, u
                            self._commit({ra: A2, rb: B2})
                            return True
                for j in range(i + 2, len(A)):
                    A2 = A[:]
                    A2[i], A2[j] = A2[j], A2[i]
                    if self.route_cost(A2) < self.cost[ra]:
                        self._commit({ra: A2})
                        return True
        return False

    def two_opt(self) -> bool:
        D = self.D
        for ra, A in enumerate(self.routes):
            L = len(A)
            for i in range(L - 1):
                a = A[i - 1] if i else 0
                b = A[i]
                for j in range(i + 1, L):
                    c = A[j]
                    d = A[j + 1] if j + 1 < L else 0
                    if D[a][c] + D[b][d] < D[a][b] + D[c][d]:
                        self._commit({ra: A[:i] + A[i:j + 1][::-1] + A[j + 1:]})
                        return True
        return False

    def two_opt_star(self) -> bool:
        D, q, Q = self.D, self.q, self.Q
        routes = self.routes
        R = len(routes)
        for ra in range(R):
            A = routes[ra]
            pa = [0]
            for x in A:
                pa.append(pa[-1] + q[x])
            for rb in range(ra + 1, R):
                B = routes[rb]
                pb = [0]
                for x in B:
                    pb.append(pb[-1] + q[x])
                LA, LB = pa[-1], pb[-1]
                for i in range(len(A) + 1):
                    a0 = A[i - 1] if i else 0
                    a1 = A[i] if i < len(A) else 0
                    base_a = D[a0][a1]
                    for j in range(len(B) + 1):
                        b0 = B[j - 1] if j else 0
                        b1 = B[j] if j < len(B) else 0
                        old = base_a + D[b0][b1]
                        # heads keep their tails swapped
                        if (D[a0][b1] + D[b0][a1] < old
                                and pa[i] + LB - pb[j] <= Q and pb[j] + LA - pa[i] <= Q):
                            self._commit({ra: A[:i] + B[j:], rb: B[:j] + A[i:]})
                            return True
                        # head joined to reversed head
                        if (D[a0][b0] + D[a1][b1] < old
                                and pa[i] + pb[j] <= Q and LA - pa[i] + LB - pb[j] <= Q):
                            self._commit({ra: A[:i] + B[:j][::-1], rb: A[i:][::-1] + B[j:]})
                            return True
        return False

    def descend(self):
        moves = (self.relocate, self.swap, self.two_opt, self.two_opt_star)
        while any(m() for m in moves):
            pass

    def savings(self, n: int):
        D, q, Q = self.D, self.q, self.Q
        route_of = {i: [i] for i in range(1, n + 1)}
        load = {i: q[i] for i in range(1, n + 1)}
        pairs = sorted(
            ((D[0][i] + D[0][j] - D[i][j], i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)),
            key=lambda s: (-s[0], s[1], s[2]),
        )
        for s, i, j in pairs:
            if s <= 0:
                break
            ri, rj = route_of[i], route_of[j]
            if ri is rj or load[ri[0]] + load[rj[0]] > Q:
                continue
            if ri[-1] == i and rj[0] == j:
                merged = ri + rj
            elif ri[0] == i and rj[-1] == j:
                merged = rj + ri
            elif ri[-1] == i and rj[-1] == j:
                merged = ri + rj[::-1]
            elif ri[0] == i and rj[0] == j:
                merged = ri[::-1] + rj
            else:
                continue
            tot = load[ri[0]] + load[rj[0]]
            for c in merged:
                route_of[c] = merged
            load[merged[0]] = tot
        seen, routes = set(), []
        for i in range(1, n + 1):
            r = route_of[i]
            if id(r) not in seen:
                seen.add(id(r))
                routes.append(r)
        self.set_routes(routes)

    def ruin_recreate(self, rng: random.Random, n: int):
        D, q, Q = self.D, self.q, self.Q
        k = rng.randint(2, max(2, min(n, n // 3 + 1)))
        if rng.random() < 0.5:
            seed = rng.randint(1, n)
            removed = sorted(range(1, n + 1), key=lambda c: (D[seed][c], c))[:k]
        else:
            removed = rng.sample(range(1, n + 1), k)
        gone = set(removed)
        routes = [[c for c in r if c not in gone] for r in self.routes]
        routes = [r for r in routes if r]
        loads = [sum(q[c] for c in r) for r in routes]
        rng.shuffle(removed)
        for u in removed:
            best = (2 * D[0][u], len(routes), 0)
            for ri, r in enumerate(routes):
                if loads[ri] + q[u] > Q:
                    continue
                prev = 0
                for j in range(len(r) + 1):
                    nxt = r[j] if j < len(r) else 0
                    c = D[prev][u] + D[u][nxt] - D[prev][nxt]
                    if c < best[0]:
                        best = (c, ri, j)
                    prev = nxt
            _, ri, j = best
            if ri == len(routes):
                routes.append([u])
                loads.append(q[u])
            else:
                routes[ri].insert(j, u)
                loads[ri] += q[u]
        self.set_routes(routes)


def solve_heuristic(
    problem: PeriodProblem,
    iterations: int = 300,
    time_limit: Optional[float] = None,
    seed: int = 0,
) -> PeriodPlan:
    """Iterated local search; never proven optimal.

    Deterministic for a given ``seed`` and ``iterations`` as long as
    ``time_limit`` (a hard stop, seconds) is not what ends the search.
    """
    start = time.perf_counter()
    _check_demands(problem)
    n = len(problem.clients)
    if n == 0:
        return PeriodPlan((), False, elapsed=0.0)
    D = _local_matrix(problem).tolist()
    q = [0, *problem.demands]
    ls = _Search(D, q, problem.capacity)
    ls.savings(n)
    ls.descend()
    cur_routes, cur_cost = [r[:] for r in ls.routes], ls.total()
    best_routes, best_cost = cur_routes, cur_cost
    rng = random.Random(seed)
    stall = 0
    patience = max(20, iterations // 5)
    for _ in range(iterations if n > 1 else 0):
        if time_limit is not None and time.perf_counter() - start > time_limit:
            break
        ls.set_routes(cur_routes)
        ls.ruin_recreate(rng, n)
        ls.descend()
        cost = ls.total()
        if cost <= cur_cost:
            cur_routes, cur_cost = [r[:] for r in ls.routes], cost
        if cost < best_cost:
            best_routes, best_cost = cur_routes, cost
            stall = 0
        else:
            stall += 1
            if stall >= patience:
                cur_routes, cur_cost = best_routes, best_cost
                stall = 0
    return _to_plan(problem, best_routes, False, time.perf_counter() - start)


# -- all periods -------------------------------------------------------------

def period_seed(seed: int, t: int) -> int:
    """Solver seed for period ``t``, derived only from (seed, t)."""
    return int(np.random.SeedSequence([seed, t, 0xC0FFEE]).generate_state(1)[0])


def solve_period(inst: MvrpbInstance, t: int, mode: str, budget: Budget, seed: int) -> PeriodPlan:
    problem = inst.period_problem(t)
    if mode == "exact":
        return solve_exact_small(problem, budget.max_clients, budget.time_limit)
    if mode == "heuristic":
        return solve_heuristic(problem, budget.iterations, budget.time_limit, period_seed(seed, t))
    raise ValueError(f"unknown mode {mode!r}")


def _solve_job(args):
    inst, t, mode, budget, seed = args
    try:
        return solve_period(inst, t, mode, budget, seed)
    except Exception as e:  # noqa: BLE001 - re-raised with the period tag
        raise PeriodError(t, e) from e


def solve_all_periods(
    inst: MvrpbInstance,
    mode: str = "heuristic",
    budget: Budget = Budget(),
    seed: int = 0,
    workers: int = 1,
) -> list[PeriodPlan]:
    """One plan per period. Output does not depend on ``workers`` or order."""
    if mode == "exact":
        for t, p in enumerate(inst.periods):
            if len(p.clients) > budget.max_clients:
                raise PeriodError(t, TooLarge(f"{len(p.clients)} clients exceed the exact cap of {budget.max_clients}"))
    inst.matrix()
    jobs = [(inst, t, mode, budget, seed) for t in range(inst.horizon)]
    return parallel_map(_solve_job, jobs, workers)


def parallel_map(fn, items, workers: int = 1):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))

