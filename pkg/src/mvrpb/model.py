"""Domain types, integer Euclidean distances and solution validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidClient


@dataclass(frozen=True)
class CvrpBase:
    """Single-period CVRP seed instance. Index 0 is the depot."""

    name: str
    coords: tuple[tuple[int, int], ...]
    demand: tuple[int, ...]
    capacity: int

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple((int(x), int(y)) for x, y in self.coords))
        object.__setattr__(self, "demand", tuple(int(q) for q in self.demand))
        if len(self.coords) != len(self.demand):
            raise ValueError("coords and demand differ in length")
        if len(self.coords) < 2:
            raise ValueError("a CVRP base needs a depot and at least one client")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if self.demand[0] != 0:
            raise ValueError("depot demand must be 0")
        if any(q < 0 or q > self.capacity for q in self.demand):
            raise ValueError("every demand must lie in [0, capacity]")

    @property
    def n_clients(self) -> int:
        return len(self.coords) - 1

    @property
    def clients(self) -> range:
        return range(1, len(self.coords))


@dataclass(frozen=True)
class PeriodDemand:
    """Clients requesting a visit in one period, with their demands."""

    clients: tuple[int, ...]
    demands: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "clients", tuple(int(c) for c in self.clients))
        object.__setattr__(self, "demands", tuple(int(q) for q in self.demands))
        if len(self.clients) != len(self.demands):
            raise ValueError("clients and demands differ in length")
        if len(set(self.clients)) != len(self.clients):
            raise ValueError("duplicate client in period")
        if any(q <= 0 for q in self.demands):
            raise ValueError("period demands must be positive")

    def demand_of(self) -> dict[int, int]:
        return dict(zip(self.clients, self.demands))


@dataclass(frozen=True)
class MvrpbInstance:
    base: CvrpBase
    periods: tuple[PeriodDemand, ...]
    m: Optional[int] = None
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(self.periods))
        if not self.periods:
            raise ValueError("an instance needs at least one period")
        n = len(self.base.coords)
        for t, p in enumerate(self.periods):
            for c, q in zip(p.clients, p.demands):
                if not 1 <= c < n:
                    raise InvalidClient(f"period {t}: client {c} not in base")
                if q > self.base.capacity:
                    raise ValueError(f"period {t}: demand {q} of client {c} exceeds capacity")
        if self.m is not None and self.m < 1:
            raise ValueError("driver count must be positive")

    @property
    def horizon(self) -> int:
        return len(self.periods)

    @property
    def name(self) -> str:
        return self.base.name

    def matrix(self) -> np.ndarray:
        # cached in __dict__ directly; frozen dataclasses allow that
        if "_matrix" not in self.__dict__:
            self.__dict__["_matrix"] = build_distance_matrix(self.base.coords)
        return self.__dict__["_matrix"]

    def period_problem(self, t: int, matrix: Optional[np.ndarray] = None) -> "PeriodProblem":
        p = self.periods[t]
        if matrix is None:
            matrix = self.matrix()
        return PeriodProblem(p.clients, p.demands, self.base.capacity, matrix)


@dataclass(frozen=True, eq=False)
class PeriodProblem:
    """Single-period view handed to the CVRP solvers (global client indices)."""

    clients: tuple[int, ...]
    demands: tuple[int, ...]
    capacity: int
    matrix: np.ndarray


@dataclass(frozen=True)
class Route:
    clients: tuple[int, ...]
    distance: int
    load: int

    @classmethod
    def build(cls, clients: Sequence[int], matrix, demand_of: dict[int, int]) -> "Route":
        clients = tuple(int(c) for c in clients)
        return cls(clients, route_distance(clients, matrix), sum(demand_of[c] for c in clients))


@dataclass(frozen=True)
class PeriodPlan:
    routes: tuple[Route, ...]
    proven_optimal: bool = False
    total_distance: int = field(default=-1)
    elapsed: float = field(default=0.0, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(self.routes))
        total = sum(r.distance for r in self.routes)
        if self.total_distance == -1:
            object.__setattr__(self, "total_distance", total)

    @property
    def distances(self) -> list[int]:
        return [r.distance for r in self.routes]


@dataclass(frozen=True)
class Budget:
    """Search limits. ``iterations`` and ``nodes`` are deterministic; ``time_limit`` is not."""

    iterations: int = 300  # heuristic perturbation rounds per period
    time_limit: Optional[float] = None  # seconds per period solve
    max_clients: int = 12  # exact-solver size cap
    nodes: Optional[int] = None  # feasibility search nodes per probe


# One tuple per period; entry r is the driver operating route r of that period.
Assignment = tuple[tuple[int, ...], ...]


def driver_loads(plans: Sequence[PeriodPlan] | Sequence[Sequence[int]], asg: Assignment, m: int) -> list[int]:
    loads = [0] * m
    for period, drivers in zip(plans, asg):
        dists = period.distances if isinstance(period, PeriodPlan) else period
        for d, k in zip(dists, drivers):
            loads[k] += d
    return loads


def _round_sqrt(s: int) -> int:
    # Half-up rounding of sqrt(s) in integer arithmetic. sqrt(s) is never an
    # exact half for integer s, so this is also round-to-nearest.
    k = math.isqrt(s)
    return k + 1 if s - k * k > k else k


def build_distance_matrix(coords: Sequence[tuple[int, int]]) -> np.ndarray:
    """Rounded Euclidean distances between integer points.

    Returns a read-only symmetric ``int64`` matrix with a zero diagonal.
    """
    pts = [(int(x), int(y)) for x, y in coords]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    n = len(pts)
    d = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        xi, yi = pts[i]
        for j in range(i + 1, n):
            xj, yj = pts[j]
            d[i, j] = d[j, i] = _round_sqrt((xi - xj) ** 2 + (yi - yj) ** 2)
    d.setflags(write=False)
    return d


def route_distance(route: Sequence[int], matrix) -> int:
    """Depot -> route[0] -> ... -> route[-1] -> depot. An empty route costs 0."""
    if len(route) == 0:
        return 0
    n = len(matrix)
    for c in route:
        if not 0 <= c < n:
            raise InvalidClient(f"client index {c} outside 0..{n - 1}")
    total = int(matrix[0][route[0]]) + int(matrix[route[-1]][0])
    for a, b in zip(route, route[1:]):
        total += int(matrix[a][b])
    return total


@dataclass(frozen=True)
class Violation:
    kind: str
    period: int
    message: str
    client: Optional[int] = None
    route: Optional[int] = None
    driver: Optional[int] = None

    def __str__(self):
        return f"[period {self.period}] {self.kind}: {self.message}"


def validate_solution(
    instance: MvrpbInstance,
    plans: Sequence[PeriodPlan],
    asg: Optional[Assignment] = None,
    m: Optional[int] = None,
) -> list[Violation]:
    """Every way ``plans`` (and ``asg``) fail to be a feasible MVRPB solution.

    An empty list means the solution is feasible. Pass ``asg=None`` to check
    routing only. ``m`` defaults to ``instance.m``.
    """
    out: list[Violation] = []
    if len(plans) != instance.horizon:
        out.append(Violation("shape", -1, f"{len(plans)} plans for {instance.horizon} periods"))
        return out
    matrix = instance.matrix()
    n = len(matrix)
    cap = instance.base.capacity
    for t, (period, plan) in enumerate(zip(instance.periods, plans)):
        demand_of = period.demand_of()
        seen: dict[int, int] = {}
        total = 0
        for r, route in enumerate(plan.routes):
            if not route.clients:
                out.append(Violation("empty-route", t, f"route {r} visits no client", route=r))
            if len(set(route.clients)) != len(route.clients):
                out.append(Violation("duplicate", t, f"route {r} repeats a client", route=r))
            load = 0
            for c in route.clients:
                if c not in demand_of:
                    out.append(Violation("coverage", t, f"client {c} on route {r} not requested", client=c, route=r))
                    continue
                if c in seen and seen[c] != r:
                    out.append(Violation("coverage", t, f"client {c} on routes {seen[c]} and {r}", client=c, route=r))
                seen.setdefault(c, r)
                load += demand_of[c]
            if load > cap:
                out.append(Violation("capacity", t, f"route {r} load {load} > {cap}", route=r))
            if route.load != load:
                out.append(Violation("load", t, f"route {r} stores load {route.load}, actual {load}", route=r))
            if all(0 <= c < n for c in route.clients):
                actual = route_distance(route.clients, matrix)
                if actual != route.distance:
                    out.append(Violation("distance", t, f"route {r} stores {route.distance}, actual {actual}", route=r))
            total += route.distance
        for c in period.clients:
            if c not in seen:
                out.append(Violation("coverage", t, f"client {c} not served", client=c))
        if plan.total_distance != total:
            out.append(Violation("distance", t, f"plan total {plan.total_distance} != sum of routes {total}"))
    if asg is not None:
        out.extend(validate_assignment(plans, asg, instance.m if m is None else m))
    return out


def validate_assignment(plans: Sequence[PeriodPlan], asg: Assignment, m: Optional[int]) -> list[Violation]:
    out: list[Violation] = []
    if len(asg) != len(plans):
        return [Violation("shape", -1, f"assignment covers {len(asg)} periods, plans {len(plans)}")]
    for t, (plan, drivers) in enumerate(zip(plans, asg)):
        if len(drivers) != len(plan.routes):
            out.append(Violation("shape", t, f"{len(drivers)} drivers for {len(plan.routes)} routes"))
            continue
        owner: dict[int, int] = {}
        for r, k in enumerate(drivers):
            if m is not None and not 0 <= k < m:
                out.append(Violation("driver-range", t, f"route {r} given to driver {k} outside 0..{m - 1}", route=r, driver=k))
            if k in owner:
                out.append(Violation("driver-conflict", t, f"driver {k} operates routes {owner[k]} and {r}", route=r, driver=k))
            else:
                owner[k] = r
    return out
