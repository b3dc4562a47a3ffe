"""Benchmark parsing, multi-period instance generation and persistence.

Instance files are JSON::

    {"format": "mvrpb-instance", "version": 1,
     "name": str, "capacity": int, "m": int | null,
     "coords": [[x, y], ...],            # index 0 = depot
     "base_demand": [0, q1, ...],
     "periods": [{"clients": [...], "demands": [...]}, ...],
     "generation": {...}}                # provenance, ignored on equality

Plan files hold one entry per period with its routes (client lists,
distance, load), total distance and the proven-optimal flag.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DepotDemandNonzero,
    InvalidHorizon,
    InvalidPlan,
    MissingSection,
    NonIntegerField,
    ParseError,
    TooFewClients,
)
from .model import CvrpBase, MvrpbInstance, PeriodDemand, PeriodPlan, Route

log = logging.getLogger(__name__)

INSTANCE_FORMAT = "mvrpb-instance"
PLANS_FORMAT = "mvrpb-plans"
SCHEMA_VERSION = 1

_SECTIONS = ("NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION")


def _int(token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        pass
    try:
        value = float(token)
    except ValueError:
        raise NonIntegerField(f"{what}: {token!r} is not a number") from None
    if not value.is_integer():
        raise NonIntegerField(f"{what}: {token!r} is not an integer")
    return int(value)


def parse_cvrp(text: str) -> CvrpBase:
    """Parse a TSPLIB-style CVRP file (EUC_2D, one depot).

    Nodes are renumbered so that the depot becomes index 0 and the remaining
    nodes keep their file order.
    """
    header: dict[str, str] = {}
    sections: dict[str, list[list[str]]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        key = line.split()[0].rstrip(":").upper()
        if key == "EOF":
            break
        if key in _SECTIONS:
            current = key
            sections[current] = []
            continue
        if ":" in line and not re.match(r"^-?\d", line):
            k, _, v = line.partition(":")
            header[k.strip().upper()] = v.strip()
            current = None
            continue
        if current is None:
            raise ParseError(f"unexpected line outside any section: {raw!r}")
        sections[current].append(line.split())

    for key in ("DIMENSION", "CAPACITY"):
        if key not in header:
            raise MissingSection(key)
    for key in ("NODE_COORD_SECTION", "DEMAND_SECTION"):
        if key not in sections:
            raise MissingSection(key)
    ewt = header.get("EDGE_WEIGHT_TYPE", "EUC_2D").upper()
    if ewt != "EUC_2D":
        raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {ewt}")

    dim = _int(header["DIMENSION"], "DIMENSION")
    capacity = _int(header["CAPACITY"], "CAPACITY")
    coords: dict[int, tuple[int, int]] = {}
    for row in sections["NODE_COORD_SECTION"]:
        if len(row) < 3:
            raise ParseError(f"bad coordinate row {row}")
        coords[_int(row[0], "node id")] = (_int(row[1], "x"), _int(row[2], "y"))
    demand: dict[int, int] = {}
    for row in sections["DEMAND_SECTION"]:
        if len(row) < 2:
            raise ParseError(f"bad demand row {row}")
        demand[_int(row[0], "node id")] = _int(row[1], "demand")
    if len(coords) != dim or len(demand) != dim or set(coords) != set(demand):
        raise ParseError(f"DIMENSION {dim} disagrees with the node sections")

    depot_ids = []
    for row in sections.get("DEPOT_SECTION", []):
        for tok in row:
            v = _int(tok, "depot id")
            if v == -1:
                break
            depot_ids.append(v)
    order = list(coords)
    depot = depot_ids[0] if depot_ids else order[0]
    if len(depot_ids) > 1:
        raise ParseError("multiple depots are not supported")
    if depot not in coords:
        raise ParseError(f"depot {depot} has no coordinates")
    if demand[depot] != 0:
        raise DepotDemandNonzero(f"depot {depot} has demand {demand[depot]}")
    order.remove(depot)
    order.insert(0, depot)
    for i in order:
        if demand[i] < 0 or demand[i] > capacity:
            raise ParseError(f"node {i}: demand {demand[i]} outside [0, {capacity}]")
    return CvrpBase(
        name=header.get("NAME", "unnamed"),
        coords=tuple(coords[i] for i in order),
        demand=tuple(demand[i] for i in order),
        capacity=capacity,
    )


def read_cvrp(path) -> CvrpBase:
    return parse_cvrp(Path(path).read_text())


def format_cvrp(base: CvrpBase) -> str:
    lines = [
        f"NAME : {base.name}",
        "TYPE : CVRP",
        f"DIMENSION : {len(base.coords)}",
        "EDGE_WEIGHT_TYPE : EUC_2D",
        f"CAPACITY : {base.capacity}",
        "NODE_COORD_SECTION",
    ]
    lines += [f"{i + 1}\t{x}\t{y}" for i, (x, y) in enumerate(base.coords)]
    lines.append("DEMAND_SECTION")
    lines += [f"{i + 1}\t{q}" for i, q in enumerate(base.demand)]
    lines += ["DEPOT_SECTION", "\t1", "\t-1", "EOF", ""]
    return "\n".join(lines)


def synthetic_base(
    n_clients: int = 60,
    seed: int = 0,
    grid: int = 1000,
    max_demand: int = 100,
    capacity: int = 250,
    depot: str = "center",
    name: str | None = None,
) -> CvrpBase:
    """Random uniform CVRP base, for experiments without benchmark files."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    pts = rng.integers(0, grid + 1, size=(n_clients, 2))
    if depot == "center":
        d = (grid // 2, grid // 2)
    elif depot == "random":
        d = tuple(int(v) for v in rng.integers(0, grid + 1, size=2))
    else:
        raise ValueError(f"unknown depot placement {depot!r}")
    dem = rng.integers(1, max_demand + 1, size=n_clients)
    return CvrpBase(
        name=name or f"S-n{n_clients + 1}-s{seed}",
        coords=(d, *((int(x), int(y)) for x, y in pts)),
        demand=(0, *(int(q) for q in dem)),
        capacity=capacity,
    )


def period_rng(seed: int, t: int) -> np.random.Generator:
    """Independent stream for period ``t``: PCG64 seeded by SeedSequence([seed, t])."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, t])))


def demand_range(d: int) -> tuple[int, int]:
    """Inclusive integer range ``ceil(0.5 d) .. ceil(1.5 d)``."""
    return (d + 1) // 2, (3 * d + 1) // 2


def generate_period(base: CvrpBase, clients_per_period: int, seed: int, t: int) -> tuple[PeriodDemand, int]:
    rng = period_rng(seed, t)
    pool = list(base.clients)
    n = len(pool)
    for i in range(clients_per_period):
        j = i + int(rng.integers(0, n - i))
        pool[i], pool[j] = pool[j], pool[i]
    chosen = sorted(pool[:clients_per_period])
    demands = []
    clamped = 0
    for c in chosen:
        lo, hi = demand_range(base.demand[c])
        q = int(rng.integers(lo, hi + 1))
        if q > base.capacity:
            q = base.capacity
            clamped += 1
        demands.append(max(q, 1))
    return PeriodDemand(tuple(chosen), tuple(demands)), clamped


def generate_mvrpb(base: CvrpBase, T: int, clients_per_period: int, seed: int) -> MvrpbInstance:
    """Draw a ``T``-period instance from ``base``; ``m`` is left unset.

    Each period independently samples ``clients_per_period`` distinct clients
    and redraws their demands uniformly from ``demand_range``. Draws above the
    capacity are clamped to it and counted in ``meta["clamped"]``.
    """
    if T < 1:
        raise InvalidHorizon(f"T must be >= 1, got {T}")
    if not 1 <= clients_per_period <= base.n_clients:
        raise TooFewClients(f"{clients_per_period} clients per period requested, base has {base.n_clients}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    periods = []
    clamped = 0
    for t in range(T):
        p, c = generate_period(base, clients_per_period, seed, t)
        periods.append(p)
        clamped += c
    if clamped:
        log.warning("%s: %d generated demands clamped to capacity %d", base.name, clamped, base.capacity)
    meta = {"seed": seed, "clients_per_period": clients_per_period, "clamped": clamped}
    return MvrpbInstance(base, tuple(periods), None, meta=meta)


def truncate_horizon(inst: MvrpbInstance, T2: int) -> MvrpbInstance:
    if not 1 <= T2 <= inst.horizon:
        raise InvalidHorizon(f"cannot keep {T2} of {inst.horizon} periods")
    return replace(inst, periods=inst.periods[:T2])


def derive_driver_count(plans: Sequence[PeriodPlan]) -> int:
    """Maximum number of routes in any period."""
    if not plans:
        raise InvalidPlan("no plans given")
    for t, plan in enumerate(plans):
        if not plan.routes:
            raise InvalidPlan(f"period {t} has no routes")
    return max(len(p.routes) for p in plans)


# -- persistence -------------------------------------------------------------

def _dumps(obj: dict, row_keys: Sequence[str] = ()) -> str:
    """JSON with one top-level key per line and list-of-record keys one record per line."""
    parts = []
    for k, v in obj.items():
        if k in row_keys:
            rows = ",\n  ".join(json.dumps(r, separators=(", ", ": ")) for r in v)
            parts.append(f"{json.dumps(k)}: [\n  {rows}\n ]" if v else f"{json.dumps(k)}: []")
        else:
            parts.append(f"{json.dumps(k)}: {json.dumps(v, separators=(', ', ': '))}")
    return "{\n " + ",\n ".join(parts) + "\n}\n"


def _check_header(data: dict, fmt: str) -> None:
    if data.get("format") != fmt:
        raise ParseError(f"expected format {fmt!r}, found {data.get('format')!r}")
    if data.get("version") != SCHEMA_VERSION:
        raise ParseError(f"unsupported {fmt} version {data.get('version')!r}")


def instance_to_json(inst: MvrpbInstance) -> str:
    obj = {
        "format": INSTANCE_FORMAT,
        "version": SCHEMA_VERSION,
        "name": inst.base.name,
        "capacity": inst.base.capacity,
        "m": inst.m,
        "coords": [list(c) for c in inst.base.coords],
        "base_demand": list(inst.base.demand),
        "periods": [{"clients": list(p.clients), "demands": list(p.demands)} for p in inst.periods],
        "generation": dict(inst.meta),
    }
    return _dumps(obj, row_keys=("periods",))


def instance_from_json(text: str) -> MvrpbInstance:
    data = json.loads(text)
    _check_header(data, INSTANCE_FORMAT)
    try:
        base = CvrpBase(data["name"], tuple(map(tuple, data["coords"])), tuple(data["base_demand"]), data["capacity"])
        periods = tuple(PeriodDemand(tuple(p["clients"]), tuple(p["demands"])) for p in data["periods"])
    except KeyError as e:
        raise MissingSection(str(e)) from None
    return MvrpbInstance(base, periods, data.get("m"), meta=data.get("generation") or {})


def save_instance(inst: MvrpbInstance, path) -> None:
    Path(path).write_text(instance_to_json(inst))


def load_instance(path) -> MvrpbInstance:
    return instance_from_json(Path(path).read_text())


def plans_to_json(plans: Sequence[PeriodPlan], name: str = "") -> str:
    obj = {
        "format": PLANS_FORMAT,
        "version": SCHEMA_VERSION,
        "instance": name,
        "periods": [
            {
                "total_distance": p.total_distance,
                "proven_optimal": p.proven_optimal,
                "routes": [{"clients": list(r.clients), "distance": r.distance, "load": r.load} for r in p.routes],
            }
            for p in plans
        ],
    }
    return _dumps(obj, row_keys=("periods",))


def plans_from_json(text: str) -> tuple[list[PeriodPlan], str]:
    data = json.loads(text)
    _check_header(data, PLANS_FORMAT)
    plans = []
    for p in data["periods"]:
        routes = tuple(Route(tuple(r["clients"]), int(r["distance"]), int(r["load"])) for r in p["routes"])
        plans.append(PeriodPlan(routes, bool(p["proven_optimal"]), int(p["total_distance"])))
    return plans, data.get("instance", "")


def save_plans(plans: Sequence[PeriodPlan], path, name: str = "") -> None:
    Path(path).write_text(plans_to_json(plans, name))


def load_plans(path) -> tuple[list[PeriodPlan], str]:
    return plans_from_json(Path(path).read_text())
