import random

import pytest

from mvrpb.cvrp import period_seed, solve_all_periods, solve_exact_small, solve_heuristic
from mvrpb.errors import InfeasibleClient, PeriodError, Timeout, TooLarge
from mvrpb.instances import generate_mvrpb, synthetic_base
from mvrpb.model import Budget, CvrpBase, MvrpbInstance, PeriodDemand, PeriodProblem, validate_solution

from oracles import cvrp_ordered_partitions


def random_instance(rng, n, capacity=None):
    coords = [(rng.randint(0, 100), rng.randint(0, 100)) for _ in range(n + 1)]
    demand = [0] + [rng.randint(1, 10) for _ in range(n)]
    Q = capacity or rng.randint(max(demand), sum(demand))
    base = CvrpBase("r", coords, demand, Q)
    return MvrpbInstance(base, (PeriodDemand(tuple(range(1, n + 1)), tuple(demand[1:])),))


def test_single_client():
    inst = random_instance(random.Random(0), 1)
    d = inst.matrix()
    for solve in (solve_exact_small, solve_heuristic):
        plan = solve(inst.period_problem(0))
        assert [r.clients for r in plan.routes] == [(1,)]
        assert plan.total_distance == 2 * d[0, 1]


def test_two_clients_formula():
    rng = random.Random(3)
    for _ in range(20):
        inst = random_instance(rng, 2, capacity=100)
        d = inst.matrix()
        want = min(2 * d[0, 1] + 2 * d[0, 2], d[0, 1] + d[1, 2] + d[2, 0])
        assert solve_exact_small(inst.period_problem(0)).total_distance == want


def test_full_demand_forces_singletons():
    base = CvrpBase("s", ((0, 0), (5, 0), (0, 5), (5, 5)), (0, 7, 7, 7), 7)
    inst = MvrpbInstance(base, (PeriodDemand((1, 2, 3), (7, 7, 7)),))
    for solve in (solve_exact_small, solve_heuristic):
        plan = solve(inst.period_problem(0))
        assert len(plan.routes) == 3
        assert validate_solution(inst, [plan]) == []


def test_exact_matches_ordered_partitions():
    rng = random.Random(11)
    for n in range(1, 7):
        inst = random_instance(rng, n)
        d = inst.matrix()
        p = inst.periods[0]
        want = cvrp_ordered_partitions(p.clients, p.demand_of(), inst.base.capacity, lambda a, b: int(d[a, b]))
        plan = solve_exact_small(inst.period_problem(0))
        assert plan.total_distance == want
        assert plan.proven_optimal
        assert validate_solution(inst, [plan]) == []


def test_heuristic_never_beats_exact_on_8_clients():
    rng = random.Random(8)
    for _ in range(5):
        inst = random_instance(rng, 8)
        ex = solve_exact_small(inst.period_problem(0))
        h = solve_heuristic(inst.period_problem(0), iterations=50, seed=1)
        assert h.total_distance >= ex.total_distance
        assert not h.proven_optimal
        assert validate_solution(inst, [h]) == []


def test_exact_size_cap_and_timeout():
    inst = random_instance(random.Random(1), 13)
    with pytest.raises(TooLarge):
        solve_exact_small(inst.period_problem(0))
    inst = random_instance(random.Random(1), 12, capacity=10**6)
    with pytest.raises(Timeout):
        solve_exact_small(inst.period_problem(0), time_limit=0.0)


def test_infeasible_client():
    inst = random_instance(random.Random(0), 3, capacity=100)
    p = inst.period_problem(0)
    bad = PeriodProblem(p.clients, (1, 200, 1), 100, p.matrix)
    for solve in (solve_exact_small, solve_heuristic):
        with pytest.raises(InfeasibleClient):
            solve(bad)


def test_heuristic_is_deterministic():
    inst = generate_mvrpb(synthetic_base(40, seed=2), 1, 20, seed=3)
    a = solve_heuristic(inst.period_problem(0), iterations=60, seed=7)
    b = solve_heuristic(inst.period_problem(0), iterations=60, seed=7)
    assert a == b


def test_solve_all_periods_exact_equals_per_period():
    inst = generate_mvrpb(synthetic_base(30, seed=5), 3, 7, seed=2)
    plans = solve_all_periods(inst, "exact")
    for t, plan in enumerate(plans):
        assert plan.total_distance == solve_exact_small(inst.period_problem(t)).total_distance
    assert validate_solution(inst, plans) == []


def test_solve_all_periods_single_period():
    inst = generate_mvrpb(synthetic_base(30, seed=5), 1, 9, seed=2)
    budget = Budget(iterations=40)
    assert solve_all_periods(inst, "heuristic", budget, seed=4) == [
        solve_heuristic(inst.period_problem(0), 40, None, period_seed(4, 0))
    ]


def test_solve_all_periods_order_independent():
    inst = generate_mvrpb(synthetic_base(30, seed=5), 4, 9, seed=2)
    budget = Budget(iterations=30)
    plans = solve_all_periods(inst, "exact", budget)
    perm = [2, 0, 3, 1]
    shuffled = MvrpbInstance(inst.base, tuple(inst.periods[i] for i in perm))
    back = solve_all_periods(shuffled, "exact", budget)
    assert [back[perm.index(t)] for t in range(4)] == plans


def test_solve_all_periods_workers_do_not_change_output():
    inst = generate_mvrpb(synthetic_base(30, seed=5), 3, 12, seed=2)
    budget = Budget(iterations=30)
    assert solve_all_periods(inst, "heuristic", budget, 3, workers=1) == solve_all_periods(
        inst, "heuristic", budget, 3, workers=2
    )


def test_exact_mode_rejects_large_period_with_tag():
    inst = generate_mvrpb(synthetic_base(30, seed=5), 2, 14, seed=2)
    with pytest.raises(PeriodError) as err:
        solve_all_periods(inst, "exact")
    assert err.value.period == 0
