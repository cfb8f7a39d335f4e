import dataclasses
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatplan.model import TECHNOLOGIES, CellRecord, InvalidInputError, PriceVector, Technology
from heatplan.optimizer import (
    Plan,
    SolverTag,
    assignment_count,
    brute_force,
    build_plan,
    plan_cost_ticks,
    solve_deterministic,
    solve_robust,
)
from heatplan.uncertainty import UncertaintyBox, box_vertices, sample_prices, worst_case_prices

from instances import TABLE1, enumeration_oracle, params_with, random_budget, random_cells, random_prices

NOMINAL = TABLE1.nominal


def test_empty_instance():
    plan = solve_deterministic([], TABLE1.params, NOMINAL)
    assert plan.assignment == {} and plan.objective == 0 and plan.de_capacity_used == 0


def test_two_cell_example():
    cells = [
        CellRecord("x", 2_000_000, 1000, 8000),        # long streets: DE
        CellRecord("y", 2_000_000, 1000, 8000, True),  # same cell, locked in
    ]
    plan = solve_deterministic(cells, TABLE1.params, NOMINAL)
    assert plan.assignment["x"] is Technology.DE
    assert plan.assignment["y"] in (Technology.CE, Technology.CG)
    assert plan.de_capacity_used == 1000
    tight = solve_deterministic(cells, params_with(budget=999), NOMINAL)
    assert tight.assignment["x"] is not Technology.DE
    assert tight.objective > plan.objective


def test_zero_budget_means_no_de():
    rng = random.Random(1)
    cells = random_cells(rng, 30)
    plan = solve_deterministic(cells, params_with(budget=0), NOMINAL)
    assert Technology.DE not in plan.assignment.values()
    assert plan.de_capacity_used == 0


def test_assignment_count_and_brute_force_guard():
    cells = [CellRecord("a", 10, 1, 1), CellRecord("b", 10, 1, 1, True)]
    assert assignment_count(cells) == 8
    assert assignment_count([]) == 1
    many = random_cells(random.Random(0), 13)
    with pytest.raises(InvalidInputError, match="limited to 12"):
        brute_force(many, TABLE1.params, NOMINAL)


def test_duplicate_ids_rejected():
    cells = [CellRecord("a", 10, 1, 1), CellRecord("a", 20, 2, 1)]
    for solver in ("dp", "bb", "brute"):
        with pytest.raises(InvalidInputError, match="duplicate"):
            solve_deterministic(cells, TABLE1.params, NOMINAL, solver)


def test_solvers_agree_with_enumeration():
    rng = random.Random(2024)
    for _ in range(60):
        cells = random_cells(rng, rng.randint(1, 8))
        params = params_with(budget=random_budget(rng, cells))
        prices = random_prices(rng)
        ticks, assignment = enumeration_oracle(cells, params, prices)
        for solver in ("dp", "bb", "brute"):
            plan = solve_deterministic(cells, params, prices, solver)
            assert plan.objective_ticks == ticks, solver
            assert dict(plan.assignment) == assignment, solver
            assert plan.solver_tag is SolverTag(solver)


def test_plan_fields_consistent():
    rng = random.Random(7)
    cells = random_cells(rng, 25)
    params = params_with(budget=5000)
    plan = solve_deterministic(cells, params, NOMINAL)
    assert list(plan.assignment) == [c.id for c in cells]
    assert plan.objective_ticks == plan_cost_ticks(plan, cells, params, NOMINAL)
    assert plan.de_capacity_used == math.fsum(c.peak_load for c in cells if plan.assignment[c.id] is Technology.DE)
    assert plan.de_capacity_used <= params.expansion_budget
    assert plan.prices_used == NOMINAL
    assert plan.infrastructure_capex == math.fsum(b.infrastructure_capex for b in plan.breakdowns.values())


def test_build_plan_validation():
    cells = [CellRecord("a", 2_000_000, 1000, 8000), CellRecord("b", 10, 1, 1, True)]
    params = params_with(budget=500)
    with pytest.raises(InvalidInputError, match="missing"):
        build_plan(cells, {"a": Technology.CE}, params, NOMINAL)
    with pytest.raises(InvalidInputError, match="district heating"):
        build_plan(cells, {"a": Technology.CE, "b": Technology.DG}, params, NOMINAL)
    with pytest.raises(InvalidInputError, match="exceeds budget"):
        build_plan(cells, {"a": Technology.DE, "b": Technology.CE}, params, NOMINAL)
    plan = build_plan(cells, {"a": "cg", "b": "ce"}, params, NOMINAL)
    assert plan.solver_tag is SolverTag.GIVEN
    with pytest.raises(InvalidInputError, match="exactly"):
        plan.check(cells[:1])


def test_plan_invariants_enforced():
    cells = [CellRecord("a", 100, 1, 1)]
    plan = build_plan(cells, {"a": Technology.CE}, TABLE1.params, NOMINAL)
    with pytest.raises(InvalidInputError):
        dataclasses.replace(plan, objective_ticks=plan.objective_ticks + 1)
    with pytest.raises(InvalidInputError):
        dataclasses.replace(plan, de_capacity_used=1e12)


def test_granularity_keeps_feasibility():
    rng = random.Random(4)
    cells = random_cells(rng, 40)
    params = params_with(budget=10_000)
    exact = solve_deterministic(cells, params, NOMINAL)
    coarse = solve_deterministic(cells, params, NOMINAL, granularity=250)
    assert coarse.de_capacity_used <= 10_000
    assert coarse.objective >= exact.objective


# ------------------------------------------------------------------ robust

def test_robust_equals_deterministic_at_upper_vertex():
    rng = random.Random(8)
    cells = random_cells(rng, 30)
    box = UncertaintyBox(NOMINAL, 0.5, 2.0)
    robust = solve_robust(cells, TABLE1.params, box)
    direct = solve_deterministic(cells, TABLE1.params, worst_case_prices(box))
    assert robust.assignment == direct.assignment and robust.objective_ticks == direct.objective_ticks


def test_robust_objective_bounds_every_vertex_and_sample():
    rng = random.Random(9)
    for trial in range(10):
        cells = random_cells(rng, 12)
        params = params_with(budget=random_budget(rng, cells))
        box = UncertaintyBox(random_prices(rng), rng.choice([0, 0.3, 1.0]), rng.choice([0, 0.5, 2.0]))
        plan = solve_robust(cells, params, box)
        worst = max(plan_cost_ticks(plan, cells, params, p) for p in box_vertices(box))
        assert worst == plan.objective_ticks
        for p in sample_prices(box, 200, trial):
            assert plan_cost_ticks(plan, cells, params, p) <= plan.objective_ticks


def test_robust_min_max_by_enumeration():
    # the robust plan minimizes the worst vertex cost over all assignments
    rng = random.Random(10)
    for _ in range(15):
        cells = random_cells(rng, 5)
        params = params_with(budget=random_budget(rng, cells))
        box = UncertaintyBox(random_prices(rng), 0.5, 1.5)
        plan = solve_robust(cells, params, box)
        ticks, _ = enumeration_oracle(cells, params, worst_case_prices(box))
        assert plan.objective_ticks == ticks


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), d_el=st.floats(0, 1), d_h2=st.floats(0, 2),
       extra_el=st.floats(0, 1), extra_h2=st.floats(0, 1))
def test_objective_monotone_in_deviation(seed, d_el, d_h2, extra_el, extra_h2):
    rng = random.Random(seed)
    cells = random_cells(rng, 15)
    params = params_with(budget=random_budget(rng, cells))
    small = solve_robust(cells, params, UncertaintyBox(NOMINAL, d_el, d_h2))
    large = solve_robust(cells, params, UncertaintyBox(NOMINAL, d_el + extra_el, d_h2 + extra_h2))
    assert small.objective_ticks <= large.objective_ticks


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), d1=st.floats(0, 3), extra=st.floats(0, 3))
def test_hydrogen_set_shrinks_with_hydrogen_deviation(seed, d1, extra):
    # unlimited DE budget: cells are independent and each reacts monotonically
    rng = random.Random(seed)
    cells = random_cells(rng, 20, dh_rate=0.0)
    params = params_with(budget=math.inf)
    hydro = {Technology.CG, Technology.DG}
    a = solve_robust(cells, params, UncertaintyBox(NOMINAL, 0.5, d1))
    b = solve_robust(cells, params, UncertaintyBox(NOMINAL, 0.5, d1 + extra))
    set_a = {c for c, t in a.assignment.items() if t in hydro}
    set_b = {c for c, t in b.assignment.items() if t in hydro}
    assert set_b <= set_a


def test_plan_cost_accepts_mapping():
    cells = [CellRecord("a", 100, 1, 1)]
    prices = PriceVector(0.1, 0.1, 0.1, 0.1)
    plan = build_plan(cells, {"a": Technology.CG}, TABLE1.params, prices)
    assert plan_cost_ticks({"a": Technology.CG}, cells, TABLE1.params, prices) == plan.objective_ticks
    assert isinstance(plan, Plan)
    assert set(TECHNOLOGIES) >= set(plan.assignment.values())
