"""
Exact solvers for the cell-wise technology assignment.

Each cell takes exactly one technology and the only constraint coupling cells
is the kW budget on decentralized heat pumps (DE).  Every cell therefore
takes its cheapest allowed non-DE technology unless it is switched to DE, and
choosing which cells to switch is a 0/1 knapsack: weight = peak load,
value = yearly saving, capacity = DE budget.

All solvers return the same *canonical* optimum.  Costs are compared in
integer micro-euro ticks (see :func:`heatplan.model.cost_ticks`); among plans
with equal cost the one whose DE indicator vector, read in cell-id order, is
lexicographically smallest wins, and remaining ties go to the earlier
technology in the order CE < CG < DE < DG.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from bisect import bisect_right
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .model import (
    TECHNOLOGIES,
    CellRecord,
    CostBreakdown,
    CostParameters,
    InvalidInputError,
    PriceVector,
    Technology,
    allowed_technologies,
    annualized_cost,
    check_unique_ids,
    cost_matrix,
    ticks_to_eur,
)
from .lpfile import export_lp
from .uncertainty import UncertaintyBox, worst_case_prices

BRUTE_FORCE_MAX_CELLS = 12
DEFAULT_MAX_TABLE_BITS = 400_000_000  # 50 MB of packed DP decisions

CostTable = Mapping[str, Mapping[Technology, CostBreakdown]]


class GranularityError(ValueError):
    """The DP table at the requested granularity would be too large."""


class SolverTag(str, enum.Enum):
    DP = "dp"
    BB = "bb"
    BRUTE = "brute"
    GIVEN = "given"  # plan built from an externally supplied assignment


@dataclass(frozen=True)
class KnapsackItem:
    cell_id: str
    weight: float  # kW
    saving: int  # ticks per year

    @property
    def saving_eur(self) -> float:
        return ticks_to_eur(self.saving)


@dataclass(frozen=True)
class KnapsackInstance:
    """Knapsack view of one deterministic problem.

    ``items`` holds the cells where DE is strictly cheaper than every allowed
    alternative, sorted by cell id.  ``forced`` holds such cells with zero
    peak load: they cost no budget and are always switched.  ``base_cost`` is
    the tick total when every cell takes ``base_choice``.
    """

    items: tuple[KnapsackItem, ...]
    capacity: float
    base_cost: int
    base_choice: Mapping[str, Technology]
    forced: tuple[KnapsackItem, ...] = ()

    def __post_init__(self):
        if any(item.weight <= 0 for item in self.items):
            raise InvalidInputError("knapsack items must have positive weight")
        if math.isnan(self.capacity) or self.capacity < 0:
            raise InvalidInputError(f"knapsack capacity must be >= 0, got {self.capacity!r}")

    def objective_ticks(self, selected: Sequence[str]) -> int:
        savings = {item.cell_id: item.saving for item in self.items}
        total = sum(savings[cell_id] for cell_id in selected)
        return self.base_cost - total - sum(item.saving for item in self.forced)


@dataclass(frozen=True)
class KnapsackSolution:
    selected: tuple[str, ...]
    saving: int
    nodes: int = 0


@dataclass(frozen=True)
class Plan:
    """One technology per cell plus its cost accounting."""

    assignment: Mapping[str, Technology]
    breakdowns: Mapping[str, CostBreakdown]
    objective_ticks: int
    de_capacity_used: float
    expansion_budget: float
    prices_used: PriceVector
    solver_tag: SolverTag

    def __post_init__(self):
        if list(self.assignment) != list(self.breakdowns):
            raise InvalidInputError("plan assignment and breakdowns cover different cells")
        ticks = sum(b.ticks for b in self.breakdowns.values())
        if ticks != self.objective_ticks:
            raise InvalidInputError(f"plan objective {self.objective_ticks} != sum of cell costs {ticks}")
        if self.de_capacity_used > self.expansion_budget:
            raise InvalidInputError(
                f"DE capacity {self.de_capacity_used} kW exceeds budget {self.expansion_budget} kW")

    @property
    def objective(self) -> float:
        """Yearly cost in EUR."""
        return ticks_to_eur(self.objective_ticks)

    @property
    def infrastructure_capex(self) -> float:
        return math.fsum(b.infrastructure_capex for b in self.breakdowns.values())

    def check(self, cells: Sequence[CellRecord]) -> None:
        """Validate the plan against the cells it was solved for."""
        ids = [cell.id for cell in cells]
        if sorted(ids) != sorted(self.assignment):
            raise InvalidInputError("plan does not cover exactly the given cells")
        de_used = []
        for cell in cells:
            tech = self.assignment[cell.id]
            if tech not in allowed_technologies(cell):
                raise InvalidInputError(f"cell {cell.id} has district heating but was assigned {tech.value}")
            if tech is Technology.DE:
                de_used.append(cell.peak_load)
        used = math.fsum(de_used)
        if used != self.de_capacity_used:
            raise InvalidInputError(f"recorded DE capacity {self.de_capacity_used} != recount {used}")
        if used > self.expansion_budget:
            raise InvalidInputError(f"DE capacity {used} kW exceeds budget {self.expansion_budget} kW")


def _best_non_de(costs: Mapping[Technology, CostBreakdown], allowed) -> Technology:
    options = [t for t in TECHNOLOGIES if t in allowed and t is not Technology.DE]
    return min(options, key=lambda t: (costs[t].ticks, t.rank))


def reduce_to_knapsack(cells: Sequence[CellRecord], params: CostParameters, prices: PriceVector,
                       costs: CostTable | None = None) -> KnapsackInstance:
    if costs is None:
        costs = cost_matrix(cells, params, prices)
    base_choice: dict[str, Technology] = {}
    base_cost = 0
    items, forced = [], []
    for cell in cells:
        cell_costs = costs[cell.id]
        allowed = allowed_technologies(cell)
        base = _best_non_de(cell_costs, allowed)
        base_choice[cell.id] = base
        base_cost += cell_costs[base].ticks
        if Technology.DE not in allowed:
            continue
        saving = cell_costs[base].ticks - cell_costs[Technology.DE].ticks
        if saving <= 0:
            continue
        item = KnapsackItem(cell.id, cell.peak_load, saving)
        (items if cell.peak_load > 0 else forced).append(item)
    items.sort(key=lambda item: item.cell_id)
    forced.sort(key=lambda item: item.cell_id)
    return KnapsackInstance(tuple(items), params.expansion_budget, base_cost, base_choice, tuple(forced))


def _take_all(instance: KnapsackInstance) -> KnapsackSolution | None:
    if math.fsum(item.weight for item in instance.items) <= instance.capacity:
        return KnapsackSolution(tuple(item.cell_id for item in instance.items),
                                sum(item.saving for item in instance.items))
    return None


def _bit(row: np.ndarray, c: int) -> bool:
    return bool((row[c >> 3] >> (7 - (c & 7))) & 1)


def _dp_packing(weights: list[int], savings: list[int], cap: int) -> list[bool]:
    # best[c]: max saving from the items after k within capacity c
    best = np.zeros(cap + 1, dtype=np.int64)
    rows: list[np.ndarray | None] = [None] * len(weights)
    for k in range(len(weights) - 1, -1, -1):
        w, s = weights[k], savings[k]
        if w > cap:
            continue
        candidate = best[: cap + 1 - w] + s
        take = candidate > best[w:]
        best[w:] = np.where(take, candidate, best[w:])
        row = np.zeros(cap + 1, dtype=bool)
        row[w:] = take
        rows[k] = np.packbits(row)
    chosen, c = [], cap
    for k, row in enumerate(rows):
        take = row is not None and _bit(row, c)
        chosen.append(take)
        if take:
            c -= weights[k]
    return chosen


def _dp_covering(weights: list[int], savings: list[int], shortfall: int) -> list[bool]:
    # lost[d]: min saving given up by dropping items after k so that at least d units are freed
    inf = np.int64(2**62)
    lost = np.full(shortfall + 1, inf, dtype=np.int64)
    lost[0] = 0
    rows: list[np.ndarray] = [None] * len(weights)  # type: ignore[list-item]
    for k in range(len(weights) - 1, -1, -1):
        w, s = weights[k], savings[k]
        shifted = np.empty_like(lost)
        head = min(w, shortfall + 1)
        shifted[:head] = lost[0]
        shifted[head:] = lost[: shortfall + 1 - head]
        candidate = np.minimum(shifted + s, inf)
        drop = candidate <= lost
        lost = np.where(drop, candidate, lost)
        rows[k] = np.packbits(drop)
    chosen, d = [], shortfall
    for k, row in enumerate(rows):
        drop = _bit(row, d)
        chosen.append(not drop)
        if drop:
            d = max(0, d - weights[k])
    return chosen


def solve_knapsack_dp(instance: KnapsackInstance, granularity: float = 1.0,
                      max_table_bits: int = DEFAULT_MAX_TABLE_BITS) -> KnapsackSolution:
    """Dynamic program over capacity in units of ``granularity`` kW.

    Weights are rounded up and the capacity down, so the result is always
    feasible; with integer kW inputs and ``granularity=1`` it is exact.

    When the budget is only slightly short of the total item weight the
    table is built over the weight that has to be *dropped* instead, which
    is much narrower.  Either way items are processed from the last id
    backwards and the forward reconstruction leaves an item out whenever
    that is still optimal, which yields the canonical optimum.
    """
    if not granularity >= 1:
        raise InvalidInputError(f"granularity must be >= 1 kW, got {granularity!r}")
    trivial = _take_all(instance)
    if trivial is not None:
        return trivial

    items = instance.items
    weights = [math.ceil(item.weight / granularity) for item in items]
    savings = [item.saving for item in items]
    total = sum(weights)
    cap = min(math.floor(instance.capacity / granularity), total)
    shortfall = total - cap
    width = min(cap, shortfall) + 1
    needed = len(items) * width
    if needed > max_table_bits:
        raise GranularityError(
            f"granularity too fine: DP table needs {len(items)} x {width} = {needed} entries "
            f"(limit {max_table_bits}); use a coarser granularity or the bb solver")
    if sum(savings) >= 2**62:
        raise InvalidInputError("savings too large for the int64 DP table")

    if shortfall == 0:
        chosen = [True] * len(items)
    elif shortfall < cap:
        chosen = _dp_covering(weights, savings, shortfall)
    else:
        chosen = _dp_packing(weights, savings, cap)
    selected = tuple(item.cell_id for item, take in zip(items, chosen) if take)
    saving = sum(s for s, take in zip(savings, chosen) if take)
    return KnapsackSolution(selected, saving)


def _exact(values: Sequence[float]) -> list:
    if all(float(v).is_integer() for v in values):
        return [int(v) for v in values]
    return [Fraction(v) for v in values]


def solve_knapsack_bb(instance: KnapsackInstance) -> KnapsackSolution:
    """Depth-first branch and bound with the fractional (LP) relaxation as bound.

    The canonical tie-break is folded into the item values: item ``i`` (in id
    order, ``m`` items) is worth ``saving * 2**m - 2**(m-1-i)``, which keeps
    the ordering by total saving and makes distinct selections never tie.
    """
    items = instance.items
    m = len(items)
    if m == 0:
        return KnapsackSolution((), 0, 1)
    *weights, capacity = _exact([item.weight for item in items] + [min(instance.capacity, 2**62)])
    values = [(item.saving << m) - (1 << (m - 1 - i)) for i, item in enumerate(items)]

    order = sorted(range(m), key=lambda i: (-Fraction(values[i]) / weights[i], i))
    w_sorted = [weights[i] for i in order]
    v_sorted = [values[i] for i in order]
    prefix_w, prefix_v = [0], [0]
    for w, v in zip(w_sorted, v_sorted):
        prefix_w.append(prefix_w[-1] + w)
        prefix_v.append(prefix_v[-1] + v)

    def bound(k: int, cap_left) -> Fraction | int:
        # greedy fill from sorted position k, then a fractional piece of the next item
        j = bisect_right(prefix_w, prefix_w[k] + cap_left, lo=k) - 1
        value = prefix_v[j] - prefix_v[k]
        if j < m:
            rest = cap_left - (prefix_w[j] - prefix_w[k])
            value += Fraction(rest) * v_sorted[j] / w_sorted[j]
        return value

    best_value, best_mask = 0, 0
    nodes = 0
    stack = [(0, capacity, 0, 0)]
    while stack:
        k, cap_left, value, mask = stack.pop()
        nodes += 1
        if value > best_value:
            best_value, best_mask = value, mask
        if k == m or value + bound(k, cap_left) <= best_value:
            continue
        stack.append((k + 1, cap_left, value, mask))
        if w_sorted[k] <= cap_left:
            stack.append((k + 1, cap_left - w_sorted[k], value + v_sorted[k], mask | (1 << order[k])))

    selected = tuple(items[i].cell_id for i in range(m) if best_mask >> i & 1)
    saving = sum(items[i].saving for i in range(m) if best_mask >> i & 1)
    return KnapsackSolution(selected, saving, nodes)


def build_plan(cells: Sequence[CellRecord], assignment: Mapping[str, Technology], params: CostParameters,
               prices: PriceVector, solver_tag: SolverTag = SolverTag.GIVEN,
               costs: CostTable | None = None) -> Plan:
    """Cost out a given assignment and validate it against the constraints."""
    if costs is None:
        costs = cost_matrix(cells, params, prices)
    missing = [cell.id for cell in cells if cell.id not in assignment]
    if missing:
        raise InvalidInputError(f"assignment is missing cells: {', '.join(missing[:5])}")
    ordered = {cell.id: Technology(assignment[cell.id]) for cell in cells}
    breakdowns = {cell_id: costs[cell_id][tech] for cell_id, tech in ordered.items()}
    de_used = math.fsum(cell.peak_load for cell in cells if ordered[cell.id] is Technology.DE)
    plan = Plan(
        assignment=ordered,
        breakdowns=breakdowns,
        objective_ticks=sum(b.ticks for b in breakdowns.values()),
        de_capacity_used=de_used,
        expansion_budget=params.expansion_budget,
        prices_used=prices,
        solver_tag=SolverTag(solver_tag),
    )
    plan.check(cells)
    return plan


def solve_deterministic(cells: Sequence[CellRecord], params: CostParameters, prices: PriceVector,
                        solver: str = "dp", granularity: float = 1.0) -> Plan:
    """Cheapest feasible plan at fixed prices.

    ``solver`` is ``"dp"``, ``"bb"`` or ``"brute"``.  The problem is always
    feasible because CE is allowed in every cell and the budget only limits DE.
    """
    tag = SolverTag(solver)
    if tag is SolverTag.BRUTE:
        return brute_force(cells, params, prices)
    if tag is SolverTag.GIVEN:
        raise InvalidInputError("'given' is not a solver")
    check_unique_ids(cells)
    costs = cost_matrix(cells, params, prices)
    instance = reduce_to_knapsack(cells, params, prices, costs)
    if tag is SolverTag.DP:
        solution = solve_knapsack_dp(instance, granularity)
    else:
        solution = solve_knapsack_bb(instance)
    assignment = dict(instance.base_choice)
    for cell_id in solution.selected:
        assignment[cell_id] = Technology.DE
    for item in instance.forced:
        assignment[item.cell_id] = Technology.DE
    return build_plan(cells, assignment, params, prices, tag, costs)


def solve_robust(cells: Sequence[CellRecord], params: CostParameters, box: UncertaintyBox,
                 solver: str = "dp", granularity: float = 1.0) -> Plan:
    """Min-max plan over the price box, solved at its upper vertex.

    The returned objective bounds the yearly cost of the plan for every price
    vector in ``box``.
    """
    return solve_deterministic(cells, params, worst_case_prices(box), solver, granularity)


def assignment_count(cells: Sequence[CellRecord]) -> int:
    """Number of assignments that respect the district-heating lock-in."""
    return math.prod(len(allowed_technologies(cell)) for cell in cells)


def brute_force(cells: Sequence[CellRecord], params: CostParameters, prices: PriceVector,
                max_cells: int = BRUTE_FORCE_MAX_CELLS, chunk: int = 1 << 18) -> Plan:
    """Enumerate every assignment that respects the district-heating lock-in.

    Independent of the knapsack reduction; intended as a test oracle.
    """
    cells = list(cells)
    if len(cells) > max_cells:
        raise InvalidInputError(f"brute force is limited to {max_cells} cells, got {len(cells)}")
    check_unique_ids(cells)
    costs = cost_matrix(cells, params, prices)
    by_id = sorted(cells, key=lambda c: c.id)
    options = [[t for t in TECHNOLOGIES if t in allowed_technologies(c)] for c in by_id]
    radices = [len(o) for o in options]
    tick_table = [np.array([costs[c.id][t].ticks for t in o], dtype=np.int64) for c, o in zip(by_id, options)]
    de_table = [np.array([c.peak_load if t is Technology.DE else 0.0 for t in o]) for c, o in zip(by_id, options)]
    rank_table = [np.array([t.rank for t in o], dtype=np.int8) for o in options]

    total = assignment_count(by_id)
    best_key, best_digits = None, None
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        digits = np.unravel_index(flat, radices) if radices else ()
        ticks = np.zeros(len(flat), dtype=np.int64)
        de_load = np.zeros(len(flat))
        for pos, d in enumerate(digits):
            ticks += tick_table[pos][d]
            de_load += de_table[pos][d]
        feasible = de_load <= params.expansion_budget
        if not feasible.any():
            continue
        lowest = ticks[feasible].min()
        for row in np.flatnonzero(feasible & (ticks == lowest)):
            ranks = tuple(int(rank_table[pos][d[row]]) for pos, d in enumerate(digits))
            key = (int(lowest), tuple(r == Technology.DE.rank for r in ranks), ranks)
            if best_key is None or key < best_key:
                best_key, best_digits = key, [int(d[row]) for d in digits]
    assert best_digits is not None  # all-CE is always feasible
    assignment = {c.id: options[pos][best_digits[pos]] for pos, c in enumerate(by_id)}
    return build_plan(cells, assignment, params, prices, SolverTag.BRUTE, costs)


def plan_cost_ticks(plan_or_assignment, cells: Sequence[CellRecord], params: CostParameters,
                    prices: PriceVector) -> int:
    """Realized yearly cost, in ticks, of a fixed assignment at ``prices``."""
    assignment = getattr(plan_or_assignment, "assignment", plan_or_assignment)
    return sum(annualized_cost(cell, assignment[cell.id], params, prices).ticks for cell in cells)


__all__ = [
    "GranularityError", "SolverTag", "KnapsackItem", "KnapsackInstance", "KnapsackSolution",
    "Plan", "reduce_to_knapsack", "solve_knapsack_dp", "solve_knapsack_bb", "build_plan",
    "solve_deterministic", "solve_robust", "assignment_count", "brute_force", "plan_cost_ticks", "export_lp",
]
