"""Deviation sweeps and Monte Carlo checks of robust plans."""
from __future__ import annotations

import csv
import io as _stdio
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import (
    TECHNOLOGIES,
    TICKS_PER_EUR,
    CellRecord,
    CostParameters,
    InvalidInputError,
    PriceVector,
    Technology,
    grid_driver,
)
from .optimizer import Plan, solve_deterministic, solve_robust
from .uncertainty import UncertaintyBox, price_arrays

SWEEP_HEADER = (
    ["delta_hydrogen", "delta_electricity"]
    + [f"capacity_{t.value}_kw" for t in TECHNOLOGIES]
    + ["infrastructure_capex_eur", "capex_increase", "objective_eur_a", "de_budget_utilization"]
)


@dataclass(frozen=True)
class SweepRecord:
    delta_hydrogen: float
    delta_electricity: float
    capacity_by_tech: Mapping[Technology, float]
    infrastructure_capex_total: float
    objective: float
    de_budget_utilization: float
    plan: Plan = field(repr=False, compare=False, default=None)  # type: ignore[assignment]


def deviation_grid(start: float, stop: float, step: float) -> list[float]:
    """Evenly spaced deviations from ``start`` to ``stop`` inclusive, rounded to 10 places."""
    if step <= 0:
        raise InvalidInputError(f"step must be > 0, got {step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(max(count, 0))]


def capacity_by_technology(plan: Plan, cells: Sequence[CellRecord]) -> dict[Technology, float]:
    """Summed peak load per assigned technology, in kW."""
    loads: dict[Technology, list[float]] = {tech: [] for tech in TECHNOLOGIES}
    for cell in cells:
        if cell.id not in plan.assignment:
            raise InvalidInputError(f"cell {cell.id} is not covered by the plan")
        loads[plan.assignment[cell.id]].append(cell.peak_load)
    return {tech: math.fsum(values) for tech, values in loads.items()}


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit value, else ``HEATPLAN_THREADS`` (0 = one per CPU), else 1."""
    if workers is None:
        raw = os.environ.get("HEATPLAN_THREADS", "").strip()
        workers = int(raw) if raw else 1
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def sweep_deviation(cells: Sequence[CellRecord], params: CostParameters, nominal: PriceVector,
                    h2_deltas: Sequence[float], el_delta: float, solver: str = "dp",
                    workers: int | None = 1) -> list[SweepRecord]:
    """Solve the robust problem once per hydrogen deviation.

    Records come back sorted by ``delta_hydrogen``.  Points are independent
    and may be solved on several threads.
    """
    if not h2_deltas:
        raise InvalidInputError("h2_deltas must not be empty")
    deltas = sorted(h2_deltas)
    boxes = [UncertaintyBox(nominal, el_delta, d) for d in deltas]
    budget = params.expansion_budget

    def point(box: UncertaintyBox) -> SweepRecord:
        plan = solve_robust(cells, params, box, solver)
        capacity = capacity_by_technology(plan, cells)
        return SweepRecord(
            delta_hydrogen=box.delta_hydrogen,
            delta_electricity=box.delta_electricity,
            capacity_by_tech=capacity,
            infrastructure_capex_total=plan.infrastructure_capex,
            objective=plan.objective,
            de_budget_utilization=(plan.de_capacity_used / budget) if 0 < budget < math.inf else 0.0,
            plan=plan,
        )

    n = resolve_workers(workers)
    if n == 1 or len(boxes) == 1:
        return [point(box) for box in boxes]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(point, boxes))


def cost_increase_curve(records: Sequence[SweepRecord]) -> list[tuple[float, float]]:
    """Relative infrastructure capex increase over the first record."""
    if not records:
        raise InvalidInputError("no sweep records")
    base = records[0].infrastructure_capex_total
    if base == 0:
        raise InvalidInputError("baseline infrastructure capex is zero; relative increase undefined")
    return [(r.delta_hydrogen, (r.infrastructure_capex_total - base) / base) for r in records]


def sweep_to_csv(records: Sequence[SweepRecord]) -> str:
    try:
        increases = [inc for _, inc in cost_increase_curve(records)]
    except InvalidInputError:
        increases = [math.nan] * len(records)
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for record, increase in zip(records, increases):
        writer.writerow(
            [repr(record.delta_hydrogen), repr(record.delta_electricity)]
            + [repr(record.capacity_by_tech[t]) for t in TECHNOLOGIES]
            + [repr(record.infrastructure_capex_total), repr(increase), repr(record.objective),
               repr(record.de_budget_utilization)]
        )
    return buf.getvalue()


# ---------------------------------------------------------------- validation

class _PlanEvaluator:
    """Vectorized realized cost of a fixed plan for many price vectors.

    Uses the same floating point operations, in the same order, as
    :func:`heatplan.model.annualized_cost`, so results agree tick for tick.
    """

    def __init__(self, assignment: Mapping[str, Technology], cells: Sequence[CellRecord],
                 params: CostParameters):
        techs = [assignment[cell.id] for cell in cells]
        self.columns = np.array([t.rank for t in techs], dtype=np.intp)
        self.heat = np.array([cell.heat_energy for cell in cells], dtype=float)
        self.efficiency = np.array([params[t].efficiency for t in techs], dtype=float)
        self.fixed_generator = np.array(
            [params[t].generator_unit_cost * cell.peak_load / params.generator_lifetime
             for cell, t in zip(cells, techs)], dtype=float)
        self.fixed_grid = np.array(
            [params[t].grid_unit_cost * params[t].scale_factor * grid_driver(cell, t) / params.grid_amortization
             for cell, t in zip(cells, techs)], dtype=float)

    def ticks(self, prices: np.ndarray) -> np.ndarray:
        """``prices`` is ``(m, 4)`` in canonical order; returns ``(m,)`` int64 ticks."""
        energy = prices[:, self.columns] * self.heat / self.efficiency
        total = energy + self.fixed_generator + self.fixed_grid
        return np.rint(total * TICKS_PER_EUR).astype(np.int64).sum(axis=1)


@dataclass(frozen=True)
class ValidationReport:
    n_samples: int
    seed: int
    robust_objective: float
    max_realized_cost: float
    min_realized_cost: float
    mean_realized_cost: float
    worst_sample: PriceVector
    margin: float
    violations: int
    nominal_plan_objective: float
    nominal_plan_max_realized: float
    nominal_regret_max: float
    nominal_regret_mean: float
    nominal_exceedances: int

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if isinstance(value, PriceVector):
                value = {t.value: value[t] for t in TECHNOLOGIES}
            out[name] = value
        return out


def validate_plan(plan: Plan, cells: Sequence[CellRecord], params: CostParameters, box: UncertaintyBox,
                  n: int, seed: int, chunk: int = 2048) -> ValidationReport:
    """Sample ``n`` price vectors from ``box`` and compare realized costs to the plan's objective.

    ``margin`` is the plan objective minus the largest realized cost; it is
    never negative for a plan returned by :func:`solve_robust` on ``box``.
    The plan that is optimal at nominal prices is evaluated on the same
    samples; its regret is its realized cost minus that of ``plan``.
    """
    if n < 1:
        raise InvalidInputError(f"sample count must be >= 1, got {n}")
    nominal_plan = solve_deterministic(cells, params, box.nominal)
    robust_eval = _PlanEvaluator(plan.assignment, cells, params)
    nominal_eval = _PlanEvaluator(nominal_plan.assignment, cells, params)

    worst_ticks, worst_index, best_ticks = None, -1, None
    nominal_worst = None
    robust_sum = regret_sum = 0
    regret_max = None
    violations = exceedances = 0
    for start in range(0, n, chunk):
        prices = price_arrays(box, min(chunk, n - start), seed, start)
        realized = robust_eval.ticks(prices)
        other = nominal_eval.ticks(prices)
        k = int(np.argmax(realized))
        if worst_ticks is None or realized[k] > worst_ticks:
            worst_ticks, worst_index = int(realized[k]), start + k
        low = int(realized.min())
        best_ticks = low if best_ticks is None else min(best_ticks, low)
        top = int(other.max())
        nominal_worst = top if nominal_worst is None else max(nominal_worst, top)
        regret = other - realized
        regret_max = int(regret.max()) if regret_max is None else max(regret_max, int(regret.max()))
        robust_sum += int(realized.sum())
        regret_sum += int(regret.sum())
        violations += int((realized > plan.objective_ticks).sum())
        exceedances += int((other > plan.objective_ticks).sum())

    worst = PriceVector(*map(float, price_arrays(box, 1, seed, worst_index)[0]))
    return ValidationReport(
        n_samples=n,
        seed=seed,
        robust_objective=plan.objective,
        max_realized_cost=worst_ticks / TICKS_PER_EUR,
        min_realized_cost=best_ticks / TICKS_PER_EUR,
        mean_realized_cost=robust_sum / n / TICKS_PER_EUR,
        worst_sample=worst,
        margin=(plan.objective_ticks - worst_ticks) / TICKS_PER_EUR,
        violations=violations,
        nominal_plan_objective=nominal_plan.objective,
        nominal_plan_max_realized=nominal_worst / TICKS_PER_EUR,
        nominal_regret_max=regret_max / TICKS_PER_EUR,
        nominal_regret_mean=regret_sum / n / TICKS_PER_EUR,
        nominal_exceedances=exceedances,
    )


__all__ = [
    "SWEEP_HEADER", "SweepRecord", "deviation_grid", "capacity_by_technology", "resolve_workers",
    "sweep_deviation", "cost_increase_curve", "sweep_to_csv", "ValidationReport", "validate_plan",
]
