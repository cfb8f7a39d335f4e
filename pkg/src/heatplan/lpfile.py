"""
CPLEX-style LP export of the full assignment MILP.

Layout (see ``tests/golden/two_cells.lp``)::

    \\ header comments, one line per cell mapping index -> id
    Minimize
     obj: <c> x_0_ce + <c> x_0_cg + ...
    Subject To
     one_0: x_0_ce + x_0_cg + x_0_de + x_0_dg = 1
     lock_0: x_0_de + x_0_dg <= <1 - W_0>
     budget: <P_0> x_0_de + ... <= <budget>
    Bounds
     x_i_de = 0            (cells with district heating)
    Binaries
     x_0_ce ...
    End

Variables are indexed by position in the cell list; objective coefficients
are yearly costs in EUR.
"""
from __future__ import annotations

import math
from typing import Sequence

from .model import TECHNOLOGIES, CellRecord, CostParameters, PriceVector, Technology, cost_matrix

INFINITE_RHS = 1e30
_TERMS_PER_LINE = 6


def _num(value: float) -> str:
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _var(i: int, tech: Technology) -> str:
    return f"x_{i}_{tech.value}"


def _wrap(head: str, terms: list[str]) -> list[str]:
    if not terms:
        return [f"{head} 0 x_dummy"]
    lines = []
    for k in range(0, len(terms), _TERMS_PER_LINE):
        chunk = " + ".join(terms[k:k + _TERMS_PER_LINE])
        lines.append(f"{head} {chunk}" if k == 0 else f"   + {chunk}")
    return lines


def export_lp(cells: Sequence[CellRecord], params: CostParameters, prices: PriceVector,
              lockin_threshold: float = 0.0, big_m: float = 1e9) -> str:
    """Render the MILP for ``cells`` at fixed ``prices`` as LP text.

    The district-heating lock-in is written as ``x_de + x_dg <= 1 - W`` plus
    zero bounds.  A big-M row of the form ``P_i >= Q - M (1 - x_ij + W_i)``
    for the centralized technologies is only emitted when
    ``lockin_threshold`` (Q) is positive; at the default of 0 it can never
    bind and is left out.
    """
    costs = cost_matrix(cells, params, prices)
    out = [
        "\\ heating technology assignment",
        f"\\ cells: {len(cells)}; technologies: {' '.join(t.value for t in TECHNOLOGIES)}",
        "\\ prices EUR/kWh: " + " ".join(f"{t.value}={_num(prices[t])}" for t in TECHNOLOGIES),
    ]
    if lockin_threshold > 0:
        out.append(f"\\ big-M lock-in rows with Q = {_num(lockin_threshold)} kW, M = {_num(big_m)}")
    else:
        out.append("\\ big-M lock-in rows omitted: threshold Q = 0 makes them vacuous")
    out += [f"\\ cell {i} = {cell.id}" for i, cell in enumerate(cells)]

    objective = [f"{_num(costs[cell.id][t].total)} {_var(i, t)}"
                 for i, cell in enumerate(cells) for t in TECHNOLOGIES]
    out.append("Minimize")
    out += _wrap(" obj:", objective)

    out.append("Subject To")
    for i, cell in enumerate(cells):
        out.append(f" one_{i}: " + " + ".join(_var(i, t) for t in TECHNOLOGIES) + " = 1")
    for i, cell in enumerate(cells):
        rhs = 1 - int(cell.has_district_heating)
        out.append(f" lock_{i}: {_var(i, Technology.DE)} + {_var(i, Technology.DG)} <= {rhs}")
    if lockin_threshold > 0:
        for i, cell in enumerate(cells):
            # M x <= P - Q + M (1 + W)
            rhs = cell.peak_load - lockin_threshold + big_m * (1 + int(cell.has_district_heating))
            for t in (Technology.CE, Technology.CG):
                out.append(f" bigm_{i}_{t.value}: {_num(big_m)} {_var(i, t)} <= {_num(rhs)}")
    budget_terms = [f"{_num(cell.peak_load)} {_var(i, Technology.DE)}" for i, cell in enumerate(cells)]
    budget = params.expansion_budget
    budget_rhs = INFINITE_RHS if math.isinf(budget) else budget
    wrapped = _wrap(" budget:", budget_terms)
    wrapped[-1] += f" <= {_num(budget_rhs)}"
    out += wrapped

    out.append("Bounds")
    for i, cell in enumerate(cells):
        if cell.has_district_heating:
            out.append(f" {_var(i, Technology.DE)} = 0")
            out.append(f" {_var(i, Technology.DG)} = 0")

    out.append("Binaries")
    names = [_var(i, t) for i in range(len(cells)) for t in TECHNOLOGIES]
    for k in range(0, len(names), 8):
        out.append(" " + " ".join(names[k:k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


__all__ = ["export_lp", "INFINITE_RHS"]
