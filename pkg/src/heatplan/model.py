"""
Domain types and the per-cell annualized cost of each heating technology.

All money is in EUR, energy in kWh, power in kW and lengths in m.  Prices are
held in EUR/kWh; parameter files carry them in ct/kWh and are converted on
load (see :mod:`heatplan.io`).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

# Costs are compared in integer micro-euro ticks so that every solver sees
# exactly the same ordering of plans, independent of summation order.
TICKS_PER_EUR = 1_000_000


class InvalidInputError(ValueError):
    """Raised when cells, parameters or prices violate their invariants."""


class Carrier(str, enum.Enum):
    ELECTRICITY = "electricity"
    HYDROGEN = "hydrogen"


class Technology(str, enum.Enum):
    """Heating technology options; declaration order is the canonical order."""

    CE = "ce"  # district heating, centralized heat pumps
    CG = "cg"  # district heating, centralized hydrogen boilers
    DE = "de"  # decentralized household heat pumps
    DG = "dg"  # decentralized household hydrogen boilers

    @property
    def carrier(self) -> Carrier:
        if self in (Technology.CE, Technology.DE):
            return Carrier.ELECTRICITY
        return Carrier.HYDROGEN

    @property
    def rank(self) -> int:
        return _RANK[self]

    @property
    def is_centralized(self) -> bool:
        return self in (Technology.CE, Technology.CG)


TECHNOLOGIES: tuple[Technology, ...] = tuple(Technology)
_RANK = {tech: k for k, tech in enumerate(TECHNOLOGIES)}


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidInputError(message)


def _finite_nonneg(value: float, name: str) -> None:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"{name} must be a number, got {value!r}")
    _require(math.isfinite(value), f"{name} must be finite, got {value!r}")
    _require(value >= 0, f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class CellRecord:
    """One 1 km^2 cell of the planning area.

    Parameters
    ----------
    id : str
        Unique cell identifier.
    heat_energy : float
        Yearly heat demand in kWh/a.
    peak_load : float
        Peak heating load in kW.
    street_length : float
        Total street length inside the cell in m.
    has_district_heating : bool
        Whether a district heating grid already exists in the cell.
    centroid : tuple of float, optional
        ``(lon, lat)`` in degrees, only used for GeoJSON export.
    """

    id: str
    heat_energy: float
    peak_load: float
    street_length: float
    has_district_heating: bool = False
    centroid: tuple[float, float] | None = None

    def __post_init__(self):
        _require(isinstance(self.id, str) and self.id != "", "cell id must be a non-empty string")
        _finite_nonneg(self.heat_energy, f"cell {self.id}: heat_energy")
        _finite_nonneg(self.peak_load, f"cell {self.id}: peak_load")
        _finite_nonneg(self.street_length, f"cell {self.id}: street_length")
        _require(not (self.heat_energy > 0 and self.peak_load <= 0),
                 f"cell {self.id}: peak_load must be > 0 when heat_energy > 0")
        if self.centroid is not None:
            lon, lat = self.centroid
            _require(math.isfinite(lon) and math.isfinite(lat), f"cell {self.id}: centroid must be finite")
            _require(-180 <= lon <= 180 and -90 <= lat <= 90, f"cell {self.id}: centroid out of range")


@dataclass(frozen=True)
class TechnologyCosts:
    """Unit costs and conversion data for one technology.

    ``grid_unit_cost`` is EUR/m of street for CE, CG and DG and EUR/kW for DE.
    ``efficiency`` is the boiler efficiency for hydrogen technologies and the
    COP for heat pumps.
    """

    grid_unit_cost: float
    generator_unit_cost: float
    efficiency: float
    scale_factor: float


@dataclass(frozen=True)
class CostParameters:
    technologies: Mapping[Technology, TechnologyCosts]
    expansion_budget: float  # kW of decentralized heat pump load; may be inf
    generator_lifetime: float = 20.0
    grid_amortization: float = 40.0

    def __post_init__(self):
        missing = [t.value for t in TECHNOLOGIES if t not in self.technologies]
        _require(not missing, f"missing cost data for technologies: {', '.join(missing)}")
        for tech in TECHNOLOGIES:
            costs = self.technologies[tech]
            name = tech.value
            _finite_nonneg(costs.grid_unit_cost, f"{name}.grid_unit_cost")
            _finite_nonneg(costs.generator_unit_cost, f"{name}.generator_unit_cost")
            _finite_nonneg(costs.scale_factor, f"{name}.scale_factor")
            _finite_nonneg(costs.efficiency, f"{name}.efficiency")
            _require(costs.scale_factor > 0, f"{name}.scale_factor must be > 0")
            _require(costs.efficiency > 0, f"{name}.efficiency must be > 0")
            if tech.carrier is Carrier.HYDROGEN:
                _require(costs.efficiency <= 1, f"{name}.efficiency must be <= 1 for a boiler")
            else:
                _require(costs.efficiency >= 1, f"{name}.efficiency (COP) must be >= 1 for a heat pump")
        _require(not math.isnan(self.expansion_budget) and self.expansion_budget >= 0,
                 f"expansion_budget must be >= 0, got {self.expansion_budget!r}")
        for name in ("generator_lifetime", "grid_amortization"):
            value = getattr(self, name)
            _finite_nonneg(value, name)
            _require(value >= 1, f"{name} must be >= 1 year, got {value!r}")

    def __getitem__(self, tech: Technology) -> TechnologyCosts:
        return self.technologies[tech]


@dataclass(frozen=True)
class PriceVector:
    """Energy carrier prices in EUR/kWh, one entry per technology."""

    ce: float
    cg: float
    de: float
    dg: float

    def __post_init__(self):
        for tech in TECHNOLOGIES:
            _finite_nonneg(getattr(self, tech.value), f"price {tech.value}")

    def __getitem__(self, tech: Technology) -> float:
        return getattr(self, tech.value)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.ce, self.cg, self.de, self.dg)

    @classmethod
    def from_mapping(cls, values: Mapping[Technology, float]) -> "PriceVector":
        return cls(**{tech.value: values[tech] for tech in TECHNOLOGIES})


@dataclass(frozen=True)
class CostBreakdown:
    """Annualized cost of serving one cell with one technology.

    ``energy``, ``generator``, ``grid`` and ``total`` are EUR/a;
    ``infrastructure_capex`` is the one-off generator plus grid outlay in EUR.
    """

    energy: float
    generator: float
    grid: float
    total: float
    infrastructure_capex: float

    def __post_init__(self):
        parts = self.energy + self.generator + self.grid
        _require(math.isclose(self.total, parts, rel_tol=1e-9, abs_tol=1e-9),
                 f"total {self.total!r} does not match components {parts!r}")

    @property
    def ticks(self) -> int:
        return cost_ticks(self.total)


def cost_ticks(value: float) -> int:
    """Round a EUR amount to integer micro-euro ticks."""
    return round(value * TICKS_PER_EUR)


def ticks_to_eur(ticks: int) -> float:
    return ticks / TICKS_PER_EUR


def conversion_efficiency(tech: Technology, params: CostParameters) -> float:
    """COP for heat pumps, boiler efficiency for hydrogen technologies."""
    return params[tech].efficiency


def grid_driver(cell: CellRecord, tech: Technology) -> float:
    # Electric grid expansion scales with connected load, pipe grids with street length.
    return cell.peak_load if tech is Technology.DE else cell.street_length


def annualized_cost(cell: CellRecord, tech: Technology, params: CostParameters,
                    prices: PriceVector) -> CostBreakdown:
    """Yearly energy, generator and grid cost of supplying ``cell`` with ``tech``.

    Generator capex is spread over ``params.generator_lifetime`` years and grid
    capex over ``params.grid_amortization`` years.

    Examples
    --------
    >>> from heatplan.io import table1
    >>> bundle = table1()
    >>> cell = CellRecord("a", 1e6, 500, 1000)
    >>> round(annualized_cost(cell, Technology.CE, bundle.params, bundle.nominal).total, 6)
    119350.0
    """
    costs = params[tech]
    price = prices[tech]
    energy = price * cell.heat_energy / costs.efficiency
    generator_capex = costs.generator_unit_cost * cell.peak_load
    grid_capex = costs.grid_unit_cost * costs.scale_factor * grid_driver(cell, tech)
    generator = generator_capex / params.generator_lifetime
    grid = grid_capex / params.grid_amortization
    total = energy + generator + grid
    if not math.isfinite(total):
        raise InvalidInputError(f"non-finite cost for cell {cell.id} / {tech.value}")
    return CostBreakdown(energy, generator, grid, total, generator_capex + grid_capex)


def allowed_technologies(cell: CellRecord) -> frozenset[Technology]:
    """Technologies a cell may take; cells with district heating stay centralized."""
    if cell.has_district_heating:
        return frozenset((Technology.CE, Technology.CG))
    return frozenset(TECHNOLOGIES)


def cost_matrix(cells: Iterable[CellRecord], params: CostParameters,
                prices: PriceVector) -> dict[str, dict[Technology, CostBreakdown]]:
    """Cost breakdown for every (cell, technology) pair, disallowed pairs included."""
    return {
        cell.id: {tech: annualized_cost(cell, tech, params, prices) for tech in TECHNOLOGIES}
        for cell in cells
    }


def check_unique_ids(cells: Iterable[CellRecord]) -> None:
    seen: set[str] = set()
    for cell in cells:
        if cell.id in seen:
            raise InvalidInputError(f"duplicate cell id {cell.id!r}")
        seen.add(cell.id)


__all__ = [
    "TICKS_PER_EUR", "InvalidInputError", "Carrier", "Technology", "TECHNOLOGIES",
    "CellRecord", "TechnologyCosts", "CostParameters", "PriceVector", "CostBreakdown",
    "cost_ticks", "ticks_to_eur", "conversion_efficiency", "grid_driver",
    "annualized_cost", "allowed_technologies", "cost_matrix", "check_unique_ids",
]
