"""
Reading and writing instances, parameter files and results.

Cell file (CSV, header exact)::

    cell_id,heat_kwh_a,peak_kw,street_m,has_dh[,lon,lat]

Peak loads are rounded to whole kW on load so the DP solver is exact.

Parameter file (JSON)::

    {
      "technologies": {
        "ce": {"efficiency": ..., "generator_cost_eur_per_kw": ...,
               "grid_unit_cost": ..., "scale_factor": ...,
               "fuel_price_ct_per_kwh": ...},
        "cg": {...}, "de": {...}, "dg": {...}
      },
      "expansion_budget_kw": ...,      # number or "inf"
      "generator_lifetime_a": ...,
      "grid_amortization_a": ...,
      "delta_electricity": ...,
      "delta_hydrogen": ...
    }

``grid_unit_cost`` is EUR/m for ce, cg, dg and EUR/kW for de.  Fuel prices
are in ct/kWh in the file and EUR/kWh in memory.
"""
from __future__ import annotations

import csv
import io as _stdio
import json
import math
from dataclasses import dataclass
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import (
    TECHNOLOGIES,
    CellRecord,
    CostParameters,
    InvalidInputError,
    PriceVector,
    Technology,
    TechnologyCosts,
)
from .optimizer import Plan
from .uncertainty import UncertaintyBox

CELL_HEADER = ["cell_id", "heat_kwh_a", "peak_kw", "street_m", "has_dh"]
CELL_HEADER_GEO = CELL_HEADER + ["lon", "lat"]
PLAN_HEADER = ["cell_id", "technology", "annual_cost_eur", "energy_eur", "generator_eur", "grid_eur", "capex_eur"]

TECH_KEYS = ("efficiency", "generator_cost_eur_per_kw", "grid_unit_cost", "scale_factor", "fuel_price_ct_per_kwh")

FULL_LOAD_HOURS = 2000.0
KM_PER_DEG_LAT = 111.32


@dataclass(frozen=True)
class ParamsBundle:
    """Everything a parameter file carries."""

    params: CostParameters
    nominal: PriceVector
    delta_electricity: float
    delta_hydrogen: float

    def box(self) -> UncertaintyBox:
        return UncertaintyBox(self.nominal, self.delta_electricity, self.delta_hydrogen)


def fmt_number(value: float) -> str:
    """Shortest text that reads back to the same float; integral values print as ints."""
    value = float(value)
    if value.is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


def _ct_to_eur(ct: float) -> float:
    return float(Decimal(repr(float(ct))) / 100)


def _eur_to_ct(eur: float) -> float:
    return float(Decimal(repr(float(eur))) * 100)


# ---------------------------------------------------------------- parameters

def _number(doc: dict, key: str, where: str) -> float:
    if key not in doc:
        raise InvalidInputError(f"missing key '{where}{key}'")
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidInputError(f"'{where}{key}' must be a number, got {value!r}")
    if not math.isfinite(value):
        raise InvalidInputError(f"'{where}{key}' must be finite")
    return float(value)


def parse_params(doc: dict) -> ParamsBundle:
    if not isinstance(doc, dict):
        raise InvalidInputError("parameter document must be a JSON object")
    techs = doc.get("technologies")
    if not isinstance(techs, dict):
        raise InvalidInputError("missing key 'technologies'")
    costs, prices = {}, {}
    for tech in TECHNOLOGIES:
        entry = techs.get(tech.value)
        if not isinstance(entry, dict):
            raise InvalidInputError(f"missing key 'technologies.{tech.value}'")
        where = f"technologies.{tech.value}."
        values = {key: _number(entry, key, where) for key in TECH_KEYS}
        costs[tech] = TechnologyCosts(
            grid_unit_cost=values["grid_unit_cost"],
            generator_unit_cost=values["generator_cost_eur_per_kw"],
            efficiency=values["efficiency"],
            scale_factor=values["scale_factor"],
        )
        prices[tech] = _ct_to_eur(values["fuel_price_ct_per_kwh"])

    if doc.get("expansion_budget_kw") == "inf":
        budget = math.inf
    else:
        budget = _number(doc, "expansion_budget_kw", "")
    params = CostParameters(
        technologies=costs,
        expansion_budget=budget,
        generator_lifetime=_number(doc, "generator_lifetime_a", ""),
        grid_amortization=_number(doc, "grid_amortization_a", ""),
    )
    return ParamsBundle(
        params=params,
        nominal=PriceVector.from_mapping(prices),
        delta_electricity=_number(doc, "delta_electricity", ""),
        delta_hydrogen=_number(doc, "delta_hydrogen", ""),
    )


def load_params(path: str | Path) -> ParamsBundle:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON ({exc})") from exc
    bundle = parse_params(doc)
    bundle.box()  # validates the deltas
    return bundle


def dump_params(bundle: ParamsBundle) -> str:
    techs = {}
    for tech in TECHNOLOGIES:
        c = bundle.params[tech]
        techs[tech.value] = {
            "efficiency": c.efficiency,
            "generator_cost_eur_per_kw": c.generator_unit_cost,
            "grid_unit_cost": c.grid_unit_cost,
            "scale_factor": c.scale_factor,
            "fuel_price_ct_per_kwh": _eur_to_ct(bundle.nominal[tech]),
        }
    budget = bundle.params.expansion_budget
    doc = {
        "technologies": techs,
        "expansion_budget_kw": "inf" if math.isinf(budget) else budget,
        "generator_lifetime_a": bundle.params.generator_lifetime,
        "grid_amortization_a": bundle.params.grid_amortization,
        "delta_electricity": bundle.delta_electricity,
        "delta_hydrogen": bundle.delta_hydrogen,
    }

    def tidy(obj):
        if isinstance(obj, dict):
            return {k: tidy(v) for k, v in obj.items()}
        if isinstance(obj, float) and obj.is_integer():
            return int(obj)
        return obj

    return json.dumps(tidy(doc), indent=2) + "\n"


def table1_path() -> Path:
    return Path(str(resources.files("heatplan") / "data" / "table1.json"))


def table1() -> ParamsBundle:
    """Parameter set of the reference case study (20-year generators, 40-year grids)."""
    return load_params(table1_path())


# --------------------------------------------------------------------- cells

def _parse_row(row: list[str], header: list[str], rownum: int) -> CellRecord:
    if len(row) != len(header):
        raise InvalidInputError(f"row {rownum}: expected {len(header)} fields, got {len(row)}")
    values = dict(zip(header, row))
    cell_id = values["cell_id"].strip()
    if not cell_id:
        raise InvalidInputError(f"row {rownum}: empty cell_id")
    numbers = {}
    for key in header[1:]:
        if key == "has_dh":
            continue
        try:
            numbers[key] = float(values[key])
        except ValueError:
            raise InvalidInputError(f"row {rownum}: {key} is not a number: {values[key]!r}") from None
        if not math.isfinite(numbers[key]):
            raise InvalidInputError(f"row {rownum}: {key} must be finite")
        if key not in ("lon", "lat") and numbers[key] < 0:
            raise InvalidInputError(f"row {rownum}: {key} must be >= 0, got {values[key]}")
    flag = values["has_dh"].strip()
    if flag not in ("0", "1"):
        raise InvalidInputError(f"row {rownum}: has_dh must be 0 or 1, got {flag!r}")
    centroid = (numbers["lon"], numbers["lat"]) if "lon" in numbers else None
    try:
        return CellRecord(
            id=cell_id,
            heat_energy=numbers["heat_kwh_a"],
            peak_load=float(round(numbers["peak_kw"])),
            street_length=numbers["street_m"],
            has_district_heating=flag == "1",
            centroid=centroid,
        )
    except InvalidInputError as exc:
        raise InvalidInputError(f"row {rownum}: {exc}") from None


def read_cells(text: str) -> list[CellRecord]:
    reader = csv.reader(_stdio.StringIO(text))
    header = next(reader, None)
    if header not in (CELL_HEADER, CELL_HEADER_GEO):
        raise InvalidInputError(
            f"row 1: header must be '{','.join(CELL_HEADER)}' optionally followed by ',lon,lat', got {header!r}")
    cells, first_row = [], {}
    for rownum, row in enumerate(reader, start=2):
        if not row:
            continue
        cell = _parse_row(row, header, rownum)
        if cell.id in first_row:
            raise InvalidInputError(f"duplicate cell id {cell.id!r} in rows {first_row[cell.id]} and {rownum}")
        first_row[cell.id] = rownum
        cells.append(cell)
    return cells


def load_cells(path: str | Path) -> list[CellRecord]:
    try:
        return read_cells(Path(path).read_text(encoding="utf-8"))
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None


def format_cells(cells: Sequence[CellRecord]) -> str:
    with_geo = bool(cells) and all(cell.centroid is not None for cell in cells)
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CELL_HEADER_GEO if with_geo else CELL_HEADER)
    for cell in cells:
        row = [cell.id, fmt_number(cell.heat_energy), fmt_number(cell.peak_load),
               fmt_number(cell.street_length), "1" if cell.has_district_heating else "0"]
        if with_geo:
            row += [repr(float(cell.centroid[0])), repr(float(cell.centroid[1]))]
        writer.writerow(row)
    return buf.getvalue()


def load_assignment(path: str | Path) -> dict[str, Technology]:
    """Read the ``cell_id,technology`` columns of an exported plan CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"cell_id", "technology"} <= set(reader.fieldnames):
            raise InvalidInputError(f"{path}: plan file needs cell_id and technology columns")
        out = {}
        for rownum, row in enumerate(reader, start=2):
            try:
                out[row["cell_id"]] = Technology(row["technology"])
            except ValueError:
                raise InvalidInputError(f"{path}: row {rownum}: unknown technology {row['technology']!r}") from None
    return out


# ------------------------------------------------------------------- exports

def _square(lon: float, lat: float, side_km: float = 1.0) -> list[list[float]]:
    dlat = side_km / 2 / KM_PER_DEG_LAT
    dlon = side_km / 2 / (KM_PER_DEG_LAT * math.cos(math.radians(lat)))
    corners = [(lon - dlon, lat - dlat), (lon + dlon, lat - dlat), (lon + dlon, lat + dlat),
               (lon - dlon, lat + dlat), (lon - dlon, lat - dlat)]
    return [[round(x, 7), round(y, 7)] for x, y in corners]


def export_plan(plan: Plan, cells: Sequence[CellRecord], format: str = "csv") -> str:
    """Serialize a plan as CSV or as a GeoJSON FeatureCollection of 1 km squares."""
    by_id = {cell.id: cell for cell in cells}
    missing = [cell_id for cell_id in plan.assignment if cell_id not in by_id]
    if missing or len(by_id) != len(plan.assignment):
        raise InvalidInputError("plan and cells do not match")

    if format == "csv":
        buf = _stdio.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(PLAN_HEADER)
        for cell_id, tech in plan.assignment.items():
            b = plan.breakdowns[cell_id]
            writer.writerow([cell_id, tech.value, repr(b.total), repr(b.energy), repr(b.generator),
                             repr(b.grid), repr(b.infrastructure_capex)])
        return buf.getvalue()

    if format == "geojson":
        features = []
        for cell_id, tech in plan.assignment.items():
            cell = by_id[cell_id]
            if cell.centroid is None:
                raise InvalidInputError(f"GeoJSON export needs centroids; cell {cell_id} has none")
            b = plan.breakdowns[cell_id]
            features.append({
                "type": "Feature",
                "id": cell_id,
                "geometry": {"type": "Polygon", "coordinates": [_square(*cell.centroid)]},
                "properties": {
                    "cell_id": cell_id,
                    "technology": tech.value,
                    "peak_kw": cell.peak_load,
                    "annual_cost_eur": b.total,
                    "capex_eur": b.infrastructure_capex,
                },
            })
        return json.dumps({"type": "FeatureCollection", "features": features}, indent=1) + "\n"

    raise InvalidInputError(f"unknown export format {format!r}")


# ----------------------------------------------------------------- synthesis

def synthesize_instance(n_cells: int, seed: int, profile: str = "hamburg_like",
                        full_load_hours: float = FULL_LOAD_HOURS) -> list[CellRecord]:
    """Generate a reproducible stand-in for a city's aggregated heat data.

    ``hamburg_like`` places a dense core (tens of MW per km^2, already on
    district heating) in the middle of a square grid of 1 km cells around
    (10.0 E, 53.55 N), with load falling off towards a sparse periphery.
    Peak loads are log-normal (median 4 MW), clipped to [50 kW, 60 MW]; street
    length grows with the log of the load; the top decile by load has
    district heating.  ``uniform`` draws loads uniformly and places
    district heating at random.  Yearly heat is peak load times
    ``full_load_hours``.
    """
    if n_cells < 1:
        raise InvalidInputError(f"n_cells must be >= 1, got {n_cells}")
    if profile not in ("hamburg_like", "uniform"):
        raise InvalidInputError(f"unknown profile {profile!r}")
    rng = np.random.default_rng([seed, 0 if profile == "hamburg_like" else 1])

    side = math.ceil(math.sqrt(n_cells))
    rows, cols = np.divmod(np.arange(n_cells), side)
    n_rows = math.ceil(n_cells / side)
    y = rows - (n_rows - 1) / 2
    x = cols - (side - 1) / 2

    if profile == "hamburg_like":
        loads = np.clip(rng.lognormal(mean=math.log(4000.0), sigma=1.0, size=n_cells), 50.0, 60_000.0)
        radius = np.hypot(x, y)
        closeness = radius + rng.normal(0.0, 0.12 * max(radius.max(), 1.0), size=n_cells)
        peak = np.empty(n_cells)
        peak[np.argsort(closeness, kind="stable")] = np.sort(loads)[::-1]
    else:
        peak = rng.uniform(50.0, 60_000.0, size=n_cells)
    peak = np.round(peak)

    streets = 3500.0 + 6500.0 * np.log10(peak / 50.0)
    streets *= rng.lognormal(0.0, 0.15, size=n_cells)
    streets = np.round(np.clip(streets, 300.0, 30_000.0))

    if profile == "hamburg_like":
        n_dh = max(1, math.ceil(n_cells / 10))
        dh = np.zeros(n_cells, dtype=bool)
        dh[np.argsort(-peak, kind="stable")[:n_dh]] = True
    else:
        dh = rng.random(n_cells) < 0.1

    lat0, lon0 = 53.55, 10.0
    lat = lat0 + y / KM_PER_DEG_LAT
    lon = lon0 + x / (KM_PER_DEG_LAT * math.cos(math.radians(lat0)))

    width = len(str(n_cells - 1))
    return [
        CellRecord(
            id=f"c{k:0{width}d}",
            heat_energy=float(peak[k] * full_load_hours),
            peak_load=float(peak[k]),
            street_length=float(streets[k]),
            has_district_heating=bool(dh[k]),
            centroid=(round(float(lon[k]), 6), round(float(lat[k]), 6)),
        )
        for k in range(n_cells)
    ]


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


__all__ = [
    "CELL_HEADER", "CELL_HEADER_GEO", "PLAN_HEADER", "ParamsBundle", "fmt_number",
    "parse_params", "load_params", "dump_params", "table1_path", "table1",
    "read_cells", "load_cells", "format_cells", "load_assignment", "export_plan",
    "synthesize_instance", "write_text",
]

