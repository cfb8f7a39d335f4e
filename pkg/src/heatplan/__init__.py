"""Robust assignment of carbon-neutral heating technologies to city grid cells."""
from .model import (
    TECHNOLOGIES,
    CellRecord,
    CostBreakdown,
    CostParameters,
    InvalidInputError,
    PriceVector,
    Technology,
    TechnologyCosts,
    allowed_technologies,
    annualized_cost,
    conversion_efficiency,
    cost_matrix,
)
from .optimizer import (
    Plan,
    SolverTag,
    brute_force,
    export_lp,
    solve_deterministic,
    solve_robust,
)
from .uncertainty import UncertaintyBox, box_vertices, contains, sample_prices, worst_case_prices

__version__ = "0.1.0"
