"""Proportional interval (box) uncertainty on energy carrier prices."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import TECHNOLOGIES, Carrier, InvalidInputError, PriceVector, Technology

_SLACK = 1e-12


@dataclass(frozen=True)
class UncertaintyBox:
    """Prices may deviate from ``nominal`` by a fraction of the nominal value.

    The deviation is shared per carrier: ``delta_electricity`` applies to the
    CE and DE entries, ``delta_hydrogen`` to CG and DG.  Lower endpoints are
    floored at zero since prices are nonnegative.
    """

    nominal: PriceVector
    delta_electricity: float = 0.0
    delta_hydrogen: float = 0.0

    def __post_init__(self):
        for name in ("delta_electricity", "delta_hydrogen"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
                raise InvalidInputError(f"{name} must be a finite fraction >= 0, got {value!r}")

    def delta(self, tech: Technology) -> float:
        if tech.carrier is Carrier.ELECTRICITY:
            return self.delta_electricity
        return self.delta_hydrogen

    def lower(self, tech: Technology) -> float:
        return max(0.0, self.nominal[tech] * (1.0 - self.delta(tech)))

    def upper(self, tech: Technology) -> float:
        return self.nominal[tech] * (1.0 + self.delta(tech))


def contains(box: UncertaintyBox, prices: PriceVector) -> bool:
    return all(
        box.lower(tech) - _SLACK <= prices[tech] <= box.upper(tech) + _SLACK
        for tech in TECHNOLOGIES
    )


def worst_case_prices(box: UncertaintyBox) -> PriceVector:
    """Upper vertex of the box.

    Every price multiplies a nonnegative quantity (yearly demand over
    efficiency) in the cost of any plan, so the inner maximization of the
    min-max problem is attained here for every plan at once and the robust
    problem reduces to one deterministic solve at these prices.
    """
    return PriceVector.from_mapping({tech: box.upper(tech) for tech in TECHNOLOGIES})


def box_vertices(box: UncertaintyBox) -> list[PriceVector]:
    """The four corners (electricity low/high x hydrogen low/high).

    Order: (low, low), (low, high), (high, low), (high, high).
    """
    vertices = []
    for el_high in (False, True):
        for h2_high in (False, True):
            values = {}
            for tech in TECHNOLOGIES:
                high = el_high if tech.carrier is Carrier.ELECTRICITY else h2_high
                values[tech] = box.upper(tech) if high else box.lower(tech)
            vertices.append(PriceVector.from_mapping(values))
    return vertices


def uniform_draws(seed: int, start: int, stop: int) -> np.ndarray:
    """Uniform [0, 1) pairs for sample indices ``start..stop-1``.

    Sample ``k`` uses Philox counter block ``k`` of key ``seed``, so any slice
    of the sample sequence can be regenerated on its own.
    """
    if stop <= start:
        return np.empty((0, 2))
    raw = np.random.Philox(key=seed, counter=start).random_raw(4 * (stop - start))
    raw = raw.reshape(-1, 4)[:, :2]
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def price_arrays(box: UncertaintyBox, n: int, seed: int, start: int = 0) -> np.ndarray:
    """Sampled prices as an ``(n, 4)`` array in canonical technology order."""
    u = uniform_draws(seed, start, start + n)
    out = np.empty((len(u), len(TECHNOLOGIES)))
    for col, tech in enumerate(TECHNOLOGIES):
        axis = 0 if tech.carrier is Carrier.ELECTRICITY else 1
        lo, hi = box.lower(tech), box.upper(tech)
        out[:, col] = np.minimum(hi, lo + u[:, axis] * (hi - lo))
    return out


def sample_prices(box: UncertaintyBox, n: int, seed: int) -> list[PriceVector]:
    """Draw ``n`` price vectors uniformly and independently per carrier axis."""
    if n < 0:
        raise InvalidInputError(f"sample count must be >= 0, got {n}")
    return [PriceVector(*map(float, row)) for row in price_arrays(box, n, seed)]


__all__ = [
    "UncertaintyBox", "contains", "worst_case_prices", "box_vertices",
    "uniform_draws", "price_arrays", "sample_prices",
]
