"""Tenant economics: seller revenue, coalition value and utility, QoS-driven demand."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .netmodel import ServiceClass, TenantQos


class Role(str, Enum):
    SELLER = "seller"
    BUYER = "buyer"


@dataclass
class TenantProfile:
    tenant_id: int
    role: Role
    service_class: ServiceClass
    qos: TenantQos
    reputation: float = 0.0
    prbs_held: int = 0
    prbs_required: int = 0
    prbs_max_sellable: int = 0
    num_ues: int = 50

    def __post_init__(self):
        if not 0.0 <= self.reputation <= 1.0:
            raise ValueError(f"reputation must lie in [0, 1], got {self.reputation}")
        if self.role == Role.SELLER:
            if self.prbs_max_sellable < 0:
                raise ValueError("prbs_max_sellable must be >= 0")
            if self.prbs_held - self.prbs_max_sellable < self.prbs_required:
                raise ValueError(
                    f"seller {self.tenant_id} would sell into its own requirement "
                    f"({self.prbs_held} held, {self.prbs_required} required, "
                    f"{self.prbs_max_sellable} sellable)"
                )

    @property
    def shortfall(self) -> int:
        return max(self.prbs_required - self.prbs_held, 0)


@dataclass(frozen=True)
class MarketParams:
    mno_unit_price: float = 1.0
    price_grid: tuple = tuple(np.linspace(1.0, 2.0, 100))
    qty_grid: tuple = tuple(range(1, 51))
    signaling_cost_coeff: float = 0.05
    # one priced bandwidth unit is this many Hz (keeps $/Hz prices and PRB counts on a common scale)
    hz_per_unit: float = 1e5
    # currency per useful PRB per unit of summed reputation
    value_scale: float = 8.0
    qos_weighted_revenue: bool = False

    def __post_init__(self):
        pg = np.asarray(self.price_grid, dtype=float)
        qg = np.asarray(self.qty_grid, dtype=float)
        if pg.size == 0 or qg.size == 0:
            raise ValueError("grids must be non-empty")
        if np.any(np.diff(pg) <= 0) or np.any(np.diff(qg) <= 0):
            raise ValueError("grids must be strictly increasing")
        if self.signaling_cost_coeff < 0 or self.hz_per_unit <= 0 or self.value_scale < 0:
            raise ValueError("invalid market scale parameters")

    @property
    def prices(self) -> np.ndarray:
        return np.asarray(self.price_grid, dtype=float)

    @property
    def quantities(self) -> np.ndarray:
        return np.asarray(self.qty_grid, dtype=float)


def snap_to_grid(x: float, grid: Sequence[float]) -> float:
    """Nearest grid point; halfway cases go to the smaller point."""
    g = np.asarray(grid, dtype=float)
    if x <= g[0]:
        return float(g[0])
    if x >= g[-1]:
        return float(g[-1])
    i = int(np.argmin(np.abs(g - x)))
    return float(g[i])


def demand_quantity(
    shortfall: float,
    satisfaction: float,
    unit_price: float,
    qty_grid: Sequence[float],
    max_price: float,
) -> float:
    """PRBs a buyer (or coalition) wants: shortfall x unmet QoS x price attenuation.

    Snapped to the quantity grid, so a fully satisfied buyer asks for the grid
    minimum. Non-increasing in both price and satisfaction.
    """
    if unit_price <= 0:
        raise ValueError("unit_price must be positive")
    raw = shortfall * (1.0 - satisfaction) * (max_price / unit_price)
    return snap_to_grid(raw, qty_grid)


def seller_utility(price, mno_price, qty, prb_bandwidth_hz, weight=1.0):
    """Margin over the MNO price times traded bandwidth."""
    if np.any(np.asarray(qty) < 0):
        raise ValueError("qty must be non-negative")
    return (price - mno_price) * qty * prb_bandwidth_hz * weight


def coalition_value(members: Iterable[tuple[float, float]]) -> float:
    members = list(members)
    if not members:
        raise ValueError("coalition has no members")
    return float(sum(rep * w for rep, w in members))


def signaling_cost(num_members: int, coeff: float) -> float:
    if num_members < 1:
        raise ValueError("a coalition has at least one member")
    return coeff * num_members**2


def coalition_utility(members, seller_price, total_qty, params: MarketParams, prb_bandwidth_hz):
    """v(z) minus purchase cost and signaling cost. ``members`` are (reputation, w) pairs."""
    if total_qty < 0:
        raise ValueError("total_qty must be non-negative")
    members = list(members)
    v = coalition_value(members)
    return v - (seller_price * total_qty * prb_bandwidth_hz
                + signaling_cost(len(members), params.signaling_cost_coeff))


def summed_reputation(reputations: Iterable[float]) -> float:
    return float(sum(reputations))


def useful_quantity(w, need):
    """PRB-equivalents that actually serve QoS: concave in w, flat beyond ``need``.

    The marginal usefulness of the next PRB falls linearly from 1 to 0 as the
    purchase approaches the QoS-driven need.
    """
    w = np.asarray(w, dtype=float)
    if need <= 0:
        return np.zeros_like(w)
    capped = np.minimum(w, need)
    return capped - capped**2 / (2.0 * need)
