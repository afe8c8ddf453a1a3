"""Multi-leader multi-follower PRB trading game on discrete grids.

Sellers (leaders) post unit prices from a price grid; buyer coalitions
(followers) then choose purchase quantities from a quantity grid. Each
follower can buy from a fixed set of sellers; its order is filled from
the cheapest of those sellers first, subject to each seller's sellable
cap. Followers are served in priority order (index 0 first), so a
follower's fill never depends on lower-priority followers.

Because the action sets are finite, the equilibrium is found by exact
enumeration: followers best-respond sequentially in priority order, and
leaders play a pure grid Nash equilibrium against each other while
anticipating the followers' responses.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .market import demand_quantity, signaling_cost, useful_quantity


class OracleInfeasible(RuntimeError):
    """The joint grid is too large to enumerate."""


@dataclass(frozen=True)
class FollowerSpec:
    reputation: float  # summed over members
    shortfall: float  # pooled PRB shortfall of the members
    satisfaction: float  # pooled pre-trade QoS satisfaction
    num_members: int = 1
    sellers: tuple = (0,)


@dataclass(frozen=True)
class StackelbergGame:
    price_grid: tuple
    qty_grid: tuple
    caps: tuple  # sellable PRBs per leader
    followers: tuple  # FollowerSpec, in priority order
    mno_price: float = 1.0
    unit_bw: float = 2.0  # priced bandwidth units per PRB
    value_scale: float = 8.0
    signaling_coeff: float = 0.05
    qos_weighted_revenue: bool = False

    def __post_init__(self):
        if len(self.price_grid) == 0 or len(self.qty_grid) == 0:
            raise ValueError("grids must be non-empty")
        if not self.followers or not self.caps:
            raise ValueError("need at least one leader and one follower")
        for f in self.followers:
            if not f.sellers or any(not 0 <= s < len(self.caps) for s in f.sellers):
                raise ValueError(f"follower sellers {f.sellers} out of range")

    @property
    def num_leaders(self) -> int:
        return len(self.caps)

    @property
    def num_followers(self) -> int:
        return len(self.followers)

    @property
    def prices(self) -> np.ndarray:
        return np.asarray(self.price_grid, dtype=float)

    @property
    def quantities(self) -> np.ndarray:
        return np.asarray(self.qty_grid, dtype=float)

    def digest(self) -> str:
        parts = [
            "p:" + ",".join(f"{x:.12g}" for x in self.price_grid),
            "q:" + ",".join(f"{x:.12g}" for x in self.qty_grid),
            "c:" + ",".join(f"{x:.12g}" for x in self.caps),
            f"m:{self.mno_price:.12g};b:{self.unit_bw:.12g};v:{self.value_scale:.12g};"
            f"s:{self.signaling_coeff:.12g};w:{int(self.qos_weighted_revenue)}",
        ]
        for f in self.followers:
            parts.append(
                f"f:{f.reputation:.12g},{f.shortfall:.12g},{f.satisfaction:.12g},"
                f"{f.num_members},{'/'.join(map(str, f.sellers))}"
            )
        return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


@dataclass
class EquilibriumSolution:
    price_idx: tuple
    prices: np.ndarray
    quantities: np.ndarray
    leader_utils: np.ndarray
    follower_utils: np.ndarray
    exact: bool = True
    epsilon: float = 0.0


# -- payoff evaluation ------------------------------------------------------

def follower_need(game: StackelbergGame, i: int, prices: Sequence[float]) -> float:
    f = game.followers[i]
    best_price = min(prices[s] for s in f.sellers)
    return demand_quantity(f.shortfall, f.satisfaction, best_price, game.qty_grid,
                           max_price=game.price_grid[-1])


def _fill_order(game, i, prices):
    return sorted(game.followers[i].sellers, key=lambda s: (prices[s], s))


def fill_cost(game, i, prices, remaining, amounts):
    """Filled PRBs and purchase cost for each requested amount (vectorized)."""
    amounts = np.asarray(amounts, dtype=float)
    filled = np.zeros_like(amounts)
    cost = np.zeros_like(amounts)
    for s in _fill_order(game, i, prices):
        take = np.clip(amounts - filled, 0.0, remaining[s])
        filled += take
        cost += take * prices[s] * game.unit_bw
    return filled, cost


def follower_utility_curve(game, i, prices, remaining, amounts):
    f = game.followers[i]
    filled, cost = fill_cost(game, i, prices, remaining, amounts)
    need = follower_need(game, i, prices)
    value = game.value_scale * f.reputation * useful_quantity(filled, need)
    return value - cost - signaling_cost(f.num_members, game.signaling_coeff)


def allocate(game: StackelbergGame, prices, quantities):
    """Fill matrix (followers x leaders) for the given requests, in priority order."""
    remaining = np.asarray(game.caps, dtype=float).copy()
    fills = np.zeros((game.num_followers, game.num_leaders))
    for i in range(game.num_followers):
        want = float(quantities[i])
        for s in _fill_order(game, i, prices):
            take = min(max(want, 0.0), remaining[s])
            fills[i, s] = take
            remaining[s] -= take
            want -= take
    return fills


def payoffs(game: StackelbergGame, prices, quantities):
    """(leader utilities, follower utilities, fills) for a full strategy profile."""
    prices = np.asarray(prices, dtype=float)
    fills = allocate(game, prices, quantities)
    weights = np.array([f.satisfaction if game.qos_weighted_revenue else 1.0
                        for f in game.followers])
    leader_u = ((prices - game.mno_price) * game.unit_bw) * (weights @ fills)
    follower_u = np.empty(game.num_followers)
    remaining = np.asarray(game.caps, dtype=float).copy()
    for i in range(game.num_followers):
        follower_u[i] = follower_utility_curve(game, i, prices, remaining,
                                               np.array([quantities[i]]))[0]
        remaining -= fills[i]
    return leader_u, follower_u, fills


# -- best responses ---------------------------------------------------------

@dataclass
class FollowerResponse:
    quantities: np.ndarray
    infeasible: np.ndarray  # True where no grid quantity fits the remaining supply


def follower_best_response(game: StackelbergGame, prices) -> FollowerResponse:
    """Sequential grid best response; ties go to the smaller quantity."""
    prices = np.asarray(prices, dtype=float)
    grid = game.quantities
    remaining = np.asarray(game.caps, dtype=float).copy()
    q = np.zeros(game.num_followers)
    flags = np.zeros(game.num_followers, dtype=bool)
    for i, f in enumerate(game.followers):
        avail = sum(remaining[s] for s in f.sellers)
        feasible = grid[grid <= avail + 1e-9]
        if feasible.size == 0:
            flags[i] = True
            continue
        u = follower_utility_curve(game, i, prices, remaining, feasible)
        q[i] = feasible[int(np.argmax(u))]
        _consume(game, i, prices, remaining, q[i])
    return FollowerResponse(q, flags)


def _consume(game, i, prices, remaining, amount):
    want = amount
    for s in _fill_order(game, i, prices):
        take = min(want, remaining[s])
        remaining[s] -= take
        want -= take


def _check_budget(game, budget):
    size = float(len(game.price_grid)) ** game.num_leaders * float(len(game.qty_grid)) ** game.num_followers
    if size > budget:
        raise OracleInfeasible(
            f"joint grid of {size:.3g} profiles exceeds the enumeration budget {budget:.3g}"
        )


def leader_payoff_table(game: StackelbergGame):
    """Leader utilities for every joint price profile, followers best-responding.

    Returns ``(table, quantities)`` with shapes ``(P,)*M + (M,)`` and ``(P,)*M + (N,)``.
    """
    P, M, N = len(game.price_grid), game.num_leaders, game.num_followers
    grid = game.prices
    table = np.empty((P,) * M + (M,))
    qty = np.empty((P,) * M + (N,))
    for idx in itertools.product(range(P), repeat=M):
        prices = grid[list(idx)]
        br = follower_best_response(game, prices)
        lu, _, _ = payoffs(game, prices, br.quantities)
        table[idx] = lu
        qty[idx] = br.quantities
    return table, qty


def leader_regret(table: np.ndarray) -> np.ndarray:
    """Largest unilateral improvement available to each leader at each profile."""
    M = table.shape[-1]
    regret = np.empty_like(table)
    for m in range(M):
        um = table[..., m]
        regret[..., m] = um.max(axis=m, keepdims=True) - um
    return regret


def leader_optimize(game: StackelbergGame, table: np.ndarray | None = None, tol: float = 1e-9):
    """Pure grid Nash among leaders anticipating follower responses.

    Returns ``(price_idx, exact, epsilon)``. The lexicographically smallest
    equilibrium profile is chosen; if none exists, the profile with the
    smallest maximum regret is returned with ``exact=False``.
    """
    if table is None:
        table, _ = leader_payoff_table(game)
    worst = leader_regret(table).max(axis=-1)
    eq = np.argwhere(worst <= tol)
    if len(eq):
        return tuple(int(x) for x in eq[0]), True, 0.0
    flat = int(np.argmin(worst))
    idx = np.unravel_index(flat, worst.shape)
    return tuple(int(x) for x in idx), False, float(worst[idx])


def solve_se_bruteforce(game: StackelbergGame, budget: float = 1e8) -> EquilibriumSolution:
    _check_budget(game, budget)
    table, qty = leader_payoff_table(game)
    idx, exact, eps = leader_optimize(game, table)
    prices = game.prices[list(idx)]
    quantities = qty[idx].copy()
    lu, fu, _ = payoffs(game, prices, quantities)
    return EquilibriumSolution(idx, prices, quantities, lu, fu, exact, eps)


def verify_se(game: StackelbergGame, prices, quantities, tol: float = 1e-9):
    """Check every unilateral grid deviation; returns ``(passed, max_gain)``.

    Followers deviate with prices and other followers' quantities held fixed.
    Leaders deviate with the followers re-optimizing (the Stackelberg order).
    """
    prices = np.asarray(prices, dtype=float)
    quantities = np.asarray(quantities, dtype=float)
    lu, fu, fills = payoffs(game, prices, quantities)
    grid = game.quantities
    max_gain = -np.inf
    remaining = np.asarray(game.caps, dtype=float).copy()
    for i, f in enumerate(game.followers):
        avail = sum(remaining[s] for s in f.sellers)
        feasible = grid[grid <= avail + 1e-9]
        options = np.concatenate([feasible, [quantities[i]]])
        u = follower_utility_curve(game, i, prices, remaining, options)
        max_gain = max(max_gain, float(u[:-1].max(initial=u[-1]) - u[-1]))
        remaining -= fills[i]
    for m in range(game.num_leaders):
        for p in game.prices:
            trial = prices.copy()
            trial[m] = p
            br = follower_best_response(game, trial)
            trial_lu, _, _ = payoffs(game, trial, br.quantities)
            max_gain = max(max_gain, float(trial_lu[m] - lu[m]))
    return bool(max_gain <= tol), max_gain


# -- golden files -----------------------------------------------------------

def _fmt(xs) -> str:
    return " ".join(float(x).hex() for x in np.atleast_1d(xs))


def format_golden(game: StackelbergGame, sol: EquilibriumSolution) -> str:
    return (
        f"game {game.digest()} | prices {_fmt(sol.prices)} | quantities {_fmt(sol.quantities)}"
        f" | leader_utils {_fmt(sol.leader_utils)} | follower_utils {_fmt(sol.follower_utils)}"
        f" | exact {int(sol.exact)} | epsilon {float(sol.epsilon).hex()}"
    )


def parse_golden(line: str) -> dict:
    out = {}
    for field_ in line.strip().split(" | "):
        key, _, rest = field_.partition(" ")
        if key == "game":
            out[key] = rest
        elif key == "exact":
            out[key] = bool(int(rest))
        else:
            vals = [float.fromhex(x) for x in rest.split()]
            out[key] = vals[0] if key == "epsilon" else np.array(vals)
    return out


def write_golden(path, entries) -> None:
    lines = ["# slicetrade golden SE v1"] + [format_golden(g, s) for g, s in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def read_golden(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        rec = parse_golden(line)
        out[rec["game"]] = rec
    return out
