"""Shared random fixtures for the coalition and equilibrium tests."""
import numpy as np

from slicetrade.stackelberg import FollowerSpec, StackelbergGame


def market_worth(rng, n_buyers, price=None):
    """Random buyers and a coalition worth built like the market's.

    Worth is the best purchase surplus of the pooled coalition at one posted
    price (continuous optimum of the concave usefulness curve) minus a
    quadratic signaling cost.
    """
    rep = {i: float(rng.uniform(0.05, 1.0)) for i in range(n_buyers)}
    short = {i: float(rng.integers(1, 20)) for i in range(n_buyers)}
    sat = {i: float(rng.uniform(0.0, 0.9)) for i in range(n_buyers)}
    kappa = float(rng.uniform(2.0, 16.0))
    sig = float(rng.uniform(0.0, 0.5))
    p = float(rng.uniform(1.0, 2.0)) if price is None else price
    unit = 2.0

    def worth(c):
        om = sum(rep[i] for i in c)
        s = sum(short[i] for i in c)
        xi = sum(short[i] * sat[i] for i in c) / s
        need = s * (1 - xi) * 2.0 / p
        w = max(need * (1 - p * unit / (kappa * om)), 0.0)
        useful = w - w * w / (2 * need)
        return kappa * om * useful - p * unit * w - sig * len(c) ** 2

    return list(range(n_buyers)), worth, rep


def random_game(rng, leaders=2, followers=2, points=10):
    caps = tuple(float(x) for x in rng.integers(0, 40, size=leaders))
    fs = []
    for i in range(followers):
        if followers <= leaders:
            sellers = tuple(m for m in range(leaders) if m % followers == i)
        else:
            sellers = (i % leaders,)
        fs.append(FollowerSpec(reputation=float(rng.uniform(0.1, 2.0)),
                               shortfall=float(rng.integers(1, 30)),
                               satisfaction=float(rng.uniform(0, 0.9)),
                               num_members=int(rng.integers(1, 4)), sellers=sellers))
    qty = tuple(float(x) for x in np.unique(np.rint(np.linspace(1, 50, points))))
    return StackelbergGame(price_grid=tuple(np.linspace(1.0, 2.0, points)), qty_grid=qty,
                           caps=caps, followers=tuple(fs),
                           value_scale=float(rng.uniform(2.0, 16.0)),
                           signaling_coeff=float(rng.uniform(0, 0.3)),
                           qos_weighted_revenue=bool(rng.integers(0, 2)))


def entry_fixture(rng, n_buyers, price=None):
    """Like :func:`market_worth`, but every buyer profits from trading alone.

    Buyers that would lose money on their own do not enter the market, so
    fixtures are redrawn until each singleton worth is non-negative.
    """
    while True:
        buyers, worth, rep = market_worth(rng, n_buyers, price)
        if min(worth((i,)) for i in buyers) >= 0:
            return buyers, worth, rep
