# Walk through the brute-force equilibrium on the smallest market:
# one seller, one buyer, 10 prices and 10 quantities.
import numpy as np

from slicetrade.config import ExperimentConfig
from slicetrade.env import env_reset
from slicetrade.stackelberg import follower_best_response, payoffs, solve_se_bruteforce, verify_se

cfg = ExperimentConfig(num_sellers=1, num_buyers=1, price_grid_points=10, qty_grid_points=10)
env = env_reset(cfg, seed=0)
game = env.game
print("prices    ", np.round(game.prices, 3))
print("quantities", game.quantities)
print("seller cap", game.caps, " buyer", game.followers[0])

# the buyer's best response to every posted price, and what the seller earns from it
for p in game.prices:
    q = follower_best_response(game, [p]).quantities
    lu, fu, _ = payoffs(game, [p], q)
    print(f"price {p:.3f} -> buys {q[0]:4.0f}   seller {lu[0]:7.3f}   buyer {fu[0]:8.3f}")

sol = solve_se_bruteforce(game)
ok, gain = verify_se(game, sol.prices, sol.quantities)
print("equilibrium price", sol.prices, "quantity", sol.quantities, "exact", sol.exact)
print("no unilateral deviation gains:", ok, "(best deviation gain %.3g)" % gain)

# a richer buyer (no initial lease) gives an interior equilibrium
env = env_reset(cfg.replace(buyer_lease_fraction=0.0), seed=1)
sol = solve_se_bruteforce(env.game)
print("lease 0: price", np.round(sol.prices, 3), "quantity", sol.quantities)
