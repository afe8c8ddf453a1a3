# How buyers group up. Coalition worth is what the pooled coalition can get
# on its own at the posted price; merging pays when pooling the PRB need and
# reputation beats the extra signaling cost.
import itertools

from slicetrade import coalition as coal
from slicetrade.config import ExperimentConfig
from slicetrade.env import env_reset

cfg = ExperimentConfig(num_buyers=4, num_sellers=1)
env = env_reset(cfg, seed=2)
price = float(env.prices.mean())
worth = lambda c: env.coalition_worth(c, price)

for t in env.buyers:
    p = t.profile
    print(f"buyer {p.tenant_id} {p.service_class.value:5s} reputation {p.reputation:.2f} "
          f"shortfall {p.shortfall:2d} satisfaction {t.satisfaction:.2f}")

print("\nworth of every coalition at price %.3f" % price)
for k in range(1, 5):
    for c in itertools.combinations(range(4), k):
        print(" ", c, round(worth(c), 3))

res = coal.form_coalitions(range(4), worth, env.reputation, weight=env.split_weight)
for z1, z2, gain in res.merges:
    print("merge", z1, "+", z2, "gain %.3f" % gain)
print("partition", res.partition.label(), "stable", res.stable)
print("winner (highest summed reputation):", res.partition.coalitions[coal.select_winner(res.partition)])
