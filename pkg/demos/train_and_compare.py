# Short training runs of the four algorithms on the default 5-tenant market.
# The full experiment is `slicetrade converge`; this is the 600-iteration taste.
import sys

import numpy as np

from slicetrade.config import ExperimentConfig
from slicetrade.experiments import window_means
from slicetrade.trainer import train

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 600
cfg = ExperimentConfig(iterations=iters)

for alg in cfg.algorithms:
    h = train(alg, cfg, seed=0, se_gap=False)
    w = window_means(h.system_utility, 100)
    tail = slice(-100, None)
    print(f"{alg:12s} system utility per 100 its: {np.round(w, 1)}")
    print(f"{'':12s} final prices {np.round(h.array('prices')[tail].mean(axis=0), 3)}"
          f"  quantities {np.round(h.array('quantities')[tail].mean(axis=0), 1)}"
          f"  partition {h.partitions[-1]}")
