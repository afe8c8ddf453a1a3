"""Regenerate data/golden_se.txt (run by hand only when the game model changes)."""
import numpy as np

from fixtures import random_game
from slicetrade.stackelberg import solve_se_bruteforce, write_golden

GOLDEN_SEEDS = range(12)


def golden_games():
    return [random_game(np.random.default_rng(1000 + s), leaders=1 + s % 2, followers=1 + (s // 2) % 2)
            for s in GOLDEN_SEEDS]


if __name__ == "__main__":
    games = golden_games()
    write_golden("data/golden_se.txt", [(g, solve_se_bruteforce(g)) for g in games])
