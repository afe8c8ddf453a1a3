"""Coalition formation among buyer tenants (transferable utility).

Buyers start as singletons and merge while the merged coalition is worth
strictly more than its parts. Payoffs inside a coalition are split in
proportion to each member's contribution (reputation times purchase). A
partition is stable when no single buyer can raise its own payoff by
moving to another coalition or going alone.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

Coalition = tuple  # sorted tuple of buyer ids
ValueFn = Callable[[Coalition], float]

_TOL = 1e-12


def _canon(coalitions: Iterable[Iterable[int]]) -> list[Coalition]:
    return sorted((tuple(sorted(c)) for c in coalitions), key=lambda c: c)


@dataclass
class CoalitionPartition:
    coalitions: list
    values: list = field(default_factory=list)
    reputations: list = field(default_factory=list)

    @classmethod
    def build(cls, coalitions, value_fn: ValueFn | None, reputation: Mapping[int, float]):
        cs = _canon(coalitions)
        vals = [float(value_fn(c)) for c in cs] if value_fn is not None else [0.0] * len(cs)
        reps = [float(sum(reputation[n] for n in c)) for c in cs]
        return cls(cs, vals, reps)

    @property
    def sizes(self) -> list[int]:
        return [len(c) for c in self.coalitions]

    def members(self) -> list[int]:
        return sorted(n for c in self.coalitions for n in c)

    def check(self, buyers: Iterable[int], value_fn: ValueFn | None = None,
              reputation: Mapping[int, float] | None = None) -> None:
        seen = [n for c in self.coalitions for n in c]
        if any(len(c) == 0 for c in self.coalitions):
            raise AssertionError("empty coalition in partition")
        if len(seen) != len(set(seen)):
            raise AssertionError("coalitions overlap")
        if set(seen) != set(buyers):
            raise AssertionError("partition does not cover the buyer set")
        if reputation is not None:
            for c, r in zip(self.coalitions, self.reputations):
                if abs(r - sum(reputation[n] for n in c)) > 1e-9:
                    raise AssertionError("cached reputation is stale")
        if value_fn is not None:
            for c, v in zip(self.coalitions, self.values):
                if abs(v - value_fn(c)) > 1e-9:
                    raise AssertionError("cached value is stale")

    def label(self) -> str:
        """Compact text form, e.g. ``0+2|1``."""
        return "|".join("+".join(str(n) for n in c) for c in self.coalitions)


def init_partition(buyers: Sequence[int]) -> list[Coalition]:
    buyers = list(buyers)
    if not buyers:
        raise ValueError("no buyers")
    return [(b,) for b in sorted(buyers)]


def merge_gain(z1: Coalition, z2: Coalition, value_fn: ValueFn) -> float:
    if set(z1) & set(z2):
        raise ValueError(f"coalitions {z1} and {z2} overlap")
    union = tuple(sorted(set(z1) | set(z2)))
    return value_fn(union) - value_fn(tuple(sorted(z1))) - value_fn(tuple(sorted(z2)))


def split_payoff(contributions: Sequence[float], total_utility: float) -> np.ndarray:
    """Divide ``total_utility`` in proportion to the members' contributions."""
    c = np.asarray(contributions, dtype=float)
    if c.size == 0:
        raise ValueError("empty coalition")
    s = c.sum()
    if s == 0:
        return np.full(c.size, total_utility / c.size)
    return total_utility * c / s


def member_payoff(n: int, coalition: Coalition, value_fn: ValueFn,
                  weight: Mapping[int, float]) -> float:
    members = list(coalition)
    shares = split_payoff([weight[m] for m in members], value_fn(coalition))
    return float(shares[members.index(n)])


def _best_switch(n, coalitions, value_fn, weight):
    """Best strictly improving move for buyer ``n``: (target index or -1 for alone, gain)."""
    home = next(i for i, c in enumerate(coalitions) if n in c)
    current = member_payoff(n, coalitions[home], value_fn, weight)
    best, best_gain = None, 0.0
    for i, c in enumerate(coalitions):
        if i == home:
            continue
        cand = tuple(sorted(c + (n,)))
        gain = member_payoff(n, cand, value_fn, weight) - current
        if gain > best_gain + _TOL * max(1.0, abs(current)):
            best, best_gain = i, gain
    if len(coalitions[home]) > 1:
        gain = member_payoff(n, (n,), value_fn, weight) - current
        if gain > best_gain + _TOL * max(1.0, abs(current)):
            best, best_gain = -1, gain
    return best, best_gain


def is_stable(coalitions: Sequence[Coalition], value_fn: ValueFn,
              weight: Mapping[int, float]) -> bool:
    """True iff no buyer gains by a unilateral switch (to another coalition or alone)."""
    cs = _canon(coalitions)
    return all(_best_switch(n, cs, value_fn, weight)[0] is None for c in cs for n in c)


def best_merge(coalitions: Sequence[Coalition], value_fn: ValueFn):
    """Highest positive-gain pair ``(i, j, gain)``, or None. Ties keep the earliest pair."""
    best = None
    for i, j in itertools.combinations(range(len(coalitions)), 2):
        g = merge_gain(coalitions[i], coalitions[j], value_fn)
        if g > _TOL * max(1.0, abs(g)) and (best is None or g > best[2]):
            best = (i, j, g)
    return best


def set_partitions(items: Sequence[int]):
    """All partitions of ``items`` (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


@dataclass
class FormationResult:
    partition: CoalitionPartition
    merges: list  # (z1, z2, gain) in the order applied
    switches: list  # (buyer, from, to)
    stable: bool
    used_enumeration: bool = False


class _Cached:
    def __init__(self, fn):
        self.fn, self.cache = fn, {}

    def __call__(self, c):
        c = tuple(sorted(c))
        if c not in self.cache:
            self.cache[c] = float(self.fn(c))
        return self.cache[c]


def form_coalitions(
    buyers: Sequence[int],
    value_fn: ValueFn,
    reputation: Mapping[int, float],
    weight: Mapping[int, float] | None = None,
    seed: int | None = None,
    max_rounds: int = 1000,
    enumeration_limit: int = 10,
) -> FormationResult:
    """Greedy best-gain merging, then single-buyer switches, until neither applies.

    ``weight`` sets the payoff split (defaults to reputation). ``seed``, when
    given, randomizes the order in which buyers are offered switches; merges
    are always greedy and deterministic. If the dynamics cycle, the partitions
    of small buyer sets are enumerated and the most valuable settled one (no
    improving merge, stable) is returned.
    """
    vf = _Cached(value_fn)
    weight = dict(reputation if weight is None else weight)
    cs = init_partition(buyers)
    merges, switches, seen = [], [], set()
    order = sorted(buyers)
    if seed is not None:
        order = list(np.random.default_rng(seed).permutation(order))
    settled = False
    for _ in range(max_rounds):
        key = tuple(cs)
        if key in seen:
            break
        seen.add(key)
        m = best_merge(cs, vf)
        if m is not None:
            i, j, g = m
            merges.append((cs[i], cs[j], g))
            cs = _canon([c for k, c in enumerate(cs) if k not in (i, j)] + [cs[i] + cs[j]])
            continue
        moved = False
        for n in order:
            target, _ = _best_switch(n, cs, vf, weight)
            if target is None:
                continue
            home = next(k for k, c in enumerate(cs) if n in c)
            new = [tuple(x for x in c if x != n) for c in cs]
            if target == -1:
                new.append((n,))
            else:
                new[target] = new[target] + (n,)
            switches.append((n, cs[home], cs[target] if target >= 0 else ()))
            cs = _canon([c for c in new if c])
            moved = True
            break
        if not moved:
            settled = True
            break
    used_enum = False
    if not settled and len(buyers) <= enumeration_limit:
        cs, settled = _enumerate_settled(buyers, vf, weight, fallback=cs)
        used_enum = True
    part = CoalitionPartition.build(cs, vf, reputation)
    return FormationResult(part, merges, switches, settled and is_stable(cs, vf, weight), used_enum)


def has_improving_merge(coalitions, value_fn) -> bool:
    return best_merge(_canon(coalitions), value_fn) is not None


def _enumerate_settled(buyers, value_fn, weight, fallback):
    best, best_val = None, -np.inf
    for part in set_partitions(sorted(buyers)):
        cs = _canon(part)
        if has_improving_merge(cs, value_fn) or not is_stable(cs, value_fn, weight):
            continue
        total = sum(value_fn(c) for c in cs)
        if total > best_val + _TOL:
            best, best_val = cs, total
    if best is None:
        return fallback, False
    return best, True


def select_winner(partition: CoalitionPartition) -> int:
    """Index of the coalition with the largest summed reputation (lowest index on ties)."""
    if not partition.coalitions:
        raise ValueError("empty partition")
    return int(np.argmax(np.asarray(partition.reputations)))


def rank_coalitions(partition: CoalitionPartition) -> list[int]:
    """Coalition indices by descending summed reputation; ties by index."""
    return sorted(range(len(partition.coalitions)), key=lambda i: (-partition.reputations[i], i))
