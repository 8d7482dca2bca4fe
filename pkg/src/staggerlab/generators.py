"""Seeded random instance families used by the CLI and the test suites."""
from __future__ import annotations

import math
from typing import Sequence

from .core import InputError, Instance, Mode, cycle_length, make_rng

NESTED_INTERVALS = (1, 2, 4, 8, 16)


def random_instance(rng, n: int, t_max: int, h_max: int, lam_max: int | None = None,
                    t_min: int = 1, mode: Mode = Mode.DISCRETE) -> Instance:
    """Uniform intervals and quantities, redrawn until the cycle length fits ``lam_max``."""
    if n < 1 or t_max < t_min or h_max < 1 or t_min < 1:
        raise InputError("need n >= 1, 1 <= t_min <= t_max and h_max >= 1")
    rng = make_rng(rng)
    for _ in range(10_000):
        pairs = [(int(rng.integers(t_min, t_max + 1)), int(rng.integers(1, h_max + 1))) for _ in range(n)]
        inst = Instance.from_pairs(pairs, mode)
        if lam_max is None or cycle_length(inst) <= lam_max:
            return inst
    raise InputError(f"could not draw an instance with cycle length <= {lam_max}")


def random_nested_instance(rng, n: int, h_max: int, intervals: Sequence[int] = NESTED_INTERVALS,
                           mode: Mode = Mode.DISCRETE) -> Instance:
    dist = sorted(set(intervals))
    if any(b % a for a, b in zip(dist, dist[1:])):
        raise InputError(f"interval menu {dist} is not nested")
    rng = make_rng(rng)
    pairs = [(int(dist[rng.integers(len(dist))]), int(rng.integers(1, h_max + 1))) for _ in range(n)]
    return Instance.from_pairs(pairs, mode)


def random_coprime_instance(rng, n: int, t_max: int, h_max: int,
                            mode: Mode = Mode.CONTINUOUS, t_min: int = 2) -> Instance:
    """Pairwise coprime intervals in ``[t_min, t_max]`` picked in random order."""
    rng = make_rng(rng)
    candidates = list(range(t_min, t_max + 1))
    for _ in range(1000):
        order = rng.permutation(len(candidates))
        chosen: list[int] = []
        for j in order:
            c = candidates[j]
            if all(math.gcd(c, d) == 1 for d in chosen):
                chosen.append(c)
                if len(chosen) == n:
                    break
        if len(chosen) == n:
            pairs = [(c, int(rng.integers(1, h_max + 1))) for c in chosen]
            return Instance.from_pairs(pairs, mode)
    raise InputError(f"no {n} pairwise coprime intervals in [{t_min}, {t_max}]")
