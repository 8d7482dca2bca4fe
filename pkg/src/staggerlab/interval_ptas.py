"""Approximation scheme for instances with few distinct intervals.

Items sharing an interval form a class.  For every class we guess, on a
coarse grid, how much quantity should sit at each allowed shift, split the
class's items across shifts by a related-machines balancing step, and test
the resulting vector.  Guesses of different classes are independent, so the
enumeration runs per class and the accepted splits are combined afterwards.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional, Sequence

from .core import (
    DEFAULT_BUDGETS,
    Budgets,
    InputError,
    Instance,
    Item,
    Mode,
    ResourceError,
    ShiftVector,
    cycle_length,
)
from .lp_rounding import discretize_interval
from .peak import PeakResult, ScanEvaluator, peak_ip

EXACT_BALANCE_LIMIT = 15


@dataclass(frozen=True)
class IntervalClasses:
    eps: Fraction
    intervals: tuple[int, ...]  # distinct, ascending
    members: tuple[tuple[int, ...], ...]
    shifts: tuple[tuple[int, ...], ...]  # shared discretization per class

    @property
    def K(self) -> int:
        return len(self.intervals)


def group_by_interval(instance: Instance, eps) -> IntervalClasses:
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise InputError(f"eps must lie in (0, 1], got {eps}")
    if instance.mode is not Mode.DISCRETE:
        raise InputError("interval classes need a discrete instance")
    intervals = tuple(sorted(set(instance.intervals)))
    members = tuple(tuple(i for i, T in enumerate(instance.intervals) if T == Tk) for Tk in intervals)
    shifts = tuple(discretize_interval(Tk, eps)[0] for Tk in intervals)
    return IntervalClasses(eps, intervals, members, shifts)


@dataclass(frozen=True)
class QuantityGuess:
    """Per class, the number of grid units guessed for each allowed shift."""

    unit: Fraction
    multiples: tuple[tuple[int, ...], ...]

    def value(self, k: int, j: int) -> Fraction:
        return self.multiples[k][j] * self.unit


def quantity_unit(classes: IntervalClasses, h_sum: int) -> Fraction:
    return classes.eps ** 2 * h_sum / classes.K


def max_multiple(classes: IntervalClasses) -> int:
    return math.ceil(classes.K / classes.eps ** 2)


def _compositions(total: int, parts: int, cap: int) -> Iterator[tuple[int, ...]]:
    """All tuples of ``parts`` integers in ``[0, cap]`` summing to ``total``, lexicographic."""
    if parts == 1:
        if total <= cap:
            yield (total,)
        return
    for first in range(min(cap, total) + 1):
        if total - first > cap * (parts - 1):
            continue
        for rest in _compositions(total - first, parts - 1, cap):
            yield (first,) + rest


def _count_compositions(total: int, parts: int, cap: int) -> int:
    # inclusion-exclusion over parts exceeding the cap
    out = 0
    for j in range(parts + 1):
        rem = total - j * (cap + 1)
        if rem < 0:
            break
        out += (-1) ** j * math.comb(parts, j) * math.comb(rem + parts - 1, parts - 1)
    return out


def class_sum_window(classes: IntervalClasses, k: int, class_quantity: int,
                     unit: Fraction) -> range:
    """Admissible unit counts for class ``k``: sums in ``[H(S_k), H(S_k) + d_k*unit]``."""
    lo = math.ceil(class_quantity / unit)
    hi = math.floor(class_quantity / unit) + len(classes.shifts[k])
    return range(lo, hi + 1)


def class_guesses(classes: IntervalClasses, k: int, class_quantity: int,
                  unit: Fraction) -> Iterator[tuple[int, ...]]:
    d, cap = len(classes.shifts[k]), max_multiple(classes)
    for total in class_sum_window(classes, k, class_quantity, unit):
        yield from _compositions(total, d, cap)


def count_class_guesses(classes: IntervalClasses, k: int, class_quantity: int, unit: Fraction) -> int:
    d, cap = len(classes.shifts[k]), max_multiple(classes)
    return sum(_count_compositions(s, d, cap)
               for s in class_sum_window(classes, k, class_quantity, unit))


def enumerate_quantity_guesses(instance: Instance, classes: IntervalClasses,
                               budgets: Budgets = DEFAULT_BUDGETS) -> Iterator[QuantityGuess]:
    """Every full table passing the per-class sum window (the product of per-class streams)."""
    unit = quantity_unit(classes, instance.h_sum)
    sums = [sum(instance.items[i].quantity for i in m) for m in classes.members]
    total = math.prod(count_class_guesses(classes, k, sums[k], unit) for k in range(classes.K))
    if total > budgets.guesses:
        raise ResourceError(f"{total} quantity guesses exceed budget {budgets.guesses}")
    streams = [list(class_guesses(classes, k, sums[k], unit)) for k in range(classes.K)]
    for table in itertools.product(*streams):
        yield QuantityGuess(unit, table)


# ---------------------------------------------------------------------------
# related-machine balancing
# ---------------------------------------------------------------------------

def _makespan(loads: Sequence[Fraction], speeds: Sequence[Fraction]) -> Fraction:
    # only machines with positive speed ever receive load
    return max((load / speed for load, speed in zip(loads, speeds) if load), default=Fraction(0))


def _lpt(jobs: Sequence[int], speeds: Sequence[Fraction]) -> Optional[tuple[Fraction, tuple[int, ...]]]:
    """Longest job first, each to the machine finishing it earliest."""
    usable = [j for j, s in enumerate(speeds) if s > 0]
    if not usable:
        return None
    loads = [Fraction(0)] * len(speeds)
    assign = [0] * len(jobs)
    for idx in sorted(range(len(jobs)), key=lambda i: (-jobs[i], i)):
        best = min(usable, key=lambda j: ((loads[j] + jobs[idx]) / speeds[j], j))
        loads[best] += jobs[idx]
        assign[idx] = best
    return _makespan(loads, speeds), tuple(assign)


def _exact(jobs: Sequence[int], speeds: Sequence[Fraction]) -> Optional[tuple[Fraction, tuple[int, ...]]]:
    start = _lpt(jobs, speeds)
    if start is None:
        return None
    best_val, best_assign = start
    order = sorted(range(len(jobs)), key=lambda i: (-jobs[i], i))
    usable = [j for j, s in enumerate(speeds) if s > 0]
    loads = [Fraction(0)] * len(speeds)
    assign = [0] * len(jobs)

    def rec(pos: int, current: Fraction):
        nonlocal best_val, best_assign
        if pos == len(order):
            if current < best_val:
                best_val, best_assign = current, tuple(assign)
            return
        idx = order[pos]
        seen_empty = set()
        for j in usable:
            if loads[j] == 0:
                # empty machines of equal speed are interchangeable
                if speeds[j] in seen_empty:
                    continue
                seen_empty.add(speeds[j])
            span = max(current, (loads[j] + jobs[idx]) / speeds[j])
            if span >= best_val:
                continue
            loads[j] += jobs[idx]
            assign[idx] = j
            rec(pos + 1, span)
            loads[j] -= jobs[idx]

    rec(0, Fraction(0))
    return best_val, best_assign


@lru_cache(maxsize=1 << 16)
def _balance_cached(jobs: tuple[int, ...], speeds: tuple[Fraction, ...], eps: Fraction):
    solver = _exact if len(jobs) <= EXACT_BALANCE_LIMIT else _lpt
    res = solver(jobs, speeds)
    if res is None or res[0] > 1 + eps:
        return None
    return res[1]


def balance_partition(quantities: Sequence[int], speeds: Sequence, eps) -> Optional[tuple[tuple[int, ...], ...]]:
    """Split jobs (by position) over machines so that load/speed stays within ``1+eps``.

    Returns one tuple of job positions per machine, or ``None`` when the guess is rejected.
    """
    speeds = tuple(Fraction(s) for s in speeds)
    if any(s < 0 for s in speeds):
        raise InputError("machine speeds must be nonnegative")
    assign = _balance_cached(tuple(quantities), speeds, Fraction(eps))
    if assign is None:
        return None
    return tuple(tuple(i for i, a in enumerate(assign) if a == j) for j in range(len(speeds)))


# ---------------------------------------------------------------------------
# super-items and the driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MimickingPartition:
    groups: tuple[tuple[tuple[int, int], tuple[int, ...]], ...]  # ((class, shift), item ids)

    def shift_vector(self, instance: Instance) -> tuple[int, ...]:
        out = [None] * len(instance)
        for (_, tau), items in self.groups:
            for i in items:
                out[i] = tau
        if any(v is None for v in out):
            raise InputError("partition does not cover every item")
        return tuple(out)


def superitem_instance(instance: Instance, classes: IntervalClasses,
                       partition: MimickingPartition) -> tuple[Instance, ShiftVector]:
    items, shifts = [], []
    for (k, tau), members in partition.groups:
        if not members:
            continue
        items.append(Item(classes.intervals[k], sum(instance.items[i].quantity for i in members)))
        shifts.append(tau)
    sup = Instance(tuple(items), Mode.DISCRETE)
    return sup, ShiftVector.for_instance(sup, shifts)


def _evaluate(instance: Instance, vec: tuple[int, ...], classes: IntervalClasses,
              budgets: Budgets, scan: Optional[ScanEvaluator]) -> PeakResult:
    if scan is not None:
        return scan(vec)
    groups: dict[tuple[int, int], list[int]] = {}
    for i, tau in enumerate(vec):
        k = classes.intervals.index(instance.items[i].interval)
        groups.setdefault((k, tau), []).append(i)
    part = MimickingPartition(tuple((key, tuple(v)) for key, v in sorted(groups.items())))
    sup, sv = superitem_instance(instance, classes, part)
    return peak_ip(sup, sv, budgets)


@dataclass
class IntervalPtasResult:
    shifts: ShiftVector
    peak: PeakResult
    report: dict = field(default_factory=dict)


def interval_ptas_solve(instance: Instance, eps, budgets: Budgets = DEFAULT_BUDGETS) -> IntervalPtasResult:
    classes = group_by_interval(instance, eps)
    eps = classes.eps
    unit = quantity_unit(classes, instance.h_sum)
    sums = [sum(instance.items[i].quantity for i in m) for m in classes.members]
    counts = [count_class_guesses(classes, k, sums[k], unit) for k in range(classes.K)]
    total = math.prod(counts)
    # classes are balanced independently, so the work is the sum, not the product
    if sum(counts) > budgets.guesses:
        raise ResourceError(f"{sum(counts)} per-class quantity guesses exceed budget {budgets.guesses}")

    # per class: distinct accepted splits, each with the first guess producing it
    accepted: list[dict[tuple[int, ...], tuple[int, ...]]] = []
    accepted_counts = []
    for k in range(classes.K):
        members = classes.members[k]
        jobs = [instance.items[i].quantity for i in members]
        splits: dict[tuple[int, ...], tuple[int, ...]] = {}
        n_ok = 0
        for mult in class_guesses(classes, k, sums[k], unit):
            groups = balance_partition(jobs, [m * unit for m in mult], eps)
            if groups is None:
                continue
            n_ok += 1
            local = [0] * len(members)
            for j, grp in enumerate(groups):
                for pos in grp:
                    local[pos] = classes.shifts[k][j]
            splits.setdefault(tuple(local), mult)
        accepted.append(splits)
        accepted_counts.append(n_ok)

    n_combos = math.prod(len(a) for a in accepted)
    if n_combos > budgets.guesses:
        raise ResourceError(f"{n_combos} candidate vectors exceed budget {budgets.guesses}")
    peaks: dict[tuple[int, ...], PeakResult] = {}
    scan = ScanEvaluator(instance, budgets) if cycle_length(instance) <= budgets.scan else None
    best = None
    for combo in itertools.product(*(sorted(a) for a in accepted)):
        vec = [0] * len(instance)
        for k, local in enumerate(combo):
            for i, tau in zip(classes.members[k], local):
                vec[i] = tau
        vec = tuple(vec)
        if vec not in peaks:
            peaks[vec] = _evaluate(instance, vec, classes, budgets, scan)
        key = (peaks[vec].value, vec, combo)
        if best is None or key[:2] < best[:2]:
            best = key
    if best is None:
        # unreachable in practice: the coarsest guess always balances
        raise ResourceError("every quantity guess was rejected")
    value, vec, combo = best
    table = [[str(m * unit) for m in accepted[k][combo[k]]] for k in range(classes.K)]
    report = {
        "classes": [{"interval": T, "items": list(m), "shifts": list(s)}
                    for T, m, s in zip(classes.intervals, classes.members, classes.shifts)],
        "guesses": total,
        "rejected": total - math.prod(accepted_counts),
        "candidates_evaluated": len(peaks),
        "chosen_table": table,
    }
    return IntervalPtasResult(ShiftVector.for_instance(instance, vec), peaks[vec], report)
