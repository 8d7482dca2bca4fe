"""Exact peak evaluation (scan, order events, integer program) and brute-force optima."""
from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .core import (
    DEFAULT_BUDGETS,
    Budgets,
    Instance,
    InputError,
    Mode,
    ResourceError,
    ShiftVector,
    cycle_length,
    total_level,
)

_INT64_SAFE = 2**62


class Engine(enum.Enum):
    SCAN = "scan"
    EVENTS = "events"
    IP = "ip"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class PeakResult:
    value: Fraction
    argmax_time: Fraction
    engine: Engine


@dataclass(frozen=True)
class OptimumResult:
    value: Fraction
    shifts: ShiftVector
    heuristic: bool = False  # True for the grid-restricted continuous search


def _shifts(instance: Instance, shifts) -> ShiftVector:
    if isinstance(shifts, ShiftVector):
        if len(shifts) != len(instance):
            raise InputError(f"expected {len(instance)} shifts, got {len(shifts)}")
        return shifts
    return ShiftVector.for_instance(instance, shifts)


def scaled_level_row(T: int, H: int, tau: int, lam: int) -> np.ndarray:
    """``lam * I_i(tau, t)`` for integer ``t`` in ``[0, lam)`` as an integer array."""
    t = np.arange(lam, dtype=np.int64)
    elapsed = (t - tau) % T
    dtype = np.int64 if H * lam < _INT64_SAFE else object
    return (np.asarray(T - elapsed, dtype=dtype) * (H * (lam // T)))


def _scaled_total(instance: Instance, taus: Sequence[int], lam: int) -> np.ndarray:
    total = None
    for it, tau in zip(instance.items, taus):
        row = scaled_level_row(it.interval, it.quantity, tau, lam)
        total = row if total is None else total + row
    return total


def peak_scan(instance: Instance, shifts, budgets: Budgets = DEFAULT_BUDGETS) -> PeakResult:
    """Maximum of the total level over every integer time of one cycle."""
    if instance.mode is not Mode.DISCRETE:
        raise InputError("peak_scan needs a discrete instance")
    sv = _shifts(instance, shifts)
    lam = cycle_length(instance)
    if lam > budgets.scan:
        raise ResourceError(f"cycle length {lam} exceeds scan budget {budgets.scan}")
    if instance.h_sum * lam >= _INT64_SAFE:
        raise ResourceError(f"cycle length {lam} too large for exact integer scan")
    total = _scaled_total(instance, sv.as_ints(), lam)
    t = int(np.argmax(total))
    return PeakResult(Fraction(int(total[t]), lam), Fraction(t), Engine.SCAN)


class ScanEvaluator:
    """``peak_scan`` for many integer vectors on one instance, with cached level rows."""

    def __init__(self, instance: Instance, budgets: Budgets = DEFAULT_BUDGETS):
        if instance.mode is not Mode.DISCRETE:
            raise InputError("peak_scan needs a discrete instance")
        self.instance = instance
        self.lam = cycle_length(instance)
        if self.lam > budgets.scan:
            raise ResourceError(f"cycle length {self.lam} exceeds scan budget {budgets.scan}")
        if instance.h_sum * self.lam >= _INT64_SAFE:
            raise ResourceError(f"cycle length {self.lam} too large for exact integer scan")
        self._rows: dict[tuple[int, int], np.ndarray] = {}
        self._cache: dict[tuple[int, ...], PeakResult] = {}

    def row(self, i: int, tau: int) -> np.ndarray:
        key = (i, tau)
        if key not in self._rows:
            it = self.instance.items[i]
            self._rows[key] = scaled_level_row(it.interval, it.quantity, tau, self.lam)
        return self._rows[key]

    def __call__(self, vec: Sequence[int]) -> PeakResult:
        vec = tuple(int(v) % T for v, T in zip(vec, self.instance.intervals))
        if len(vec) != len(self.instance):
            raise InputError(f"expected {len(self.instance)} shifts, got {len(vec)}")
        res = self._cache.get(vec)
        if res is None:
            total = sum(self.row(i, tau) for i, tau in enumerate(vec))
            t = int(np.argmax(total))
            res = PeakResult(Fraction(int(total[t]), self.lam), Fraction(t), Engine.SCAN)
            self._cache[vec] = res
        return res

    def __len__(self) -> int:
        return len(self._cache)


def peak_events(instance: Instance, shifts, budgets: Budgets = DEFAULT_BUDGETS) -> PeakResult:
    """Maximum over order epochs in ``[0, lam)``; valid in both modes."""
    sv = _shifts(instance, shifts)
    lam = cycle_length(instance)
    n_epochs = sum(lam // T for T in instance.intervals)
    if n_epochs > budgets.epochs:
        raise ResourceError(f"{n_epochs} order epochs exceed budget {budgets.epochs}")
    # common denominator turns every epoch and level into an integer
    den = math.lcm(*(s.denominator for s in sv))
    taus = [int(s * den) for s in sv]
    scale = lam * den
    if instance.h_sum * scale >= _INT64_SAFE or scale >= _INT64_SAFE:
        return _peak_events_exact(instance, sv, lam)
    epochs = np.unique(np.concatenate([
        np.arange(tau, scale, T * den, dtype=np.int64)
        for tau, T in zip(taus, instance.intervals)
    ]))
    total = np.zeros(len(epochs), dtype=np.int64)
    for it, tau in zip(instance.items, taus):
        Td = it.interval * den
        elapsed = (epochs - tau) % Td
        total += (Td - elapsed) * (it.quantity * (lam // it.interval))
    k = int(np.argmax(total))
    return PeakResult(Fraction(int(total[k]), scale), Fraction(int(epochs[k]), den), Engine.EVENTS)


def _peak_events_exact(instance: Instance, sv: ShiftVector, lam: int) -> PeakResult:
    epochs = sorted({s + k * T for s, T in zip(sv, instance.intervals) for k in range(lam // T)})
    best, arg = None, None
    for e in epochs:
        v = total_level(instance, sv, e)
        if best is None or v > best:
            best, arg = v, e
    return PeakResult(best, arg, Engine.EVENTS)


# ---------------------------------------------------------------------------
# integer-program engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IpModel:
    """Peak time ``p`` and last-order indices ``x_i`` with ``tau_i + x_i T_i <= p``.

    The objective is scaled by ``lam`` so every coefficient is an integer.
    """

    intervals: tuple[int, ...]
    quantities: tuple[int, ...]
    shifts: tuple[int, ...]
    lam: int

    @classmethod
    def build(cls, instance: Instance, shifts) -> "IpModel":
        sv = _shifts(instance, shifts)
        return cls(instance.intervals, instance.quantities, sv.as_ints(), cycle_length(instance))

    def best_x(self, p: int) -> tuple[int, ...]:
        return tuple((p - tau) // T for tau, T in zip(self.shifts, self.intervals))

    def objective(self, p: int, x: Sequence[int]) -> int:
        """Scaled objective; ``None``-free, raises on infeasible ``x``."""
        total = 0
        for T, H, tau, xi in zip(self.intervals, self.quantities, self.shifts, x):
            last = tau + xi * T
            if last > p:
                raise InputError("order index violates tau_i + x_i T_i <= p")
            total += H * (T - (p - last)) * (self.lam // T)
        return total

    def value_at(self, p: int) -> int:
        return self.objective(p, self.best_x(p))


@dataclass(frozen=True)
class IpWitness:
    p: int
    x: tuple[int, ...]
    objective: int


def ip_feasible(model: IpModel, psi: int, p_max: Optional[int] = None) -> Optional[IpWitness]:
    """Smallest ``p`` in ``[0, min(lam, p_max)]`` whose scaled objective reaches ``psi``.

    Branch-and-bound over intervals of ``p``; for fixed ``p`` the best ``x_i`` is
    ``floor((p - tau_i) / T_i)``.  Returns ``None`` when infeasible.
    """
    hi = model.lam if p_max is None else min(model.lam, p_max)
    if hi < 0:
        return None
    if psi > model.lam * sum(model.quantities):
        return None
    items = list(zip(model.intervals, model.quantities, model.shifts))
    weights = [H * (model.lam // T) for T, H, _ in items]

    def bound(a: int, b: int) -> tuple[int, bool]:
        # each level peaks at its first epoch inside [a, b], otherwise at a;
        # the flag reports whether any level jumps strictly after a
        ub, jumps = 0, False
        for (T, H, tau), w in zip(items, weights):
            gap = (tau - a) % T
            if a + gap <= b:
                ub += w * T
                jumps = jumps or gap > 0
            else:
                ub += w * (T - ((a - tau) % T))
        return ub, jumps

    stack = [(0, hi)]
    while stack:
        a, b = stack.pop()
        ub, jumps = bound(a, b)
        if ub < psi:
            continue
        if a == b or not jumps:
            # the total is non-increasing on [a, b], so a is the best point
            return IpWitness(a, model.best_x(a), model.value_at(a))
        mid = (a + b) // 2
        # push the right half first so the left half is explored first
        stack.append((mid + 1, b))
        stack.append((a, mid))
    return None


def peak_ip(instance: Instance, shifts, budgets: Budgets = DEFAULT_BUDGETS) -> PeakResult:
    """Peak via two binary searches over the feasibility form of the IP."""
    if instance.mode is not Mode.DISCRETE:
        raise InputError("peak_ip needs a discrete instance")
    if len(instance) > budgets.ip_dimension:
        raise ResourceError(
            f"{len(instance)} items exceed IP dimension budget {budgets.ip_dimension}")
    model = IpModel.build(instance, shifts)
    lam, hs = model.lam, sum(model.quantities)
    # optimum lies in [lam*H/2, lam*H]; the lower end is always feasible
    lo, hi = (lam * hs) // 2, lam * hs
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ip_feasible(model, mid) is not None:
            lo = mid
        else:
            hi = mid - 1
    best = lo
    # smallest p attaining the optimum
    plo, phi = 0, lam
    while plo < phi:
        mid = (plo + phi) // 2
        if ip_feasible(model, best, p_max=mid) is not None:
            phi = mid
        else:
            plo = mid + 1
    return PeakResult(Fraction(best, lam), Fraction(plo), Engine.IP)


# ---------------------------------------------------------------------------
# brute-force optimum
# ---------------------------------------------------------------------------

def _level_tables(instance: Instance, lam: int) -> list[np.ndarray]:
    # table[i][tau] is the scaled level row of item i with shift tau
    return [
        np.stack([scaled_level_row(it.interval, it.quantity, tau, lam) for tau in range(it.interval)])
        for it in instance.items
    ]


@dataclass(frozen=True)
class _SearchPlan:
    tables: list
    floor: tuple[int, ...]  # floor[d]: least amount items d.. add to any time
    twin: tuple[int, ...]  # twin[d]: last earlier item identical to d, or -1


def _plan(instance: Instance, lam: int) -> _SearchPlan:
    tables = _level_tables(instance, lam)
    floor = [0] * (len(tables) + 1)
    for d in range(len(tables) - 1, -1, -1):
        floor[d] = floor[d + 1] + int(tables[d][0].min())
    seen: dict = {}
    twin = []
    for d, it in enumerate(instance.items):
        twin.append(seen.get(it, -1))
        seen[it] = d
    return _SearchPlan(tables, tuple(floor), tuple(twin))


def _greedy_limit(plan: _SearchPlan) -> int:
    """One more than the peak of a greedy vector, so the search always finds something."""
    acc = plan.tables[0][0].copy()
    for rows in plan.tables[1:]:
        acc = acc + min(rows, key=lambda r: int((acc + r).max()))
    return int(acc.max()) + 1


def _search_block(plan: _SearchPlan, first_choices, limit: int):
    # item 1's only possible twin is item 0, pinned at 0, so every first choice is allowed
    best_vec = None
    for c in first_choices:
        val, vec = _dfs(plan, 2, plan.tables[0][0] + plan.tables[1][c], (0, c), limit)
        if vec is not None:
            limit, best_vec = val, vec
    return (None, None) if best_vec is None else (limit, best_vec)


def _dfs(plan: _SearchPlan, depth, acc, prefix, limit):
    # only vectors strictly below ``limit`` are wanted; levels only grow as items
    # are added, and every later item adds at least its minimum level everywhere.
    # Lexicographic visiting order keeps the smallest optimal vector.
    peak = int(acc.max())
    if peak + plan.floor[depth] >= limit:
        return None, None
    if depth == len(plan.tables):
        return peak, prefix
    best_vec = None
    # identical items are interchangeable: keep their shifts non-decreasing
    start = prefix[plan.twin[depth]] if plan.twin[depth] >= 0 else 0
    rows = plan.tables[depth]
    for tau in range(start, len(rows)):
        val, vec = _dfs(plan, depth + 1, acc + rows[tau], prefix + (tau,), limit)
        if vec is not None:
            limit, best_vec = val, vec
    return (None, None) if best_vec is None else (limit, best_vec)


def _search_worker(args):
    instance, lam, chunk, limit = args
    return _search_block(_plan(instance, lam), chunk, limit)


def brute_optimum(instance: Instance, budgets: Budgets = DEFAULT_BUDGETS, jobs: int = 1,
                  grid: int = 4) -> OptimumResult:
    """Exhaustive optimum with the first shift pinned to 0.

    Continuous instances are searched on the grid of multiples of ``1/grid``
    only, so the result is flagged as heuristic.
    """
    if instance.mode is Mode.CONTINUOUS:
        scaled = Instance.from_pairs([(T * grid, H) for T, H in zip(instance.intervals, instance.quantities)])
        res = brute_optimum(scaled, budgets, jobs)
        return OptimumResult(res.value, ShiftVector.for_instance(
            instance, [Fraction(s) / grid for s in res.shifts]), heuristic=True)
    count = math.prod(instance.intervals[1:])
    if count > budgets.brute:
        raise ResourceError(f"{count} shift vectors exceed brute-force budget {budgets.brute}")
    lam = cycle_length(instance)
    if lam > budgets.scan:
        raise ResourceError(f"cycle length {lam} exceeds scan budget {budgets.scan}")
    if instance.h_sum * lam >= _INT64_SAFE:
        raise ResourceError(f"cycle length {lam} too large for exact integer scan")
    if len(instance) == 1:
        return OptimumResult(Fraction(instance.h_sum), ShiftVector.zeros(instance))
    firsts = list(range(instance.intervals[1]))
    plan = _plan(instance, lam)
    limit = _greedy_limit(plan)
    if jobs > 1 and len(firsts) > 1:
        chunks = [firsts[i::jobs] for i in range(jobs) if firsts[i::jobs]]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(_search_worker, [(instance, lam, c, limit) for c in chunks]))
        # min by value, then lexicographic shifts
        val, vec = min((r for r in results if r[1] is not None), key=lambda r: (r[0], r[1]))
    else:
        val, vec = _search_block(plan, firsts, limit)
    return OptimumResult(Fraction(val, lam), ShiftVector.for_instance(instance, vec))


def enumerate_optimum_naive(instance: Instance) -> OptimumResult:
    """Plain product enumeration with ``peak_scan``; slow, used as a test oracle."""
    best = None
    ranges = [range(1)] + [range(T) for T in instance.intervals[1:]]
    for vec in itertools.product(*ranges):
        v = peak_scan(instance, vec).value
        if best is None or v < best[0]:
            best = (v, vec)
    return OptimumResult(best[0], ShiftVector.for_instance(instance, best[1]))
