"""Nested instances: split into well-separated blocks, solve each block, glue.

Intervals are binned by powers of ``k = 1/eps``; every ``k``-th bin is
dropped into a residual set and the runs of bins in between become blocks.
Consecutive blocks are then so far apart that their optima nearly add up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .core import (
    DEFAULT_BUDGETS,
    Budgets,
    InputError,
    Instance,
    Item,
    Mode,
    ShiftVector,
    cycle_length,
)
from .interval_ptas import interval_ptas_solve
from .peak import PeakResult, brute_optimum, peak_events, peak_scan


def _check_eps(eps) -> Fraction:
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise InputError(f"eps must lie in (0, 1], got {eps}")
    return eps


def bin_base(eps) -> int:
    """Integer ``k >= 2`` with ``1/k <= eps``; the effective eps is ``1/k``."""
    return max(2, math.ceil(1 / _check_eps(eps)))


def continuous_to_discrete(instance: Instance, eps) -> Instance:
    """Scale every interval by ``ceil(1/eps)`` and switch to discrete mode."""
    c = math.ceil(1 / _check_eps(eps))
    # Item validation rejects anything past 64 bits
    return Instance(tuple(Item(it.interval * c, it.quantity) for it in instance.items), Mode.DISCRETE)


def is_nested(intervals) -> bool:
    dist = sorted(set(intervals))
    return all(b % a == 0 for a, b in zip(dist, dist[1:]))


def interval_bin(T: int, k: int) -> int:
    """Bin 1 is ``[1, k]``; bin ``q >= 2`` is ``(k^(q-1), k^q]``."""
    q, top = 1, k
    while T > top:
        top *= k
        q += 1
    return q


@dataclass(frozen=True)
class WellSeparatedPartition:
    blocks: tuple[tuple[int, ...], ...]
    residual: tuple[int, ...]
    xi: int
    bins: tuple[int, ...]  # bin index per item
    k: int

    @property
    def eps(self) -> Fraction:
        return Fraction(1, self.k)


def partition_violations(instance: Instance, part: WellSeparatedPartition) -> list[str]:
    """Names of the structural properties the partition fails (empty when all hold)."""
    T = instance.intervals
    out = []
    covered = sorted([i for b in part.blocks for i in b] + list(part.residual))
    if covered != list(range(len(instance))):
        out.append("cover")
    width = Fraction(part.k) ** part.k
    for b in part.blocks:
        if Fraction(max(T[i] for i in b), min(T[i] for i in b)) > width:
            out.append("width")
    for m, b in enumerate(part.blocks):
        for later in part.blocks[m + 1:]:
            if max(T[i] for i in b) * part.k > min(T[i] for i in later):
                out.append("separation")
    if sum(instance.items[i].quantity for i in part.residual) * part.k > instance.h_sum:
        out.append("negligibility")
    if is_nested(T):
        # everything before a block has a cycle at most eps times the block's shortest interval
        for m in range(1, len(part.blocks)):
            earlier = [T[i] for b in part.blocks[:m] for i in b]
            if math.lcm(*earlier) * part.k > min(T[i] for i in part.blocks[m]):
                out.append("eps-shortness")
    return out


def _partition_for(instance: Instance, k: int, xi: int, bins) -> WellSeparatedPartition:
    residual = tuple(i for i, q in enumerate(bins) if q % k == xi)
    groups: dict[int, list[int]] = {}
    for i, q in enumerate(bins):
        if q % k != xi:
            groups.setdefault((q - xi) // k, []).append(i)
    blocks = tuple(tuple(groups[g]) for g in sorted(groups))
    return WellSeparatedPartition(blocks, residual, xi, tuple(bins), k)


def well_separated(instance: Instance, eps) -> WellSeparatedPartition:
    """Try every offset and keep the one with the lightest residual (smallest offset on ties)."""
    if instance.mode is not Mode.DISCRETE:
        raise InputError("well_separated needs a discrete instance")
    k = bin_base(eps)
    bins = [interval_bin(T, k) for T in instance.intervals]
    best = None
    for xi in range(k):
        part = _partition_for(instance, k, xi, bins)
        weight = sum(instance.items[i].quantity for i in part.residual)
        if best is None or weight < best[0]:
            best = (weight, part)
    part = best[1]
    bad = partition_violations(instance, part)
    if bad:  # pragma: no cover - guaranteed by construction
        raise RuntimeError(f"partition violates {bad}")
    return part


@dataclass(frozen=True)
class NearAdditivity:
    lhs: Fraction
    rhs: Fraction
    holds: bool


def near_additivity_check(instance: Instance, part: WellSeparatedPartition, eps=None,
                          budgets: Budgets = DEFAULT_BUDGETS, jobs: int = 1) -> NearAdditivity:
    """Optimum of the union of blocks against the sum of per-block optima."""
    eps = part.eps if eps is None else _check_eps(eps)
    union = sorted(i for b in part.blocks for i in b)
    if not union:
        return NearAdditivity(Fraction(0), Fraction(0), True)
    lhs = brute_optimum(instance.restrict(union), budgets, jobs).value
    rhs = sum((brute_optimum(instance.restrict(b), budgets, jobs).value for b in part.blocks),
              Fraction(0))
    return NearAdditivity(lhs, rhs, lhs >= (1 - 2 * eps) * rhs)


@dataclass
class NestedResult:
    shifts: ShiftVector
    peak: PeakResult
    report: dict = field(default_factory=dict)


def _evaluate(instance: Instance, shifts, budgets: Budgets) -> PeakResult:
    if instance.mode is Mode.DISCRETE and cycle_length(instance) <= budgets.scan:
        return peak_scan(instance, shifts, budgets)
    return peak_events(instance, shifts, budgets)


def nested_solve(instance: Instance, eps, budgets: Budgets = DEFAULT_BUDGETS) -> NestedResult:
    if not is_nested(instance.intervals):
        raise InputError(f"instance is not nested: intervals {sorted(set(instance.intervals))}")
    eps = _check_eps(eps)
    if instance.mode is Mode.CONTINUOUS:
        c = math.ceil(1 / eps)
        inner = nested_solve(continuous_to_discrete(instance, eps), eps, budgets)
        shifts = ShiftVector.for_instance(instance, [s / c for s in inner.shifts])
        report = dict(inner.report, scale=c, discrete_peak=str(inner.peak.value))
        return NestedResult(shifts, peak_events(instance, shifts, budgets), report)

    part = well_separated(instance, eps)
    vec = [0] * len(instance)
    block_reports = []
    for b in part.blocks:
        res = interval_ptas_solve(instance.restrict(b), part.eps, budgets)
        for i, tau in zip(b, res.shifts.as_ints()):
            vec[i] = tau
        block_reports.append({"items": list(b), "peak": str(res.peak.value),
                              "guesses": res.report["guesses"]})
    shifts = ShiftVector.for_instance(instance, vec)
    report = {
        "effective_eps": str(part.eps),
        "xi": part.xi,
        "bins": list(part.bins),
        "blocks": block_reports,
        "residual": list(part.residual),
        "residual_quantity": sum(instance.items[i].quantity for i in part.residual),
    }
    return NestedResult(shifts, _evaluate(instance, shifts, budgets), report)
