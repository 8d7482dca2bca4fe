"""Continuous instances with pairwise coprime intervals.

Intervals are binned along a tower ``1, k, 4^k, 4^(4^k), ...``; a light bin
splits the items into a short part, which is solved properly, and a long
part, which gets zero shifts because every long item sits near its full
level at a common time anyway.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from .core import (
    DEFAULT_BUDGETS,
    Budgets,
    InputError,
    Instance,
    Mode,
    ShiftVector,
    crt_solve,
    total_level,
)
from .interval_ptas import interval_ptas_solve
from .nested import continuous_to_discrete
from .peak import PeakResult, peak_events

SATURATED = math.inf  # stands in for a tower value beyond every representable interval

PsiValue = Union[int, float]


def _tower_base(eps) -> int:
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise InputError(f"eps must lie in (0, 1], got {eps}")
    return math.ceil(1 / eps)


def psi_sequence(eps, upto: int, budgets: Budgets = DEFAULT_BUDGETS) -> list[PsiValue]:
    """Tower values ``Psi_0 .. Psi_upto``; entries past the bit budget are ``SATURATED``."""
    k = _tower_base(eps)
    out: list[PsiValue] = [1]
    if upto >= 1:
        out.append(k)
    for _ in range(2, upto + 1):
        prev = out[-1]
        if prev is SATURATED or 2 * prev > budgets.psi_bits:
            out.append(SATURATED)
        else:
            out.append(4 ** prev)
    return out


def coprime_violation(instance: Instance):
    """First pair of item indices whose intervals share a factor, or ``None``."""
    T = instance.intervals
    for i in range(len(T)):
        for j in range(i + 1, len(T)):
            if math.gcd(T[i], T[j]) != 1:
                return i, j
    return None


def _require_coprime(instance: Instance) -> None:
    bad = coprime_violation(instance)
    if bad is not None:
        i, j = bad
        T = instance.intervals
        raise InputError(f"items {i} and {j} have intervals {T[i]} and {T[j]} that are not coprime")


@dataclass(frozen=True)
class PsiDecomposition:
    psi: tuple[PsiValue, ...]
    m_hat: int
    bins: tuple[tuple[int, ...], ...]  # bins[m-1] = items with Psi_(m-1) <= T < Psi_m
    minus: tuple[int, ...]
    middle: tuple[int, ...]
    plus: tuple[int, ...]


def coprime_decompose(instance: Instance, eps, budgets: Budgets = DEFAULT_BUDGETS) -> PsiDecomposition:
    if instance.mode is not Mode.CONTINUOUS:
        raise InputError("coprime_decompose needs a continuous instance")
    _require_coprime(instance)
    eps = Fraction(eps)
    k = _tower_base(eps)
    psi = psi_sequence(eps, k + 1, budgets)
    bins = tuple(
        tuple(i for i, T in enumerate(instance.intervals) if psi[m - 1] <= T < psi[m])
        for m in range(1, k + 2)
    )

    def weight(items):
        return sum(instance.items[i].quantity for i in items)

    m_hat = next(m for m in range(2, k + 2) if weight(bins[m - 1]) <= eps * instance.h_sum)
    lo, hi = psi[m_hat - 1], psi[m_hat]
    T = instance.intervals
    return PsiDecomposition(
        tuple(psi), m_hat, bins,
        tuple(i for i in range(len(T)) if T[i] < lo),
        tuple(i for i in range(len(T)) if lo <= T[i] < hi),
        tuple(i for i in range(len(T)) if T[i] >= hi),
    )


@dataclass(frozen=True)
class Witness:
    t: int
    level: Fraction
    bound: Fraction  # (1 - 1/T_min) * H_sum


def coprime_lb_witness(instance: Instance, shifts) -> Witness:
    """A time where every item has just ordered within the last unit of time."""
    _require_coprime(instance)
    sv = shifts if isinstance(shifts, ShiftVector) else ShiftVector.for_instance(instance, shifts)
    t = crt_solve((math.ceil(s) % T, T) for s, T in zip(sv, instance.intervals))
    bound = (1 - Fraction(1, instance.t_min)) * instance.h_sum
    return Witness(t, total_level(instance, sv, t), bound)


def coprime_lower_bound(instance: Instance) -> Fraction:
    return max(Fraction(instance.h_sum, 2), (1 - Fraction(1, instance.t_min)) * instance.h_sum)


@dataclass
class CoprimeResult:
    shifts: ShiftVector
    peak: PeakResult
    lower_bound: Fraction
    report: dict = field(default_factory=dict)


def coprime_solve(instance: Instance, eps, budgets: Budgets = DEFAULT_BUDGETS) -> CoprimeResult:
    dec = coprime_decompose(instance, eps, budgets)
    eps = Fraction(eps)
    values = [Fraction(0)] * len(instance)
    if dec.minus:
        c = math.ceil(1 / eps)
        short = continuous_to_discrete(instance.restrict(dec.minus), eps)
        res = interval_ptas_solve(short, eps, budgets)
        for i, tau in zip(dec.minus, res.shifts):
            values[i] = tau / c
    shifts = ShiftVector.for_instance(instance, values)
    peak = peak_events(instance, shifts, budgets)
    wit = coprime_lb_witness(instance, shifts)
    report = {
        "m_hat": dec.m_hat,
        "bin_sizes": [len(b) for b in dec.bins],
        "minus": list(dec.minus),
        "middle": list(dec.middle),
        "plus": list(dec.plus),
        "saturated": any(p is SATURATED for p in dec.psi),
        "witness_t": str(wit.t),
        "witness_level": str(wit.level),
    }
    return CoprimeResult(shifts, peak, coprime_lower_bound(instance), report)
