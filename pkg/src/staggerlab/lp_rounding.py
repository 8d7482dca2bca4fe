"""Randomized LP-rounding scheme for instances with a moderate cycle length.

Pipeline: discretize each item's shifts, guess the optimum on a geometric
grid, guess the shifts of heavy items, solve a feasibility LP over the
remaining fractional choices, round each item independently and keep the
best rounded vector seen.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

import mpmath
import numpy as np
from scipy.optimize import linprog

from .core import (
    DEFAULT_BUDGETS,
    Budgets,
    Instance,
    InputError,
    Mode,
    ResourceError,
    ShiftVector,
    _log_strictly_below,
    cycle_length,
    make_rng,
    substream,
)
from .peak import PeakResult, ScanEvaluator, scaled_level_row

LP_TOLERANCE = 1e-9


def _check_eps(eps) -> Fraction:
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise InputError(f"eps must lie in (0, 1], got {eps}")
    return eps


@dataclass(frozen=True)
class DiscretizationSet:
    eps: Fraction
    shifts: tuple[tuple[int, ...], ...]  # sorted allowed shifts per item, in [0, T_i)
    large: tuple[bool, ...]

    def size(self, i: int) -> int:
        return len(self.shifts[i])


def discretize_interval(T: int, eps: Fraction) -> tuple[tuple[int, ...], bool]:
    """Allowed shifts for one interval and whether the item counts as large."""
    if T * eps <= 1:
        return tuple(range(T)), False
    steps = math.floor(1 / eps)
    vals = {math.floor(j * eps * T) % T for j in range(1, steps + 1)}
    vals.add(0)  # the shift T itself, folded
    return tuple(sorted(vals)), True


def build_discretization(instance: Instance, eps) -> DiscretizationSet:
    eps = _check_eps(eps)
    if instance.mode is not Mode.DISCRETE:
        raise InputError("discretization needs a discrete instance")
    per_item = [discretize_interval(T, eps) for T in instance.intervals]
    return DiscretizationSet(eps, tuple(s for s, _ in per_item), tuple(b for _, b in per_item))


def opt_estimate_grid(instance: Instance, eps) -> list[Fraction]:
    """Geometric grid ``(1+eps)^j * H/2`` covering ``[H/2, (1+eps) H]``."""
    eps = _check_eps(eps)
    # smallest j with (1+eps)^j >= 2
    j2, power = 0, Fraction(1)
    while power < 2:
        power *= 1 + eps
        j2 += 1
    base = Fraction(instance.h_sum, 2)
    return [base * (1 + eps) ** j for j in range(j2 + 2)]


@dataclass(frozen=True)
class GuessState:
    opt_estimate: Optional[Fraction]
    heavy_items: tuple[int, ...]
    heavy_shifts: tuple[tuple[int, int], ...] = ()  # (item, shift) pairs
    delta: Fraction = Fraction(0)
    heavy_capped: bool = False

    @property
    def pins(self) -> dict[int, int]:
        return dict(self.heavy_shifts)


def light_threshold(instance: Instance, eps) -> Fraction:
    """``eps^3 / (36 ln(2 lam))`` rounded to 40 significant digits (display only)."""
    eps = _check_eps(eps)
    lam = cycle_length(instance)
    with mpmath.workdps(40):
        d = mpmath.mpf(eps.numerator) ** 3 / eps.denominator ** 3 / (36 * mpmath.log(2 * lam))
        return Fraction(mpmath.nstr(d, 40, min_fixed=-mpmath.inf, max_fixed=mpmath.inf))


def is_heavy(instance: Instance, eps: Fraction, i: int) -> bool:
    # H_i >= delta*H  <=>  not ln(2 lam) < eps^3 H / (36 H_i), decided exactly
    r = eps ** 3 * instance.h_sum / (36 * instance.items[i].quantity)
    return not _log_strictly_below(2 * cycle_length(instance), r)


def heavy_template(instance: Instance, disc: DiscretizationSet,
                   budgets: Budgets = DEFAULT_BUDGETS) -> GuessState:
    """Heavy item set, capped to the ceil(1/eps) largest items if the guess product is too big."""
    eps = disc.eps
    heavy = tuple(i for i in range(len(instance)) if is_heavy(instance, eps, i))
    capped = False
    if math.prod(disc.size(i) for i in heavy) > budgets.guesses:
        keep = math.ceil(1 / eps)
        order = sorted(heavy, key=lambda i: (-instance.items[i].quantity, i))
        heavy = tuple(sorted(order[:keep]))
        capped = True
    return GuessState(None, heavy, (), light_threshold(instance, eps), capped)


def enumerate_heavy_guesses(disc: DiscretizationSet, template: GuessState,
                            budgets: Budgets = DEFAULT_BUDGETS) -> Iterator[GuessState]:
    count = math.prod(disc.size(i) for i in template.heavy_items)
    if count > budgets.guesses:
        raise ResourceError(f"{count} heavy-shift guesses exceed budget {budgets.guesses}")
    choices = [disc.shifts[i] for i in template.heavy_items]
    for combo in itertools.product(*choices):
        yield GuessState(template.opt_estimate, template.heavy_items,
                         tuple(zip(template.heavy_items, combo)), template.delta,
                         template.heavy_capped)


# ---------------------------------------------------------------------------
# feasibility LP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeasibilityLp:
    """``x[(i, tau)]`` with time rows ``sum coeff*x <= opt``, one block per item, heavy pins.

    ``coeffs`` holds ``lam * I_i(tau, t)`` as integers; row ``t`` is a time point,
    column ``j`` is ``columns[j] = (item, shift)``.
    """

    coeffs: np.ndarray
    lam: int
    opt_estimate: Fraction
    columns: tuple[tuple[int, int], ...]
    blocks: tuple[tuple[int, int], ...]  # column range [start, stop) per item
    pins: tuple[tuple[int, int], ...]  # (item, column index)

    @property
    def n_time_rows(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_assignment_rows(self) -> int:
        return len(self.blocks)

    def satisfied_by(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if (x < -tol).any():
            return False
        for start, stop in self.blocks:
            if abs(x[start:stop].sum() - 1) > tol:
                return False
        for _, col in self.pins:
            if abs(x[col] - 1) > tol:
                return False
        rhs = float(self.opt_estimate)
        return bool((self.coeffs @ x / self.lam <= rhs + tol * max(1.0, rhs)).all())


def level_columns(instance: Instance, disc: DiscretizationSet, lam: int) -> np.ndarray:
    cols = [scaled_level_row(it.interval, it.quantity, tau, lam)
            for it, taus in zip(instance.items, disc.shifts) for tau in taus]
    return np.stack(cols, axis=1)


def build_lp(instance: Instance, disc: DiscretizationSet, guess: GuessState,
             budgets: Budgets = DEFAULT_BUDGETS, coeffs: Optional[np.ndarray] = None) -> FeasibilityLp:
    lam = cycle_length(instance)
    if lam > budgets.scan:
        raise ResourceError(f"cycle length {lam} exceeds scan budget {budgets.scan}")
    if guess.opt_estimate is None:
        raise InputError("guess carries no optimum estimate")
    if coeffs is None:
        coeffs = level_columns(instance, disc, lam)
    columns, blocks, start = [], [], 0
    for i, taus in enumerate(disc.shifts):
        columns.extend((i, tau) for tau in taus)
        blocks.append((start, start + len(taus)))
        start += len(taus)
    pins = []
    for i, tau in guess.heavy_shifts:
        if tau not in disc.shifts[i]:
            raise InputError(f"heavy shift {tau} of item {i} is not in its discretization set")
        pins.append((i, blocks[i][0] + disc.shifts[i].index(tau)))
    return FeasibilityLp(coeffs, lam, guess.opt_estimate, tuple(columns), tuple(blocks), tuple(pins))


def solve_lp(lp: FeasibilityLp, budgets: Budgets = DEFAULT_BUDGETS) -> Optional[np.ndarray]:
    """A feasible fractional assignment with exactly normalized blocks, or ``None``."""
    n_cols = len(lp.columns)
    lower = np.zeros(n_cols)
    upper = np.full(n_cols, np.inf)
    pinned_items = set()
    for item, col in lp.pins:
        start, stop = lp.blocks[item]
        upper[start:stop] = 0.0
        lower[col] = upper[col] = 1.0
        pinned_items.add(item)

    if len(pinned_items) == len(lp.blocks):
        # a single candidate vector: check the time rows exactly
        cols = [col for _, col in sorted(lp.pins)]
        peak = int(lp.coeffs[:, cols].sum(axis=1).max())
        if Fraction(peak, lp.lam) > lp.opt_estimate:
            return None
        x = np.zeros(n_cols)
        x[cols] = 1.0
        return x

    rhs = float(lp.opt_estimate)
    # time rows normalized so the right-hand side is 1
    a_ub = lp.coeffs.astype(float) / (lp.lam * rhs)
    a_eq = np.zeros((len(lp.blocks), n_cols))
    for k, (start, stop) in enumerate(lp.blocks):
        a_eq[k, start:stop] = 1.0
    res = linprog(
        np.zeros(n_cols), A_ub=a_ub, b_ub=np.ones(a_ub.shape[0]), A_eq=a_eq,
        b_eq=np.ones(len(lp.blocks)), bounds=list(zip(lower, upper)), method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "maxiter": budgets.lp_iterations},
    )
    if res.status == 2:
        return None
    if res.status == 1:
        raise ResourceError(f"LP solver hit its iteration cap ({budgets.lp_iterations})")
    if res.status != 0:
        raise ResourceError(f"LP solver failed: {res.message}")
    x = np.clip(res.x, 0.0, None)
    for start, stop in lp.blocks:
        x[start:stop] /= x[start:stop].sum()
    if not lp.satisfied_by(x, LP_TOLERANCE):
        raise ResourceError("LP solution violates constraints beyond tolerance after repair")
    return x


def round_solution(x: np.ndarray, lp: FeasibilityLp, instance: Instance, rng) -> ShiftVector:
    """Independent categorical draw per item from its block of ``x``."""
    rng = make_rng(rng)
    shifts = []
    for start, stop in lp.blocks:
        probs = np.asarray(x[start:stop], dtype=float)
        k = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
        k = min(k, stop - start - 1)
        # zero-probability shifts are never drawn
        while probs[k] == 0.0:
            k -= 1
        shifts.append(lp.columns[start + k][1])
    return ShiftVector.for_instance(instance, shifts)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

@dataclass
class LpRoundingResult:
    shifts: ShiftVector
    peak: PeakResult
    report: dict = field(default_factory=dict)


def lp_rounding_solve(instance: Instance, eps, seed: int = 0, repeats: int = 1,
                      budgets: Budgets = DEFAULT_BUDGETS) -> LpRoundingResult:
    """Best rounded vector over every (optimum estimate, heavy assignment) guess."""
    if instance.mode is not Mode.DISCRETE:
        raise InputError("lp_rounding_solve needs a discrete instance")
    if repeats < 1:
        raise InputError("repeats must be at least 1")
    eps = _check_eps(eps)
    disc = build_discretization(instance, eps)
    grid = opt_estimate_grid(instance, eps)
    template = heavy_template(instance, disc, budgets)
    lam = cycle_length(instance)
    if lam > budgets.scan:
        raise ResourceError(f"cycle length {lam} exceeds scan budget {budgets.scan}")
    coeffs = level_columns(instance, disc, lam)

    peaks = ScanEvaluator(instance, budgets)
    best: Optional[tuple[Fraction, tuple[int, ...]]] = None
    status = []
    n_guesses = 0
    for g, opt in enumerate(grid):
        feasible = infeasible = 0
        for h, guess in enumerate(enumerate_heavy_guesses(disc, template, budgets)):
            n_guesses += 1
            guess = GuessState(opt, guess.heavy_items, guess.heavy_shifts, guess.delta,
                               guess.heavy_capped)
            if len(guess.heavy_shifts) == len(instance):
                # fully pinned: the LP is feasible iff this one vector fits under opt
                vec = tuple(tau for _, tau in guess.heavy_shifts)
                if peaks(vec).value > opt:
                    infeasible += 1
                    continue
                feasible += 1
                drawn = [vec]
            else:
                lp = build_lp(instance, disc, guess, budgets, coeffs)
                x = solve_lp(lp, budgets)
                if x is None:
                    infeasible += 1
                    continue
                feasible += 1
                rng = substream(seed, g, h)
                drawn = [round_solution(x, lp, instance, rng).as_ints() for _ in range(repeats)]
            for vec in drawn:
                key = (peaks(vec).value, vec)
                if best is None or key < best:
                    best = key
        status.append({"opt_estimate": str(opt), "feasible": feasible, "infeasible": infeasible})

    if best is None:  # pragma: no cover - the top grid value always admits every vector
        raise ResourceError("no LP guess was feasible")
    vec = best[1]
    report = {
        "grid_size": len(grid),
        "heavy_items": list(template.heavy_items),
        "heavy_capped": template.heavy_capped,
        "delta": str(template.delta),
        "guesses": n_guesses,
        "candidates_evaluated": len(peaks),
        "lp_status": status,
    }
    return LpRoundingResult(ShiftVector.for_instance(instance, vec), peaks(vec), report)
