"""Lower-bound constructions and the experiments probing them.

* prime-interval instances on which sampled time points almost never see
  a high level, although the true peak is the full quantity sum;
* polynomial set systems over a prime field with small pairwise overlaps;
* the product-of-primes instances built from such a set system, kept in a
  factored form because their intervals are far past 64 bits;
* the unique-divisor construction that finds a time where chosen items
  have all ordered recently.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import mpmath
import numpy as np

from .core import (
    DEFAULT_BUDGETS,
    Budgets,
    InputError,
    Instance,
    Mode,
    ShiftVector,
    crt_solve,
    cycle_length,
    is_prime,
    make_rng,
    primes_in_range,
    randbelow,
)

# ---------------------------------------------------------------------------
# sampling experiment
# ---------------------------------------------------------------------------


def first_primes_from(lo: int, count: int, budgets: Budgets = DEFAULT_BUDGETS) -> list[int]:
    """The ``count`` smallest primes that are ``>= lo``."""
    lo = max(lo, 2)
    hi = max(lo + 64, 2 * lo)
    while True:
        found = primes_in_range(lo, hi, budgets)
        if len(found) >= count:
            return found[:count]
        hi *= 2


def gen_sample_complexity(n: int, budgets: Budgets = DEFAULT_BUDGETS) -> Instance:
    if n < 2:
        raise InputError(f"n must be at least 2, got {n}")
    return Instance.from_pairs([(p, 1) for p in first_primes_from(n, n, budgets)], Mode.DISCRETE)


@dataclass
class SamplingResult:
    estimate: Fraction  # max sampled level
    threshold: Optional[Fraction]
    exceed_count: int
    samples: int
    levels: Optional[list[Fraction]] = None  # exact per-sample levels when requested
    approx_levels: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def exceed_fraction(self) -> Fraction:
        return Fraction(self.exceed_count, self.samples)


class _LevelOracle:
    """Exact and float evaluation of the total level at a time given by its residues."""

    def __init__(self, instance: Instance, shifts: ShiftVector):
        self.T = np.array(instance.intervals, dtype=np.int64)
        self.H = np.array(instance.quantities, dtype=np.float64)
        self.Hi = instance.quantities
        self.tau = np.array([int(s) for s in shifts], dtype=np.int64)
        self.lam = cycle_length(instance)
        self.cof = [self.lam // T for T in instance.intervals]
        self.h_sum = instance.h_sum
        # float sums of n terms in [0, H] are off by well under this
        self.margin = 8 * len(instance) * float(instance.h_sum) * 2.0**-52

    def elapsed(self, residues: np.ndarray) -> np.ndarray:
        return (residues - self.tau) % self.T

    def approx(self, elapsed: np.ndarray) -> float:
        return float(np.sum(self.H * (1.0 - elapsed / self.T)))

    def exact(self, elapsed: np.ndarray) -> Fraction:
        # H_sum - sum H_i e_i / T_i over the common denominator lam
        num = sum(h * int(e) * c for h, e, c in zip(self.Hi, elapsed, self.cof))
        return self.h_sum - Fraction(num, self.lam)


def sampling_estimate(instance: Instance, shifts, M: int, rng, threshold=None,
                      exact_levels: bool = False) -> SamplingResult:
    """Max level over ``M`` uniform times in one cycle, plus threshold exceedances.

    Each time is a uniform big integer below the cycle length, reduced modulo
    every interval; the timeline itself is never built.
    """
    if instance.mode is not Mode.DISCRETE:
        raise InputError("sampling_estimate needs a discrete instance")
    if M < 1:
        raise InputError("M must be positive")
    sv = shifts if isinstance(shifts, ShiftVector) else ShiftVector.for_instance(instance, shifts)
    rng = make_rng(rng)
    oracle = _LevelOracle(instance, sv)
    threshold = None if threshold is None else Fraction(threshold)
    thr_f = None if threshold is None else float(threshold)

    approx = np.empty(M)
    elapsed_all = []
    levels = [] if exact_levels else None
    exceed = 0
    for m in range(M):
        X = randbelow(rng, oracle.lam)
        res = np.fromiter((X % T for T in instance.intervals), dtype=np.int64, count=len(instance))
        el = oracle.elapsed(res)
        a = oracle.approx(el)
        approx[m] = a
        elapsed_all.append(el)
        lev = oracle.exact(el) if exact_levels else None
        if levels is not None:
            levels.append(lev)
        if threshold is not None:
            if lev is not None:
                exceed += lev >= threshold
            elif a > thr_f + oracle.margin:
                exceed += 1
            elif a >= thr_f - oracle.margin:
                exceed += oracle.exact(el) >= threshold
    # exact max among samples whose float value is within the error margin of the top
    top = approx.max()
    near = np.flatnonzero(approx >= top - 2 * oracle.margin)
    estimate = max(oracle.exact(elapsed_all[j]) for j in near)
    return SamplingResult(estimate, threshold, int(exceed), M, levels, approx)


def sample_item_levels(instance: Instance, shifts, M: int, rng) -> np.ndarray:
    """``M x n`` float matrix of per-item levels at uniform sampled times."""
    sv = shifts if isinstance(shifts, ShiftVector) else ShiftVector.for_instance(instance, shifts)
    rng = make_rng(rng)
    oracle = _LevelOracle(instance, sv)
    out = np.empty((M, len(instance)))
    for m in range(M):
        X = randbelow(rng, oracle.lam)
        res = np.fromiter((X % T for T in instance.intervals), dtype=np.int64, count=len(instance))
        out[m] = oracle.H * (1.0 - oracle.elapsed(res) / oracle.T)
    return out


def sampling_tail_bound(n: int, eps) -> float:
    """Per-sample probability bound ``exp(-eps^2 n / 6)``."""
    eps = float(eps)
    return math.exp(-eps * eps * n / 6)


# ---------------------------------------------------------------------------
# set systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SparseFamily:
    q: int
    r: int
    subsets: tuple[tuple[int, ...], ...]  # sorted elements of [0, q^2)

    @property
    def K(self) -> int:
        return self.q * self.q

    def max_overlap(self) -> int:
        sets = [set(s) for s in self.subsets]
        return max((len(a & b) for a, b in itertools.combinations(sets, 2)), default=0)


def sparse_family(q: int, r: int, count: Optional[int] = None) -> SparseFamily:
    """Graphs of the first ``count`` polynomials of degree < r over GF(q).

    Coefficients are ordered from the highest degree down, so the constant
    polynomials come first.  The point ``(x, f(x))`` maps to ``f(x)*q + x``.
    """
    if not is_prime(q):
        raise InputError(f"q must be prime, got {q}")
    if not 2 <= r <= q:
        raise InputError(f"need 2 <= r <= q, got r={r}")
    total = q ** r
    count = total if count is None else count
    if not 0 <= count <= total:
        raise InputError(f"count must lie in [0, {total}], got {count}")
    subsets = []
    for coeffs in itertools.islice(itertools.product(range(q), repeat=r), count):
        pts = []
        for x in range(q):
            y = 0
            for c in coeffs:  # Horner, highest degree first
                y = (y * x + c) % q
            pts.append(y * q + x)
        subsets.append(tuple(sorted(pts)))
    return SparseFamily(q, r, tuple(subsets))


def required_family_size(K: int) -> int:
    """``ceil(12 K ln^2 K)``."""
    with mpmath.workdps(50):
        return int(mpmath.ceil(12 * K * mpmath.log(K) ** 2))


@dataclass(frozen=True)
class GroupSyncInstance:
    """Items indexed by subsets; item ``S`` has interval ``prod_{k in S} primes[k]`` and quantity 1."""

    family: SparseFamily
    primes: tuple[int, ...]
    unmet: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.family.subsets)

    def factors(self, i: int) -> tuple[int, ...]:
        return tuple(self.primes[k] for k in self.family.subsets[i])

    def interval(self, i: int) -> int:
        return math.prod(self.factors(i))

    def level(self, i: int, shift: int, t: int) -> Fraction:
        T = self.interval(i)
        return 1 - Fraction((t - shift) % T, T)


def gen_groupsync(q: int, count: Optional[int] = None, eps=None,
                  budgets: Budgets = DEFAULT_BUDGETS) -> GroupSyncInstance:
    """Product-of-primes instance over a 3-sparse family on ``K = q^2`` elements.

    Without ``count`` the family must reach the full required size; with it,
    the shortfall is recorded in ``unmet`` instead of failing.
    """
    if not is_prime(q):
        raise InputError(f"q must be prime, got {q}")
    if q < 3:
        raise InputError("q must be at least 3 for a 3-sparse family")
    K = q * q
    needed = required_family_size(K)
    unmet = []
    if count is None:
        if q ** 3 < needed:
            raise InputError(f"family size precondition unmet: q^3 = {q ** 3} < ceil(12 K ln^2 K) = {needed}")
        count = needed
    elif count < needed:
        unmet.append(f"family size {count} < ceil(12 K ln^2 K) = {needed}")
    if eps is not None:
        eps = Fraction(eps)
        with mpmath.workdps(30):
            if q < mpmath.exp(1 / (2 * mpmath.mpf(eps.numerator) ** 2 / eps.denominator ** 2)):
                unmet.append(f"q = {q} < exp(1/(2 eps^2)) for eps = {eps}")
    hi = int(2 * K * math.log(K))
    pool = primes_in_range(K, hi, budgets)
    if len(pool) < K:
        raise InputError(f"only {len(pool)} primes in [{K}, {hi}], need {K}")
    family = sparse_family(q, 3, count)
    return GroupSyncInstance(family, tuple(pool[:K]), tuple(unmet))


# ---------------------------------------------------------------------------
# unique divisors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniqueDivisorSystem:
    primes: tuple[int, ...]
    moduli: tuple[int, ...]
    shifts: tuple[int, ...]

    def __post_init__(self):
        if not len(self.primes) == len(self.moduli) == len(self.shifts):
            raise InputError("primes, moduli and shifts must have equal length")
        for l, (p, n) in enumerate(zip(self.primes, self.moduli)):
            if n < 1:
                raise InputError(f"modulus {n} must be positive")
            if not is_prime(p):
                raise InputError(f"{p} is not prime")
            if n % p:
                raise InputError(f"prime {p} does not divide its modulus {n}")
            for k, other in enumerate(self.moduli):
                if k != l and other % p == 0:
                    raise InputError(f"prime {p} also divides modulus {other}")

    def exponents(self) -> tuple[int, ...]:
        out = []
        for p, n in zip(self.primes, self.moduli):
            a = 0
            while n % p == 0:
                n //= p
                a += 1
            out.append(a)
        return tuple(out)

    def windows(self) -> tuple[int, ...]:
        """Window lengths ``n / p^alpha``."""
        return tuple(n // p ** a for p, n, a in zip(self.primes, self.moduli, self.exponents()))

    def satisfied_by(self, t: int) -> bool:
        return all((t - tau) % n < w for tau, n, w in zip(self.shifts, self.moduli, self.windows()))


def small_remainders(system: UniqueDivisorSystem) -> int:
    """A time ``0 <= t < lcm(n)`` with ``(t - tau) mod n < n / p^alpha`` for every row."""
    alphas = system.exponents()
    congruences = []
    for p, n, tau, a in zip(system.primes, system.moduli, system.shifts, alphas):
        pa = p ** a
        w = n // pa
        # among the p^a multiples of w in [0, n), the one landing in tau's window
        r = (tau + (-tau) % w) % pa
        t_lr = crt_solve([(0, w), (r, pa)])
        assert (t_lr - tau) % n < w
        congruences.append((r, pa))
    M = math.lcm(*system.moduli) // math.prod(p ** a for p, a in zip(system.primes, alphas))
    t = crt_solve([(0, M)] + congruences)
    if not system.satisfied_by(t):  # pragma: no cover - guaranteed by construction
        raise RuntimeError("small_remainders produced a time outside a window")
    return t


@dataclass(frozen=True)
class ProbeResult:
    t: int
    level: Fraction
    bound: Fraction
    private_primes: tuple[int, ...]


def subset_gap_probe(gs: GroupSyncInstance, subset: Sequence[int], shifts: Sequence[int]) -> ProbeResult:
    """Time where every chosen item sits near its full level.

    ``shifts`` holds one integer per item of ``gs`` (or one per chosen item).
    """
    subset = tuple(subset)
    if len(set(subset)) != len(subset) or not subset:
        raise InputError("subset must be a nonempty set of item ids")
    if any(not 0 <= i < len(gs) for i in subset):
        raise InputError("subset refers to unknown items")
    if 2 * len(subset) > gs.family.q:
        raise InputError(f"subset of size {len(subset)} exceeds sqrt(K)/2 = {gs.family.q / 2}")
    if len(shifts) == len(gs):
        taus = tuple(int(shifts[i]) for i in subset)
    elif len(shifts) == len(subset):
        taus = tuple(int(s) for s in shifts)
    else:
        raise InputError("shifts must cover every item or every chosen item")
    elems = [set(gs.family.subsets[i]) for i in subset]
    private = []
    for j, S in enumerate(elems):
        others = set().union(*(elems[:j] + elems[j + 1:]))
        own = sorted(S - others)
        if not own:
            raise InputError(f"item {subset[j]} has no private element in the chosen subset")
        private.append(gs.primes[own[0]])
    moduli = tuple(gs.interval(i) for i in subset)
    t = small_remainders(UniqueDivisorSystem(tuple(private), moduli, taus))
    level = sum((gs.level(i, tau, t) for i, tau in zip(subset, taus)), Fraction(0))
    bound = sum((1 - Fraction(1, p) for p in private), Fraction(0))
    return ProbeResult(t, level, bound, tuple(private))
