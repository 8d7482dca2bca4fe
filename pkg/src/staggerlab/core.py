"""Problem model, exact inventory arithmetic and the classical lower bounds.

All inventory values are :class:`fractions.Fraction`; intervals and cycle
lengths are Python integers, so nothing here ever rounds.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

MAX_ITEM_VALUE = 2**63 - 1


class InputError(ValueError):
    """Malformed or inconsistent input (CLI exit code 2)."""


class ResourceError(RuntimeError):
    """A configured budget would be exceeded (CLI exit code 3)."""


@dataclass(frozen=True)
class Budgets:
    scan: int = 10**7
    epochs: int = 10**7
    ip_dimension: int = 12
    brute: int = 10**7
    guesses: int = 10**6
    sieve: int = 5 * 10**7
    lp_iterations: int = 100_000
    psi_bits: int = 1 << 16

    @classmethod
    def from_env(cls, **overrides) -> "Budgets":
        env = os.environ.get("STAGGERLAB_BUDGET_SCAN")
        if env is not None and "scan" not in overrides:
            overrides["scan"] = int(env)
        return cls(**overrides)


DEFAULT_BUDGETS = Budgets()


class Mode(enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class Item:
    interval: int
    quantity: int

    def __post_init__(self):
        for name in ("interval", "quantity"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise InputError(f"{name} must be an integer, got {v!r}")
            if not 1 <= v <= MAX_ITEM_VALUE:
                raise InputError(f"{name} must lie in [1, 2^63), got {v}")
            object.__setattr__(self, name, int(v))


@dataclass(frozen=True)
class Instance:
    items: tuple[Item, ...]
    mode: Mode = Mode.DISCRETE

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise InputError("an instance needs at least one item")
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], mode=Mode.DISCRETE) -> "Instance":
        """Build from ``(interval, quantity)`` pairs."""
        return cls(tuple(Item(T, H) for T, H in pairs), Mode(mode))

    def __len__(self) -> int:
        return len(self.items)

    @property
    def intervals(self) -> tuple[int, ...]:
        return tuple(it.interval for it in self.items)

    @property
    def quantities(self) -> tuple[int, ...]:
        return tuple(it.quantity for it in self.items)

    @property
    def h_sum(self) -> int:
        return sum(self.quantities)

    @property
    def h_max(self) -> int:
        return max(self.quantities)

    @property
    def t_min(self) -> int:
        return min(self.intervals)

    @property
    def t_max(self) -> int:
        return max(self.intervals)

    def restrict(self, indices: Sequence[int]) -> "Instance":
        return Instance(tuple(self.items[i] for i in indices), self.mode)

    def with_mode(self, mode: Mode) -> "Instance":
        return Instance(self.items, mode)


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        # floats are accepted only as exact binary values
        return Fraction(v)
    return Fraction(v)


@dataclass(frozen=True)
class ShiftVector:
    """One offset per item, canonicalised into ``[0, T_i)``."""

    values: tuple[Fraction, ...]

    @classmethod
    def for_instance(cls, instance: Instance, values: Iterable) -> "ShiftVector":
        vals = tuple(_as_fraction(v) for v in values)
        if len(vals) != len(instance):
            raise InputError(f"expected {len(instance)} shifts, got {len(vals)}")
        out = []
        for v, T in zip(vals, instance.intervals):
            if instance.mode is Mode.DISCRETE and v.denominator != 1:
                raise InputError(f"discrete instances need integer shifts, got {v}")
            out.append(v % T)
        return cls(tuple(out))

    @classmethod
    def zeros(cls, instance: Instance) -> "ShiftVector":
        return cls(tuple(Fraction(0) for _ in instance.items))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def as_ints(self) -> tuple[int, ...]:
        if any(v.denominator != 1 for v in self.values):
            raise InputError("shift vector is not integral")
        return tuple(int(v) for v in self.values)


def cycle_length(instance: Instance) -> int:
    """LCM of all intervals."""
    return math.lcm(*instance.intervals)


def item_level(item: Item, shift, t) -> Fraction:
    """Inventory of ``item`` at time ``t`` when its orders sit at ``shift + kT``."""
    elapsed = (_as_fraction(t) - _as_fraction(shift)) % item.interval
    return item.quantity * (1 - elapsed / item.interval)


def total_level(instance: Instance, shifts, t) -> Fraction:
    values = shifts.values if isinstance(shifts, ShiftVector) else tuple(shifts)
    if len(values) != len(instance):
        raise InputError(f"expected {len(instance)} shifts, got {len(values)}")
    t = _as_fraction(t)
    return sum((item_level(it, s, t) for it, s in zip(instance.items, values)), Fraction(0))


def average_space_bound(instance: Instance) -> Fraction:
    if instance.mode is Mode.CONTINUOUS:
        return Fraction(instance.h_sum, 2)
    return sum((Fraction(it.quantity) * (1 + Fraction(1, it.interval)) for it in instance.items),
               Fraction(0)) / 2


# ---------------------------------------------------------------------------
# number theory
# ---------------------------------------------------------------------------

def crt_solve(congruences: Iterable[tuple[int, int]]) -> int:
    """Solve ``t = r_j (mod m_j)`` for pairwise coprime moduli.

    Returns the unique solution in ``[0, prod m_j)``.
    """
    t, mod = 0, 1
    for r, m in congruences:
        r, m = int(r), int(m)
        if m < 1:
            raise InputError(f"modulus must be positive, got {m}")
        if math.gcd(mod, m) != 1:
            raise InputError(f"moduli are not pairwise coprime (modulus {m})")
        # t + mod*k = r (mod m)
        k = ((r - t) * pow(mod, -1, m)) % m if m > 1 else 0
        t += mod * k
        mod *= m
    return t % mod


def primes_in_range(lo: int, hi: int, budget: Budgets = DEFAULT_BUDGETS) -> list[int]:
    """All primes in ``[lo, hi]`` by a segmented sieve."""
    if not 2 <= lo <= hi <= 2**40:
        raise InputError(f"need 2 <= lo <= hi <= 2^40, got [{lo}, {hi}]")
    if hi - lo + 1 > budget.sieve:
        raise ResourceError(f"sieve span {hi - lo + 1} exceeds budget {budget.sieve}")
    root = math.isqrt(hi)
    base = np.ones(root + 1, dtype=bool)
    base[:2] = False
    for p in range(2, math.isqrt(root) + 1):
        if base[p]:
            base[p * p::p] = False
    seg = np.ones(hi - lo + 1, dtype=bool)
    for p in np.flatnonzero(base):
        p = int(p)
        start = max(p * p, ((lo + p - 1) // p) * p)
        seg[start - lo::p] = False
    return [int(x) + lo for x in np.flatnonzero(seg)]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    # deterministic for n < 3.3e24
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41):
        if a % n == 0:
            continue
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# randomness
# ---------------------------------------------------------------------------

def make_rng(seed) -> np.random.Generator:
    """Seeded PCG64 stream; pass a Generator through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent child stream addressed by ``key`` (worker-count independent)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def randbelow(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in ``[0, n)`` for arbitrarily large ``n``."""
    if n <= 0:
        raise InputError("randbelow needs a positive bound")
    if n <= 2**63:
        return int(rng.integers(0, n))
    bits = (n - 1).bit_length()
    nbytes = (bits + 7) // 8
    excess = nbytes * 8 - bits
    while True:
        x = int.from_bytes(rng.bytes(nbytes), "little") >> excess
        if x < n:
            return x


def random_shift_vector(instance: Instance, rng) -> ShiftVector:
    if instance.mode is not Mode.DISCRETE:
        raise InputError("random_shift_vector needs a discrete instance")
    rng = make_rng(rng)
    return ShiftVector(tuple(Fraction(randbelow(rng, T)) for T in instance.intervals))


# ---------------------------------------------------------------------------
# random-shift regime
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeCheck:
    holds: bool
    lhs: int  # the cycle length; the comparison is on its logarithm
    rhs: Fraction  # eps^2/6 * H_sum / H_max
    log_lhs: str = field(default="")


def _log_strictly_below(lam: int, rhs: Fraction) -> bool:
    """Certified ``ln(lam) < rhs`` with interval arithmetic; ties are False."""
    if lam == 1:
        return rhs > 0
    # ln(lam) is irrational for lam >= 2, so refinement terminates
    bits = lam.bit_length()
    ln2 = Fraction(69314718, 10**8)
    if rhs < (bits - 1) * ln2 * Fraction(99, 100):
        return False
    prec = 64
    ctx = mpmath.iv
    saved = ctx.prec
    try:
        while prec <= 1 << 20:
            ctx.prec = prec + bits
            log_lam = ctx.log(ctx.mpf(lam))
            r = ctx.mpf(rhs.numerator) / rhs.denominator
            if log_lam.b < r.a:
                return True
            if log_lam.a >= r.b:
                return False
            prec *= 2
    finally:
        ctx.prec = saved
    return False  # pragma: no cover - would need an exact tie


def random_regime_check(instance: Instance, eps) -> RegimeCheck:
    eps = _as_fraction(eps)
    if not 0 < eps < 1:
        raise InputError(f"eps must lie in (0, 1), got {eps}")
    lam = cycle_length(instance)
    rhs = eps * eps / 6 * Fraction(instance.h_sum, instance.h_max)
    with mpmath.workdps(30):
        log_lhs = mpmath.nstr(mpmath.log(lam), 20)
    return RegimeCheck(_log_strictly_below(lam, rhs), lam, rhs, log_lhs)
