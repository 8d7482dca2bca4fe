import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from staggerlab.core import (
    Budgets,
    InputError,
    Instance,
    Item,
    Mode,
    ResourceError,
    ShiftVector,
    average_space_bound,
    crt_solve,
    cycle_length,
    is_prime,
    item_level,
    make_rng,
    primes_in_range,
    randbelow,
    random_regime_check,
    random_shift_vector,
    substream,
    total_level,
)


def inst(*pairs, mode=Mode.DISCRETE):
    return Instance.from_pairs(pairs, mode)


small_items = st.lists(st.tuples(st.integers(1, 8), st.integers(1, 6)), min_size=1, max_size=4)


@st.composite
def instance_with_shifts(draw):
    pairs = draw(small_items)
    shifts = [draw(st.integers(0, T - 1)) for T, _ in pairs]
    return inst(*pairs), shifts


def level_by_epoch_scan(T, H, tau, t):
    # walk back to the last order at or before t
    last = tau
    while last > t:
        last -= T
    while last + T <= t:
        last += T
    return H * (1 - F(t - last, T))


class TestModel:
    def test_item_bounds(self):
        with pytest.raises(InputError):
            Item(0, 1)
        with pytest.raises(InputError):
            Item(1, 2**63)
        with pytest.raises(InputError):
            Item(True, 1)
        assert Item(2**63 - 1, 1).interval == 2**63 - 1

    def test_empty_instance_rejected(self):
        with pytest.raises(InputError):
            Instance(())

    def test_totals(self):
        i = inst((4, 8), (6, 1), (3, 5))
        assert (i.h_sum, i.h_max, i.t_min, i.t_max) == (14, 8, 3, 6)

    def test_shift_normalisation(self):
        i = inst((4, 1), (3, 1))
        assert ShiftVector.for_instance(i, [4, -1]).values == (0, 2)
        with pytest.raises(InputError):
            ShiftVector.for_instance(i, [F(1, 2), 0])
        with pytest.raises(InputError):
            ShiftVector.for_instance(i, [0])
        c = i.with_mode(Mode.CONTINUOUS)
        assert ShiftVector.for_instance(c, [F(9, 2), 0]).values == (F(1, 2), 0)


class TestCycleLength:
    @pytest.mark.parametrize("ts, lam", [((4, 6), 12), ((2, 3, 5), 30), ((7,), 7)])
    def test_examples(self, ts, lam):
        assert cycle_length(inst(*[(T, 1) for T in ts])) == lam

    def test_arbitrary_precision(self):
        big = [2**61 - 1, 2**31 - 1]
        assert cycle_length(inst(*[(T, 1) for T in big])) == (2**61 - 1) * (2**31 - 1)


class TestLevels:
    def test_item_examples(self):
        assert item_level(Item(4, 8), 0, 0) == 8
        assert item_level(Item(4, 8), 0, 1) == 6
        assert item_level(Item(5, 10), 3, 0) == 6

    def test_total_examples(self):
        i = inst((2, 2), (2, 2))
        assert total_level(i, [0, 1], 0) == 3
        assert total_level(i, [0, 0], 0) == 4
        assert total_level(inst((5, 3)), [2], 7) == 3
        with pytest.raises(InputError):
            total_level(i, [0], 0)

    @given(st.integers(1, 12), st.integers(1, 9), st.integers(-30, 30), st.integers(-60, 60))
    def test_matches_epoch_walk(self, T, H, tau, t):
        assert item_level(Item(T, H), tau, t) == level_by_epoch_scan(T, H, tau, t)

    @given(st.integers(1, 12), st.integers(1, 9), st.integers(0, 11), st.integers(-40, 40))
    def test_discrete_range(self, T, H, tau, t):
        v = item_level(Item(T, H), tau, t)
        assert 0 < v <= H
        assert (v * T / H).denominator == 1

    @given(instance_with_shifts(), st.integers(-50, 50))
    def test_periodic(self, case, t):
        i, taus = case
        lam = cycle_length(i)
        assert total_level(i, taus, t) == total_level(i, taus, t + lam)

    @given(instance_with_shifts(), st.integers(-20, 20), st.integers(-50, 50))
    def test_translation(self, case, c, t):
        i, taus = case
        moved = ShiftVector.for_instance(i, [tau + c for tau in taus])
        assert total_level(i, moved, t) == total_level(i, taus, t - c)


class TestAverageSpace:
    def test_examples(self):
        assert average_space_bound(inst((2, 2), (2, 2))) == 3
        assert average_space_bound(inst((2, 2), (2, 2), mode=Mode.CONTINUOUS)) == 2
        assert average_space_bound(inst((4, 8))) == 5

    @given(small_items)
    def test_discrete_at_least_continuous(self, pairs):
        d = inst(*pairs)
        assert average_space_bound(d) >= average_space_bound(d.with_mode(Mode.CONTINUOUS))

    @given(instance_with_shifts())
    def test_is_the_time_average(self, case):
        # the bound is the mean level over one cycle, so it never exceeds the peak
        i, taus = case
        lam = cycle_length(i)
        mean = sum(total_level(i, taus, t) for t in range(lam)) / lam
        assert mean == average_space_bound(i)


class TestCrt:
    def test_examples(self):
        assert crt_solve([(0, 3), (1, 4)]) == 9
        assert crt_solve([(0, 7)]) == 0
        assert crt_solve([(2, 5), (3, 7)]) == 17
        assert crt_solve([]) == 0

    def test_scan_oracle(self):
        for t in range(12):
            if t % 3 == 0 and t % 4 == 1:
                assert crt_solve([(0, 3), (1, 4)]) == t

    def test_non_coprime(self):
        with pytest.raises(InputError):
            crt_solve([(1, 4), (1, 6)])

    @given(st.lists(st.sampled_from([2, 3, 5, 7, 11, 13, 17, 19, 23]), min_size=1, max_size=6,
                    unique=True), st.data())
    def test_rereduction(self, mods, data):
        res = [data.draw(st.integers(0, m - 1)) for m in mods]
        t = crt_solve(zip(res, mods))
        assert 0 <= t < math.prod(mods)
        assert all(t % m == r for r, m in zip(res, mods))

    def test_big_moduli(self):
        mods = [2**127 - 1, 2**89 - 1, 2**61 - 1]
        res = [12345, 2**80, 99]
        t = crt_solve(zip(res, mods))
        assert all(t % m == r for r, m in zip(res, mods))


class TestPrimes:
    def test_examples(self):
        assert primes_in_range(2, 10) == [2, 3, 5, 7]
        assert primes_in_range(8, 10) == []
        assert primes_in_range(121, 140) == [127, 131, 137, 139]

    def test_trial_division_oracle(self):
        def slow(n):
            return n > 1 and all(n % d for d in range(2, math.isqrt(n) + 1))

        assert primes_in_range(2, 3000) == [n for n in range(2, 3001) if slow(n)]
        assert primes_in_range(10**6, 10**6 + 500) == [n for n in range(10**6, 10**6 + 501) if slow(n)]

    def test_bounds_and_budget(self):
        with pytest.raises(InputError):
            primes_in_range(1, 10)
        with pytest.raises(InputError):
            primes_in_range(10, 5)
        with pytest.raises(ResourceError):
            primes_in_range(2, 10**6, Budgets(sieve=1000))

    def test_is_prime_agrees(self):
        ps = set(primes_in_range(2, 5000))
        assert all(is_prime(n) == (n in ps) for n in range(5001))
        assert is_prime(2**61 - 1) and not is_prime(2**61 + 1)


class TestRandomness:
    def test_unit_intervals_give_zero(self):
        i = inst((1, 3), (1, 1))
        assert random_shift_vector(i, 5).values == (0, 0)

    def test_deterministic(self):
        i = inst((7, 1), (100, 1), (2**62, 1))
        assert random_shift_vector(i, 11) == random_shift_vector(i, 11)

    def test_uniform_residues(self):
        rng = make_rng(3)
        i = inst((4, 1))
        draws = [int(random_shift_vector(i, rng)[0]) for _ in range(10_000)]
        freq = np.bincount(draws, minlength=4) / 10_000
        assert np.all(np.abs(freq - 0.25) <= 0.02)

    def test_randbelow_big(self):
        rng = make_rng(0)
        n = 3 * 2**200 + 17
        xs = [randbelow(rng, n) for _ in range(200)]
        assert all(0 <= x < n for x in xs)
        # the top bits are actually used
        assert max(xs) > n // 2

    def test_substreams_independent_of_order(self):
        a = substream(9, 1, 2).integers(0, 10**9, 5)
        substream(9, 0).integers(0, 10, 100)
        b = substream(9, 1, 2).integers(0, 10**9, 5)
        assert list(a) == list(b)
        assert list(a) != list(substream(9, 2, 1).integers(0, 10**9, 5))

    def test_continuous_rejected(self):
        with pytest.raises(InputError):
            random_shift_vector(inst((3, 1), mode=Mode.CONTINUOUS), 0)


class TestRegime:
    def test_examples(self):
        assert random_regime_check(inst(*[(2, 1)] * 100), F(9, 10)).holds
        rc = random_regime_check(inst((2, 1), (3, 1)), F(1, 10))
        assert not rc.holds and rc.lhs == 6

    def test_eps_domain(self):
        with pytest.raises(InputError):
            random_regime_check(inst((2, 1)), 1)

    def test_tie_is_not_holding(self):
        from staggerlab.core import _log_strictly_below

        # ln 1 = 0 exactly
        assert not _log_strictly_below(1, F(0))
        assert _log_strictly_below(1, F(1, 10**9))

    @given(st.integers(2, 10**6), st.fractions(min_value=0, max_value=20, max_denominator=10**6))
    def test_agrees_with_float_away_from_ties(self, lam, rhs):
        from staggerlab.core import _log_strictly_below

        gap = math.log(lam) - float(rhs)
        if abs(gap) > 1e-9:
            assert _log_strictly_below(lam, F(rhs)) == (gap < 0)

    def test_close_call(self):
        from staggerlab.core import _log_strictly_below

        # ln 7 = 1.945910149055313305...
        assert _log_strictly_below(7, F(1945910149055313306, 10**18))
        assert not _log_strictly_below(7, F(1945910149055313305, 10**18))
