import itertools
import math
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from staggerlab.core import Budgets, InputError, Instance, Mode, ResourceError
from staggerlab.interval_ptas import (
    MimickingPartition,
    _count_compositions,
    balance_partition,
    class_guesses,
    class_sum_window,
    count_class_guesses,
    enumerate_quantity_guesses,
    group_by_interval,
    interval_ptas_solve,
    max_multiple,
    quantity_unit,
    superitem_instance,
)
from staggerlab.peak import brute_optimum, peak_scan


def inst(*pairs):
    return Instance.from_pairs(pairs, Mode.DISCRETE)


def exhaustive_makespan(jobs, speeds):
    best = None
    for assign in itertools.product(range(len(speeds)), repeat=len(jobs)):
        loads = [0] * len(speeds)
        for j, m in zip(jobs, assign):
            loads[m] += j
        if any(load and speeds[m] == 0 for m, load in enumerate(loads)):
            continue
        span = max((F(load) / speeds[m] for m, load in enumerate(loads) if load), default=F(0))
        best = span if best is None else min(best, span)
    return best


def makespan(jobs, speeds, groups):
    return max((F(sum(jobs[p] for p in g)) / s for g, s in zip(groups, speeds) if g), default=F(0))


class TestClasses:
    def test_examples(self):
        c = group_by_interval(inst((2, 1), (2, 5), (3, 7)), F(1, 2))
        assert c.K == 2 and c.members == ((0, 1), (2,))
        assert group_by_interval(inst((4, 1), (4, 2), (4, 3)), F(1, 2)).K == 1
        assert group_by_interval(inst((2, 1), (3, 1), (5, 1)), F(1, 2)).K == 3

    def test_shared_discretisation(self):
        c = group_by_interval(inst((10, 1), (10, 4)), F(3, 10))
        assert c.shifts == ((0, 3, 6, 9),)

    def test_continuous_rejected(self):
        with pytest.raises(InputError):
            group_by_interval(Instance.from_pairs([(3, 1)], Mode.CONTINUOUS), F(1, 2))


class TestGuesses:
    def test_single_class_single_shift(self):
        i = inst((1, 3), (1, 1))
        c = group_by_interval(i, F(1, 2))
        assert c.shifts == ((0,),)
        u = quantity_unit(c, i.h_sum)
        tables = [g.multiples for g in enumerate_quantity_guesses(i, c)]
        # one shift: the window H/u .. H/u + 1, clipped at the per-shift cap
        cap = max_multiple(c)
        assert tables == [((m,),) for m in class_sum_window(c, 0, 4, u) if m <= cap]
        assert count_class_guesses(c, 0, 4, u) == len(tables)

    @given(st.integers(0, 30), st.integers(1, 4), st.integers(0, 12))
    def test_composition_count(self, total, parts, cap):
        from staggerlab.interval_ptas import _compositions

        got = list(_compositions(total, parts, cap))
        brute = [t for t in itertools.product(range(cap + 1), repeat=parts) if sum(t) == total]
        assert got == brute
        assert _count_compositions(total, parts, cap) == len(brute)

    @given(st.lists(st.tuples(st.sampled_from([2, 3, 4]), st.integers(1, 6)), min_size=1, max_size=4))
    def test_window_and_bounds(self, pairs):
        i = inst(*pairs)
        c = group_by_interval(i, F(1, 2))
        u = quantity_unit(c, i.h_sum)
        for g in enumerate_quantity_guesses(i, c):
            for k, mult in enumerate(g.multiples):
                hk = sum(i.items[j].quantity for j in c.members[k])
                total = sum(mult) * u
                assert hk <= total <= hk + len(c.shifts[k]) * u
                assert all(0 <= m * u <= i.h_sum + u for m in mult)

    def test_budget(self):
        i = inst((5, 1), (5, 1), (7, 3))
        c = group_by_interval(i, F(1, 5))
        with pytest.raises(ResourceError):
            next(enumerate_quantity_guesses(i, c, Budgets(guesses=10)))
        with pytest.raises(ResourceError):
            interval_ptas_solve(i, F(1, 5), Budgets(guesses=10))

    @pytest.mark.parametrize("pairs", [
        ((4, 1), (4, 2), (6, 1), (6, 3)),
        ((2, 1), (2, 1), (2, 1), (3, 2)),
        ((5, 3), (5, 1), (5, 2)),
    ])
    def test_true_table_is_emitted(self, pairs):
        i = inst(*pairs)
        eps = F(1, 2)
        c = group_by_interval(i, eps)
        u = quantity_unit(c, i.h_sum)
        per_item = [c.shifts[c.intervals.index(T)] for T in i.intervals]
        best = min(itertools.product(*per_item), key=lambda v: (peak_scan(i, v).value, v))
        for k, members in enumerate(c.members):
            want = tuple(
                math.ceil(sum(i.items[j].quantity for j in members if best[j] == tau) / u)
                for tau in c.shifts[k])
            hk = sum(i.items[j].quantity for j in members)
            assert want in set(class_guesses(c, k, hk, u))


class TestBalance:
    def test_example(self):
        groups = balance_partition([3, 3, 2, 2], [5, 5], F(1, 2))
        assert sorted(sorted([3, 3, 2, 2][p] for p in g) for g in groups) == [[2, 3], [2, 3]]
        assert makespan([3, 3, 2, 2], [5, 5], groups) == 1

    def test_single_machine(self):
        assert balance_partition([4, 1, 2], [7], F(1, 10)) == ((0, 1, 2),)

    def test_rejection(self):
        assert balance_partition([5], [2, 2], F(1, 2)) is None
        assert balance_partition([1], [0], F(1, 2)) is None

    @given(st.lists(st.integers(1, 9), min_size=1, max_size=6),
           st.lists(st.integers(0, 12), min_size=1, max_size=3))
    def test_optimal_for_small_inputs(self, jobs, speeds):
        eps = F(1, 3)
        opt = exhaustive_makespan(jobs, speeds)
        groups = balance_partition(jobs, speeds, eps)
        if opt is None or opt > 1 + eps:
            assert groups is None
            return
        assert groups is not None
        assert sorted(p for g in groups for p in g) == list(range(len(jobs)))
        assert makespan(jobs, speeds, groups) <= (1 + eps) * opt

    def test_lpt_path_verified(self):
        jobs = [3] * 16 + [2] * 4
        groups = balance_partition(jobs, [F(28)] * 2, F(1, 10))
        assert groups is not None and makespan(jobs, [28, 28], groups) <= F(11, 10)
        assert balance_partition(jobs, [F(20)] * 2, F(1, 10)) is None


class TestSuperItems:
    def test_merge(self):
        i = inst((4, 2), (4, 3), (6, 1))
        c = group_by_interval(i, F(1, 2))
        part = MimickingPartition((((0, 2), (0, 1)), ((1, 3), (2,)), ((1, 0), ())))
        sup, sv = superitem_instance(i, c, part)
        assert sup.intervals == (4, 6) and sup.quantities == (5, 1)
        assert sv.as_ints() == (2, 3)

    def test_singletons_are_the_instance(self):
        i = inst((4, 2), (6, 1))
        c = group_by_interval(i, F(1, 2))
        part = MimickingPartition((((0, 2), (0,)), ((1, 3), (1,))))
        sup, sv = superitem_instance(i, c, part)
        assert sup == i and sv.as_ints() == (2, 3)

    @given(st.lists(st.tuples(st.sampled_from([2, 4, 6]), st.integers(1, 5)), min_size=1, max_size=6),
           st.data())
    def test_peak_preserved(self, pairs, data):
        i = inst(*pairs)
        c = group_by_interval(i, F(1, 2))
        vec = [data.draw(st.sampled_from(c.shifts[c.intervals.index(T)])) for T in i.intervals]
        groups = {}
        for j, tau in enumerate(vec):
            groups.setdefault((c.intervals.index(i.intervals[j]), tau), []).append(j)
        part = MimickingPartition(tuple((key, tuple(v)) for key, v in sorted(groups.items())))
        assert part.shift_vector(i) == tuple(vec)
        sup, sv = superitem_instance(i, c, part)
        assert peak_scan(sup, sv).value == peak_scan(i, vec).value


class TestSolve:
    def test_examples(self):
        assert interval_ptas_solve(inst((2, 2), (2, 2)), F(1, 2)).peak.value == 3
        four = inst(*[(2, 1)] * 4)
        r = interval_ptas_solve(four, F(1, 2))
        # two items per parity: 1 + 1 + 1/2 + 1/2
        assert r.peak.value == 3 == brute_optimum(four).value

    @given(st.lists(st.tuples(st.sampled_from([2, 3, 4, 6]), st.integers(1, 5)), min_size=1, max_size=5))
    def test_guarantee_and_consistency(self, pairs):
        i = inst(*pairs)
        eps = F(1, 2)
        r = interval_ptas_solve(i, eps)
        assert peak_scan(i, r.shifts).value == r.peak.value
        assert r.peak.value <= (1 + 17 * eps) * brute_optimum(i).value
        c = group_by_interval(i, eps)
        for k, members in enumerate(c.members):
            assert all(r.shifts[j] in c.shifts[k] for j in members)

    def test_report(self):
        r = interval_ptas_solve(inst((2, 1), (2, 1), (3, 4)), F(1, 2))
        assert r.report["guesses"] >= r.report["rejected"] >= 0
        assert len(r.report["chosen_table"]) == 2

    def test_deterministic(self):
        i = inst((4, 1), (4, 3), (6, 2), (6, 2), (12, 1))
        assert interval_ptas_solve(i, F(1, 2)).shifts == interval_ptas_solve(i, F(1, 2)).shifts

    def test_ip_fallback_for_long_cycles(self):
        i = inst((4, 1), (4, 3), (6, 2))
        r = interval_ptas_solve(i, F(1, 2), Budgets(scan=5))
        assert r.peak.value == peak_scan(i, r.shifts).value
