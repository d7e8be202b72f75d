import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from oracles import orbit_cycle_counts, weingarten_closed_form

from genbunch import CapacityError, ContractError
from genbunch.symgroup import (
    CycleType,
    Permutation,
    YoungSubgroup,
    class_size,
    cycle_sum_brute,
    cycle_sum_zn,
    enumerate_group,
    group_table,
    partitions,
    weingarten_by_element,
    weingarten_table,
)

perms = st.integers(1, 7).flatmap(lambda n: st.permutations(range(n)))


@given(perms, st.data())
@hsettings(max_examples=60)
def test_rank_round_trip_and_group_axioms(images, data):
    p = Permutation(tuple(images))
    q = Permutation(tuple(data.draw(st.permutations(range(p.n)))))
    assert Permutation.from_rank(p.n, p.rank) == p
    assert p * p.inverse() == Permutation.identity(p.n)
    assert (p * q)(0) == p(q(0))
    assert (p * q).sign() == p.sign() * q.sign()
    assert p.inverse().cycle_type() == p.cycle_type()


@given(perms)
def test_cycle_type_matches_orbit_oracle(images):
    ct = Permutation(tuple(images)).cycle_type()
    assert list(ct.counts) == orbit_cycle_counts(images)
    assert ct.n == len(images)


def test_one_line_is_one_based_by_default():
    assert Permutation.from_one_line([2, 1, 3]).images == (1, 0, 2)
    with pytest.raises(ContractError):
        Permutation((0, 0))
    with pytest.raises(ContractError):
        Permutation((0, 1)) * Permutation((0, 1, 2))


@pytest.mark.parametrize("n", range(1, 6))
def test_enumeration_ranks_and_latin_square(n):
    group = enumerate_group(n)
    assert [p.rank for p in group] == list(range(math.factorial(n)))
    assert group[0] == Permutation.identity(n)
    t = group_table(n)
    full = set(range(t.order))
    assert all(set(row) == full for row in t.mult)
    assert all(set(col) == full for col in t.mult.T)
    a, b = 3 % t.order, (t.order - 1)
    assert t.mult[a, b] == (group[a] * group[b]).rank
    assert all(t.mult[r, t.inverse[r]] == 0 for r in range(t.order))


def test_enumeration_cap():
    with pytest.raises(CapacityError):
        enumerate_group(9)


@pytest.mark.parametrize("n", range(1, 8))
def test_partitions_and_class_sizes(n):
    parts = list(partitions(n))
    assert parts == sorted(parts, reverse=True)
    assert len(set(parts)) == len(parts)
    assert sum(class_size(list(p)) for p in parts) == math.factorial(n)


def test_partition_counts():
    assert [len(list(partitions(n))) for n in range(1, 11)] == [1, 2, 3, 5, 7, 11, 15, 22, 30, 42]


def test_cycle_type_from_partition():
    ct = CycleType.from_partition((3, 1, 1))
    assert ct.counts == (2, 0, 1, 0, 0)
    assert ct.partition() == (3, 1, 1)
    assert ct.total_cycles == 3 and ct.fixed_points == 2


def test_young_subgroup():
    y = YoungSubgroup.from_occupation((2, 0, 3))
    assert y.occupation == (2, 0, 3)
    assert y.order == 2 * 6
    t = group_table(5)
    labels = np.array([0, 0, 2, 2, 2])
    assert all(np.array_equal(labels[t.perms[r]], labels) for r in y.member_ranks)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("m", [3, 4, 7])
def test_weingarten_matches_closed_forms(n, m):
    for part, value in weingarten_table(m, n).items():
        assert value == pytest.approx(weingarten_closed_form(m, part), rel=1e-12)


@pytest.mark.parametrize("n", range(1, 6))
def test_weingarten_gram_inverse_and_class_function(n):
    for m in (n, n + 3, 2 * n):
        t = group_table(n)
        w = weingarten_by_element(m, n)
        gram = np.power(float(m), t.total_cycles[t.mult[t.inverse[:, None], np.arange(t.order)]])
        wmat = w[t.mult[t.inverse[:, None], np.arange(t.order)]]
        assert np.max(np.abs(gram @ wmat - np.eye(t.order))) <= 1e-8
        for ranks in t.partition_index().values():
            assert np.ptp(w[ranks]) <= 1e-12 * np.max(np.abs(w))


def test_weingarten_errors():
    with pytest.raises(ContractError):
        weingarten_by_element(2, 3)
    with pytest.raises(CapacityError):
        weingarten_by_element(10, 7)


def test_cycle_sum_trivial_cases():
    assert cycle_sum_zn(6, [1] * 6) == pytest.approx(1)
    assert cycle_sum_zn(5, [2.0, 0, 0, 0, 0]) == pytest.approx(2.0**5 / 120)


@pytest.mark.parametrize("n", range(1, 8))
def test_cycle_sum_matches_enumeration(n):
    gen = np.random.default_rng(n)
    t = gen.standard_normal(n) + 1j * gen.standard_normal(n)
    assert cycle_sum_zn(n, t) == pytest.approx(cycle_sum_brute(n, t), rel=1e-10)


def test_cycle_sum_with_series_weights():
    k, m = 10, 100
    g = [math.factorial(2 * s - 2) / (math.factorial(s) * math.factorial(s - 1)) for s in range(1, 6)]
    t = [-k * m * x for x in g]
    brute = 0.0
    for p in itertools.permutations(range(5)):
        brute += math.prod(t[s] ** c for s, c in enumerate(orbit_cycle_counts(p)))
    assert cycle_sum_zn(5, t).real == pytest.approx(brute / 120, rel=1e-10)
    with pytest.raises(ContractError):
        cycle_sum_zn(5, t[:3])
