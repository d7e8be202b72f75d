import math
import time
import warnings

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from genbunch import CapacityError, ContractError, InfeasibleError
from genbunch.bunching import prob_all_in_subset
from genbunch.haarstats import (
    AverageSpec,
    DiluteRegimeWarning,
    avg_classical_approx,
    avg_classical_exact,
    avg_distinguishability_shift,
    avg_prob_exact,
    avg_quantum,
    avg_ratio,
    first_order_prob,
    generating_function_zn,
    haar_bunching_matrix,
    monte_carlo_avg,
    monte_carlo_statistic,
    per_polynomial_derivative,
    select_k,
    standard_m,
    table1,
)
from genbunch.indist import j_distinguishable, j_first_order, j_indistinguishable
from genbunch.numkit import RngStream
from genbunch.symgroup import group_table

PAPER_L = [2, 2, 3, 4, 5, 5, 6, 7, 7, 8, 9, 9, 10, 11, 11, 12, 13, 14]
PAPER_M = [5, 8, 13, 18, 25, 32, 41, 50, 61, 72, 85, 98, 113, 128, 145, 162, 181, 200]


def test_table1_matches_paper():
    t0 = time.perf_counter()
    rows = table1()
    assert time.perf_counter() - t0 < 1.0
    assert [r.n for r in rows] == list(range(3, 21))
    assert [r.l for r in rows] == PAPER_L
    assert [r.m for r in rows] == PAPER_M
    assert all(r.k >= r.n for r in rows)


def test_select_k_errors():
    with pytest.raises(ContractError):
        select_k(2)
    with pytest.raises(InfeasibleError):
        select_k(5, min_avg=1.5)
    assert standard_m(7) == 25


def test_avg_quantum_trivial_and_limits():
    assert avg_quantum(AverageSpec(1, 7, 3)) == pytest.approx(3 / 7)
    assert avg_quantum(AverageSpec(3, 10, 2, "fermion")) == 0.0
    assert avg_quantum(AverageSpec(3, 10, 10)) == pytest.approx(1.0)
    with pytest.raises(ContractError):
        avg_quantum(AverageSpec(2, 5, 2, "classical"))
    with pytest.raises(ContractError):
        AverageSpec(2, 5, 6)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("species", ["boson", "fermion"])
def test_closed_form_matches_weingarten_average(n, species):
    for m, k in [(n + 2, n), (2 * n + 1, n + 1), (9, 4)]:
        if k > m:
            continue
        exact = avg_prob_exact(j_indistinguishable(n, species), m, k)
        assert exact == pytest.approx(avg_quantum(AverageSpec(n, m, k, species)), rel=1e-10, abs=1e-14)


def test_classical_exact_two_particles_from_moments():
    # <|U_11|^2 |U_22|^2> = 1/(m^2-1) and <|U_11|^2 |U_21|^2> = 1/(m(m+1))
    m, k = 6, 3
    expected = k / (m * (m + 1)) + k * (k - 1) / (m * m - 1)
    assert avg_classical_exact(2, m, k) == pytest.approx(expected, rel=1e-12)
    d = j_distinguishable((1, 1))
    assert avg_prob_exact(d, m, k) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(CapacityError):
        avg_classical_exact(6, 8, 3)


def test_classical_approximation_and_ratio():
    spec = AverageSpec(4, 400, 40)
    approx = avg_classical_approx(spec)
    exact = avg_classical_exact(4, 400, 40)
    assert abs(exact - approx.value) <= 2 * approx.value * approx.correction_scale
    ratio = avg_ratio(spec).value
    assert ratio == pytest.approx(avg_quantum(spec) / approx.value, rel=1e-12)


@pytest.mark.parametrize("species", ["boson", "fermion", "classical"])
def test_monte_carlo_agrees_with_exact(species):
    n, m, k = 3, 6, 4
    res = monte_carlo_avg(AverageSpec(n, m, k, species), trials=3000, rng=RngStream(5))
    if species == "classical":
        exact = avg_classical_exact(n, m, k)
    else:
        exact = avg_quantum(AverageSpec(n, m, k, species))
    assert abs(res.mean - exact) < 4 * res.std_error


def test_monte_carlo_is_worker_independent():
    spec = AverageSpec(3, 8, 4)
    a = monte_carlo_avg(spec, trials=40, rng=RngStream(9), workers=1)
    b = monte_carlo_avg(spec, trials=40, rng=RngStream(9), workers=4)
    np.testing.assert_array_equal(a.samples, b.samples)
    c = monte_carlo_avg(spec, j_model=j_indistinguishable(3), trials=40, rng=RngStream(9))
    np.testing.assert_allclose(a.samples, c.samples, rtol=1e-10)
    with pytest.raises(ContractError):
        monte_carlo_statistic(spec, np.trace, trials=1)
    with pytest.raises(ContractError):
        monte_carlo_avg(spec, j_model=j_indistinguishable(2), trials=4)


def test_haar_bunching_matrix_is_psd_contraction():
    h = haar_bunching_matrix(4, 10, 5, RngStream(1))
    w = np.linalg.eigvalsh(h)
    assert w[0] >= -1e-12 and w[-1] <= 1 + 1e-12


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5))
@hsettings(max_examples=30, deadline=None)
def test_per_derivative_counts_fixed_points(seed, n):
    h = haar_bunching_matrix(n, 2 * n + 1, n + 1, RngStream(seed))
    t = group_table(n)
    terms = np.prod(h[np.arange(n), t.perms], axis=1)
    per, deriv = per_polynomial_derivative(h)
    assert per == pytest.approx(terms.sum().real, rel=1e-9, abs=1e-12)
    assert deriv == pytest.approx((t.fixed_points * terms).sum().real, rel=1e-8, abs=1e-11)


def test_first_order_prob_is_first_order_j():
    h = haar_bunching_matrix(4, 12, 5, RngStream(2))
    for f in (0.99, 0.9):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            j = j_first_order(4, f)
        assert first_order_prob(h, f) == pytest.approx(prob_all_in_subset(j, h), rel=1e-10)
    with pytest.raises(ContractError):
        first_order_prob(h, 1.5)


def test_distinguishability_shift_in_dilute_limit():
    n, m, k, f = 3, 3000, 2, 0.99
    exact = avg_quantum(AverageSpec(n, m, k)) - avg_prob_exact(j_first_order(n, f), m, k)
    assert avg_distinguishability_shift(n, m, f, k) == pytest.approx(exact, rel=0.01)


def test_distinguishability_shift_warns_outside_regime():
    with pytest.warns(DiluteRegimeWarning):
        avg_distinguishability_shift(4, 20, 0.99, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        avg_distinguishability_shift(4, 100, 0.99, 2)


def test_generating_function_leading_term():
    k, m = 10, 100
    z = generating_function_zn(5, k, m)
    assert z.leading == pytest.approx((-k * m) ** 5 / 120)
    assert abs(z.exact / z.leading - 1) < 5 * 5**2 / (k * m)
    assert generating_function_zn(1, 3, 7).exact == pytest.approx(-21)
    assert math.isfinite(generating_function_zn(12, 4, 50).exact)
