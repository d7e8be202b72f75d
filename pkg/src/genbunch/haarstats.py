"""Haar averages of bunching probabilities.

Closed forms for bosons, fermions and classical particles, exact averages from
Weingarten functions for small ``N``, Monte Carlo over Haar networks, the
subset-size selection behind the standard geometry table, and the first-order
laws for a small distinguishability error.

Averages are over Haar-random ``M``-mode networks with single particles in
``N`` input modes and an output subset of ``K`` modes (``L = M - K``).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from .bunching import prob_all_in_subset
from .config import settings
from .errors import CapacityError, ContractError, InfeasibleError
from .indist import JFunction
from .numkit import RngStream, determinant, haar_isometry, permanent_ryser
from .symgroup import cycle_sum_zn, group_table, weingarten_by_element

Species = Literal["boson", "fermion", "classical"]

__all__ = [
    "AverageSpec",
    "ClassicalApprox",
    "RatioEstimate",
    "Table1Row",
    "MonteCarloResult",
    "ZnValue",
    "DiluteRegimeWarning",
    "avg_quantum",
    "avg_classical_approx",
    "avg_classical_exact",
    "avg_prob_exact",
    "avg_ratio",
    "standard_m",
    "select_k",
    "table1",
    "haar_bunching_matrix",
    "monte_carlo_statistic",
    "monte_carlo_avg",
    "per_polynomial_derivative",
    "first_order_prob",
    "avg_distinguishability_shift",
    "generating_function_zn",
]


class DiluteRegimeWarning(UserWarning):
    """An averaged law derived for ``M >> N^2`` is evaluated outside that regime."""


@dataclass(frozen=True)
class AverageSpec:
    n: int
    m: int
    k: int
    species: Species = "boson"

    def __post_init__(self):
        if self.n < 1 or not 1 <= self.k <= self.m:
            raise ContractError(f"need n >= 1 and 1 <= k <= m, got {self}")
        if self.species not in ("boson", "fermion", "classical"):
            raise ContractError(f"unknown species {self.species!r}")

    @property
    def l(self) -> int:
        return self.m - self.k

    def with_species(self, species: Species) -> "AverageSpec":
        return AverageSpec(self.n, self.m, self.k, species)


def avg_quantum(spec: AverageSpec) -> float:
    """``prod_{l<N} (K + l)/(M + l)`` for bosons, ``(K - l)/(M - l)`` for fermions.

    Zero for fermions with ``K < N``.
    """
    if spec.species == "classical":
        raise ContractError("avg_quantum needs species boson or fermion")
    sign = 1 if spec.species == "boson" else -1
    if sign < 0 and spec.k < spec.n:
        return 0.0
    out = 1.0
    for l in range(spec.n):
        out *= (spec.k + sign * l) / (spec.m + sign * l)
    return out


class ClassicalApprox(NamedTuple):
    value: float
    correction_scale: float  # relative size N^2/(K M) of the neglected terms


def avg_classical_approx(spec: AverageSpec) -> ClassicalApprox:
    """Large-``M`` classical average ``(K/M)^N`` and its relative correction scale."""
    return ClassicalApprox((spec.k / spec.m) ** spec.n, spec.n**2 / (spec.k * spec.m))


def _avg_schur_row(n: int, m: int, k: int) -> np.ndarray:
    """Haar average of ``prod_a H[a, sigma(a)]`` for every ``sigma``, by rank.

    ``<Pi_{I,sigma}> = sum_tau W(M, sigma tau) K^{#tau}``.
    """
    t = group_table(n)
    w = weingarten_by_element(m, n)
    kpow = np.power(float(k), t.total_cycles)
    return w[t.mult] @ kpow


def avg_classical_exact(n: int, m: int, k: int) -> float:
    """Exact Haar average of ``prod_a H[a, a]`` from the Weingarten function."""
    if n > settings().classical_exact_cap:
        raise CapacityError(f"exact classical average limited to n <= {settings().classical_exact_cap}")
    AverageSpec(n, m, k)
    return float(_avg_schur_row(n, m, k)[0])


def avg_prob_exact(j: JFunction, m: int, k: int) -> float:
    """Exact Haar average of ``p_N(J)`` for single particles in ``N`` input modes."""
    AverageSpec(j.n, m, k)
    val = complex(np.dot(j.values, _avg_schur_row(j.n, m, k)))
    if abs(val.imag) > settings().imag_tol:
        raise ContractError(f"average has imaginary part {val.imag:.3e}")
    return val.real


class RatioEstimate(NamedTuple):
    value: float
    correction_scale: float


def avg_ratio(spec: AverageSpec) -> RatioEstimate:
    """Ratio of the quantum average to ``(K/M)^N``: ``prod_{l=1}^{N-1} (1 +- l/K)/(1 +- l/M)``."""
    sign = -1 if spec.species == "fermion" else 1
    out = 1.0
    for l in range(1, spec.n):
        out *= (1 + sign * l / spec.k) / (1 + sign * l / spec.m)
    return RatioEstimate(out, spec.n**2 / (spec.k * spec.m))


# -- standard geometry --------------------------------------------------------


@dataclass(frozen=True)
class Table1Row:
    n: int
    l: int
    m: int

    @property
    def k(self) -> int:
        return self.m - self.l


def standard_m(n: int) -> int:
    """Network size ``ceil(n^2 / 2)`` used by the standard geometry."""
    return -(-n * n // 2)


def select_k(n: int, min_avg: float = 0.25, m: int | None = None) -> Table1Row:
    """Choose ``K >= n`` maximising the boson/classical ratio with ``<p^B> >= min_avg``.

    Ties go to the smallest ``L``.
    """
    if n < 3:
        raise ContractError("select_k needs n >= 3")
    m = standard_m(n) if m is None else m
    best = None
    for k in range(m, n - 1, -1):
        spec = AverageSpec(n, m, k)
        if avg_quantum(spec) < min_avg:
            continue
        ratio = avg_ratio(spec).value
        if best is None or ratio > best[0] * (1 + 1e-12):
            best = (ratio, k)
    if best is None:
        raise InfeasibleError(f"no K >= {n} gives <p^B> >= {min_avg} at M={m}")
    return Table1Row(n, m - best[1], m)


def table1(n_values=range(3, 21), min_avg: float = 0.25) -> list[Table1Row]:
    return [select_k(n, min_avg) for n in n_values]


# -- Monte Carlo --------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    std_error: float
    samples: np.ndarray


def haar_bunching_matrix(n: int, m: int, k: int, rng) -> np.ndarray:
    """Bunching matrix of ``n`` input modes and ``k`` output modes of a Haar network."""
    # only the n input rows of the network matter
    rows = haar_isometry(m, n, rng).T[:, :k]
    return rows @ rows.conj().T


def monte_carlo_statistic(
    spec: AverageSpec,
    statistic,
    trials: int = 1000,
    rng: RngStream | int = 0,
    workers: int = 1,
) -> MonteCarloResult:
    """Mean of ``statistic(H)`` over ``trials`` Haar networks.

    Trial ``i`` draws its network from ``rng.child(i)``, so the result does not
    depend on ``workers``.
    """
    if trials < 2:
        raise ContractError("need at least two trials")
    root = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    out = np.empty(trials)

    def run(i):
        out[i] = statistic(haar_bunching_matrix(spec.n, spec.m, spec.k, root.child(i)))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(run, range(trials)))
    else:
        for i in range(trials):
            run(i)
    return MonteCarloResult(
        float(np.mean(out)), float(np.std(out, ddof=1) / math.sqrt(trials)), out
    )


def monte_carlo_avg(
    spec: AverageSpec,
    j_model: JFunction | None = None,
    trials: int = 1000,
    rng: RngStream | int = 0,
    workers: int = 1,
) -> MonteCarloResult:
    """Mean bunching probability over ``trials`` Haar networks.

    With ``j_model`` the probability is ``p_N(J)``, otherwise ``per(H)``,
    ``det(H)`` or ``prod diag(H)`` according to ``spec.species``.
    """
    if spec.n > settings().permanent_cap:
        raise CapacityError(f"n={spec.n} exceeds the permanent cap")
    if j_model is not None:
        if j_model.n != spec.n:
            raise ContractError("J-function size does not match spec.n")
        stat = lambda h: prob_all_in_subset(j_model, h)
    elif spec.species == "boson":
        stat = lambda h: permanent_ryser(h).real
    elif spec.species == "fermion":
        stat = lambda h: determinant(h).real
    else:
        stat = lambda h: float(np.prod(np.diagonal(h)).real)
    return monte_carlo_statistic(spec, stat, trials, rng, workers)


# -- distinguishability error -------------------------------------------------


def per_polynomial_derivative(h) -> tuple[float, float]:
    """``per(H)`` and ``d/dx per{H(x)}`` at ``x = 1``, where ``H(x)`` scales the diagonal by ``x``.

    ``per{H(x)}`` is a degree-``N`` polynomial; it is sampled at ``x = 0..N``
    and differentiated with the barycentric differentiation matrix.
    """
    h = np.asarray(h, dtype=np.complex128)
    n = h.shape[0]
    nodes = np.arange(n + 1, dtype=float)
    values = np.empty(n + 1, dtype=np.complex128)
    diag = np.diagonal(h).copy()
    for i, x in enumerate(nodes):
        hx = h.copy()
        np.fill_diagonal(hx, diag * x)
        values[i] = permanent_ryser(hx)
    weights = np.array([(-1) ** j * math.comb(n, j) for j in range(n + 1)], dtype=float)
    others = np.arange(n + 1) != 1
    row = weights[others] / weights[1] / (1.0 - nodes[others])
    deriv = np.dot(row, values[others]) - row.sum() * values[1]
    return float(values[1].real), float(deriv.real)


def first_order_prob(h, fidelity: float) -> float:
    """First-order bunching probability ``per - (1-F)(N per - d/dx per{H(x)}|_1)``."""
    if not 0.0 <= fidelity <= 1.0:
        raise ContractError("fidelity must lie in [0, 1]")
    n = np.asarray(h).shape[0]
    per, deriv = per_polynomial_derivative(h)
    return per - (1.0 - fidelity) * (n * per - deriv)


def avg_distinguishability_shift(n: int, m: int, fidelity: float, k: int) -> float:
    """Predicted ``<p^B> - <p_N(J)>`` for mean fidelity ``F``.

    ``(1-F)(N-1) (N/M) <p^B_{N-1}>``. Only accurate for ``M >> N^2`` and
    ``K << M``: the relative bias against the exact Weingarten average grows
    roughly like ``N K / M``. Emits :class:`DiluteRegimeWarning` when
    ``M < dilute_factor * N^2`` or ``K N^2 > M``.
    """
    if not 0.0 <= fidelity <= 1.0:
        raise ContractError("fidelity must lie in [0, 1]")
    if m < settings().dilute_factor * n * n or k * n * n > m:
        warnings.warn(f"M={m}, K={k} is outside the regime M >> N^2, K << M (N={n})",
                      DiluteRegimeWarning, stacklevel=2)
    lower = avg_quantum(AverageSpec(n - 1, m, k)) if n > 1 else 1.0
    return (1.0 - fidelity) * (n - 1) * (n / m) * lower


class ZnValue(NamedTuple):
    exact: float
    leading: float


def generating_function_zn(n: int, k: int, m: int) -> ZnValue:
    """Cycle sum with weights ``t_s = -K M g_s``, ``g_s = (2s-2)!/(s!(s-1)!)``, and its leading term."""
    km = float(k) * float(m)
    t = [-km * math.factorial(2 * s - 2) / (math.factorial(s) * math.factorial(s - 1))
         for s in range(1, n + 1)]
    exact = cycle_sum_zn(n, t)
    return ZnValue(exact.real, (-km) ** n / math.factorial(n))
