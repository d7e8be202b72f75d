"""Bunching probabilities of partially distinguishable particles.

For a network ``U``, input modes ``k_1..k_N`` and a subset ``K`` of output
modes, the bunching matrix is ``H[a, b] = sum_{l in K} U[k_a, l] conj(U[k_b, l])``
and the probability that every particle exits inside ``K`` is

    p_N(J) = (1 / mu(n)) sum_sigma J(sigma) prod_a H[a, sigma(a)].

Modes and particles are 0-based throughout.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import settings
from .errors import CapacityError, ContractError, NumericalInconsistencyError
from .indist import JFunction
from .numkit import (
    as_generator,
    as_matrix,
    check_unitary,
    determinant,
    haar_unitary,
    matrix_from_dict,
    matrix_to_dict,
    permanent_ryser,
    polar_and_svd,
)
from .symgroup import YoungSubgroup, group_table

__all__ = [
    "BunchingProblem",
    "SchurPowerMatrix",
    "LimitProbabilities",
    "SpectralReport",
    "HadamardCheck",
    "PotSearchResult",
    "NormalizationWarning",
    "occupation_numbers",
    "mu",
    "input_norm",
    "build_h",
    "build_h_complement",
    "limit_probabilities",
    "prob_all_in_subset",
    "schur_power_matrix",
    "spectral_claims",
    "pot_search",
    "hadamard_permanent_check",
    "output_configurations",
    "full_output_distribution",
    "bunched_sum",
]


class NormalizationWarning(UserWarning):
    """A lossy network was used where probabilities need not sum to one."""


def occupation_numbers(modes) -> tuple[int, ...]:
    """Occupations of the distinct modes in ``modes``, ordered by mode index."""
    counts = Counter(int(k) for k in modes)
    return tuple(counts[k] for k in sorted(counts))


def mu(occupation) -> int:
    """``mu(n) = prod_k n_k!``."""
    return math.prod(math.factorial(int(x)) for x in occupation)


@dataclass(frozen=True, eq=False)
class BunchingProblem:
    network: np.ndarray
    input_modes: tuple[int, ...]
    output_subset: tuple[int, ...]

    def __post_init__(self):
        u = as_matrix(self.network, square=True)
        m = u.shape[0]
        modes = tuple(int(k) for k in self.input_modes)
        subset = tuple(sorted(int(k) for k in self.output_subset))
        if not modes:
            raise ContractError("need at least one input particle")
        if any(not 0 <= k < m for k in modes):
            raise ContractError(f"input modes must lie in [0, {m})")
        if not subset or any(not 0 <= k < m for k in subset):
            raise ContractError(f"output subset must be non-empty and lie in [0, {m})")
        if len(set(subset)) != len(subset):
            raise ContractError("output subset has repeated modes")
        object.__setattr__(self, "network", u)
        object.__setattr__(self, "input_modes", modes)
        object.__setattr__(self, "output_subset", subset)

    @property
    def n(self) -> int:
        return len(self.input_modes)

    @property
    def m(self) -> int:
        return self.network.shape[0]

    @property
    def k(self) -> int:
        return len(self.output_subset)

    @property
    def occupation(self) -> tuple[int, ...]:
        return occupation_numbers(self.input_modes)

    def to_dict(self) -> dict:
        return {
            "network": matrix_to_dict(self.network),
            "input_modes": list(self.input_modes),
            "output_subset": list(self.output_subset),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "BunchingProblem":
        try:
            return cls(
                matrix_from_dict(obj["network"]),
                tuple(obj["input_modes"]),
                tuple(obj["output_subset"]),
            )
        except (KeyError, TypeError) as exc:
            raise ContractError(f"malformed bunching problem: {exc}") from exc


def build_h(problem: BunchingProblem) -> np.ndarray:
    """Bunching matrix ``H = A A^dag`` with ``A = U[inputs][:, subset]``."""
    polar_and_svd(problem.network)
    a = problem.network[np.ix_(problem.input_modes, problem.output_subset)]
    h = a @ a.conj().T
    return 0.5 * (h + h.conj().T)


def build_h_complement(problem: BunchingProblem) -> np.ndarray:
    """``H = I - Phi`` with ``Phi`` built from the complement columns (unitary networks)."""
    u = check_unitary(problem.network)
    rest = np.setdiff1d(np.arange(problem.m), problem.output_subset)
    rows = u[list(problem.input_modes)]
    b = rows[:, rest]
    gram = rows @ rows.conj().T
    return gram - b @ b.conj().T


def _real(z: complex, what: str) -> float:
    if abs(z.imag) > settings().imag_tol * max(1.0, abs(z.real)):
        raise NumericalInconsistencyError(f"{what} has imaginary part {z.imag:.3e}")
    return float(z.real)


def _check_occupation(occupation, n: int) -> tuple[int, ...]:
    occ = tuple(int(x) for x in occupation) if occupation is not None else (1,) * n
    if sum(occ) != n or any(x < 0 for x in occ):
        raise ContractError(f"occupation {occ} does not describe {n} particles")
    return occ


def input_norm(j: JFunction, labels) -> float:
    """Squared norm ``sum_{sigma in Young(n)} J(sigma)`` of the input state.

    ``labels[a]`` is the input mode of particle ``a``. Equals ``mu(n)`` when
    particles sharing an input mode share their internal state; otherwise it
    is smaller and replaces ``mu(n)`` as normaliser.
    """
    labels = [int(x) for x in labels]
    if len(labels) != j.n:
        raise ContractError(f"J is for {j.n} particles, got {len(labels)} labels")
    if len(set(labels)) == len(labels):
        return 1.0
    ranks = YoungSubgroup.from_labels(labels).member_ranks
    norm = _real(complex(np.sum(j.values[ranks])), "input norm")
    if norm <= settings().imag_tol:
        raise ContractError("input state has zero norm for this J-function")
    return norm


class LimitProbabilities(NamedTuple):
    boson: float
    fermion: float
    classical: float


def limit_probabilities(h, occupation=None) -> LimitProbabilities:
    """Boson, fermion and classical bunching probabilities of ``H``.

    ``per(H)/mu(n)``, ``det(H)`` (zero if any mode is multiply occupied) and
    ``prod_a H[a, a]``.
    """
    h = as_matrix(h, square=True)
    occ = _check_occupation(occupation, h.shape[0])
    weight = mu(occ)
    boson = _real(permanent_ryser(h), "per(H)") / weight
    fermion = _real(determinant(h), "det(H)") if weight == 1 else 0.0
    classical = _real(complex(np.prod(np.diagonal(h))), "prod diag(H)")
    return LimitProbabilities(boson, fermion, classical)


def prob_all_in_subset(j: JFunction, h, occupation=None) -> float:
    """``p_N(J) = (1/mu(n)) sum_sigma J(sigma) prod_a H[a, sigma(a)]``.

    ``occupation`` assumes particles sharing a mode are consecutive rows of
    ``H``. ``mu(n)`` is replaced by :func:`input_norm` when co-located
    particles are not identical.
    """
    h = as_matrix(h, square=True)
    n = h.shape[0]
    if j.n != n:
        raise ContractError(f"J is for {j.n} particles but H is {n}x{n}")
    occ = _check_occupation(occupation, n)
    perms = group_table(n).perms
    terms = np.prod(h[np.arange(n), perms], axis=1)
    return _real(complex(np.dot(j.values, terms)) / input_norm(j, np.repeat(np.arange(len(occ)), occ)), "p_N(J)")


# -- Schur power matrix -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class SchurPowerMatrix:
    """``entries[s, t] = prod_a H[p_s(a), p_t(a)]`` in lexicographic rank order."""

    n: int
    entries: np.ndarray

    def quadratic_form(self, theta) -> complex:
        theta = np.asarray(theta, dtype=np.complex128)
        return complex(np.conj(theta) @ self.entries @ theta)


def schur_power_matrix(h, allow_large: bool = False) -> SchurPowerMatrix:
    """Build the ``N! x N!`` Schur power matrix of ``H``.

    ``N`` is limited to ``settings().schur_cap``; ``allow_large`` raises the
    limit to ``settings().schur_cap_optin``.
    """
    h = as_matrix(h, square=True)
    n = h.shape[0]
    cap = settings().schur_cap_optin if allow_large else settings().schur_cap
    if n > cap:
        raise CapacityError(f"Schur power matrix for N={n} exceeds cap {cap}")
    perms = group_table(n).perms
    k = len(perms)
    out = np.empty((k, k), dtype=np.complex128)
    block = max(1, 2_000_000 // (k * n))
    for start in range(0, k, block):
        rows = perms[start:start + block]
        out[start:start + block] = np.prod(h[rows[:, None, :], perms[None, :, :]], axis=-1)
    return SchurPowerMatrix(n, out)


@dataclass(frozen=True)
class SpectralReport:
    min_eig: float
    max_eig: float
    det_h: float
    per_h: float
    min_eig_is_det: bool
    sym_vector_is_eigen: bool
    sym_residual: float
    per_is_max: bool
    per_margin: float  # (per - max_eig) / max(1, max_eig); negative means a violation
    per_multiplicity_on_sym: int  # eigenvalues within tolerance of per(H)


def spectral_claims(pi: SchurPowerMatrix, h) -> SpectralReport:
    """Check the smallest-eigenvalue, symmetric-eigenvector and largest-eigenvalue claims."""
    h = as_matrix(h, square=True)
    mat = pi.entries
    eig = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))
    scale = max(1.0, float(np.max(np.abs(eig))))
    per = _real(permanent_ryser(h), "per(H)")
    det = _real(determinant(h), "det(H)")
    sym = np.full(mat.shape[0], 1 / math.sqrt(mat.shape[0]))
    residual = float(np.linalg.norm(mat @ sym - per * sym))
    margin = (per - float(eig[-1])) / max(1.0, float(eig[-1]))
    mult = int(np.sum(np.abs(eig - per) <= 1e-8 * scale))
    return SpectralReport(
        min_eig=float(eig[0]),
        max_eig=float(eig[-1]),
        det_h=det,
        per_h=per,
        min_eig_is_det=bool(abs(eig[0] - det) <= 1e-8 * scale),
        sym_vector_is_eigen=bool(residual <= 1e-8 * scale),
        sym_residual=residual,
        per_is_max=bool(margin >= -settings().pot_rel_tol),
        per_margin=margin,
        per_multiplicity_on_sym=mult,
    )


class PotSearchResult(NamedTuple):
    trials: int
    violations: int
    worst_margin: float
    worst_h: np.ndarray


def pot_search(n: int, k: int, m: int, trials: int, rng) -> PotSearchResult:
    """Random search for ``H`` whose Schur power matrix has an eigenvalue above ``per(H)``.

    Each trial draws a Haar network of size ``m`` and uses its first ``n`` rows
    and first ``k`` columns. This is a diagnostic with no pass/fail outcome.
    """
    if not 1 <= k <= m or n > m:
        raise ContractError("need 1 <= k <= m and n <= m")
    gen = as_generator(rng)
    worst, worst_h, count = math.inf, None, 0
    for _ in range(trials):
        u = haar_unitary(m, gen)
        h = build_h(BunchingProblem(u, tuple(range(n)), tuple(range(k))))
        report = spectral_claims(schur_power_matrix(h), h)
        count += not report.per_is_max
        if report.per_margin < worst:
            worst, worst_h = report.per_margin, h
    return PotSearchResult(trials, count, worst, worst_h)


class HadamardCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def hadamard_permanent_check(h, g, rel_tol: float = 1e-12) -> HadamardCheck:
    """Compare ``per(H o G)`` with ``per(H)`` for a unit-diagonal Gram matrix ``G``."""
    h = as_matrix(h, square=True)
    g = as_matrix(g, square=True)
    if h.shape != g.shape:
        raise ContractError("H and G must have the same shape")
    lhs = _real(permanent_ryser(h * g), "per(H o G)")
    rhs = _real(permanent_ryser(h), "per(H)")
    return HadamardCheck(lhs, rhs, bool(lhs <= rhs * (1 + rel_tol) + rel_tol))


# -- full output distribution -----------------------------------------------


def output_configurations(m: int, n: int) -> list[tuple[int, ...]]:
    """Occupation vectors of ``n`` particles in ``m`` modes, colexicographic order."""
    configs = []
    for modes in itertools.combinations_with_replacement(range(m), n):
        occ = [0] * m
        for k in modes:
            occ[k] += 1
        configs.append(tuple(occ))
    configs.sort(key=lambda c: c[::-1])
    return configs


def full_output_distribution(network, input_modes, j: JFunction) -> dict[tuple[int, ...], float]:
    """Probability of every output occupation vector.

    ``p(m) = (1/(mu(m) mu(n))) sum_{sigma,tau} J(sigma^-1 tau) conj(x_sigma) x_tau``
    with ``x_sigma = prod_a U[k_a, l_sigma(a)]`` for the sorted output mode
    list ``l`` of ``m``; ``mu(n)`` is replaced by :func:`input_norm` when
    co-located particles are not identical. Limited to ``settings().distribution_particle_cap``
    particles and ``settings().distribution_mode_cap`` modes.
    """
    u = as_matrix(network, square=True)
    modes = [int(k) for k in input_modes]
    n, m = len(modes), u.shape[0]
    cfg = settings()
    if n > cfg.distribution_particle_cap or m > cfg.distribution_mode_cap:
        raise CapacityError(
            f"distribution limited to N <= {cfg.distribution_particle_cap}, "
            f"M <= {cfg.distribution_mode_cap}"
        )
    if j.n != n:
        raise ContractError(f"J is for {j.n} particles, input has {n}")
    try:
        check_unitary(u)
    except ContractError:
        polar_and_svd(u)
        warnings.warn("network is not unitary; probabilities sum to at most one",
                      NormalizationWarning, stacklevel=2)
    configs = output_configurations(m, n)
    lists = np.array([np.repeat(np.arange(m), c) for c in configs])
    perms = group_table(n).perms
    rows = u[modes]  # (n, m)
    # x[c, s] = prod_a U[k_a, l_c[p_s(a)]]
    cols = lists[:, perms]  # (configs, n!, n)
    x = np.prod(rows[np.arange(n), cols], axis=-1)
    gram = j.group_matrix()
    probs = np.einsum("cs,st,ct->c", x.conj(), gram, x)
    weights = np.array([mu(c) for c in configs]) * input_norm(j, modes)
    probs = probs / weights
    if np.max(np.abs(probs.imag)) > cfg.imag_tol:
        raise NumericalInconsistencyError("output probabilities have an imaginary part")
    return {c: float(p) for c, p in zip(configs, probs.real)}


def bunched_sum(distribution: dict, subset) -> float:
    """Total probability of the configurations supported inside ``subset``."""
    inside = set(int(k) for k in subset)
    return float(sum(p for c, p in distribution.items()
                     if all(x == 0 or i in inside for i, x in enumerate(c))))
