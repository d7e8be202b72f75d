"""J-functions: the symmetric-group description of partial distinguishability.

A :class:`JFunction` stores ``J(sigma)`` for every ``sigma`` in S_n, indexed by
lexicographic rank. Its values already include the exchange sign, so the
completely indistinguishable fermionic J is ``sgn(sigma)``.

The group matrix of ``J`` is ``Jmat[nu, tau] = J(nu^-1 tau)``; a J-function is
physical exactly when that matrix is positive semi-definite and ``J(I) = 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .config import settings
from .errors import ContractError, NotPhysicalError
from .numkit import as_generator
from .symgroup import YoungSubgroup, group_table

Species = Literal["boson", "fermion"]

__all__ = [
    "JFunction",
    "ThetaFunction",
    "FirstOrderValidityWarning",
    "IdealIndistinguishable",
    "IdealDistinguishable",
    "PureProduct",
    "ConvexMixture",
    "FirstOrderFidelity",
    "IndependentSources",
    "j_indistinguishable",
    "j_distinguishable",
    "j_classically_correlated",
    "j_first_order",
    "j_independent_sources",
    "indistinguishability_measure",
    "factorize_theta",
    "reconstruct_j",
    "reconstruct_internal_state",
    "permutation_operator",
    "random_theta",
    "random_gram",
    "random_physical_j",
    "j_to_dict",
    "j_from_dict",
]


class FirstOrderValidityWarning(UserWarning):
    """The first-order fidelity expansion is used outside its small-error regime."""


def _check_species(species):
    if species not in ("boson", "fermion"):
        raise ContractError(f"species must be 'boson' or 'fermion', got {species!r}")


@dataclass(frozen=True, eq=False)
class JFunction:
    n: int
    values: np.ndarray
    species: Species = "boson"

    def __post_init__(self):
        _check_species(self.species)
        vals = np.array(self.values, dtype=np.complex128)
        if vals.shape != (math.factorial(self.n),):
            raise ContractError(f"J-function for n={self.n} needs {math.factorial(self.n)} values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def epsilon(self) -> np.ndarray:
        """Exchange sign ``epsilon(sigma)`` for every rank."""
        if self.species == "fermion":
            return group_table(self.n).sign
        return np.ones(math.factorial(self.n), dtype=np.int64)

    def group_matrix(self) -> np.ndarray:
        """``Jmat[nu, tau] = J(nu^-1 tau)``."""
        t = group_table(self.n)
        return self.values[t.mult[t.inverse]]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.group_matrix())[0])

    def validate(self, tol: float | None = None) -> "JFunction":
        """Check normalisation, ``|J| <= 1`` and positivity; return ``self``."""
        tol = settings().psd_rel_tol if tol is None else tol
        if abs(self.values[0] - 1) > tol:
            raise NotPhysicalError(f"J(I) = {self.values[0]} is not 1")
        if np.max(np.abs(self.values)) > 1 + tol:
            raise NotPhysicalError("some |J(sigma)| exceeds 1")
        if self.min_eigenvalue() < -tol * max(1.0, float(np.max(np.abs(self.values)))):
            raise NotPhysicalError("group matrix of J is not positive semi-definite")
        return self


@dataclass(frozen=True, eq=False)
class ThetaFunction:
    """Factorising function with ``J(sigma) = sum_tau conj(theta(tau)) theta(tau sigma)``."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128)
        if vals.shape != (math.factorial(self.n),):
            raise ContractError(f"theta for n={self.n} needs {math.factorial(self.n)} values")
        norm = float(np.sum(np.abs(vals) ** 2))
        if abs(norm - 1) > settings().theta_norm_tol:
            raise ContractError(f"theta is not normalised (sum |theta|^2 = {norm:.12g})")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


# -- constructors -----------------------------------------------------------


def j_indistinguishable(n: int, species: Species = "boson") -> JFunction:
    """Completely indistinguishable particles: ``J = 1`` (bosons) or ``sgn`` (fermions)."""
    _check_species(species)
    if n < 1:
        raise ContractError("n must be >= 1")
    if species == "fermion":
        return JFunction(n, group_table(n).sign.astype(complex), species)
    return JFunction(n, np.ones(math.factorial(n)), species)


def j_distinguishable(occupation: Sequence[int] | None = None, *, labels=None) -> JFunction:
    """Block-structured J of particles distinguishable across input modes.

    ``J(sigma) = 1`` when ``sigma`` only permutes particles sharing an input
    mode, else 0. Give either the occupation numbers (particles grouped
    consecutively by mode) or per-particle mode ``labels``.
    """
    if (occupation is None) == (labels is None):
        raise ContractError("give exactly one of occupation or labels")
    if labels is not None:
        group = YoungSubgroup.from_labels(labels)
        n = len(labels)
    else:
        occupation = [int(x) for x in occupation]
        if any(x < 0 for x in occupation) or sum(occupation) < 1:
            raise ContractError("occupation must be non-negative with a positive total")
        group = YoungSubgroup.from_occupation(occupation)
        n = sum(occupation)
    values = np.zeros(math.factorial(n))
    values[group.member_ranks] = 1.0
    return JFunction(n, values)


def _check_gram(gram) -> np.ndarray:
    g = np.asarray(gram, dtype=np.complex128)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ContractError("Gram matrix must be square")
    tol = settings().psd_rel_tol
    if np.max(np.abs(g - g.conj().T)) > tol:
        raise ContractError("Gram matrix is not Hermitian")
    if np.max(np.abs(np.diagonal(g) - 1)) > tol:
        raise ContractError("Gram matrix must have unit diagonal")
    if np.linalg.eigvalsh(g)[0] < -tol * g.shape[0]:
        raise ContractError("Gram matrix is not positive semi-definite")
    return g


def j_classically_correlated(model) -> JFunction:
    """J of a convex mixture of product internal states.

    ``J(sigma) = sum_j nu_j prod_alpha G^(j)[alpha, sigma(alpha)]`` with
    ``G[a, b] = <phi_b|phi_a>``.
    """
    if isinstance(model, PureProduct):
        model = ConvexMixture((1.0,), (model,))
    if not isinstance(model, ConvexMixture):
        raise ContractError("expected a PureProduct or ConvexMixture model")
    n = model.components[0].n
    perms = group_table(n).perms
    rows = np.arange(n)
    values = np.zeros(len(perms), dtype=np.complex128)
    for w, comp in zip(model.weights, model.components):
        g = _check_gram(comp.gram)
        if g.shape[0] != n:
            raise ContractError("mixture components have different particle numbers")
        values += w * np.prod(g[rows, perms], axis=1)
    return JFunction(n, values)


def j_first_order(n: int, fidelity: float) -> JFunction:
    """First-order J of sources with mean indistinguishability fidelity ``F``.

    ``J(sigma) = 1 - (1 - F)(n - c_1(sigma))`` with ``c_1`` the number of fixed
    points. Emits :class:`FirstOrderValidityWarning` when ``(1 - F) n`` exceeds
    ``settings().first_order_guard``.
    """
    if not 0.0 <= fidelity <= 1.0:
        raise ContractError("fidelity must lie in [0, 1]")
    if (1 - fidelity) * n > settings().first_order_guard:
        warnings.warn(
            f"(1-F)*n = {(1 - fidelity) * n:.3g} is outside the first-order regime",
            FirstOrderValidityWarning,
            stacklevel=2,
        )
    fixed = group_table(n).fixed_points
    return JFunction(n, 1.0 - (1.0 - fidelity) * (n - fixed))


def j_independent_sources(n: int, fidelity: float) -> JFunction:
    """Exact J of independent sources ``rho_a = F|phi><phi| + (1-F)|chi_a><chi_a|``.

    The error states ``chi_a`` are orthonormal and orthogonal to ``phi``, so each
    cycle of length ``>= 2`` contributes ``F ** length`` and
    ``J(sigma) = F ** (n - c_1(sigma))``.
    """
    if not 0.0 <= fidelity <= 1.0:
        raise ContractError("fidelity must lie in [0, 1]")
    fixed = group_table(n).fixed_points
    return JFunction(n, float(fidelity) ** (n - fixed))


# -- internal-state models --------------------------------------------------


@dataclass(frozen=True)
class IdealIndistinguishable:
    n: int
    species: Species = "boson"

    def j_function(self) -> JFunction:
        return j_indistinguishable(self.n, self.species)


@dataclass(frozen=True)
class IdealDistinguishable:
    occupation: tuple[int, ...]

    def j_function(self) -> JFunction:
        return j_distinguishable(self.occupation)


@dataclass(frozen=True, eq=False)
class PureProduct:
    """Product of pure single-particle states, given by their Gram matrix."""

    gram: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gram", _check_gram(self.gram))

    @property
    def n(self) -> int:
        return self.gram.shape[0]

    @classmethod
    def from_vectors(cls, vectors) -> "PureProduct":
        """Rows of ``vectors`` are the (normalised) single-particle states."""
        v = np.asarray(vectors, dtype=np.complex128)
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        return cls(v @ v.conj().T)

    def j_function(self) -> JFunction:
        return j_classically_correlated(self)


@dataclass(frozen=True, eq=False)
class ConvexMixture:
    weights: tuple[float, ...]
    components: tuple[PureProduct, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.components) or len(w) == 0:
            raise ContractError("need one weight per component")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ContractError("mixture weights must be non-negative and sum to 1")

    def j_function(self) -> JFunction:
        return j_classically_correlated(self)


@dataclass(frozen=True)
class FirstOrderFidelity:
    n: int
    fidelity: float

    def j_function(self) -> JFunction:
        return j_first_order(self.n, self.fidelity)


@dataclass(frozen=True)
class IndependentSources:
    n: int
    fidelity: float

    def j_function(self) -> JFunction:
        return j_independent_sources(self.n, self.fidelity)


# -- measures and factorisation ---------------------------------------------


def indistinguishability_measure(j: JFunction) -> float:
    """``d(J) = (1/n!) sum_sigma epsilon(sigma) J(sigma)``."""
    d = np.mean(j.epsilon * j.values)
    if abs(d.imag) > settings().imag_tol:
        raise NotPhysicalError(f"d(J) has imaginary part {d.imag:.3e}")
    return float(d.real)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    top = max(float(w[-1]), 0.0)
    if w[0] < -settings().psd_rel_tol * max(top, 1.0):
        raise NotPhysicalError(f"group matrix has eigenvalue {w[0]:.3e} < 0")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def factorize_theta(j: JFunction) -> ThetaFunction:
    """Canonical factorising function of ``j``.

    Taken as the identity row of the principal square root ``B`` of the group
    matrix, which is itself a group matrix, so ``Jmat = B^dag B`` and
    ``theta(I) = B[I, I] >= 0``.
    """
    root = _psd_sqrt(j.group_matrix())
    theta = root[0]
    return ThetaFunction(j.n, theta / np.linalg.norm(theta))


def reconstruct_j(theta: ThetaFunction, species: Species = "boson") -> JFunction:
    """``J(sigma) = sum_tau conj(theta(tau)) theta(tau sigma)``."""
    t = group_table(theta.n)
    vals = np.conj(theta.values) @ theta.values[t.mult]
    return JFunction(theta.n, vals, species)


def reconstruct_internal_state(j: JFunction) -> np.ndarray:
    """Density matrix on the span of ``|sigma> = P_sigma |phi_1 ... phi_n>``.

    ``rho = (1/n!) sum_tau Jb(tau) sum_pi |pi><tau pi|`` with the bosonic
    ``Jb = epsilon * J``, so that ``Tr(rho P_sigma) = Jb(sigma)``.
    """
    t = group_table(j.n)
    jb = j.epsilon * j.values
    # rho[a, b] = Jb(p_b p_a^-1) / n!
    rho = jb[t.mult[:, t.inverse].T] / t.order
    _psd_sqrt(JFunction(j.n, jb).group_matrix())
    return rho


def permutation_operator(n: int, rank: int) -> np.ndarray:
    """Matrix of ``P_sigma`` on the basis ``|tau>``: ``P_sigma |tau> = |sigma tau>``."""
    t = group_table(n)
    op = np.zeros((t.order, t.order))
    op[t.mult[rank], np.arange(t.order)] = 1.0
    return op


# -- random physical J-functions --------------------------------------------


def random_theta(n: int, rng) -> ThetaFunction:
    gen = as_generator(rng)
    k = math.factorial(n)
    z = gen.standard_normal(k) + 1j * gen.standard_normal(k)
    return ThetaFunction(n, z / np.linalg.norm(z))


def random_gram(n: int, rng, dim: int | None = None) -> np.ndarray:
    """Gram matrix ``G[a, b] = <phi_b|phi_a>`` of ``n`` random unit vectors in C^dim."""
    gen = as_generator(rng)
    dim = n if dim is None else dim
    v = gen.standard_normal((n, dim)) + 1j * gen.standard_normal((n, dim))
    return PureProduct.from_vectors(v).gram


def random_physical_j(n: int, rng, kind: str = "theta") -> JFunction:
    """Random physical J: from a random ``theta`` or from a random product state."""
    if kind == "theta":
        return reconstruct_j(random_theta(n, rng))
    if kind == "product":
        return j_classically_correlated(PureProduct(random_gram(n, rng)))
    raise ContractError(f"unknown kind {kind!r}")


# -- JSON -------------------------------------------------------------------


def j_to_dict(j: JFunction) -> dict:
    return {
        "n": j.n,
        "species": j.species,
        "values": [[float(z.real), float(z.imag)] for z in j.values],
    }


def j_from_dict(obj: dict) -> JFunction:
    try:
        vals = np.asarray(obj["values"], dtype=float)
        n = int(obj["n"])
        species = obj.get("species", "boson")
    except (KeyError, TypeError, ValueError) as exc:
        raise ContractError(f"malformed J-function object: {exc}") from exc
    if vals.ndim != 2 or vals.shape[1] != 2:
        raise ContractError("J-function values must be [re, im] pairs")
    return JFunction(n, vals[:, 0] + 1j * vals[:, 1], species)
