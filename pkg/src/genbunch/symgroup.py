"""Permutations of ``{0, ..., n-1}``, cycle statistics, Weingarten tables and cycle sums.

Permutations are written in one-line notation with 0-based images, and the
canonical index of a permutation is its lexicographic rank, so that
``enumerate_group(n)[r]`` has rank ``r`` (rank 0 is the identity).
Composition follows the functional convention ``(p * q)(i) = p(q(i))``.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .config import settings
from .errors import CapacityError, ContractError

__all__ = [
    "Permutation",
    "CycleType",
    "YoungSubgroup",
    "GroupTable",
    "group_table",
    "enumerate_group",
    "perm_ranks",
    "cycle_type",
    "partitions",
    "class_size",
    "weingarten_table",
    "weingarten_by_element",
    "cycle_sum_zn",
    "cycle_sum_brute",
]


@dataclass(frozen=True)
class CycleType:
    """Cycle counts ``counts[s-1] = c_s`` (number of cycles of length ``s``)."""

    counts: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum((s + 1) * c for s, c in enumerate(self.counts))

    @property
    def total_cycles(self) -> int:
        return sum(self.counts)

    @property
    def fixed_points(self) -> int:
        return self.counts[0] if self.counts else 0

    def partition(self) -> tuple[int, ...]:
        """Cycle lengths in non-increasing order."""
        return tuple(
            s + 1 for s in reversed(range(len(self.counts))) for _ in range(self.counts[s])
        )

    @classmethod
    def from_partition(cls, parts, n: int | None = None) -> "CycleType":
        n = sum(parts) if n is None else n
        counts = [0] * n
        for p in parts:
            counts[p - 1] += 1
        return cls(tuple(counts))


def _cycles_of(images) -> list[list[int]]:
    n = len(images)
    seen = [False] * n
    cycles = []
    for start in range(n):
        if seen[start]:
            continue
        cyc = []
        j = start
        while not seen[j]:
            seen[j] = True
            cyc.append(j)
            j = images[j]
        cycles.append(cyc)
    return cycles


@dataclass(frozen=True)
class Permutation:
    images: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(len(self.images))):
            raise ContractError(f"{self.images} is not a permutation of 0..n-1")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_one_line(cls, images, base: int = 1) -> "Permutation":
        """Build from one-line notation with the given index base (1 by default)."""
        return cls(tuple(int(x) - base for x in images))

    @classmethod
    def from_rank(cls, n: int, rank: int) -> "Permutation":
        if not 0 <= rank < math.factorial(n):
            raise ContractError(f"rank {rank} out of range for n={n}")
        pool = list(range(n))
        out = []
        for i in range(n - 1, -1, -1):
            q, rank = divmod(rank, math.factorial(i))
            out.append(pool.pop(q))
        return cls(tuple(out))

    @property
    def n(self) -> int:
        return len(self.images)

    @property
    def rank(self) -> int:
        r = 0
        n = self.n
        for i, x in enumerate(self.images):
            smaller = sum(1 for y in self.images[i + 1:] if y < x)
            r += smaller * math.factorial(n - 1 - i)
        return r

    def __call__(self, i: int) -> int:
        return self.images[i]

    def _check(self, other: "Permutation"):
        if other.n != self.n:
            raise ContractError(f"permutations of different degree ({self.n} vs {other.n})")

    def compose(self, other: "Permutation") -> "Permutation":
        """``self * other``, i.e. ``i -> self(other(i))``."""
        self._check(other)
        return Permutation(tuple(self.images[j] for j in other.images))

    __mul__ = compose

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, x in enumerate(self.images):
            inv[x] = i
        return Permutation(tuple(inv))

    def cycles(self) -> list[list[int]]:
        return _cycles_of(self.images)

    def sign(self) -> int:
        return -1 if (self.n - len(self.cycles())) % 2 else 1

    def cycle_type(self) -> CycleType:
        counts = [0] * self.n
        for c in self.cycles():
            counts[len(c) - 1] += 1
        return CycleType(tuple(counts))


def cycle_type(p: Permutation) -> CycleType:
    return p.cycle_type()


def enumerate_group(n: int) -> list[Permutation]:
    """All ``n!`` permutations in lexicographic-rank order."""
    if n < 1:
        raise ContractError("n must be >= 1")
    if n > settings().enumeration_cap:
        raise CapacityError(f"full enumeration of S_{n} exceeds cap {settings().enumeration_cap}")
    return [Permutation(p) for p in itertools.permutations(range(n))]


def perm_ranks(perms) -> np.ndarray:
    """Lexicographic ranks of the rows of an integer array of permutations."""
    perms = np.asarray(perms)
    n = perms.shape[-1]
    weights = np.array([math.factorial(n - 1 - i) for i in range(n)], dtype=np.int64)
    # Lehmer code: count later entries smaller than the current one
    smaller = (perms[..., None, :] < perms[..., :, None]) & np.triu(
        np.ones((n, n), dtype=bool), 1
    )
    return smaller.sum(axis=-1) @ weights


@dataclass(frozen=True, eq=False)
class GroupTable:
    """Precomputed arrays for S_n, all indexed by lexicographic rank."""

    n: int
    perms: np.ndarray  # (n!, n) images
    inverse: np.ndarray  # rank of p^-1
    sign: np.ndarray
    fixed_points: np.ndarray
    total_cycles: np.ndarray
    cycle_counts: np.ndarray  # (n!, n), column s-1 holds c_s

    @property
    def order(self) -> int:
        return self.perms.shape[0]

    def compose_ranks(self, a, b) -> np.ndarray:
        """Ranks of ``p_a * p_b`` for broadcastable rank arrays ``a``, ``b``."""
        a, b = np.broadcast_arrays(np.asarray(a), np.asarray(b))
        prod = np.take_along_axis(self.perms[a], self.perms[b], axis=-1)
        return perm_ranks(prod)

    @functools.cached_property
    def mult(self) -> np.ndarray:
        """Full multiplication table ``mult[a, b] = rank(p_a * p_b)``."""
        k = self.order
        out = np.empty((k, k), dtype=np.int32)
        block = max(1, 200_000 // (k * self.n))
        cols = np.arange(k)
        for start in range(0, k, block):
            rows = np.arange(start, min(k, start + block))
            out[rows] = self.compose_ranks(rows[:, None], cols[None, :])
        return out

    def partition_index(self) -> dict[tuple[int, ...], np.ndarray]:
        """Map each cycle-type partition to the ranks having that type."""
        groups: dict[tuple[int, ...], list[int]] = {}
        for r, counts in enumerate(self.cycle_counts):
            groups.setdefault(CycleType(tuple(int(c) for c in counts)).partition(), []).append(r)
        return {k: np.array(v) for k, v in groups.items()}


@functools.lru_cache(maxsize=None)
def group_table(n: int) -> GroupTable:
    if n < 1:
        raise ContractError("n must be >= 1")
    if n > settings().enumeration_cap:
        raise CapacityError(f"S_{n} exceeds enumeration cap {settings().enumeration_cap}")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    inv = np.argsort(perms, axis=1)
    counts = np.zeros((len(perms), n), dtype=np.int64)
    for r, p in enumerate(perms):
        for c in _cycles_of(p):
            counts[r, len(c) - 1] += 1
    total = counts.sum(axis=1)
    arrays = dict(
        n=n,
        perms=perms,
        inverse=perm_ranks(inv),
        sign=np.where((n - total) % 2 == 0, 1, -1),
        fixed_points=counts[:, 0].copy(),
        total_cycles=total,
        cycle_counts=counts,
    )
    for v in arrays.values():
        if isinstance(v, np.ndarray):
            v.setflags(write=False)
    return GroupTable(**arrays)


@dataclass(frozen=True, eq=False)
class YoungSubgroup:
    """Permutations of particles that only exchange particles sharing an input mode."""

    occupation: tuple[int, ...]
    member_ranks: np.ndarray

    @classmethod
    def from_labels(cls, labels) -> "YoungSubgroup":
        """Young subgroup for particles whose input modes are ``labels``."""
        labels = np.asarray(labels)
        table = group_table(len(labels))
        mask = np.all(labels[table.perms] == labels, axis=1)
        _, occ = np.unique(labels, return_counts=True)
        return cls(tuple(int(x) for x in occ), np.flatnonzero(mask))

    @classmethod
    def from_occupation(cls, occupation) -> "YoungSubgroup":
        labels = np.repeat(np.arange(len(occupation)), occupation)
        sub = cls.from_labels(labels)
        return cls(tuple(int(x) for x in occupation), sub.member_ranks)

    @property
    def order(self) -> int:
        return len(self.member_ranks)


# -- partitions, Weingarten functions, cycle sums ---------------------------


def partitions(n: int):
    """Integer partitions of ``n`` in descending lexicographic order."""
    if n == 0:
        yield ()
        return

    def rec(remaining, largest):
        if remaining == 0:
            yield ()
            return
        for first in range(min(remaining, largest), 0, -1):
            for rest in rec(remaining - first, first):
                yield (first,) + rest

    yield from rec(n, n)


def class_size(parts) -> int:
    """Number of permutations with cycle type ``parts``: ``n! / prod(s^c_s c_s!)``."""
    n = sum(parts)
    denom = 1
    for s in set(parts):
        c = parts.count(s)
        denom *= s**c * math.factorial(c)
    return math.factorial(n) // denom


@functools.lru_cache(maxsize=64)
def _weingarten_vector(m: int, n: int) -> np.ndarray:
    table = group_table(n)
    # G[a, b] = m ** #(p_a^-1 p_b); its inverse is again a function of p_a^-1 p_b
    rel = table.mult[table.inverse[:, None], np.arange(table.order)[None, :]]
    gram = np.power(float(m), table.total_cycles[rel])
    rhs = np.zeros(table.order)
    rhs[0] = 1.0
    w = np.linalg.solve(gram, rhs)
    w.setflags(write=False)
    return w


def weingarten_by_element(m: int, n: int) -> np.ndarray:
    """Weingarten function ``W(m, sigma)`` for every ``sigma`` in S_n, by rank."""
    if n > settings().weingarten_cap:
        raise CapacityError(f"Weingarten table limited to n <= {settings().weingarten_cap}")
    if m < n:
        raise ContractError(f"Gram matrix is rank deficient for m={m} < n={n}")
    return _weingarten_vector(int(m), int(n))


def weingarten_table(m: int, n: int) -> dict[tuple[int, ...], float]:
    """Weingarten function of U(m) on S_n, keyed by cycle-type partition.

    Obtained by inverting the ``n! x n!`` Gram matrix ``m ** #(sigma^-1 tau)``.
    """
    w = weingarten_by_element(m, n)
    out = {}
    for part, ranks in group_table(n).partition_index().items():
        out[part] = float(np.mean(w[ranks]))
    return dict(sorted(out.items(), reverse=True))


def cycle_sum_zn(n: int, t) -> complex:
    """Cycle sum ``Z_n = (1/n!) sum_sigma prod_s t_s ** c_s(sigma)``.

    Summed over partitions of ``n`` with conjugacy-class sizes, so the cost is
    the number of partitions rather than ``n!``. ``t[s-1]`` holds ``t_s``.
    """
    if n > settings().cycle_sum_cap:
        raise CapacityError(f"cycle sum limited to n <= {settings().cycle_sum_cap}")
    t = [complex(x) for x in t]
    if len(t) < n:
        raise ContractError(f"need {n} cycle weights, got {len(t)}")
    total = 0j
    for parts in partitions(n):
        term = 1 + 0j
        for s in set(parts):
            c = parts.count(s)
            term *= t[s - 1] ** c / (s**c * math.factorial(c))
        total += term
    return total


def cycle_sum_brute(n: int, t) -> complex:
    """Reference value of :func:`cycle_sum_zn` by enumerating S_n."""
    table = group_table(n)
    t = np.asarray(t[:n], dtype=complex)
    terms = np.prod(t[None, :] ** table.cycle_counts, axis=1)
    return complex(terms.sum() / table.order)
