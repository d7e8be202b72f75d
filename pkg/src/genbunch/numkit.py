"""Dense complex linear algebra, reproducible random streams and permanent kernels.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. The
helpers here validate shapes and contracts; everything else is numpy/LAPACK.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .config import settings
from .errors import (
    CapacityError,
    ContractError,
    NotPassiveError,
    NotUnitaryError,
)

__all__ = [
    "RngStream",
    "as_generator",
    "as_matrix",
    "check_unitary",
    "haar_unitary",
    "haar_isometry",
    "permanent_ryser",
    "permanent_naive",
    "principal_permanents",
    "ryser_flops",
    "determinant",
    "hermitian_eig",
    "polar_and_svd",
    "PolarDecomposition",
    "matrix_to_dict",
    "matrix_from_dict",
]


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(master_seed, stream_index)``.

    Streams are backed by numpy's counter-based Philox generator seeded through
    ``SeedSequence(master_seed, spawn_key=(stream_index, *path))``, so the
    sample sequence depends only on the key, never on the order in which
    streams are consumed. Use :meth:`child` to derive per-trial substreams.
    """

    master_seed: int
    stream_index: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ContractError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0 or any(p < 0 for p in self.path):
            raise ContractError("stream indices must be non-negative")

    def child(self, index: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_index, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.stream_index, *self.path)
        )
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng) -> np.random.Generator:
    """Accept an :class:`RngStream`, a ``Generator`` or an integer seed."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")


def as_matrix(a, square: bool = False) -> np.ndarray:
    """Convert to a finite 2-D complex128 array with at least one row and column."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError("matrix has non-finite entries")
    return arr


def check_unitary(u, tol: float | None = None) -> np.ndarray:
    """Return ``u`` as an array, raising :class:`NotUnitaryError` if ``U^dag U != I``."""
    u = as_matrix(u, square=True)
    tol = settings().unitarity_tol if tol is None else tol
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > tol:
        raise NotUnitaryError(f"max |U^dag U - I| = {err:.3e} exceeds {tol:.1e}")
    return u


def haar_unitary(m: int, rng) -> np.ndarray:
    """Sample an ``m x m`` unitary from the Haar measure.

    A complex Ginibre matrix is QR-factorised and the columns of ``Q`` are
    rephased by ``diag(R)/|diag(R)|``; without that correction the QR output
    is not Haar distributed.
    """
    if m < 1:
        raise ContractError("dimension must be >= 1")
    gen = as_generator(rng)
    z = (gen.standard_normal((m, m)) + 1j * gen.standard_normal((m, m))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_isometry(m: int, n: int, rng) -> np.ndarray:
    """First ``n`` columns of a Haar-random ``m x m`` unitary, without building the rest.

    Costs ``O(m n^2)`` instead of ``O(m^3)``; used when only a few rows or
    columns of a large network matter (the transpose of a Haar unitary is Haar).
    """
    if not 1 <= n <= m:
        raise ContractError("need 1 <= n <= m")
    gen = as_generator(rng)
    z = (gen.standard_normal((m, n)) + 1j * gen.standard_normal((m, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


# -- permanents -------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _ryser_gray(a):
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    row = np.zeros(n, dtype=np.complex128)
    total = 0.0 + 0.0j
    gray = 0
    size = 0
    for i in range(1, 1 << n):
        # the bit flipped at step i is the lowest set bit of i
        j = 0
        while not (i >> j) & 1:
            j += 1
        gray ^= 1 << j
        if (gray >> j) & 1:
            size += 1
            for r in range(n):
                row[r] += a[r, j]
        else:
            size -= 1
            for r in range(n):
                row[r] -= a[r, j]
        prod = row[0]
        for r in range(1, n):
            prod *= row[r]
        if size & 1:
            total -= prod
        else:
            total += prod
    if n & 1:
        return -total
    return total


@numba.njit(cache=True, nogil=True)
def _principal_ryser(a, combos):
    count, r = combos.shape
    out = np.empty(count, dtype=np.complex128)
    sub = np.empty((r, r), dtype=np.complex128)
    for c in range(count):
        for i in range(r):
            for j in range(r):
                sub[i, j] = a[combos[c, i], combos[c, j]]
        out[c] = _ryser_gray(sub)
    return out


def ryser_flops(n: int) -> int:
    """Operation count ``n 2^n`` charged for one Ryser permanent of size ``n``."""
    return n * 2**n


def permanent_ryser(a, cap: int | None = None) -> complex:
    """Permanent by Ryser's formula with Gray-code subset iteration.

    Parameters
    ----------
    a : array_like
        Square complex matrix.
    cap : int, optional
        Largest admissible dimension; defaults to ``settings().permanent_cap``.

    Raises
    ------
    CapacityError
        If the dimension exceeds the cap.
    """
    a = as_matrix(a, square=True)
    cap = settings().permanent_cap if cap is None else cap
    if a.shape[0] > cap:
        raise CapacityError(f"permanent of size {a.shape[0]} exceeds cap {cap}")
    return complex(_ryser_gray(np.ascontiguousarray(a)))


def principal_permanents(a, combos) -> np.ndarray:
    """Permanents of the principal submatrices ``a[c, c]`` for each row ``c`` of ``combos``."""
    a = np.ascontiguousarray(as_matrix(a, square=True))
    combos = np.ascontiguousarray(np.asarray(combos, dtype=np.int64))
    if combos.ndim != 2:
        raise ContractError("combos must be a 2-D integer array")
    if combos.shape[1] > settings().permanent_cap:
        raise CapacityError("principal submatrix exceeds the permanent cap")
    if combos.shape[0] == 0:
        return np.empty(0, dtype=np.complex128)
    return _principal_ryser(a, combos)


def permanent_naive(a) -> complex:
    """Permanent as the explicit sum over all ``N!`` permutations (reference oracle)."""
    a = as_matrix(a, square=True)
    n = a.shape[0]
    if n > settings().naive_permanent_cap:
        raise CapacityError(f"naive permanent limited to N <= {settings().naive_permanent_cap}")
    rows = np.arange(n)
    perms = np.array(list(itertools.permutations(range(n))))
    return complex(np.sum(np.prod(a[rows, perms], axis=1)))


def determinant(a) -> complex:
    """Determinant via LU factorisation with partial pivoting (LAPACK ``getrf``)."""
    return complex(np.linalg.det(as_matrix(a, square=True)))


def hermitian_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    a = as_matrix(a, square=True)
    asym = np.max(np.abs(a - a.conj().T))
    if asym > settings().hermitian_tol:
        raise ContractError(f"matrix is not Hermitian (max |A - A^dag| = {asym:.3e})")
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return w, v


class PolarDecomposition(NamedTuple):
    sqrt_a: np.ndarray
    unitary_factor: np.ndarray
    singular_values: np.ndarray
    left_vectors: np.ndarray


def polar_and_svd(u) -> PolarDecomposition:
    """Polar decomposition ``u = sqrt(u u^dag) @ W`` of a passive network matrix.

    ``left_vectors`` holds the eigenvectors of ``sqrt_a`` matching the
    (descending) ``singular_values``.

    Raises
    ------
    NotPassiveError
        If a singular value exceeds ``1 + settings().passivity_tol``.
    """
    u = as_matrix(u, square=True)
    w, s, xh = np.linalg.svd(u)
    if s[0] > 1.0 + settings().passivity_tol:
        raise NotPassiveError(f"largest singular value {s[0]:.12g} exceeds 1")
    sqrt_a = (w * s) @ w.conj().T
    return PolarDecomposition(sqrt_a, w @ xh, s, w)


def matrix_to_dict(a) -> dict:
    a = as_matrix(a)
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in a.ravel()],
    }


def matrix_from_dict(obj: dict) -> np.ndarray:
    """Parse ``{"rows": R, "cols": C, "entries": [[re, im], ...]}`` (row-major)."""
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        entries = np.asarray(obj["entries"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ContractError(f"malformed matrix object: {exc}") from exc
    if entries.shape != (rows * cols, 2):
        raise ContractError(
            f"matrix entries have shape {entries.shape}, expected {(rows * cols, 2)}"
        )
    return as_matrix((entries[:, 0] + 1j * entries[:, 1]).reshape(rows, cols))

