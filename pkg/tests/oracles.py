"""Reference implementations that share no code path with the library."""

import itertools
import math

import numpy as np


def permanent_by_rows(a):
    """Laplace-style expansion along the first row."""
    a = np.asarray(a)
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return a[0, 0]
    return sum(a[0, j] * permanent_by_rows(np.delete(a[1:], j, axis=1)) for j in range(n))


def det_cofactor(a):
    a = np.asarray(a)
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    return sum((-1) ** j * a[0, j] * det_cofactor(np.delete(a[1:], j, axis=1)) for j in range(n))


def fock_distribution(u, modes, vecs):
    """Output distribution over external modes from a second-quantised simulation.

    Particle ``a`` enters mode ``modes[a]`` in internal state ``vecs[a]``; the
    internal space is kept as extra mode labels and traced out at the end.
    """
    u = np.asarray(u)
    vecs = np.asarray(vecs, dtype=complex)
    m, n, d = u.shape[0], len(modes), vecs.shape[1]
    rows = np.einsum("ai,al->ali", vecs, u[list(modes)]).reshape(n, m * d)
    inner = np.array([[(modes[a] == modes[b]) * np.vdot(vecs[a], vecs[b]) for b in range(n)]
                      for a in range(n)])
    norm = permanent_by_rows(inner).real
    out = {}
    for cols in itertools.combinations_with_replacement(range(m * d), n):
        counts = np.bincount(cols, minlength=m * d)
        amp = permanent_by_rows(rows[:, list(cols)])
        p = abs(amp) ** 2 / math.prod(math.factorial(int(c)) for c in counts) / norm
        occ = tuple(int(x) for x in counts.reshape(m, d).sum(axis=1))
        out[occ] = out.get(occ, 0.0) + p
    return out


def weingarten_closed_form(m, partition):
    """Known closed forms of the unitary Weingarten function for n <= 3."""
    d = m
    table = {
        (1,): 1 / d,
        (1, 1): 1 / (d * d - 1),
        (2,): -1 / (d * (d * d - 1)),
        (1, 1, 1): (d * d - 2) / (d * (d * d - 1) * (d * d - 4)),
        (2, 1): -1 / ((d * d - 1) * (d * d - 4)),
        (3,): 2 / (d * (d * d - 1) * (d * d - 4)),
    }
    return table[tuple(partition)]


def orbit_cycle_counts(images):
    """Cycle-length counts by following orbits with a set."""
    n = len(images)
    left = set(range(n))
    counts = [0] * n
    while left:
        start = left.pop()
        length, j = 1, images[start]
        while j != start:
            left.discard(j)
            j = images[j]
            length += 1
        counts[length - 1] += 1
    return counts
