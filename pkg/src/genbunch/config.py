"""Central tolerances and capacity limits.

Every numerical threshold used by the library lives in :class:`Settings`.
Library functions read the active settings at call time, so a caller (or the
CLI) can override them for a block of code::

    with use_settings(permanent_cap=26):
        permanent_ryser(a)
"""

from __future__ import annotations

import contextlib
import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Settings:
    # numkit
    unitarity_tol: float = 1e-10
    hermitian_tol: float = 1e-8
    passivity_tol: float = 1e-10
    permanent_cap: int = 24
    naive_permanent_cap: int = 9
    # symgroup
    enumeration_cap: int = 8
    weingarten_cap: int = 6
    cycle_sum_cap: int = 20
    # indist
    psd_rel_tol: float = 1e-8
    theta_norm_tol: float = 1e-10
    first_order_guard: float = 0.5
    # bunching
    imag_tol: float = 1e-8
    schur_cap: int = 6
    schur_cap_optin: int = 7
    pot_rel_tol: float = 1e-9
    distribution_particle_cap: int = 5
    distribution_mode_cap: int = 12
    # haarstats
    classical_exact_cap: int = 5
    dilute_factor: float = 4.0
    # protocol
    band_sigmas: float = 3.0
    suppression_zero_tol: float = 1e-10


_current = Settings()


def settings() -> Settings:
    """Return the active settings."""
    return _current


def set_settings(new: Settings) -> None:
    global _current
    _current = new


@contextlib.contextmanager
def use_settings(**overrides):
    """Temporarily replace selected fields of the active settings."""
    global _current
    previous = _current
    _current = dataclasses.replace(previous, **overrides)
    try:
        yield _current
    finally:
        _current = previous


def parse_overrides(pairs) -> dict:
    """Parse ``name=value`` strings into typed overrides for :class:`Settings`.

    Raises ``KeyError`` for unknown names and ``ValueError`` for bad values.
    """
    fields = {f.name: f for f in dataclasses.fields(Settings)}
    out = {}
    for item in pairs or ():
        name, sep, raw = item.partition("=")
        name = name.strip().replace("-", "_")
        if not sep:
            raise ValueError(f"expected name=value, got {item!r}")
        if name not in fields:
            raise KeyError(name)
        kind = type(getattr(_current, name))
        out[name] = kind(float(raw)) if kind is int else kind(raw)
    return out
