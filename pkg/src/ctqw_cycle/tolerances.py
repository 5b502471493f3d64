"""Named numeric tolerances and a context-local override mechanism.

All checks in the package read their thresholds through :func:`current`, so a
profile loaded from JSON (``--tolerance-profile``) or installed with
:func:`use` applies uniformly without threading arguments everywhere.
"""

from __future__ import annotations

import contextlib
import contextvars
import dataclasses
import json
from pathlib import Path
from typing import Iterator, Mapping

from .errors import StructuralError


@dataclasses.dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    trace: float = 1e-10
    diagonal: float = 1e-10
    cauchy_schwarz: float = 1e-9
    probability_negative: float = 1e-12
    probability_sum: float = 1e-10
    initial_sum: float = 1e-12
    imag_residue_per_mode: float = 1e-10  # scaled by N**2 in the closed form
    kernel_imag: float = 1e-12
    kernel_bound: float = 1e-12
    spectral_match: float = 1e-10
    perturbative_factor: float = 5.0  # pass threshold = factor * gamma**2 * N
    closed_form_exact: float = 1e-6
    nonnegativity_artifact: float = 1e-6
    roundtrip: float = 1e-14

    @classmethod
    def from_mapping(cls, overrides: Mapping[str, float]) -> "Tolerances":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise StructuralError(f"unknown tolerance names: {', '.join(unknown)}")
        values = {}
        for name, value in overrides.items():
            value = float(value)
            if not value >= 0.0:
                raise StructuralError(f"tolerance {name!r} must be a non-negative number")
            values[name] = value
        return dataclasses.replace(cls(), **values)


DEFAULT = Tolerances()

_active: contextvars.ContextVar[Tolerances] = contextvars.ContextVar("tolerances", default=DEFAULT)


def current() -> Tolerances:
    return _active.get()


@contextlib.contextmanager
def use(profile: Tolerances) -> Iterator[Tolerances]:
    token = _active.set(profile)
    try:
        yield profile
    finally:
        _active.reset(token)


def load_profile(path: str | Path) -> Tolerances:
    """Read a JSON object mapping tolerance names to values."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise StructuralError("tolerance profile must be a JSON object")
    return Tolerances.from_mapping(data)
