"""Domain value objects for the decoherent walk on an N-node cycle.

Everything here is immutable after construction. Arrays are copied and
marked read-only so instances can be shared freely between threads.
"""

from __future__ import annotations

import enum
import math
import numbers
from dataclasses import dataclass, field

import numpy as np

from . import tolerances
from .errors import StructuralError

__all__ = [
    "DensityMatrix",
    "DeviationSeries",
    "InitialDistribution",
    "ModeClass",
    "ProbabilityDistribution",
    "SpectralMode",
    "Violation",
    "WalkParams",
    "validate_density_matrix",
]


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if not np.all(np.isfinite(arr)):
        raise StructuralError("values must be finite (no NaN or Inf)")
    arr.setflags(write=False)
    return arr


def _check_index(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise StructuralError(f"{name} must be an integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class WalkParams:
    """Cycle size and decoherence rate.

    Time is dimensionless, with the nearest-neighbour hopping prefactor 1/4
    and hbar = 1, so ``gamma`` is measured in the same units.
    """

    n_nodes: int
    gamma: float = 0.0

    def __post_init__(self) -> None:
        n = _check_index(self.n_nodes, "n_nodes")
        if n < 3:
            raise StructuralError(f"n_nodes must be >= 3, got {n}")
        try:
            gamma = float(self.gamma)
        except (TypeError, ValueError) as exc:
            raise StructuralError(f"gamma must be a real number, got {self.gamma!r}") from exc
        if not math.isfinite(gamma):
            raise StructuralError("gamma must be finite")
        if gamma < 0.0:
            raise StructuralError(f"gamma must be non-negative, got {gamma}")
        object.__setattr__(self, "n_nodes", n)
        object.__setattr__(self, "gamma", gamma)

    @property
    def perturbative(self) -> bool:
        """True when gamma * N < 1, the regime where the closed form is trusted."""
        return self.gamma * self.n_nodes < 1.0

    def node(self, j) -> int:
        """Reduce any integer node index into ``[0, N)``."""
        return _check_index(j, "node index") % self.n_nodes


@dataclass(frozen=True)
class Violation:
    invariant: str
    magnitude: float
    detail: str = ""


class DensityMatrix:
    """Square complex matrix rho[alpha, beta] of the walker's reduced state.

    Construction only enforces shape and finiteness; physical invariants are
    checked by :meth:`validate` so that broken states can still be inspected.
    """

    __slots__ = ("_data",)

    def __init__(self, data) -> None:
        arr = np.asarray(data)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise StructuralError(f"density matrix must be square, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise StructuralError("density matrix must be non-empty")
        self._data = _frozen(arr, complex)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __getitem__(self, index):
        a, b = index
        return self._data[a % self.dim, b % self.dim]

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"

    def trace(self) -> complex:
        return complex(np.trace(self._data))

    def purity(self) -> float:
        return float(np.real(np.vdot(self._data.conj().T, self._data)))

    def populations(self) -> np.ndarray:
        return self._data.diagonal().real.copy()

    def validate(self) -> list[Violation]:
        return validate_density_matrix(self)

    def probabilities(self) -> "ProbabilityDistribution":
        return ProbabilityDistribution.from_density_matrix(self)


def validate_density_matrix(rho) -> list[Violation]:
    """Return every violated density-matrix invariant with its magnitude.

    An empty list means the state is Hermitian, has unit trace, a real
    diagonal inside [0, 1] and satisfies the 2x2 principal-minor test
    |rho_ab|^2 <= rho_aa rho_bb, all within the active tolerances.
    """
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    tol = tolerances.current()
    a = rho.data
    report: list[Violation] = []

    herm = float(np.max(np.abs(a - a.conj().T)))
    if herm > tol.hermitian:
        report.append(Violation("hermitian", herm, "max |rho_ab - conj(rho_ba)|"))

    tr = np.trace(a)
    trace_err = float(abs(tr - 1.0))
    if trace_err > tol.trace:
        report.append(Violation("trace", trace_err, f"trace = {tr.real:.12g}{tr.imag:+.3g}j"))

    diag = a.diagonal()
    imag = float(np.max(np.abs(diag.imag)))
    if imag > tol.diagonal:
        report.append(Violation("diagonal_real", imag, "max |Im rho_aa|"))
    below = float(max(0.0, -np.min(diag.real)))
    above = float(max(0.0, np.max(diag.real) - 1.0))
    if below > tol.diagonal:
        report.append(Violation("diagonal_range", below, "population below 0"))
    if above > tol.diagonal:
        report.append(Violation("diagonal_range", above, "population above 1"))

    pops = diag.real
    excess = np.abs(a) ** 2 - np.outer(pops, pops)
    worst = float(np.max(excess))
    if worst > tol.cauchy_schwarz:
        alpha, beta = np.unravel_index(int(np.argmax(excess)), excess.shape)
        report.append(
            Violation("cauchy_schwarz", worst, f"|rho_{alpha}{beta}|^2 exceeds rho_{alpha}{alpha} rho_{beta}{beta}")
        )
    return report


class ProbabilityDistribution:
    """Node occupation probabilities P_j, j = 0..N-1."""

    __slots__ = ("_probs",)

    def __init__(self, probs) -> None:
        arr = np.asarray(probs)
        if arr.ndim != 1 or arr.size < 1:
            raise StructuralError(f"probabilities must be a non-empty vector, got shape {arr.shape}")
        if np.iscomplexobj(arr):
            raise StructuralError("probabilities must be real")
        arr = _frozen(arr, float)
        tol = tolerances.current()
        low = float(np.min(arr))
        if low < -tol.probability_negative:
            raise StructuralError(f"probability {low:.3e} is negative beyond tolerance")
        total = float(np.sum(arr))
        if abs(total - 1.0) > tol.probability_sum:
            raise StructuralError(f"probabilities sum to {total!r}, not 1")
        self._probs = arr

    @classmethod
    def from_density_matrix(cls, rho) -> "ProbabilityDistribution":
        """Diagonal of ``rho``; round-off negatives are clipped and the result renormalised."""
        if not isinstance(rho, DensityMatrix):
            rho = DensityMatrix(rho)
        pops = np.clip(rho.populations(), 0.0, None)
        return cls(pops / pops.sum())

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def n_nodes(self) -> int:
        return self._probs.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._probs
        return self._probs.astype(dtype)

    def __getitem__(self, j):
        return float(self._probs[j % self.n_nodes])

    def __len__(self) -> int:
        return self._probs.size

    def __repr__(self) -> str:
        return f"ProbabilityDistribution({np.array2string(self._probs, precision=4)})"


class InitialDistribution:
    """Classical starting weights C_j over the nodes."""

    __slots__ = ("_weights",)

    def __init__(self, weights) -> None:
        arr = np.asarray(weights)
        if arr.ndim != 1 or arr.size < 3:
            raise StructuralError("initial weights must be a vector of length >= 3")
        if np.iscomplexobj(arr):
            raise StructuralError("initial weights must be real")
        arr = _frozen(arr, float)
        if np.any(arr < 0.0):
            raise StructuralError("initial weights must be non-negative")
        if abs(float(arr.sum()) - 1.0) > tolerances.current().initial_sum:
            raise StructuralError(f"initial weights sum to {float(arr.sum())!r}, not 1")
        self._weights = arr

    @classmethod
    def localized(cls, n_nodes: int, node: int = 0) -> "InitialDistribution":
        w = np.zeros(n_nodes)
        w[node % n_nodes] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls, n_nodes: int) -> "InitialDistribution":
        return cls(np.full(n_nodes, 1.0 / n_nodes))

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def __len__(self) -> int:
        return self._weights.size


class ModeClass(enum.Enum):
    ZERO_SET = "zero_set"
    DIAGONAL = "diagonal"
    SWAP_PAIR = "swap_pair"


@dataclass(frozen=True)
class SpectralMode:
    """One Fourier mode (m, n) of the coherent generator.

    ``decay_rate`` is 0.0 for zero-set modes, which never contribute to the
    populations of a localized start and are treated as excluded.
    """

    m: int
    n: int
    eigenvalue0: complex
    decay_rate: float
    degeneracy_class: ModeClass

    def __post_init__(self) -> None:
        if self.eigenvalue0.real != 0.0:
            raise StructuralError("unperturbed eigenvalue must be purely imaginary")
        if self.decay_rate > 0.0:
            raise StructuralError("decay rate must be non-positive")
        if not (math.isfinite(self.eigenvalue0.imag) and math.isfinite(self.decay_rate)):
            raise StructuralError("mode values must be finite")

    @property
    def excluded(self) -> bool:
        return self.degeneracy_class is ModeClass.ZERO_SET


@dataclass(frozen=True)
class DeviationSeries:
    """Sampled L1 distance from uniform together with its analytic envelope."""

    times: np.ndarray
    deviation: np.ndarray
    majorizer_total: np.ndarray
    source: str = field(default="closed")

    def __post_init__(self) -> None:
        t = _frozen(self.times, float)
        d = _frozen(self.deviation, float)
        b = _frozen(self.majorizer_total, float)
        if not (t.ndim == d.ndim == b.ndim == 1 and t.size == d.size == b.size):
            raise StructuralError("series columns must be 1-D and of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0.0):
            raise StructuralError("sample times must be strictly increasing")
        if np.any(d < 0.0) or np.any(b < 0.0):
            raise StructuralError("deviation and majorizer must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "deviation", d)
        object.__setattr__(self, "majorizer_total", b)

    def __len__(self) -> int:
        return self.times.size

    def rows(self):
        return zip(self.times.tolist(), self.deviation.tolist(), self.majorizer_total.tolist())
