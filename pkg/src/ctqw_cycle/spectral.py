"""Fourier-mode spectrum of the real-variable generator and its dense oracle.

In the phase-rotated variables S the coherent part of the dynamics is
diagonalised by plane waves exp(2 pi i (m mu + n nu) / N) / N. Dephasing
mixes only modes with the same total momentum q = m + n (mod N), which
splits every swap pair (m, n), (n, m) into a symmetric and an
antisymmetric combination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tolerances
from .errors import CapacityError, ExcludedModeError, StructuralError
from .model import ModeClass, SpectralMode, WalkParams

DEFAULT_MAX_NODES = 32


def _check_mode(m, n, params: WalkParams) -> tuple[int, int]:
    N = params.n_nodes
    for name, value in (("m", m), ("n", n)):
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise StructuralError(f"mode index {name} must be an integer")
        if not 0 <= value < N:
            raise StructuralError(f"mode index {name}={value} outside [0, {N - 1}]")
    return int(m), int(n)


def mode_frequency(m: int, n: int, n_nodes: int) -> float:
    return float(np.sin(np.pi * (m + n) / n_nodes) * np.cos(np.pi * (m - n) / n_nodes))


def unperturbed_eigenvalue(m: int, n: int, params: WalkParams) -> complex:
    """i sin(pi (m+n)/N) cos(pi (m-n)/N); exactly zero on the zero set."""
    m, n = _check_mode(m, n, params)
    if (m + n) % params.n_nodes == 0:
        return 0j
    return complex(0.0, mode_frequency(m, n, params.n_nodes))


def eigenvector_entry(m: int, n: int, mu: int, nu: int, params: WalkParams) -> complex:
    m, n = _check_mode(m, n, params)
    mu, nu = _check_mode(mu, nu, params)
    N = params.n_nodes
    phase = 2.0 * np.pi * ((m * mu + n * nu) % N) / N
    return complex(np.cos(phase), np.sin(phase)) / N


def eigenvector(m: int, n: int, params: WalkParams) -> np.ndarray:
    """Plane wave V[mu, nu] as an N x N array."""
    m, n = _check_mode(m, n, params)
    N = params.n_nodes
    idx = np.arange(N)
    phase = 2.0 * np.pi * ((m * idx[:, None] + n * idx[None, :]) % N) / N
    return np.exp(1j * phase) / N


def classify_mode(m: int, n: int, params: WalkParams) -> ModeClass:
    m, n = _check_mode(m, n, params)
    if (m + n) % params.n_nodes == 0:
        return ModeClass.ZERO_SET
    if m == n:
        return ModeClass.DIAGONAL
    return ModeClass.SWAP_PAIR


def decay_rate(m: int, n: int, params: WalkParams) -> float:
    """First-order real shift of the mode's eigenvalue as it enters the populations.

    Swap pairs also have a -gamma branch (the antisymmetric combination);
    see :func:`swap_pair_branches`.
    """
    cls = classify_mode(m, n, params)
    N, gamma = params.n_nodes, params.gamma
    if cls is ModeClass.ZERO_SET:
        raise ExcludedModeError(f"mode ({m}, {n}) is in the zero set and is excluded")
    if cls is ModeClass.DIAGONAL:
        return -gamma * (N - 1) / N + 0.0
    return -gamma * (N - 2) / N + 0.0


def swap_pair_branches(params: WalkParams) -> tuple[float, float]:
    """Both split values -gamma (N - 1 -+ 1) / N of a swap pair."""
    N, gamma = params.n_nodes, params.gamma
    return -gamma * (N - 2) / N + 0.0, -gamma + 0.0


def spectral_mode(m: int, n: int, params: WalkParams) -> SpectralMode:
    cls = classify_mode(m, n, params)
    rate = 0.0 if cls is ModeClass.ZERO_SET else decay_rate(m, n, params)
    return SpectralMode(int(m), int(n), unperturbed_eigenvalue(m, n, params), rate, cls)


def mode_table(params: WalkParams) -> list[SpectralMode]:
    N = params.n_nodes
    return [spectral_mode(m, n, params) for m in range(N) for n in range(N)]


def build_generator(params: WalkParams, max_nodes: int = DEFAULT_MAX_NODES) -> np.ndarray:
    """Dense real N^2 x N^2 matrix of dS/dt = (L + U) S with row index alpha*N + beta.

    L couples (alpha, beta) to (alpha, beta+1) and (alpha+1, beta) with +1/4
    and to (alpha, beta-1), (alpha-1, beta) with -1/4, indices mod N. U puts
    -gamma on every off-diagonal (alpha != beta) position.
    """
    N = params.n_nodes
    if N > max_nodes:
        raise CapacityError(f"dense generator for N={N} exceeds cap of {max_nodes} nodes")
    idx = np.arange(N)
    alpha, beta = np.meshgrid(idx, idx, indexing="ij")
    rows = (alpha * N + beta).ravel()
    gen = np.zeros((N * N, N * N))
    for da, db, sign in ((0, 1, 1.0), (1, 0, 1.0), (0, -1, -1.0), (-1, 0, -1.0)):
        cols = (((alpha + da) % N) * N + (beta + db) % N).ravel()
        np.add.at(gen, (rows, cols), 0.25 * sign)
    gen[rows, rows] -= params.gamma * (alpha != beta).ravel()
    return gen


def apply_generator(gen: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Action of a dense generator on an N x N matrix."""
    N = S.shape[0]
    return (gen @ np.asarray(S).reshape(N * N)).reshape(N, N)


def _greedy_match(predicted: np.ndarray, observed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pair every prediction with its nearest unused observation, in order."""
    used = np.zeros(observed.size, dtype=bool)
    partner = np.empty(predicted.size, dtype=int)
    residual = np.empty(predicted.size)
    for i, p in enumerate(predicted):
        dist = np.abs(observed - p)
        dist[used] = np.inf
        k = int(np.argmin(dist))
        used[k] = True
        partner[i] = k
        residual[i] = dist[k]
    return partner, residual


@dataclass
class ModeCheck:
    m: int
    n: int
    degeneracy_class: ModeClass
    predicted: complex
    observed: complex
    residual: float


@dataclass
class SpectrumReport:
    n_nodes: int
    gamma: float
    threshold: float
    max_residual: float
    passed: bool
    perturbative: bool
    swap_branches: tuple[float, float]
    checks: list[ModeCheck] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "gamma": self.gamma,
            "threshold": self.threshold,
            "max_residual": self.max_residual,
            "passed": self.passed,
            "perturbative": self.perturbative,
            "swap_branches": list(self.swap_branches),
            "modes_checked": len(self.checks),
        }


def _predictions(params: WalkParams, include_zero_set: bool) -> tuple[list[tuple[int, int, ModeClass]], np.ndarray]:
    N, gamma = params.n_nodes, params.gamma
    labels, values = [], []
    sym, anti = swap_pair_branches(params)
    for m in range(N):
        for n in range(N):
            cls = classify_mode(m, n, params)
            lam0 = unperturbed_eigenvalue(m, n, params)
            if cls is ModeClass.ZERO_SET:
                if include_zero_set:
                    labels.append((m, n, cls))
                    values.append(lam0)
            elif cls is ModeClass.DIAGONAL:
                labels.append((m, n, cls))
                values.append(lam0 - gamma * (N - 1) / N)
            elif m < n:
                # the pair (m, n), (n, m) splits into one value per branch
                labels.append((m, n, cls))
                values.append(lam0 + sym)
                labels.append((n, m, cls))
                values.append(lam0 + anti)
    return labels, np.array(values, dtype=complex)


def verify_spectrum(
    params: WalkParams,
    tol: float | None = None,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> SpectrumReport:
    """Compare a dense eigensolve of the generator against the mode formulas.

    Without decoherence the full N^2 multiset is matched within ``tol``. With
    gamma > 0 only modes outside the zero set are matched, against their
    first-order shifted values, with pass threshold ``factor * gamma^2 * N``.
    Mismatches are reported, never raised.
    """
    profile = tolerances.current()
    observed = np.linalg.eigvals(build_generator(params, max_nodes=max_nodes))
    coherent = params.gamma == 0.0
    if coherent:
        threshold = profile.spectral_match if tol is None else float(tol)
    else:
        threshold = profile.perturbative_factor * params.gamma**2 * params.n_nodes
    labels, predicted = _predictions(params, include_zero_set=coherent)
    partner, residual = _greedy_match(predicted, observed)
    checks = [
        ModeCheck(m, n, cls, complex(p), complex(observed[k]), float(r))
        for (m, n, cls), p, k, r in zip(labels, predicted, partner, residual)
    ]
    worst = float(residual.max()) if residual.size else 0.0
    return SpectrumReport(
        n_nodes=params.n_nodes,
        gamma=params.gamma,
        threshold=threshold,
        max_residual=worst,
        passed=worst <= threshold,
        perturbative=params.perturbative,
        swap_branches=swap_pair_branches(params),
        checks=checks,
    )
