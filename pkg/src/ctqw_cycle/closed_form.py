"""Analytic populations of the weakly dephased walk started on node 0.

Each non-zero-set mode (m, n) contributes

    exp(t * (i * omega_mn + rate_mn)) * exp(2 pi i q j / N) / N^2,

with omega_mn = sin(pi (m+n)/N) cos(pi (m-n)/N), q = (m + n) mod N, and
rate_mn = -gamma (N-1)/N on the diagonal m = n and -gamma (N-2)/N otherwise.
For every q != 0 the pairs (m, q - m) with m = 0..N-1 are exactly the modes
of that spatial frequency, so the table is stored as an (N-1) x N array.
"""

from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np

from . import tolerances
from .errors import ConsistencyError, DomainError
from .model import InitialDistribution, ProbabilityDistribution, WalkParams

log = logging.getLogger(__name__)

_CHUNK_ELEMENTS = 2_000_000


def _check_time(t) -> float:
    t = float(t)
    if not math.isfinite(t):
        raise DomainError("time must be finite")
    if t < 0.0:
        raise DomainError(f"time must be non-negative, got {t}")
    return t


class ClosedFormEvaluator:
    """Precomputed mode table for one (N, gamma).

    Instances are immutable; all evaluation methods are pure.
    """

    __slots__ = ("params", "m", "n", "q", "omega", "rate", "_fourier")

    def __init__(self, params: WalkParams) -> None:
        N = params.n_nodes
        self.params = params
        q = np.arange(1, N)[:, None] * np.ones(N, dtype=int)
        m = np.broadcast_to(np.arange(N), (N - 1, N)).copy()
        n = (q - m) % N
        self.q, self.m, self.n = q, m, n
        self.omega = np.sin(np.pi * (m + n) / N) * np.cos(np.pi * (m - n) / N)
        self.rate = np.where(m == n, -params.gamma * (N - 1) / N, -params.gamma * (N - 2) / N)
        j = np.arange(N)
        self._fourier = np.exp(2j * np.pi * ((np.arange(1, N)[:, None] * j) % N) / N)
        for arr in (self.q, self.m, self.n, self.omega, self.rate, self._fourier):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.params.n_nodes

    @property
    def n_modes(self) -> int:
        return self.m.size

    def modes(self):
        """Iterate (m, n, omega, rate, q) over the N^2 - N retained modes."""
        yield from zip(
            self.m.ravel().tolist(),
            self.n.ravel().tolist(),
            self.omega.ravel().tolist(),
            self.rate.ravel().tolist(),
            self.q.ravel().tolist(),
        )

    def _mode_sums(self, times: np.ndarray) -> np.ndarray:
        """Per-frequency sums A_q(t), shape (T, N-1)."""
        phase = times[:, None, None] * (1j * self.omega + self.rate)
        return np.exp(phase).sum(axis=2)

    def grid(self, times) -> np.ndarray:
        """Populations for every node at every time, shape (T, N)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if times.ndim != 1:
            raise DomainError("times must be a 1-D sequence")
        if not np.all(np.isfinite(times)):
            raise DomainError("times must be finite")
        if np.any(times < 0.0):
            raise DomainError("times must be non-negative")
        N = self.n_nodes
        limit = tolerances.current().imag_residue_per_mode * N * N
        out = np.empty((times.size, N))
        chunk = max(1, _CHUNK_ELEMENTS // (N * N))
        for start in range(0, times.size, chunk):
            block = times[start : start + chunk]
            total = self._mode_sums(block) @ self._fourier
            residue = float(np.max(np.abs(total.imag)))
            if residue > limit:
                raise ConsistencyError(f"imaginary residue {residue:.3e} exceeds {limit:.3e}")
            out[start : start + chunk] = 1.0 / N + total.real / (N * N)
        return out

    def probability_at(self, j: int, t: float) -> float:
        j = self.params.node(j)
        return float(self.grid([_check_time(t)])[0, j])

    def distribution_at(self, t: float) -> ProbabilityDistribution:
        probs = self.grid([_check_time(t)])[0]
        return _as_distribution(probs)

    def deviation_factored(self, j: int, t: float) -> float:
        """|P_j(t) - 1/N| from its factorisation through the real kernel S.

        The parity term (2 - N mod 2) counts the diagonal modes m = n that
        fall in the zero set: m = 0 always, m = N/2 for even N.
        """
        t = _check_time(t)
        N, gamma = self.n_nodes, self.params.gamma
        j = self.params.node(j)
        half = s_kernel(j, t / 2.0, N)
        bracket = half * half - 1.0 / N
        bracket += math.expm1(-gamma * t / N) / N * (s_kernel(2 * j, t, N) - (2 - N % 2) / N)
        return math.exp(-gamma * (N - 2) / N * t) * abs(bracket)

    def superpose(self, init: InitialDistribution, t: float) -> ProbabilityDistribution:
        """Populations for a classical start C_k, by cyclic shifts of the node-0 solution."""
        N = self.n_nodes
        if len(init) != N:
            raise DomainError(f"initial distribution has {len(init)} nodes, expected {N}")
        base = self.grid([_check_time(t)])[0]
        # P^C_j = sum_k C_k P_{j-k}: circular convolution
        shifts = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
        return _as_distribution(base[shifts] @ init.weights)


def _as_distribution(probs: np.ndarray) -> ProbabilityDistribution:
    tol = tolerances.current()
    low = float(probs.min())
    if low >= -tol.probability_negative:
        return ProbabilityDistribution(probs)
    if low < -tol.nonnegativity_artifact:
        raise ConsistencyError(f"closed-form probability {low:.3e} is negative beyond the perturbative allowance")
    log.warning("perturbation artifact: minimum probability %.3e", low)
    relaxed = dataclasses.replace(tol, probability_negative=tol.nonnegativity_artifact)
    with tolerances.use(relaxed):
        return ProbabilityDistribution(probs)


def probability_at(evaluator: ClosedFormEvaluator, j: int, t: float) -> float:
    return evaluator.probability_at(j, t)


def distribution_at(evaluator: ClosedFormEvaluator, t: float) -> ProbabilityDistribution:
    return evaluator.distribution_at(t)


def deviation_factored(evaluator: ClosedFormEvaluator, j: int, t: float) -> float:
    return evaluator.deviation_factored(j, t)


def superpose(evaluator: ClosedFormEvaluator, init: InitialDistribution, t: float) -> ProbabilityDistribution:
    return evaluator.superpose(init, t)


def _antisymmetric_sines(n_nodes: int) -> np.ndarray:
    """sin(2 pi k / N) with sin(N - k) = -sin(k) holding bit-for-bit."""
    k = np.arange(n_nodes)
    s = np.sin(2.0 * np.pi * k / n_nodes)
    upper = k > n_nodes / 2
    s[upper] = -s[n_nodes - k[upper]]
    s[0] = 0.0
    if n_nodes % 2 == 0:
        s[n_nodes // 2] = 0.0
    return s


def s_kernel(j: int, t: float, n_nodes: int) -> float:
    """(1/N) sum_n exp(i t sin(2 pi n/N) + 2 pi i n j/N), which is real.

    Terms n and N - n are complex conjugates, so only the real part is
    returned after checking the imaginary residue.
    """
    if n_nodes < 3:
        raise DomainError("kernel needs at least 3 nodes")
    t = float(t)
    if not math.isfinite(t):
        raise DomainError("time must be finite")
    k = np.arange(n_nodes)
    sines = _antisymmetric_sines(n_nodes)
    phase = t * sines + 2.0 * np.pi * ((k * int(j)) % n_nodes) / n_nodes
    value = np.exp(1j * phase).sum() / n_nodes
    tol = tolerances.current()
    if abs(value.imag) > tol.kernel_imag:
        raise ConsistencyError(f"kernel imaginary residue {abs(value.imag):.3e}")
    if abs(value.real) > 1.0 + tol.kernel_bound:
        raise ConsistencyError(f"kernel magnitude {abs(value.real):.15g} exceeds 1")
    return float(value.real)


def gamma_from_device(delta_omega: float, f_left: float, f_right: float, dos_source: float, dos_drain: float) -> float:
    """Dephasing rate induced by identical point-contact detectors.

    ``delta_omega`` is the change in tunnelling amplitude when the dot is
    occupied, ``f_left``/``f_right`` the source and drain chemical
    potentials, ``dos_*`` the reservoir densities of states.
    """
    values = (delta_omega, f_left, f_right, dos_source, dos_drain)
    if not all(math.isfinite(float(v)) for v in values):
        raise DomainError("device parameters must be finite")
    if dos_source < 0 or dos_drain < 0:
        raise DomainError("densities of states must be non-negative")
    return float(delta_omega) ** 2 * (float(f_right) - float(f_left)) ** 2 * float(dos_source) * float(dos_drain)
