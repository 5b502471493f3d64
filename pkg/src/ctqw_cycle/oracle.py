"""Direct integration of the dephasing master equation on the full density matrix.

    d rho_ab / dt = (i/4)(rho_a,b+1 - rho_a+1,b - rho_a-1,b + rho_a,b-1)
                    - gamma (1 - delta_ab) rho_ab,      indices mod N.

The integration happens in the rho picture, so it is valid for every N,
independently of the phase-rotated variables used by the analytic modules.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import tolerances
from .closed_form import ClosedFormEvaluator
from .errors import CapacityError, DomainError, IntegrationDivergedError
from .model import DensityMatrix, WalkParams

DEFAULT_STEP = 0.01
PROPAGATOR_MAX_NODES = 32
MAX_NODES = 512


def initial_state(n_nodes: int) -> DensityMatrix:
    """Walker localized on node 0."""
    return node_state(n_nodes, 0)


def node_state(n_nodes: int, node: int) -> DensityMatrix:
    WalkParams(n_nodes)
    rho = np.zeros((n_nodes, n_nodes), dtype=complex)
    k = node % n_nodes
    rho[k, k] = 1.0
    return DensityMatrix(rho)


def _rhs(rho: np.ndarray, gamma: float) -> np.ndarray:
    # works on stacks (..., N, N)
    drho = 0.25j * (
        np.roll(rho, -1, axis=-1) - np.roll(rho, -1, axis=-2) - np.roll(rho, 1, axis=-2) + np.roll(rho, 1, axis=-1)
    )
    if gamma:
        N = rho.shape[-1]
        off = ~np.eye(N, dtype=bool)
        drho -= gamma * np.where(off, rho, 0.0)
    return drho


def rhs(rho, params: WalkParams) -> np.ndarray:
    """Time derivative of ``rho`` under the master equation."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (params.n_nodes, params.n_nodes):
        raise DomainError(f"state shape {rho.shape} does not match N={params.n_nodes}")
    return _rhs(rho, params.gamma)


def rk4_step(rho: np.ndarray, h: float, gamma: float) -> np.ndarray:
    k1 = _rhs(rho, gamma)
    k2 = _rhs(rho + 0.5 * h * k1, gamma)
    k3 = _rhs(rho + 0.5 * h * k2, gamma)
    k4 = _rhs(rho + h * k3, gamma)
    return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _split(interval: float, step: float) -> tuple[int, float]:
    """Whole steps plus a shortened final step that lands exactly on the interval end."""
    n = int(math.floor(interval / step + 1e-9))
    rest = interval - n * step
    if rest <= 1e-12 * max(1.0, interval):
        rest = 0.0
    if rest < 0.0:
        n, rest = n - 1, rest + step
    return n, rest


def _check_run(t: float, step: float, n_nodes: int) -> None:
    if not (math.isfinite(step) and step > 0.0):
        raise DomainError(f"step must be positive, got {step}")
    if not (math.isfinite(t) and t >= 0.0):
        raise DomainError(f"time must be non-negative and finite, got {t}")
    if n_nodes > MAX_NODES:
        raise CapacityError(f"N={n_nodes} exceeds the dense-state cap of {MAX_NODES}")


class _Propagator:
    """Exact linear map of k RK4 steps, built column by column from ``rk4_step``."""

    def __init__(self, n_nodes: int, gamma: float, step: float) -> None:
        self.n_nodes = n_nodes
        self.gamma = gamma
        self.step = step
        self._one = self._map(step)
        self._cache: dict[tuple[int, float], np.ndarray] = {}

    def _map(self, h: float) -> np.ndarray:
        N = self.n_nodes
        basis = np.eye(N * N, dtype=complex).reshape(N * N, N, N)
        return rk4_step(basis, h, self.gamma).reshape(N * N, N * N).T

    def over(self, interval: float) -> np.ndarray:
        n, rest = _split(interval, self.step)
        key = (n, rest)
        if key not in self._cache:
            mat = np.linalg.matrix_power(self._one, n)
            if rest:
                mat = self._map(rest) @ mat
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = mat
        return self._cache[key]


def _integrate_loop(rho: np.ndarray, interval: float, step: float, gamma: float) -> np.ndarray:
    n, rest = _split(interval, step)
    for _ in range(n):
        rho = rk4_step(rho, step, gamma)
    if rest:
        rho = rk4_step(rho, rest, gamma)
    return rho


def _use_propagator(method: str, n_nodes: int) -> bool:
    if method not in ("auto", "loop", "propagator"):
        raise DomainError(f"unknown integration method {method!r}")
    if method == "auto":
        return n_nodes <= PROPAGATOR_MAX_NODES
    return method == "propagator"


def _hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def evolve(
    rho0,
    t_final: float,
    params: WalkParams,
    step: float = DEFAULT_STEP,
    *,
    hermitize: bool = True,
    method: str = "loop",
) -> DensityMatrix:
    """Fixed-step classical RK4 from t = 0 to ``t_final``.

    The last step is shortened to land exactly on ``t_final``. The final
    state is symmetrised with its conjugate transpose (unless
    ``hermitize=False``) and validated.
    """
    rho = np.array(rho0, dtype=complex)
    _check_run(t_final, step, params.n_nodes)
    if rho.shape != (params.n_nodes, params.n_nodes):
        raise DomainError(f"state shape {rho.shape} does not match N={params.n_nodes}")
    if _use_propagator(method, params.n_nodes):
        prop = _Propagator(params.n_nodes, params.gamma, step)
        rho = (prop.over(t_final) @ rho.ravel()).reshape(rho.shape)
    else:
        rho = _integrate_loop(rho, t_final, step, params.gamma)
    if not np.all(np.isfinite(rho)):
        raise IntegrationDivergedError(f"integration produced non-finite values (step {step})")
    if not hermitize:
        return DensityMatrix(rho)
    out = DensityMatrix(_hermitize(rho))
    problems = out.validate()
    if problems:
        worst = max(problems, key=lambda v: v.magnitude)
        raise IntegrationDivergedError(f"state invalid after integration: {worst.invariant} off by {worst.magnitude:.3e}")
    return out


def estimate_error(rho0, t_final: float, params: WalkParams, step: float = DEFAULT_STEP, *, method: str = "loop") -> float:
    """Richardson estimate max|rho_h - rho_{h/2}| / 15 for a fourth-order method."""
    coarse = evolve(rho0, t_final, params, step, hermitize=False, method=method).data
    fine = evolve(rho0, t_final, params, step / 2.0, hermitize=False, method=method).data
    return float(np.max(np.abs(coarse - fine))) / 15.0


def _phases(n_nodes: int) -> np.ndarray:
    idx = np.arange(n_nodes)
    diff = (idx[:, None] - idx[None, :]) % 4
    return np.array([1, 1j, -1, -1j])[diff]


def s_transform(rho) -> np.ndarray:
    """S_ab = i^{-(a-b)} rho_ab, with a - b taken on representatives in [0, N)."""
    rho = np.asarray(rho, dtype=complex)
    return rho * _phases(rho.shape[0]).conj()


def inverse_s_transform(S) -> np.ndarray:
    S = np.asarray(S, dtype=complex)
    return S * _phases(S.shape[0])


@dataclass
class ConservationAudit:
    """Running worst-case record of conservation laws along trajectories.

    Purity increases are measured between consecutive observed samples of a
    single trajectory; call :meth:`start` before each new trajectory.
    """

    samples: int = 0
    trajectories: int = 0
    max_trace_error: float = 0.0
    max_hermiticity_error: float = 0.0
    max_purity_increase: float = 0.0
    max_probability_sum_error: float = 0.0
    max_unitary_purity_error: float = 0.0
    labels: list[str] = field(default_factory=list)
    _last_purity: float | None = field(default=None, repr=False)
    _gamma: float = field(default=0.0, repr=False)

    def start(self, params: WalkParams, label: str = "") -> None:
        self.trajectories += 1
        self._last_purity = None
        self._gamma = params.gamma
        if label:
            self.labels.append(label)

    def observe(self, rho: np.ndarray) -> None:
        self.samples += 1
        self.max_trace_error = max(self.max_trace_error, float(abs(np.trace(rho) - 1.0)))
        self.max_hermiticity_error = max(self.max_hermiticity_error, float(np.max(np.abs(rho - rho.conj().T))))
        self.max_probability_sum_error = max(
            self.max_probability_sum_error, float(abs(rho.diagonal().real.sum() - 1.0))
        )
        purity = float(np.real(np.vdot(rho.conj().T, rho)))
        if self._gamma > 0.0:
            if self._last_purity is not None:
                self.max_purity_increase = max(self.max_purity_increase, purity - self._last_purity)
        else:
            self.max_unitary_purity_error = max(self.max_unitary_purity_error, abs(purity - 1.0))
        self._last_purity = purity

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "trajectories": self.trajectories,
            "max_trace_error": self.max_trace_error,
            "max_hermiticity_error": self.max_hermiticity_error,
            "max_purity_increase": self.max_purity_increase,
            "max_probability_sum_error": self.max_probability_sum_error,
            "max_unitary_purity_error": self.max_unitary_purity_error,
        }


def trajectory(
    rho0,
    times: Sequence[float],
    params: WalkParams,
    step: float = DEFAULT_STEP,
    *,
    audit: ConservationAudit | None = None,
    method: str = "auto",
) -> Iterator[tuple[float, np.ndarray]]:
    """Yield ``(t, rho(t))`` at each requested time, integrating between them.

    States are raw integrator output (not re-Hermitised). ``times`` must be
    non-decreasing and start at or after 0.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise DomainError("times must be a 1-D sequence")
    if times.size and (times[0] < 0.0 or np.any(np.diff(times) < 0.0)):
        raise DomainError("times must be non-negative and non-decreasing")
    rho = np.array(rho0, dtype=complex)
    N = params.n_nodes
    if rho.shape != (N, N):
        raise DomainError(f"state shape {rho.shape} does not match N={N}")
    _check_run(float(times[-1]) if times.size else 0.0, step, N)
    prop = _Propagator(N, params.gamma, step) if _use_propagator(method, N) else None
    now = 0.0
    for t in times.tolist():
        interval = t - now
        if interval > 0.0:
            if prop is not None:
                rho = (prop.over(interval) @ rho.ravel()).reshape(N, N)
            else:
                rho = _integrate_loop(rho, interval, step, params.gamma)
            now = t
        if audit is not None:
            audit.observe(rho)
        yield t, rho


def populations(
    rho0,
    times: Sequence[float],
    params: WalkParams,
    step: float = DEFAULT_STEP,
    *,
    audit: ConservationAudit | None = None,
    method: str = "auto",
) -> np.ndarray:
    """Diagonal of the integrated state at each time, shape (T, N)."""
    return np.array(
        [rho.diagonal().real.copy() for _, rho in trajectory(rho0, times, params, step, audit=audit, method=method)]
    ).reshape(len(times), params.n_nodes)


@dataclass
class ComparisonReport:
    n_nodes: int
    gamma: float
    times: np.ndarray
    l1: np.ndarray
    linf: np.ndarray
    exact_expected: bool
    tolerance: float
    perturbative: bool

    @property
    def n_mod_4(self) -> int:
        return self.n_nodes % 4

    @property
    def max_l1(self) -> float:
        return float(self.l1.max()) if self.l1.size else 0.0

    @property
    def max_linf(self) -> float:
        return float(self.linf.max()) if self.linf.size else 0.0

    @property
    def passed(self) -> bool | None:
        """Pass/fail only where the closed form should be exact; otherwise None."""
        if not self.exact_expected:
            return None
        return self.max_linf <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "gamma": self.gamma,
            "n_mod_4": self.n_mod_4,
            "t_min": float(self.times[0]) if self.times.size else 0.0,
            "t_max": float(self.times[-1]) if self.times.size else 0.0,
            "samples": int(self.times.size),
            "max_l1": self.max_l1,
            "max_linf": self.max_linf,
            "exact_expected": self.exact_expected,
            "tolerance": self.tolerance,
            "perturbative": self.perturbative,
            "passed": self.passed,
        }


def compare_closed_form(
    params: WalkParams,
    t_grid: Sequence[float],
    step: float = DEFAULT_STEP,
    *,
    audit: ConservationAudit | None = None,
) -> ComparisonReport:
    """Per-time L1 and L-infinity distance between oracle populations and the closed form.

    Exactness is expected only without decoherence and for N divisible by 4,
    where the phase rotation i^(a-b) is single-valued around the ring.
    Everything else is reported as a measured gap.
    """
    if not params.perturbative:
        warnings.warn(
            f"gamma*N = {params.gamma * params.n_nodes:.3g} >= 1: closed form is outside its perturbative regime",
            RuntimeWarning,
            stacklevel=2,
        )
    times = np.asarray(t_grid, dtype=float)
    if audit is not None:
        audit.start(params, f"compare N={params.n_nodes} gamma={params.gamma}")
    oracle = populations(initial_state(params.n_nodes).data, times, params, step, audit=audit)
    analytic = ClosedFormEvaluator(params).grid(times)
    diff = np.abs(oracle - analytic)
    return ComparisonReport(
        n_nodes=params.n_nodes,
        gamma=params.gamma,
        times=times,
        l1=diff.sum(axis=1),
        linf=diff.max(axis=1),
        exact_expected=params.gamma == 0.0 and params.n_nodes % 4 == 0,
        tolerance=tolerances.current().closed_form_exact,
        perturbative=params.perturbative,
    )
