"""Mixing-time analysis: L1 deviation from uniform, its envelope, and Gamma sweeps."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .closed_form import ClosedFormEvaluator
from .errors import DomainError, UnboundedError
from .model import DeviationSeries, ProbabilityDistribution, WalkParams
from . import oracle

SOURCES = ("closed", "oracle")
DEFAULT_EPSILON = 0.05
DEFAULT_GRID_STEP = 0.25
# horizon per node used when there is no decoherence and hence no bound
COHERENT_HORIZON_PER_NODE = 50.0


class Majorizer(NamedTuple):
    per_node: float
    total: float


def deviation_sum(dist) -> float:
    """L1 distance sum_j |P_j - 1/N| between ``dist`` and the uniform distribution."""
    probs = dist.probs if isinstance(dist, ProbabilityDistribution) else ProbabilityDistribution(dist).probs
    return float(np.abs(probs - 1.0 / probs.size).sum())


def _envelope(times, n_nodes: int, gamma: float) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    N = n_nodes
    shrink = np.expm1(-gamma * t / N)
    return np.exp(-gamma * (N - 2) / N * t) * (1.0 + 1.0 / N + shrink / N * (1.0 + 2.0 / N))


def majorizer(t: float, params: WalkParams) -> Majorizer:
    """Per-node envelope of |P_j(t) - 1/N| and its N-fold total."""
    t = float(t)
    if not (math.isfinite(t) and t >= 0.0):
        raise DomainError(f"time must be non-negative and finite, got {t}")
    per_node = float(_envelope(t, params.n_nodes, params.gamma))
    return Majorizer(per_node, params.n_nodes * per_node)


def majorizer_totals(times, params: WalkParams) -> np.ndarray:
    return params.n_nodes * _envelope(times, params.n_nodes, params.gamma)


def mixing_time_bound(params: WalkParams, epsilon: float) -> float:
    """Upper bound (N / gamma) ln(4 / epsilon) on the mixing time."""
    epsilon = float(epsilon)
    if not 0.0 < epsilon <= 4.0:
        raise DomainError(f"epsilon must lie in (0, 4], got {epsilon}")
    if params.gamma == 0.0:
        raise UnboundedError("without decoherence the walk never settles to a static distribution")
    return params.n_nodes / params.gamma * math.log(4.0 / epsilon)


def strong_dephasing_estimate(params: WalkParams, epsilon: float) -> float:
    """Relaxation time of the classical hopping limit reached for large gamma.

    Adiabatic elimination of the coherences gives a nearest-neighbour rate
    1/(8 gamma); the slowest ring mode then relaxes at (1 - cos(2 pi/N)) / (4 gamma).
    """
    if params.gamma == 0.0:
        return math.inf
    gap = (1.0 - math.cos(2.0 * math.pi / params.n_nodes)) / (4.0 * params.gamma)
    return math.log(4.0 / epsilon) / gap


def default_horizon(params: WalkParams, epsilon: float) -> float:
    """Twice the analytic bound; a fixed multiple of N when that bound is unavailable."""
    if params.gamma == 0.0 or epsilon >= 4.0:
        return COHERENT_HORIZON_PER_NODE * params.n_nodes
    return 2.0 * mixing_time_bound(params, epsilon)


def _sample_times(horizon: float, grid_step: float) -> np.ndarray:
    n = int(math.floor(horizon / grid_step + 1e-9))
    return np.arange(n + 1) * grid_step


def _check_source(source: str) -> None:
    if source not in SOURCES:
        raise DomainError(f"source must be one of {SOURCES}, got {source!r}")


def _deviations(
    params: WalkParams,
    times: np.ndarray,
    source: str,
    step: float,
    audit: oracle.ConservationAudit | None,
) -> np.ndarray:
    _check_source(source)
    N = params.n_nodes
    if source == "closed":
        probs = ClosedFormEvaluator(params).grid(times)
    else:
        if audit is not None:
            audit.start(params, f"mixing N={N} gamma={params.gamma}")
        probs = oracle.populations(oracle.initial_state(N).data, times, params, step, audit=audit)
    return np.abs(probs - 1.0 / N).sum(axis=1)


@dataclass(frozen=True)
class MixingResult:
    """Outcome of a sustained-mixing scan.

    ``mixing_time`` is None when the walk is not shown to stay mixed within
    the horizon. ``first_crossing`` is the earliest sample already within
    epsilon, whether or not it stays there.
    """

    n_nodes: int
    gamma: float
    epsilon: float
    source: str
    mixing_time: float | None
    first_crossing: float | None
    bound: float | None
    horizon: float
    grid_step: float

    @property
    def converged(self) -> bool:
        return self.mixing_time is not None

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "source": self.source,
            "mixing_time": self.mixing_time,
            "first_crossing": self.first_crossing,
            "bound": self.bound,
            "horizon": self.horizon,
            "grid_step": self.grid_step,
            "converged": self.converged,
        }


def mixing_time_numeric(
    params: WalkParams,
    epsilon: float = DEFAULT_EPSILON,
    source: str = "closed",
    horizon: float | None = None,
    grid_step: float = DEFAULT_GRID_STEP,
    *,
    step: float = oracle.DEFAULT_STEP,
    audit: oracle.ConservationAudit | None = None,
) -> MixingResult:
    """Smallest grid time after which the deviation stays within ``epsilon``.

    The scan covers [0, horizon]. Beyond the horizon, staying mixed is
    inferred from the analytic envelope, capped by the trivial L1 bound 2;
    if that envelope is not within ``epsilon`` at the horizon the result is
    not converged.
    """
    epsilon = float(epsilon)
    if not epsilon > 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if not grid_step > 0.0:
        raise DomainError(f"grid_step must be positive, got {grid_step}")
    _check_source(source)
    if horizon is None:
        horizon = default_horizon(params, epsilon)
    if not (math.isfinite(horizon) and horizon > 0.0):
        raise DomainError(f"horizon must be positive and finite, got {horizon}")

    times = _sample_times(horizon, grid_step)
    series = DeviationSeries(times, _deviations(params, times, source, step, audit), majorizer_totals(times, params), source)
    return mixing_time_from_series(series, params, epsilon, grid_step)


def mixing_time_from_series(
    series: DeviationSeries,
    params: WalkParams,
    epsilon: float,
    grid_step: float | None = None,
) -> MixingResult:
    """Apply the sustained-mixing rule to an already sampled series."""
    times, dev = series.times, series.deviation
    within = dev <= epsilon
    first = float(times[int(np.argmax(within))]) if within.any() else None
    tail_envelope = min(2.0, float(majorizer_totals(times[-1], params)))
    settled = None
    if tail_envelope <= epsilon:
        outside = np.flatnonzero(~within)
        if outside.size == 0:
            settled = 0.0
        elif outside[-1] + 1 < times.size:
            settled = float(times[outside[-1] + 1])
    try:
        bound = mixing_time_bound(params, epsilon)
    except DomainError:
        bound = None
    if grid_step is None:
        grid_step = float(times[1] - times[0]) if times.size > 1 else 0.0
    return MixingResult(
        n_nodes=params.n_nodes,
        gamma=params.gamma,
        epsilon=float(epsilon),
        source=series.source,
        mixing_time=settled,
        first_crossing=first,
        bound=bound,
        horizon=float(times[-1]),
        grid_step=float(grid_step),
    )


def deviation_series(
    params: WalkParams,
    t_grid: Sequence[float],
    source: str = "closed",
    *,
    step: float = oracle.DEFAULT_STEP,
    audit: oracle.ConservationAudit | None = None,
) -> DeviationSeries:
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("time grid must be a non-empty 1-D sequence")
    if np.any(np.diff(times) <= 0.0):
        raise DomainError("time grid must be strictly increasing")
    dev = _deviations(params, times, source, step, audit)
    return DeviationSeries(times, dev, majorizer_totals(times, params), source=source)


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    mixing_time: float | None
    first_crossing: float | None
    bound: float
    horizon: float
    perturbative: bool


def gamma_sweep(
    n_nodes: int,
    epsilon: float,
    gamma_values: Sequence[float],
    source: str = "closed",
    *,
    horizon: float | None = None,
    grid_step: float = DEFAULT_GRID_STEP,
    step: float = oracle.DEFAULT_STEP,
    workers: int = 1,
    audit: oracle.ConservationAudit | None = None,
) -> list[SweepRow]:
    """Numeric mixing time and analytic bound for each decoherence rate.

    Without an explicit ``horizon`` each row scans to twice the larger of the
    analytic bound and :func:`strong_dephasing_estimate`, so strongly
    measured (Zeno-like) rows are not cut off prematurely.
    """
    _check_source(source)
    gammas = [float(g) for g in gamma_values]
    if any(not g > 0.0 for g in gammas):
        raise DomainError("gamma values must be positive")
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise DomainError("gamma values must be sorted")

    def row(gamma: float) -> SweepRow:
        params = WalkParams(n_nodes, gamma)
        if source == "closed" and not params.perturbative:
            warnings.warn(f"gamma*N = {gamma * n_nodes:.3g} >= 1: closed form used outside its regime", RuntimeWarning)
        scan = horizon
        if scan is None:
            scan = 2.0 * max(mixing_time_bound(params, epsilon), strong_dephasing_estimate(params, epsilon))
        result = mixing_time_numeric(params, epsilon, source, scan, grid_step, step=step, audit=audit)
        return SweepRow(gamma, result.mixing_time, result.first_crossing, result.bound, result.horizon, params.perturbative)

    if workers > 1 and audit is None:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(row, gammas))
    return [row(g) for g in gammas]
