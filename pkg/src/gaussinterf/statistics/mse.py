"""Empirical mean squared error over independent Monte-Carlo blocks."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from ..core import psd_factor
from ..estimators import EstimateReport, EstimationError
from ..interferometer.setup import ProcessParams, SchemeConfig
from ..interferometer.shots import (
    ExperimentPlan,
    ShotStats,
    block_rng,
    resolve_model,
    shot_moments,
    simulate_shots,
)

Estimator = Callable[[ShotStats], EstimateReport]
ANGULAR = {"Phi"}


class TooManyFailures(RuntimeError):
    pass


@dataclass(frozen=True)
class MseResult:
    parameter: str
    truth: float
    mse: float
    bias: float
    variance: float
    blocks: int
    shots: int
    seed: int
    failures: int = 0
    clamp_fraction: float = 0.0

    @property
    def mse_times_n(self) -> float:
        return self.mse * self.shots


def _error(name: str, estimate: float, truth: float) -> float:
    if name in ANGULAR:
        return (estimate - truth + math.pi) % (2 * math.pi) - math.pi
    return estimate - truth


def _run_block(scheme, p, plan, estimator, seed, k, shot_model, cache):
    stats = simulate_shots(scheme, p, plan, block_rng(seed, k), shot_model, cache)
    try:
        return estimator(stats)
    except (EstimationError, ValueError, ZeroDivisionError):
        return None


def run_blocks(
    scheme: SchemeConfig,
    p: ProcessParams,
    plan: ExperimentPlan,
    estimator: Estimator,
    seed: int,
    threads: int = 1,
    shot_model: str = "auto",
) -> list[EstimateReport | None]:
    """Estimator output for every block, in block order (``None`` marks a failure)."""
    cache: dict = {}
    if resolve_model(shot_model, plan.shots) == "moments":
        for s in plan.settings:
            src = plan.sources[s.source]
            mu, cov = shot_moments(scheme, p, src, s)
            cache[(s, src)] = (mu, cov, psd_factor(cov))
    job = lambda k: _run_block(scheme, p, plan, estimator, seed, k, shot_model, cache)
    if threads <= 1:
        return [job(k) for k in range(plan.blocks)]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(job, range(plan.blocks)))


def summarize(
    reports: Sequence[EstimateReport | None],
    truth: Mapping[str, float],
    shots: int,
    seed: int,
) -> dict[str, MseResult]:
    """Reduce per-block estimates to one :class:`MseResult` per parameter.

    Failed blocks are counted; more than half failing is an error.
    """
    total = len(reports)
    ok = [r for r in reports if r is not None]
    failures = total - len(ok)
    if total == 0 or failures > total / 2:
        raise TooManyFailures(f"{failures} of {total} blocks failed to produce an estimate")
    clamp = sum(r.clamped for r in ok) / len(ok)
    out = {}
    for name, true_value in truth.items():
        vals = [r.value(name) for r in ok]
        if any(v is None for v in vals):
            continue
        err = np.array([_error(name, v, true_value) for v in vals])
        bias = float(err.mean())
        var = float(np.mean((err - bias) ** 2))
        out[name] = MseResult(
            name, float(true_value), float(np.mean(err**2)), bias, var, len(ok), shots, seed, failures, clamp
        )
    return out


def empirical_mse(
    scheme: SchemeConfig,
    p: ProcessParams,
    plan: ExperimentPlan,
    estimator: Estimator,
    seed: int,
    truth: Mapping[str, float] | None = None,
    threads: int = 1,
    shot_model: str = "auto",
) -> dict[str, MseResult]:
    """Simulate ``plan.blocks`` blocks of ``plan.shots`` shots and score the estimator.

    Each block draws from its own stream ``block_rng(seed, k)``, so results
    do not depend on ``threads``.
    """
    if plan.blocks < 2:
        raise ValueError("empirical MSE needs at least two blocks")
    if truth is None:
        truth = {"Phi": p.Phi, "q": p.q, "d": p.d}
    reports = run_blocks(scheme, p, plan, estimator, seed, threads, shot_model)
    return summarize(reports, truth, plan.shots, seed)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float


def scaling_fit(points: Sequence[tuple[float, float]]) -> ScalingFit:
    """Least-squares line through ``(log N, log MSE)``."""
    if len(points) < 3:
        raise ValueError("need at least three points")
    n, mse = np.array(points, dtype=float).T
    if np.any(np.diff(n) <= 0):
        raise ValueError("N must be strictly increasing")
    if np.any(mse <= 0):
        raise ValueError("MSE values must be positive")
    x, y = np.log(n), np.log(mse)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = len(x) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(A.T @ A)
    return ScalingFit(float(coef[0]), float(coef[1]), float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1])))
