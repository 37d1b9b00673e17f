"""Stochastic shot simulation and exact per-shot moments.

Each shot redraws the source phase (and the shared pump phase when OPAs are
present), samples one phase-space point from the conditional output Gaussian
and records ``i = eta (x^2 + p^2 - 2) / 4`` at both detectors.

For long blocks the sample mean can instead be drawn from the bivariate
normal with the exact per-shot mean and covariance of ``(i-, i+)``
(``shot_model="moments"``); ``"auto"`` switches to it above
``DIRECT_SHOT_LIMIT`` shots per setting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..core import Source, psd_factor
from .setup import ProcessParams, SchemeConfig, build_chain, detector_forms

DIRECT_SHOT_LIMIT = 4000
CHUNK = 1 << 16
MOMENT_NODES = 32


@dataclass(frozen=True)
class Setting:
    """One measurement configuration: reference phase, process on/off, which source.

    ``shots`` overrides the plan's shot count for this setting.
    """

    phi_ref: float = 0.0
    apply_process: bool = True
    source: int = 0
    shots: Optional[int] = None


@dataclass(frozen=True)
class ExperimentPlan:
    sources: tuple[Source, ...]
    settings: tuple[Setting, ...]
    shots: int
    blocks: int = 1

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "settings", tuple(self.settings))
        if self.shots < 1 or self.blocks < 1:
            raise ValueError("shots and blocks must be >= 1")
        if not self.sources:
            raise ValueError("plan needs at least one source")
        for s in self.settings:
            if not 0 <= s.source < len(self.sources):
                raise ValueError(f"setting refers to missing source {s.source}")
            if s.shots is not None and s.shots < 1:
                raise ValueError("per-setting shots must be >= 1")

    def shots_for(self, setting: Setting) -> int:
        return self.shots if setting.shots is None else setting.shots

    @classmethod
    def standard(
        cls, source: Source, shots: int, blocks: int = 1, calibration: bool = False, calibration_shots: int | None = None
    ) -> "ExperimentPlan":
        """The two fringe settings (phi_ref = 0, pi/2), optionally preceded by a process-bypass round."""
        settings = [Setting(0.0), Setting(math.pi / 2)]
        if calibration:
            settings.insert(0, Setting(0.0, apply_process=False, shots=calibration_shots))
        return cls((source,), tuple(settings), shots, blocks)

    @classmethod
    def two_source(
        cls,
        first: Source,
        second: Source,
        shots: int,
        blocks: int = 1,
        calibration: bool = False,
        calibration_shots: int | None = None,
    ) -> "ExperimentPlan":
        settings = [Setting(0.0, True, 0), Setting(math.pi / 2, True, 0), Setting(0.0, True, 1), Setting(math.pi / 2, True, 1)]
        if calibration:
            settings.insert(0, Setting(0.0, apply_process=False, source=0, shots=calibration_shots))
        return cls((first, second), tuple(settings), shots, blocks)

    def with_shots(self, shots: int, blocks: int | None = None) -> "ExperimentPlan":
        return ExperimentPlan(self.sources, self.settings, shots, self.blocks if blocks is None else blocks)


@dataclass(frozen=True)
class SettingStats:
    """Sufficient statistics of one setting: mean and per-shot variance of i- and i+."""

    setting: Setting
    V: float
    minus: float
    plus: float
    var_minus: float = 0.0
    var_plus: float = 0.0
    n_shots: int = 0

    def __post_init__(self):
        if self.var_minus < 0 or self.var_plus < 0:
            raise ValueError("variances must be non-negative")

    @property
    def se_minus(self) -> float:
        return math.sqrt(self.var_minus / self.n_shots) if self.n_shots else 0.0

    @property
    def se_plus(self) -> float:
        return math.sqrt(self.var_plus / self.n_shots) if self.n_shots else 0.0


@dataclass(frozen=True)
class ShotStats:
    settings: tuple[SettingStats, ...]
    model: str = "direct"

    def get(self, phi_ref: float = 0.0, source: int = 0, apply_process: bool = True) -> SettingStats:
        for st in self.settings:
            s = st.setting
            if s.source == source and s.apply_process == apply_process and math.isclose(
                s.phi_ref, phi_ref, abs_tol=1e-12
            ):
                return st
        raise KeyError(f"no setting with phi_ref={phi_ref}, source={source}, apply_process={apply_process}")

    def for_source(self, source: int) -> "ShotStats":
        return ShotStats(tuple(st for st in self.settings if st.setting.source == source), self.model)

    def map(self, fn) -> "ShotStats":
        return ShotStats(tuple(fn(st) for st in self.settings), self.model)

    @classmethod
    def from_expectations(cls, items: Iterable[tuple[Setting, float, float, float]]) -> "ShotStats":
        """Noise-free statistics from ``(setting, V, <i->, <i+>)`` tuples."""
        return cls(tuple(SettingStats(s, V, m, p) for s, V, m, p in items), model="exact")


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent stream for Monte-Carlo block ``block`` of master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _quad(y: np.ndarray, A: np.ndarray) -> np.ndarray:
    return np.einsum("ni,ij,nj->n", y, A, y)


def _direct_setting(scheme, p, source: Source, setting: Setting, n: int, rng) -> SettingStats:
    forms = detector_forms(scheme.efficiency)
    fixed = None if scheme.has_pump else build_chain(scheme, p, setting.phi_ref, setting.apply_process)
    if fixed is not None:
        _, cov = fixed.output(np.zeros(2), source.R**2)
        L = psd_factor(cov[0])
    count, means, m2 = 0, np.zeros(2), np.zeros(2)
    done = 0
    while done < n:
        k = min(CHUNK, n - done)
        theta = rng.uniform(0.0, 2 * np.pi, k)
        src = source.D * np.column_stack([np.cos(theta), np.sin(theta)])
        if fixed is None:
            pump = rng.uniform(0.0, 2 * np.pi, k)
            chain = build_chain(scheme, p, setting.phi_ref, setting.apply_process, pump)
            mean, cov = chain.output(src, source.R**2)
            Ls = np.linalg.cholesky(cov)
            y = mean + np.einsum("nij,nj->ni", Ls, rng.standard_normal((k, 4)))
        else:
            mean, _ = fixed.output(src, source.R**2)
            y = mean + rng.standard_normal((k, 4)) @ L.T
        i1 = _quad(y, forms["i1"][0]) + forms["i1"][1]
        i2 = _quad(y, forms["i2"][0]) + forms["i2"][1]
        vals = np.stack([i1 - i2, i1 + i2])
        # chunked Chan/Welford merge
        cm = vals.mean(axis=1)
        cm2 = ((vals - cm[:, None]) ** 2).sum(axis=1)
        delta = cm - means
        tot = count + k
        means = means + delta * k / tot
        m2 = m2 + cm2 + delta**2 * count * k / tot
        count = tot
        done += k
    var = m2 / (count - 1) if count > 1 else np.zeros(2)
    return SettingStats(setting, source.V, float(means[0]), float(means[1]), float(var[0]), float(var[1]), n)


def shot_moments(
    scheme: SchemeConfig, p: ProcessParams, source: Source, setting: Setting, nodes: int = MOMENT_NODES
) -> tuple[np.ndarray, np.ndarray]:
    """Exact mean vector and covariance matrix of one shot's ``(i-, i+)``.

    Conditional on the phases the output is Gaussian, so quadratic-form
    moments are closed-form; the phase average uses the trapezoid rule,
    which is exact for the trigonometric polynomials of degree <= 4 involved.
    """
    forms = detector_forms(scheme.efficiency)
    A = [forms["minus"][0], forms["plus"][0]]
    const = np.array([forms["minus"][1], forms["plus"][1]])
    grid = 2 * np.pi * np.arange(nodes) / nodes
    pumps = grid if scheme.has_pump else np.zeros(1)
    chain = build_chain(scheme, p, setting.phi_ref, setting.apply_process, pumps)
    src = source.D * np.column_stack([np.cos(grid), np.sin(grid)])
    # broadcast to (pump, theta, 4)
    _, cov = chain.output(np.zeros(2), source.R**2)
    mean = np.einsum("pij,tj->pti", chain.X[:, :, :2], src) + chain.c[:, None, :]
    cov = np.broadcast_to(cov[:, None, :, :], mean.shape + (4,))
    cond_mean = np.stack(
        [np.einsum("...ij,...ji->...", Ak, cov) + np.einsum("...i,ij,...j->...", mean, Ak, mean) for Ak in A],
        axis=-1,
    ) + const
    cond_cov = np.empty(mean.shape[:-1] + (2, 2))
    for a in range(2):
        for b in range(2):
            ASB = A[a] @ cov @ A[b]
            tr = np.einsum("...ij,...jk,...ki->...", A[a] @ cov, A[b], cov)
            cond_cov[..., a, b] = 2.0 * tr + 4.0 * np.einsum("...i,...ij,...j->...", mean, ASB, mean)
    flat_mean = cond_mean.reshape(-1, 2)
    mu = flat_mean.mean(axis=0)
    dev = flat_mean - mu
    total = cond_cov.reshape(-1, 2, 2).mean(axis=0) + dev.T @ dev / dev.shape[0]
    return mu, 0.5 * (total + total.T)


def _moment_setting(scheme, p, source, setting, n, rng, cache) -> SettingStats:
    key = (setting, source)
    if key not in cache:
        mu, cov = shot_moments(scheme, p, source, setting)
        cache[key] = (mu, cov, psd_factor(cov))
    mu, cov, L = cache[key]
    draw = mu + L @ rng.standard_normal(2) / math.sqrt(n)
    return SettingStats(setting, source.V, float(draw[0]), float(draw[1]), float(cov[0, 0]), float(cov[1, 1]), n)


def resolve_model(shot_model: str, shots: int) -> str:
    if shot_model == "auto":
        return "direct" if shots <= DIRECT_SHOT_LIMIT else "moments"
    if shot_model not in ("direct", "moments"):
        raise ValueError(f"unknown shot model {shot_model!r}")
    return shot_model


def simulate_shots(
    scheme: SchemeConfig,
    p: ProcessParams,
    plan: ExperimentPlan,
    rng: np.random.Generator,
    shot_model: str = "auto",
    _cache: Optional[dict] = None,
) -> ShotStats:
    """One block of ``plan.shots`` shots for every setting of ``plan``."""
    model = resolve_model(shot_model, plan.shots)
    cache = {} if _cache is None else _cache
    out = []
    for setting in plan.settings:
        source = plan.sources[setting.source]
        if model == "direct":
            out.append(_direct_setting(scheme, p, source, setting, plan.shots_for(setting), rng))
        else:
            out.append(_moment_setting(scheme, p, source, setting, plan.shots_for(setting), rng, cache))
    return ShotStats(tuple(out), model)


def exact_stats(scheme: SchemeConfig, p: ProcessParams, plan: ExperimentPlan) -> ShotStats:
    """Noise-free statistics: each setting reports its exact expected currents."""
    out = []
    for setting in plan.settings:
        source = plan.sources[setting.source]
        mu, cov = shot_moments(scheme, p, source, setting)
        out.append(SettingStats(setting, source.V, float(mu[0]), float(mu[1]), float(cov[0, 0]), float(cov[1, 1]), 0))
    return ShotStats(tuple(out), "exact")
