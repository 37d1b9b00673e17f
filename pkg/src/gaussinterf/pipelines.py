"""Named estimation pipelines: measurement plan, estimator and the targets it is scored on.

Every estimator first undoes the known detector efficiency.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .core import Source
from .estimators import (
    EstimateReport,
    correct_efficiency,
    estimate_channel_calibrated,
    estimate_combined,
    estimate_ideal,
    estimate_known_process_noise,
    estimate_with_channel_noise,
    estimate_with_process_noise,
    layout_for,
)
from .interferometer.setup import ProcessParams, SchemeConfig
from .interferometer.shots import ExperimentPlan, ShotStats

PIPELINES = ("ideal", "naive", "channel-calibrated", "known-channel", "two-source", "known-process", "combined")
TWO_SOURCE = {"two-source", "combined"}


@dataclass(frozen=True)
class Pipeline:
    name: str
    plan: ExperimentPlan
    estimator: Callable[[ShotStats], EstimateReport]
    truth: dict = field(default_factory=dict)


def make_pipeline(
    name: str,
    scheme: SchemeConfig,
    p: ProcessParams,
    sources: Sequence[Source],
    shots: int,
    blocks: int = 1,
    Veps_assumed: float = 1.0,
    calibration_shots: int | None = None,
) -> Pipeline:
    """Assemble pipeline ``name`` for ``scheme``.

    ``ideal`` and ``naive`` run the noiseless inversion (``naive`` only
    differs in intent: it ignores noise that is present).  Pipelines that
    need a second source take it from ``sources[1]``; ``known-process``
    pools every source it is given.  ``calibration_shots`` lengthens the
    process-bypass round of the calibrated pipelines (default: ``shots``).
    """
    if name not in PIPELINES:
        raise ValueError(f"unknown pipeline {name!r}; choose from {', '.join(PIPELINES)}")
    if not sources:
        raise ValueError("at least one source is required")
    layout = layout_for(scheme)
    eta = scheme.efficiency
    full = {"Phi": p.Phi, "q": p.q, "d": p.d}

    def wrap(fn):
        return lambda stats: fn(correct_efficiency(stats, eta))

    if name in TWO_SOURCE and len(sources) < 2:
        raise ValueError(f"pipeline {name!r} needs two sources")

    if name in ("ideal", "naive"):
        plan = ExperimentPlan.standard(sources[0], shots, blocks)
        return Pipeline(name, plan, wrap(lambda s: estimate_ideal(s, layout)), full)
    if name == "channel-calibrated":
        plan = ExperimentPlan.standard(sources[0], shots, blocks, True, calibration_shots)
        return Pipeline(name, plan, wrap(lambda s: estimate_channel_calibrated(s, layout)), full)
    if name == "known-channel":
        ch = scheme.channel_noise
        if ch is None:
            raise ValueError("known-channel pipeline needs a channel noise block")
        plan = ExperimentPlan.standard(sources[0], shots, blocks)
        return Pipeline(name, plan, wrap(lambda s: estimate_with_channel_noise(s, ch.T, ch.Veps, layout)), full)
    if name == "two-source":
        plan = ExperimentPlan.two_source(sources[0], sources[1], shots, blocks)
        est = lambda s: estimate_with_process_noise(s, layout, Veps_assumed)
        return Pipeline(name, plan, wrap(est), full)
    if name == "known-process":
        noise = scheme.process_noise
        if noise is None:
            raise ValueError("known-process pipeline needs a process noise block")
        if len(sources) >= 2:
            plan = ExperimentPlan.two_source(sources[0], sources[1], shots, blocks)
        else:
            plan = ExperimentPlan.standard(sources[0], shots, blocks)
        return Pipeline(name, plan, wrap(lambda s: estimate_known_process_noise(s, layout, noise)), full)
    # combined
    plan = ExperimentPlan.two_source(sources[0], sources[1], shots, blocks, True, calibration_shots)
    est = lambda s: estimate_combined(s, layout, Veps_assumed)
    return Pipeline(name, plan, wrap(est), {"Phi": p.Phi, "q": p.q})
