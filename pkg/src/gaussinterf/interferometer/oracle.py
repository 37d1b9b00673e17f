"""First-principles expected photocurrents.

Moments are pushed through the optical chain with the generic phase-space
routines of :mod:`gaussinterf.core`, conditional on the source phase and the
pump phase, and then averaged over both phases with the trapezoid rule.
"""
from __future__ import annotations

import numpy as np

from ..core import (
    GaussianState,
    Source,
    apply,
    beam_splitter,
    displacement,
    loss_channel,
    phase_shift,
    squeezer,
    tensor,
    two_mode_squeezer,
)
from .setup import BS, ProcessParams, SchemeConfig

NODES = 256
CONVERGENCE_TOL = 1e-10


class QuadratureError(RuntimeError):
    pass


def apply_process(state: GaussianState, p: ProcessParams, mode: int = 0) -> GaussianState:
    state = apply(squeezer(p.w, p.alpha), state, [mode])
    state = apply(phase_shift(p.Phi), state, [mode])
    return apply(displacement(p.d, p.beta), state, [mode])


def propagate(
    scheme: SchemeConfig,
    p: ProcessParams,
    state: GaussianState,
    phi_ref: float,
    pump_phase: float = 0.0,
    with_process: bool = True,
) -> GaussianState:
    """Two-mode state (signal, reference) at the detectors."""
    if isinstance(scheme.splitter, BS):
        # source sits on mode 0 and enters the splitter's second port
        state = apply(beam_splitter(scheme.splitter.mu), state, [1, 0])
    else:
        state = apply(two_mode_squeezer(scheme.splitter.r, pump_phase), state, [0, 1])
    if with_process:
        state = apply_process(state, p, 0)
        if scheme.process_noise is not None:
            state = loss_channel(state, 0, scheme.process_noise)
    if scheme.channel_noise is not None:
        state = loss_channel(state, 0, scheme.channel_noise)
        state = loss_channel(state, 1, scheme.channel_noise)
    state = apply(phase_shift(phi_ref), state, [1])
    if isinstance(scheme.combiner, BS):
        return apply(beam_splitter(scheme.combiner.mu), state, [0, 1])
    return apply(two_mode_squeezer(scheme.combiner.r, pump_phase), state, [0, 1])


def _input(source: Source, mean) -> GaussianState:
    src = GaussianState(np.asarray(mean, dtype=float), source.R**2 * np.eye(2))
    return tensor(src, GaussianState(np.zeros(2), np.eye(2)))


def _photons_over_theta(out0, out_x, out_y, D, thetas, efficiency):
    # the chain is affine in the source mean and its covariance does not
    # depend on it, so three propagations fix the output for every theta
    b = out0.mean
    ax, ay = out_x.mean - b, out_y.mean - b
    means = b + D * (np.outer(np.cos(thetas), ax) + np.outer(np.sin(thetas), ay))
    cov = out0.cov
    n1 = (cov[0, 0] + cov[1, 1] + means[:, 0] ** 2 + means[:, 1] ** 2 - 2.0) / 4.0
    n2 = (cov[2, 2] + cov[3, 3] + means[:, 2] ** 2 + means[:, 3] ** 2 - 2.0) / 4.0
    return efficiency * n1, efficiency * n2


def _average(scheme, p, source, phi_ref, with_process, nodes):
    thetas = 2 * np.pi * np.arange(nodes) / nodes
    pumps = thetas if scheme.has_pump else np.zeros(1)
    inputs = [_input(source, m) for m in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))]
    tot1 = tot2 = 0.0
    for phi in pumps:
        outs = [propagate(scheme, p, s, phi_ref, phi, with_process) for s in inputs]
        n1, n2 = _photons_over_theta(*outs, source.D, thetas, scheme.efficiency)
        tot1 += n1.mean()
        tot2 += n2.mean()
    return tot1 / pumps.size, tot2 / pumps.size


def oracle_expected(
    scheme: SchemeConfig,
    p: ProcessParams,
    source: Source,
    phi_ref: float = 0.0,
    with_process: bool = True,
    nodes: int = NODES,
) -> tuple[float, float]:
    """``(<i->, <i+>)`` from phase-averaged moment propagation.

    The quadrature is repeated with twice the nodes; a change larger than
    ``CONVERGENCE_TOL`` (relative to the signal scale) is a hard error.
    """
    n1, n2 = _average(scheme, p, source, phi_ref, with_process, nodes)
    m1, m2 = _average(scheme, p, source, phi_ref, with_process, 2 * nodes)
    scale = max(1.0, abs(m1), abs(m2))
    if max(abs(n1 - m1), abs(n2 - m2)) > CONVERGENCE_TOL * scale:
        raise QuadratureError(f"phase average not converged with {nodes} nodes")
    return n1 - n2, n1 + n2


def oracle_direct(p: ProcessParams, source: Source, nodes: int = NODES) -> float:
    """Mean photon number of the source sent straight through the process."""

    outs = [
        apply_process(GaussianState(np.array(m), source.R**2 * np.eye(2)), p, 0)
        for m in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))
    ]
    b = outs[0].mean
    ax, ay = outs[1].mean - b, outs[2].mean - b

    def avg(n):
        thetas = 2 * np.pi * np.arange(n) / n
        means = b + source.D * (np.outer(np.cos(thetas), ax) + np.outer(np.sin(thetas), ay))
        vals = (np.trace(outs[0].cov) + np.sum(means**2, axis=1) - 2.0) / 4.0
        return float(np.mean(vals))

    a, b = avg(nodes), avg(2 * nodes)
    if abs(a - b) > CONVERGENCE_TOL * max(1.0, abs(a)):
        raise QuadratureError(f"phase average not converged with {nodes} nodes")
    return a
