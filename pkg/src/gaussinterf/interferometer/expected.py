"""Closed-form mean photocurrents of the direct, passive and active schemes."""
from __future__ import annotations

import math
from typing import Optional

from ..core import NoiseChannel
from .setup import ProcessParams

FORMS = ("oracle", "printed")


def _q2(q: float) -> float:
    return q * q + 1.0 / (q * q)


def expected_direct(V: float, q: float, d: float, form: str = "oracle") -> float:
    """Mean photon number when the process acts on the source directly.

    ``form="printed"`` reproduces the published expression, which carries a
    ``-1`` offset where single-mode propagation gives ``-1/2``.
    """
    if V < 1.0:
        raise ValueError(f"V={V} < 1")
    offset = {"oracle": 0.5, "printed": 1.0}[form]
    return (_q2(q) * V + d * d) / 4.0 - offset


def passive_variances(V: float, mu: float) -> tuple[float, float]:
    """Signal and reference quadrature variances after the splitting beam splitter."""
    return mu * V + 1.0 - mu, mu + V - mu * V


def active_variances(V: float, r: float, form: str = "oracle") -> tuple[float, float]:
    """Signal and reference quadrature variances after the splitting OPA.

    The published forms ``cosh(r) V + sinh(r)`` and ``sinh(r) V + cosh(r)``
    are available as ``form="printed"``; phase-space propagation gives
    ``cosh^2(r) V + sinh^2(r)`` and ``sinh^2(r) V + cosh^2(r)``.
    """
    if form == "printed":
        return math.cosh(r) * V + math.sinh(r), math.sinh(r) * V + math.cosh(r)
    ch2, sh2 = math.cosh(r) ** 2, math.sinh(r) ** 2
    return ch2 * V + sh2, sh2 * V + ch2


def _noisy_energies(Es: float, Er: float, amp: float, process_noise, channel_noise):
    # Es, Er: sums <x^2>+<p^2> (incl. means) of the signal / reference arm
    if process_noise is not None:
        T, Ve = process_noise.T, process_noise.Veps
        Es = T * Es + 2.0 * (1.0 - T) * Ve
        amp *= math.sqrt(T)
    if channel_noise is not None:
        T, Ve = channel_noise.T, channel_noise.Veps
        Es = T * Es + 2.0 * (1.0 - T) * Ve
        Er = T * Er + 2.0 * (1.0 - T) * Ve
        amp *= T
    return Es, Er, amp


def expected_passive(
    p: ProcessParams,
    V: float,
    mu: float,
    phi_ref: float = 0.0,
    channel_noise: Optional[NoiseChannel] = None,
    process_noise: Optional[NoiseChannel] = None,
    efficiency: float = 1.0,
) -> tuple[float, float]:
    """``(<i->, <i+>)`` for beam-splitter interferometry."""
    if V < 1.0:
        raise ValueError(f"V={V} < 1")
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu={mu} outside [0, 1]")
    Vs, Vr = passive_variances(V, mu)
    amp = (V - 1.0) / 2.0 * math.sqrt(mu * (1.0 - mu)) * (p.q + 1.0 / p.q)
    Es, Er, amp = _noisy_energies(_q2(p.q) * Vs + p.d**2, 2.0 * Vr, amp, process_noise, channel_noise)
    minus = amp * math.cos(p.Phi - phi_ref)
    plus = (Es + Er) / 4.0 - 1.0
    return efficiency * minus, efficiency * plus


def expected_active(
    p: ProcessParams,
    V: float,
    r1: float,
    r2: float | None = None,
    phi_ref: float = 0.0,
    channel_noise: Optional[NoiseChannel] = None,
    process_noise: Optional[NoiseChannel] = None,
    efficiency: float = 1.0,
    form: str = "oracle",
) -> tuple[float, float]:
    """``(<i->, <i+>)`` for OPA interferometry with a shared random pump phase.

    The difference current carries no fringe (two-mode squeezing conserves the
    photon-number difference); the fringe sits in the sum, as
    ``cos(Phi + phi_ref)``.
    """
    if r2 is None:
        r2 = r1
    if r1 < 0 or r2 < 0:
        raise ValueError("OPA gains must be non-negative")
    Vs, Vr = active_variances(V, r1, form)
    amp = math.sinh(2 * r1) * math.sinh(2 * r2) * (V + 1.0) / 4.0 * (p.q + 1.0 / p.q)
    Es, Er, amp = _noisy_energies(_q2(p.q) * Vs + p.d**2, 2.0 * Vr, amp, process_noise, channel_noise)
    minus = (Es - Er) / 4.0
    plus = math.cosh(2 * r2) * (Es + Er) / 4.0 - 1.0 + amp * math.cos(p.Phi + phi_ref)
    return efficiency * minus, efficiency * plus
