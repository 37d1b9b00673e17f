"""Moment estimators of the squeezing ``q``, phase shift ``Phi`` and displacement ``d``.

Every estimator reduces the measured currents to two quantities per source:

* the fringe vector, whose angle is ``Phi`` and whose length is
  ``scale(V) * sqrt(T_process) * (q + 1/q)``;
* the signal energy ``<x^2> + <p^2>`` of the signal arm after the process,
  ``(q^2 + 1/q^2) V_S + d^2`` in the ideal case.

Passive and active interferometers differ only in how these are read off
the currents, which is what the layout classes encapsulate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import NoiseChannel
from .interferometer.expected import active_variances, passive_variances
from .interferometer.setup import BS, OPA, SchemeConfig
from .interferometer.shots import SettingStats, ShotStats

HALF_PI = math.pi / 2

CLAMPED_C = "clamped-c"
NEGATIVE_RADICAND = "negative-radicand"
DEGENERATE = "degenerate-interference"
DISCREPANCY = "printed-formula-discrepancy"
CLAMPED_T = "clamped-T"
INDETERMINATE_VEPS = "indeterminate-Veps"
ILL_CONDITIONED = "ill-conditioned"

T_FLOOR = 1e-6
ACTIVE_NOTE = "arm variances cosh^2(r) V + sinh^2(r), sinh^2(r) V + cosh^2(r) (printed cosh/sinh forms disagree)"
CALIBRATION_NOTE = "calibration sum current uses T (V + 1) / 2 (printed T V / 2 disagrees)"


class EstimationError(ValueError):
    """The measured statistics cannot be inverted (degenerate setup)."""


@dataclass(frozen=True)
class EstimateReport:
    Phi: float
    q: Optional[float]
    d: Optional[float]
    T: Optional[float] = None
    Veps: Optional[float] = None
    flags: tuple[str, ...] = ()
    assumptions: dict = field(default_factory=dict)

    def value(self, name: str) -> Optional[float]:
        return getattr(self, name)

    @property
    def clamped(self) -> bool:
        return CLAMPED_C in self.flags or NEGATIVE_RADICAND in self.flags or CLAMPED_T in self.flags


def q_from_c(c: float) -> tuple[float, bool]:
    """Larger root of ``q + 1/q = c``; returns ``(1, True)`` when ``c < 2``."""
    if not c >= 2.0:
        return 1.0, True
    return (c + math.sqrt((c - 2.0) * (c + 2.0))) / 2.0, False


def _sqrt_clamped(x: float) -> tuple[float, bool]:
    if x < 0:
        return 0.0, True
    return math.sqrt(x), False


def _wrap(angle: float) -> float:
    return float(angle) % (2 * math.pi)


class _Passive:
    kind = "passive"

    def __init__(self, mu: float):
        if not 0.0 < mu < 1.0:
            raise EstimationError(f"beam splitter mu={mu} gives no interference")
        self.mu = mu

    def variances(self, V):
        return passive_variances(V, self.mu)

    def scale(self, V):
        if V <= 1.0:
            raise EstimationError(f"source variance V={V} carries no fringe")
        return (V - 1.0) / 2.0 * math.sqrt(self.mu * (1.0 - self.mu))

    def observables(self, s0: SettingStats, s90: SettingStats):
        Vs, Vr = self.variances(s0.V)
        plus = 0.5 * (s0.plus + s90.plus)
        return np.array([s0.minus, s90.minus]), 4.0 * (plus + 1.0) - 2.0 * Vr

    def vacuum_gain(self):
        return 1.0

    def calibration_terms(self, V):
        # i-_cal = T * a ;  i+_cal = g (T b + (1 - T) Veps) - 1 + T h
        return (V - 1.0) * math.sqrt(self.mu * (1.0 - self.mu)), 1.0, (V + 1.0) / 2.0, 0.0


class _Active:
    kind = "active"

    def __init__(self, r1: float, r2: float):
        if r1 <= 0.0 or r2 <= 0.0:
            raise EstimationError("OPA gain r = 0 gives no interference")
        self.r1, self.r2 = r1, r2

    def variances(self, V):
        return active_variances(V, self.r1)

    def scale(self, V):
        return math.sinh(2 * self.r1) * math.sinh(2 * self.r2) * (V + 1.0) / 4.0

    def observables(self, s0: SettingStats, s90: SettingStats):
        Vs, Vr = self.variances(s0.V)
        Es = 4.0 * 0.5 * (s0.minus + s90.minus) + 2.0 * Vr
        base = math.cosh(2 * self.r2) * (Es + 2.0 * Vr) / 4.0 - 1.0
        # fringe goes as cos(Phi + phi_ref)
        return np.array([s0.plus - base, -(s90.plus - base)]), Es

    def vacuum_gain(self):
        return math.cosh(2 * self.r2)

    def calibration_terms(self, V):
        Vs, Vr = self.variances(V)
        return (V - 1.0) / 2.0, math.cosh(2 * self.r2), (Vs + Vr) / 2.0, 2.0 * self.scale(V)


def layout_for(scheme_or_element) -> _Passive | _Active:
    """Layout from a scheme, an element, an existing layout, or a bare beam-splitter ``mu``."""
    if isinstance(scheme_or_element, (_Passive, _Active)):
        return scheme_or_element
    if isinstance(scheme_or_element, (int, float)):
        return _Passive(float(scheme_or_element))
    if isinstance(scheme_or_element, SchemeConfig):
        scheme = scheme_or_element
        if scheme.kind == "passive":
            return _Passive(scheme.splitter.mu)
        if scheme.kind == "active":
            return _Active(scheme.splitter.r, scheme.combiner.r)
        raise EstimationError("mixed BS/OPA scheme shows no interference")
    if isinstance(scheme_or_element, BS):
        return _Passive(scheme_or_element.mu)
    if isinstance(scheme_or_element, OPA):
        return _Active(scheme_or_element.r, scheme_or_element.r)
    raise TypeError(f"cannot build a layout from {scheme_or_element!r}")


def _pair(stats: ShotStats, source: int = 0) -> tuple[SettingStats, SettingStats]:
    return stats.get(0.0, source), stats.get(HALF_PI, source)


def _with_V(st: SettingStats, V: float | None) -> SettingStats:
    return st if V is None or st.V == V else replace(st, V=V)


def _invert(layout, fringe: np.ndarray, scale: float, energy: float, Vs: float, flags: list) -> tuple[float, float, float]:
    Phi = _wrap(math.atan2(fringe[1], fringe[0]))
    c = float(np.hypot(*fringe)) / scale
    q, clamped = q_from_c(c)
    if clamped:
        flags.append(CLAMPED_C)
    # q^2 + q^-2 = c^2 - 2 exactly; skipping the root keeps d well conditioned near q = 1
    q2 = 2.0 if clamped else c * c - 2.0
    d, neg = _sqrt_clamped(energy - q2 * Vs)
    if neg:
        flags.append(NEGATIVE_RADICAND)
    return Phi, q, d


def estimate_ideal(stats: ShotStats, layout, V: float | None = None, source: int = 0) -> EstimateReport:
    layout = layout_for(layout)
    s0, s90 = (_with_V(s, V) for s in _pair(stats, source))
    Vs, _ = layout.variances(s0.V)
    fringe, energy = layout.observables(s0, s90)
    flags: list[str] = []
    Phi, q, d = _invert(layout, fringe, layout.scale(s0.V), energy, Vs, flags)
    notes = {}
    if layout.kind == "active":
        flags.append(DISCREPANCY)
        notes["arm_variances"] = ACTIVE_NOTE
    return EstimateReport(Phi, q, d, flags=tuple(flags), assumptions=notes)


def estimate_ideal_passive(stats: ShotStats, V: float | None, mu: float) -> EstimateReport:
    """Invert the fringe at ``phi_ref = 0, pi/2`` of a beam-splitter interferometer.

    ``Phi`` comes from ``atan2`` of the two difference currents, ``q`` from
    the fringe contrast and ``d`` from the remaining photon budget of the
    sum current (pooled over both settings).
    """
    return estimate_ideal(stats, _Passive(mu), V)


def estimate_ideal_active(stats: ShotStats, V: float | None, r: float, r2: float | None = None) -> EstimateReport:
    """Same inversion for OPA interferometry, where the fringe lives in the sum current."""
    return estimate_ideal(stats, _Active(r, r if r2 is None else r2), V)


def correct_efficiency(stats: ShotStats, efficiency: float) -> ShotStats:
    """Undo a known detector efficiency (currents scale linearly with it)."""
    if not 0.0 < efficiency <= 1.0:
        raise ValueError(f"efficiency {efficiency} outside (0, 1]")
    e = efficiency
    return stats.map(
        lambda st: replace(st, minus=st.minus / e, plus=st.plus / e, var_minus=st.var_minus / e**2, var_plus=st.var_plus / e**2)
    )


def calibrate_channel(calibration: SettingStats, layout, V: float | None = None) -> tuple[float, float, tuple[str, ...]]:
    """Loss ``T`` and noise ``Veps`` of the channel from a process-bypass round at ``phi_ref = 0``.

    Returns ``(T, Veps, flags)``.  A lossless channel hides the noise: then
    ``Veps`` defaults to the vacuum value 1 and is flagged indeterminate.
    """
    layout = layout_for(layout)
    V = calibration.V if V is None else V
    a, g, b, h = layout.calibration_terms(V)
    if a <= 0:
        raise EstimationError(f"source variance V={V} cannot calibrate the channel")
    flags = [DISCREPANCY]
    T = calibration.minus / a
    if T > 1.0 or T < T_FLOOR:
        flags.append(CLAMPED_T)
        T = min(max(T, T_FLOOR), 1.0)
    if 1.0 - T < 1e-9:
        flags.append(INDETERMINATE_VEPS)
        return T, 1.0, tuple(flags)
    Veps = ((calibration.plus + 1.0 - T * h) / g - T * b) / (1.0 - T)
    return T, Veps, tuple(flags)


def remove_channel(stats: ShotStats, layout, T: float, Veps: float) -> ShotStats:
    """Map noisy currents to what a lossless, noiseless channel would give."""
    layout = layout_for(layout)
    g = layout.vacuum_gain()

    def fix(st: SettingStats) -> SettingStats:
        return replace(
            st,
            minus=st.minus / T,
            plus=(st.plus + 1.0 - g * (1.0 - T) * Veps) / T - 1.0,
            var_minus=st.var_minus / T**2,
            var_plus=st.var_plus / T**2,
        )

    return stats.map(fix)


def estimate_with_channel_noise(
    stats: ShotStats, T: float, Veps: float, layout, V: float | None = None
) -> EstimateReport:
    """Ideal inversion after dividing out the channel loss and subtracting its noise."""
    layout = layout_for(layout)
    if not 0.0 < T <= 1.0:
        raise EstimationError(f"channel transmittance {T} outside (0, 1]")
    report = estimate_ideal(remove_channel(stats, layout, T, Veps), layout, V)
    return replace(report, T=T, Veps=Veps)


def estimate_channel_calibrated(stats: ShotStats, layout, V: float | None = None) -> EstimateReport:
    """Calibration round (process bypassed) followed by the corrected inversion."""
    layout = layout_for(layout)
    cal = _with_V(stats.get(0.0, 0, apply_process=False), V)
    T, Veps, cflags = calibrate_channel(cal, layout)
    report = estimate_with_channel_noise(stats, T, Veps, layout, V)
    flags = tuple(dict.fromkeys(cflags + report.flags))
    return replace(report, flags=flags, assumptions={**report.assumptions, "calibration": CALIBRATION_NOTE})


def _process_inversion(
    stats: ShotStats, layout, sources: list[int], T_known: float | None, Veps_assumed: float
) -> EstimateReport:
    layout = layout_for(layout)
    flags: list[str] = []
    fringe = np.zeros(2)
    scale = 0.0
    energies, Vs_all = [], []
    for k in sources:
        s0, s90 = _pair(stats, k)
        f, Es = layout.observables(s0, s90)
        fringe += f
        scale += layout.scale(s0.V)
        energies.append(Es)
        Vs_all.append(layout.variances(s0.V)[0])
    Phi = _wrap(math.atan2(fringe[1], fringe[0]))
    P = float(np.hypot(*fringe)) / scale  # sqrt(T) (q + 1/q)

    if T_known is None:
        dVs = Vs_all[1] - Vs_all[0]
        if abs(dVs) < 1e-9 * max(1.0, abs(Vs_all[0])):
            raise EstimationError("two-source inversion needs different source strengths")
        if abs(dVs) < 1e-3 * max(1.0, abs(Vs_all[0])):
            flags.append(ILL_CONDITIONED)
        Q = (energies[1] - energies[0]) / dVs  # T (q^2 + 1/q^2)
        T = (P * P - Q) / 2.0
        if not T_FLOOR <= T <= 1.0:
            flags.append(CLAMPED_T)
            T = min(max(T, T_FLOOR), 1.0)
    else:
        T = T_known
    q, clamped = q_from_c(P / math.sqrt(T))
    if clamped:
        flags.append(CLAMPED_C)
    q2 = q * q + 1.0 / (q * q)
    d2 = float(np.mean([(E - 2.0 * (1.0 - T) * Veps_assumed) / T - q2 * Vs for E, Vs in zip(energies, Vs_all)]))
    d, neg = _sqrt_clamped(d2)
    if neg:
        flags.append(NEGATIVE_RADICAND)
    if layout.kind == "active":
        flags.append(DISCREPANCY)
    return EstimateReport(Phi, q, d, T=T, Veps=Veps_assumed, flags=tuple(flags))


def estimate_with_process_noise(
    stats: ShotStats, layout, Veps_assumed: float = 1.0, V1: float | None = None, V2: float | None = None
) -> EstimateReport:
    """Two-source estimator for loss and noise inside the process arm.

    The change of signal energy between sources 0 and 1 fixes
    ``T (q^2 + 1/q^2)``, the pooled fringe fixes ``T (q + 1/q)^2``; their
    difference is ``2 T``.  The displacement cannot be told apart from the
    process noise, so ``d`` is reported under an assumed noise variance.
    """
    if V1 is not None or V2 is not None:
        stats = ShotStats(
            tuple(
                _with_V(st, {0: V1, 1: V2}.get(st.setting.source)) for st in stats.settings
            ),
            stats.model,
        )
    report = _process_inversion(stats, layout, [0, 1], None, Veps_assumed)
    return replace(report, assumptions={"Veps": Veps_assumed, "d": "all excess energy attributed to displacement"})


def estimate_known_process_noise(stats: ShotStats, layout, noise: NoiseChannel) -> EstimateReport:
    """Inversion with the process loss and noise known beforehand (all sources pooled)."""
    sources = sorted({st.setting.source for st in stats.settings if st.setting.apply_process})
    return _process_inversion(stats, layout, sources, noise.T, noise.Veps)


def estimate_combined(stats: ShotStats, layout, Veps_assumed: float = 1.0) -> EstimateReport:
    """Channel calibration round, then the two-source process-noise inversion.

    The calibration fixes the channel; the channel-corrected currents of
    both sources go through :func:`estimate_with_process_noise`.  The
    displacement and the process noise stay jointly unidentifiable.
    """
    cal = stats.get(0.0, 0, apply_process=False)
    T2, Veps2, cflags = calibrate_channel(cal, layout)
    process_rounds = ShotStats(tuple(st for st in stats.settings if st.setting.apply_process), stats.model)
    cleaned = remove_channel(process_rounds, layout, T2, Veps2)
    report = _process_inversion(cleaned, layout, [0, 1], None, Veps_assumed)
    return replace(
        report,
        d=None,
        flags=tuple(dict.fromkeys(cflags + report.flags)),
        assumptions={
            "calibration": CALIBRATION_NOTE,
            "channel_T": T2,
            "channel_Veps": Veps2,
            "Veps": Veps_assumed,
            "d": "not identifiable alongside process noise",
        },
    )
