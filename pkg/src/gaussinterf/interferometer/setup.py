"""Scheme description and the optical chain of the two-arm interferometer.

Mode 0 carries the signal (the arm that sees the unknown process), mode 1 the
reference.  The source enters on the signal port; a beam-splitter splitter is
fed on its second input so that signal and reference come out positively
correlated, which makes the difference photocurrent positive at zero phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..core import (
    NoiseChannel,
    beam_splitter,
    rotation,
    two_mode_squeezer_matrix,
)


@dataclass(frozen=True)
class ProcessParams:
    """Unknown Gaussian unitary: squeeze by ``q`` along ``alpha``, rotate by ``Phi``, displace by ``d`` along ``beta``."""

    q: float = 1.0
    Phi: float = 0.0
    d: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.q < 1.0:
            raise ValueError(f"q={self.q} < 1; use the q >= 1 representative (q and 1/q are indistinguishable)")
        if self.d < 0.0:
            raise ValueError(f"displacement magnitude d={self.d} must be non-negative")
        object.__setattr__(self, "Phi", float(self.Phi) % (2 * math.pi))

    @classmethod
    def identity(cls) -> "ProcessParams":
        return cls()

    @property
    def w(self) -> float:
        return math.log(self.q)

    def matrix(self) -> np.ndarray:
        """Linear part ``R(Phi) @ S(w, alpha)`` on one mode."""
        rot = rotation(self.alpha / 2.0)
        sq = rot @ np.diag([self.q, 1.0 / self.q]) @ rot.T
        return rotation(self.Phi) @ sq

    def shift(self) -> np.ndarray:
        return self.d * np.array([math.cos(self.beta), math.sin(self.beta)])


@dataclass(frozen=True)
class BS:
    """Passive element: beam splitter with transmittance ``mu``."""

    mu: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu={self.mu} outside [0, 1]")


@dataclass(frozen=True)
class OPA:
    """Active element: two-mode squeezer with gain ``r`` and a random pump phase."""

    r: float = 0.5

    def __post_init__(self):
        if self.r < 0.0:
            raise ValueError(f"r={self.r} must be non-negative")


Element = Union[BS, OPA]


@dataclass(frozen=True)
class SchemeConfig:
    splitter: Element = field(default_factory=lambda: BS(0.3))
    combiner: Element = field(default_factory=lambda: BS(0.5))
    channel_noise: Optional[NoiseChannel] = None
    process_noise: Optional[NoiseChannel] = None
    efficiency: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"detector efficiency {self.efficiency} outside (0, 1]")

    @classmethod
    def passive(cls, mu: float, **kw) -> "SchemeConfig":
        return cls(BS(mu), BS(0.5), **kw)

    @classmethod
    def active(cls, r1: float, r2: float | None = None, **kw) -> "SchemeConfig":
        return cls(OPA(r1), OPA(r1 if r2 is None else r2), **kw)

    @property
    def kind(self) -> str:
        s, c = type(self.splitter), type(self.combiner)
        if s is BS and c is BS:
            return "passive"
        if s is OPA and c is OPA:
            return "active"
        return "mixed"

    @property
    def has_pump(self) -> bool:
        return isinstance(self.splitter, OPA) or isinstance(self.combiner, OPA)

    @property
    def interference_expected(self) -> bool:
        # a single OPA with a random pump phase washes the fringe out
        return self.kind != "mixed"

    @property
    def degenerate(self) -> bool:
        if self.kind == "passive":
            return self.splitter.mu in (0.0, 1.0)
        if self.kind == "active":
            return self.splitter.r == 0.0 or self.combiner.r == 0.0
        return True

    def replace(self, **kw) -> "SchemeConfig":
        from dataclasses import replace

        return replace(self, **kw)


# index maps for the 4-vector (x_s, p_s, x_r, p_r)
_SIG = np.array([0, 1])
_REF = np.array([2, 3])


def _bs_matrix(mu: float, source_on_second_port: bool) -> np.ndarray:
    M = beam_splitter(mu).matrix
    if not source_on_second_port:
        return M
    # BS applied to modes ordered (reference, signal)
    perm = np.array([2, 3, 0, 1])
    P = np.eye(4)[perm]
    return P.T @ M @ P


@dataclass
class AffineChain:
    """Gaussian map ``y = X u + c + n`` with ``n ~ N(0, Y)``, batched over the pump phase.

    ``u`` is the input 4-vector (source quadratures, vacuum quadratures).
    """

    X: np.ndarray
    c: np.ndarray
    Y: np.ndarray

    @classmethod
    def identity(cls, batch: int = 1) -> "AffineChain":
        return cls(np.broadcast_to(np.eye(4), (batch, 4, 4)).copy(), np.zeros((batch, 4)), np.zeros((batch, 4, 4)))

    def push(self, A: np.ndarray, b: np.ndarray | None = None, N: np.ndarray | None = None) -> "AffineChain":
        A = np.asarray(A)
        self.X = A @ self.X
        self.c = np.einsum("...ij,...j->...i", A, self.c)
        self.Y = A @ self.Y @ np.swapaxes(A, -1, -2)
        if b is not None:
            self.c = self.c + b
        if N is not None:
            self.Y = self.Y + N
        return self

    def loss(self, idx: np.ndarray, channel: NoiseChannel) -> "AffineChain":
        scale = np.ones(4)
        scale[idx] = math.sqrt(channel.T)
        N = np.zeros((4, 4))
        N[idx, idx] = (1.0 - channel.T) * channel.Veps
        return self.push(np.diag(scale), None, N)

    def output(self, source_mean: np.ndarray, source_var: float):
        """Conditional output moments for source means of shape ``(..., 2)``.

        Returns ``(mean, cov)``; ``mean`` broadcasts the batch of the chain
        against the batch of ``source_mean``.
        """
        mean = np.einsum("...ij,...j->...i", self.X[..., :, :2], source_mean) + self.c
        cin = np.diag([source_var, source_var, 1.0, 1.0])
        cov = self.X @ cin @ np.swapaxes(self.X, -1, -2) + self.Y
        return mean, cov


def build_chain(
    scheme: SchemeConfig,
    process: ProcessParams,
    phi_ref: float,
    apply_process: bool = True,
    pump_phase=None,
) -> AffineChain:
    """Compose the full interferometer into one affine Gaussian map.

    ``pump_phase`` is the shared OPA pump phase, scalar or array; it is
    ignored for purely passive schemes.
    """
    pump = np.atleast_1d(np.asarray(0.0 if pump_phase is None else pump_phase, dtype=float))
    chain = AffineChain.identity(pump.size)

    if isinstance(scheme.splitter, BS):
        chain.push(_bs_matrix(scheme.splitter.mu, source_on_second_port=True))
    else:
        chain.push(two_mode_squeezer_matrix(scheme.splitter.r, pump))

    if apply_process:
        A = np.eye(4)
        A[np.ix_(_SIG, _SIG)] = process.matrix()
        b = np.zeros(4)
        b[_SIG] = process.shift()
        chain.push(A, b)
        if scheme.process_noise is not None:
            chain.loss(_SIG, scheme.process_noise)

    if scheme.channel_noise is not None:
        chain.loss(_SIG, scheme.channel_noise)
        chain.loss(_REF, scheme.channel_noise)

    R = np.eye(4)
    R[np.ix_(_REF, _REF)] = rotation(phi_ref)
    chain.push(R)

    if isinstance(scheme.combiner, BS):
        chain.push(_bs_matrix(scheme.combiner.mu, source_on_second_port=False))
    else:
        chain.push(two_mode_squeezer_matrix(scheme.combiner.r, pump))
    return chain


def detector_forms(efficiency: float = 1.0):
    """Quadratic forms ``(A, const)`` with ``i = y^T A y + const`` for i1, i2, i-, i+."""
    P1 = np.diag([1.0, 1.0, 0.0, 0.0]) * efficiency / 4.0
    P2 = np.diag([0.0, 0.0, 1.0, 1.0]) * efficiency / 4.0
    half = efficiency / 2.0
    return {
        "i1": (P1, -half),
        "i2": (P2, -half),
        "minus": (P1 - P2, 0.0),
        "plus": (P1 + P2, -2.0 * half),
    }
