"""Phase-space representation of Gaussian states and optical elements.

Quadratures are ordered ``(x1, p1, x2, p2, ...)`` and normalised so that the
vacuum has unit variance in each quadrature.  With that convention the mean
photon number of a mode is ``(<x^2> + <p^2> + m_x^2 + m_p^2 - 2) / 4``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
SYMPLECTIC_TOL = 1e-10
EIG_CLIP = 1e-12


def omega(modes: int) -> np.ndarray:
    """Block-diagonal symplectic form for ``modes`` modes."""
    return np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class GaussianState:
    """First and second moments of an M-mode Gaussian state.

    ``cov`` must be symmetric and positive semidefinite (up to ``PSD_TOL``
    relative to its largest entry).
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.size == 0 or mean.size % 2:
            raise ValueError("mean must have even, non-zero length")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {mean.size}")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
            raise ValueError("cov is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov)[0] < -PSD_TOL * max(1.0, np.max(np.abs(cov))):
            raise ValueError("cov is not positive semidefinite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def modes(self) -> int:
        return self.mean.size // 2

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.cov)[0])

    def is_physical(self, tol: float = PSD_TOL) -> bool:
        return self.min_eigenvalue() >= -tol


@dataclass(frozen=True)
class SymplecticTransform:
    """Affine phase-space map ``r -> matrix @ r + shift``."""

    matrix: np.ndarray
    shift: np.ndarray = None
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        n = matrix.shape[0]
        if matrix.shape != (n, n) or n % 2:
            raise ValueError("matrix must be square with even dimension")
        shift = np.zeros(n) if self.shift is None else np.asarray(self.shift, dtype=float).reshape(-1)
        if shift.size != n:
            raise ValueError("shift length does not match matrix")
        if self.check:
            om = omega(n // 2)
            err = np.max(np.abs(matrix @ om @ matrix.T - om))
            if err > SYMPLECTIC_TOL * max(1.0, np.max(np.abs(matrix)) ** 2):
                raise ValueError(f"matrix is not symplectic (max deviation {err:.2e})")
        matrix.setflags(write=False)
        shift.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "shift", shift)

    @property
    def modes(self) -> int:
        return self.matrix.shape[0] // 2

    def then(self, other: "SymplecticTransform") -> "SymplecticTransform":
        """The composition that applies ``self`` first, then ``other``."""
        if other.modes != self.modes:
            raise ValueError("cannot compose transforms of different arity")
        return SymplecticTransform(
            other.matrix @ self.matrix, other.matrix @ self.shift + other.shift
        )


@dataclass(frozen=True)
class Source:
    """Random-phase displaced thermal source.

    ``R`` is the thermal standard deviation and ``D`` the displacement
    magnitude, both in quadrature units.  The phase-averaged quadrature
    variance is ``V = R**2 + D**2 / 2``.
    """

    R: float
    D: float = 0.0
    allow_unphysical: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.R < 0 or self.D < 0:
            raise ValueError("R and D must be non-negative")
        if self.R < 1 and not self.allow_unphysical:
            raise ValueError(f"R={self.R} < 1 is below the vacuum level")

    @classmethod
    def thermal(cls, V: float) -> "Source":
        """Undisplaced thermal source with variance ``V``."""
        return cls(R=float(np.sqrt(V)), D=0.0)

    @classmethod
    def coherent(cls, V: float) -> "Source":
        """Random-phase coherent source (R = 1) with variance ``V``."""
        return cls(R=1.0, D=float(np.sqrt(2.0 * (V - 1.0))))

    @property
    def V(self) -> float:
        return self.R**2 + self.D**2 / 2.0

    @property
    def mean_photons(self) -> float:
        return (self.V - 1.0) / 2.0


@dataclass(frozen=True)
class NoiseChannel:
    """Beam splitter of transmittance ``T`` coupling in a thermal ancilla of variance ``Veps``."""

    T: float
    Veps: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.T <= 1.0:
            raise ValueError(f"transmittance T={self.T} outside [0, 1]")
        if self.Veps < 1.0:
            raise ValueError(f"ancilla variance Veps={self.Veps} below vacuum")

    @property
    def is_identity(self) -> bool:
        return self.T == 1.0


def vacuum(modes: int) -> GaussianState:
    if modes < 1:
        raise ValueError("need at least one mode")
    return GaussianState(np.zeros(2 * modes), np.eye(2 * modes))


def thermal(V: float) -> GaussianState:
    return GaussianState(np.zeros(2), V * np.eye(2))


def displaced_thermal(source: Source, theta: float) -> GaussianState:
    """Single-mode state of ``source`` for one realisation of its phase ``theta``."""
    mean = source.D * np.array([np.cos(theta), np.sin(theta)])
    return GaussianState(mean, source.R**2 * np.eye(2))


def beam_splitter(mu: float) -> SymplecticTransform:
    """Two-mode beam splitter with intensity transmittance ``mu``.

    Acts as ``(x1, x2) -> (sqrt(mu) x1 + sqrt(1-mu) x2, -sqrt(1-mu) x1 + sqrt(mu) x2)``
    on both quadratures, so ``mu = 1`` is the identity and ``mu = 0`` swaps the
    modes with a sign flip on the first output.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"beam splitter parameter mu={mu} outside [0, 1]")
    t, r = np.sqrt(mu), np.sqrt(1.0 - mu)
    return SymplecticTransform(np.kron(np.array([[t, r], [-r, t]]), np.eye(2)))


def two_mode_squeezer_matrix(r: float, phi) -> np.ndarray:
    """Matrix of ``a1 -> cosh(r) a1 + e^{i phi} sinh(r) a2^dagger`` (and 1 <-> 2).

    ``phi`` may be an array, in which case a stack of matrices is returned.
    """
    phi = np.asarray(phi, dtype=float)
    ch, sh = np.cosh(r), np.sinh(r)
    c, s = np.cos(phi), np.sin(phi)
    out = np.zeros(phi.shape + (4, 4))
    out[..., [0, 1, 2, 3], [0, 1, 2, 3]] = ch
    for a, b in ((0, 2), (2, 0)):
        out[..., a, b] = sh * c
        out[..., a, b + 1] = sh * s
        out[..., a + 1, b] = sh * s
        out[..., a + 1, b + 1] = -sh * c
    return out


def two_mode_squeezer(r: float, phi: float) -> SymplecticTransform:
    if r < 0:
        raise ValueError(f"two-mode squeezing r={r} must be non-negative")
    return SymplecticTransform(two_mode_squeezer_matrix(r, phi))


def phase_shift(phi: float) -> SymplecticTransform:
    return SymplecticTransform(rotation(phi))


def squeezer(w: float, alpha: float = 0.0) -> SymplecticTransform:
    """Single-mode squeezer scaling quadratures by ``e^w`` and ``e^-w``.

    ``alpha`` rotates the squeezing axis by ``alpha / 2``.
    """
    rot = rotation(alpha / 2.0)
    return SymplecticTransform(rot @ np.diag([np.exp(w), np.exp(-w)]) @ rot.T)


def displacement(d: float, beta: float = 0.0) -> SymplecticTransform:
    return SymplecticTransform(np.eye(2), d * np.array([np.cos(beta), np.sin(beta)]))


_ELEMENTS = {
    "beam_splitter": beam_splitter,
    "two_mode_squeezer": two_mode_squeezer,
    "phase_shift": phase_shift,
    "squeezer": squeezer,
    "displacement": displacement,
}


def make_element(kind: str, **params) -> SymplecticTransform:
    """Build an optical element by name, e.g. ``make_element("beam_splitter", mu=0.3)``."""
    try:
        factory = _ELEMENTS[kind]
    except KeyError:
        raise ValueError(f"unknown element {kind!r}; expected one of {sorted(_ELEMENTS)}") from None
    return factory(**params)


def _quadrature_indices(modes: Sequence[int], total: int) -> np.ndarray:
    modes = list(modes)
    if len(set(modes)) != len(modes):
        raise ValueError(f"mode indices {modes} are not distinct")
    for m in modes:
        if not 0 <= m < total:
            raise ValueError(f"mode index {m} out of range for {total} modes")
    return np.array([2 * m + k for m in modes for k in (0, 1)])


def embed(t: SymplecticTransform, modes: Sequence[int], total: int) -> SymplecticTransform:
    """Lift ``t`` to act on ``modes`` of a ``total``-mode system."""
    if len(modes) != t.modes:
        raise ValueError(f"transform acts on {t.modes} modes, got indices {list(modes)}")
    idx = _quadrature_indices(modes, total)
    matrix = np.eye(2 * total)
    matrix[np.ix_(idx, idx)] = t.matrix
    shift = np.zeros(2 * total)
    shift[idx] = t.shift
    return SymplecticTransform(matrix, shift, check=False)


def apply(t: SymplecticTransform, state: GaussianState, modes: Sequence[int] | None = None) -> GaussianState:
    """Propagate ``state`` through ``t`` acting on the listed modes."""
    if modes is None:
        modes = range(t.modes)
    full = embed(t, modes, state.modes)
    S = full.matrix
    return GaussianState(S @ state.mean + full.shift, S @ state.cov @ S.T)


def loss_channel(state: GaussianState, mode: int, channel: NoiseChannel) -> GaussianState:
    """Mix ``mode`` with a thermal ancilla on a beam splitter and trace the ancilla out."""
    idx = _quadrature_indices([mode], state.modes)
    scale = np.ones(2 * state.modes)
    scale[idx] = np.sqrt(channel.T)
    cov = state.cov * np.outer(scale, scale)
    cov[idx, idx] += (1.0 - channel.T) * channel.Veps
    return GaussianState(state.mean * scale, cov)


def tensor(*states: GaussianState) -> GaussianState:
    """Product state of independent subsystems."""
    mean = np.concatenate([s.mean for s in states])
    n = mean.size
    cov = np.zeros((n, n))
    i = 0
    for s in states:
        k = s.mean.size
        cov[i : i + k, i : i + k] = s.cov
        i += k
    return GaussianState(mean, cov)


def reduced(state: GaussianState, modes: Sequence[int]) -> GaussianState:
    idx = _quadrature_indices(modes, state.modes)
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


def mean_photon(state: GaussianState, mode: int = 0) -> float:
    idx = _quadrature_indices([mode], state.modes)
    m = state.mean[idx]
    return float((np.trace(state.cov[np.ix_(idx, idx)]) + m @ m - 2.0) / 4.0)


def psd_factor(cov: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Matrix ``L`` with ``L @ L.T == cov``.

    Falls back to an eigen-decomposition with eigenvalues clipped at
    ``EIG_CLIP`` when Cholesky fails on a near-singular covariance.
    """
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] < -tol * max(1.0, vals[-1]):
        raise np.linalg.LinAlgError(f"covariance is not PSD (min eigenvalue {vals[0]:.3e})")
    return vecs * np.sqrt(np.clip(vals, EIG_CLIP, None))


def sample_phase_point(state: GaussianState, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw phase-space points from the Wigner function of ``state``."""
    L = psd_factor(state.cov)
    if size is None:
        return state.mean + L @ rng.standard_normal(state.mean.size)
    return state.mean + rng.standard_normal((size, state.mean.size)) @ L.T
