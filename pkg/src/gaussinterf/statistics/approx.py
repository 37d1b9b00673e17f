"""Normal-approximation error analysis of the squeezing estimator.

Treats the fringe contrast ``c`` as normal, then ``c^2 - 4`` as normal, to
get closed-form mean and variance of ``q_hat = (c + sqrt(c^2 - 4)) / 2``,
and the Fisher information of a normal model for the difference current.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import mpmath
import numpy as np
from scipy import integrate, special

QUAD_ORDER = 64
QUAD_RTOL = 1e-8
TAIL_SIGMAS = 12.0


class ConvergenceError(RuntimeError):
    pass


def _check(V: float, mu: float) -> None:
    if V <= 1.0:
        raise ValueError(f"V={V} must exceed 1")
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu={mu} outside (0, 1)")


def c_moments(q: float, V: float, mu: float, N: float) -> tuple[float, float]:
    """Mean and variance of the fringe contrast ``c`` after ``N`` shots per setting."""
    _check(V, mu)
    if N < 1:
        raise ValueError("N must be >= 1")
    m = q + 1.0 / q
    var = (q * q + 1.0 / (q * q)) * (2.0 + V / ((1.0 - mu) * mu * (V - 1.0) ** 2)) / N
    return m, var


def shifted_square_moments(m: float, var: float) -> tuple[float, float]:
    """Mean and variance of ``c^2 - 4`` for normal ``c``."""
    return m * m + var - 4.0, 2.0 * var * (2.0 * m * m + var)


@dataclass(frozen=True)
class SqrtMoments:
    mean: float
    var: float
    negative_mass: float
    mean_u: Optional[float] = None


def _legendre_sqrt_mean(mean: float, sd: float, order: int) -> float:
    # E sqrt(max(Y, 0)) with y = t^2: the integrand 2 t^2 p(t^2) is smooth
    lo = max(0.0, mean - TAIL_SIGMAS * sd)
    hi = mean + TAIL_SIGMAS * sd
    if hi <= 0.0:
        return 0.0
    a, b = math.sqrt(lo), math.sqrt(hi)
    x, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (b - a) * x + 0.5 * (b + a)
    dens = np.exp(-0.5 * ((t * t - mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
    return float(0.5 * (b - a) * np.sum(w * 2.0 * t * t * dens))


def sqrt_mean_tricomi(mean: float, var: float) -> Optional[float]:
    """``E sqrt(Y)`` for normal ``Y`` via Tricomi's U function; ``None`` when ``E Y <= 0``.

    The real part of ``(1 - i) 2^{-1/4} Var^{1/4} U(-1/4, 1/2, -E^2 / (2 Var))``
    is the expectation of ``sqrt(max(Y, 0))`` for positive mean.
    """
    if mean <= 0.0:
        return None
    z = -(mean * mean) / (2.0 * var)
    u = complex(mpmath.hyperu(-0.25, 0.5, z))
    return float(((1 - 1j) / 2**0.25 * var**0.25 * u).real)


def sqrt_shifted_moments(m: float, var: float, order: int = QUAD_ORDER) -> SqrtMoments:
    """Mean and variance of ``sqrt(c^2 - 4)`` with ``c^2 - 4`` taken as normal.

    The mean is a Gauss-Legendre quadrature of ``sqrt(max(y, 0))`` in the
    variable ``sqrt(y)``, checked against doubled order; the Tricomi-U value
    is attached for comparison.  The variance is ``E(c^2 - 4) - (E sqrt)^2``.
    """
    if var <= 0.0:
        raise ValueError("variance must be positive")
    mean_y, var_y = shifted_square_moments(m, var)
    sd = math.sqrt(var_y)
    e1 = _legendre_sqrt_mean(mean_y, sd, order)
    e2 = _legendre_sqrt_mean(mean_y, sd, 2 * order)
    if abs(e1 - e2) > QUAD_RTOL * max(abs(e2), 1e-300):
        raise ConvergenceError(f"order {order} vs {2 * order}: {e1!r} != {e2!r}")
    neg = float(special.ndtr(-mean_y / sd))
    return SqrtMoments(e2, mean_y - e2 * e2, neg, sqrt_mean_tricomi(mean_y, var_y))


@dataclass(frozen=True)
class ApproxMoments:
    m: float
    sigma2: float
    sqrt_mean: float
    sqrt_var: float
    q_mean: float
    q_var: float


def qhat_normal_approx(q: float, V: float, mu: float, N: float) -> ApproxMoments:
    """Approximate mean and variance of ``q_hat`` (not unbiased, only asymptotically)."""
    m, s2 = c_moments(q, V, mu, N)
    sq = sqrt_shifted_moments(m, s2)
    return ApproxMoments(m, s2, sq.mean, sq.var, (m + sq.mean) / 2.0, (s2 + sq.var) / 2.0)


def minus_current_model(q: float, V: float, mu: float, N: float) -> tuple[float, float]:
    """Mean and variance of the averaged difference current at ``phi_ref = Phi``."""
    _check(V, mu)
    mean = (V - 1.0) / 2.0 * math.sqrt(mu * (1.0 - mu)) * (q + 1.0 / q)
    var = (q * q + 1.0 / (q * q)) * (2.0 * (1.0 - mu) * mu * (V - 1.0) ** 2 + V) / (4.0 * N)
    return mean, var


def fisher_information_normal(q: float, V: float, mu: float, N: float) -> float:
    """Fisher information on ``q`` of a normal model for the difference current.

    For ``x ~ N(m(q), v(q))``: ``I = m'^2 / v + v'^2 / (2 v^2)``.
    """
    _, var = minus_current_model(q, V, mu, N)
    dmean = (V - 1.0) / 2.0 * math.sqrt(mu * (1.0 - mu)) * (1.0 - 1.0 / (q * q))
    q2 = q * q + 1.0 / (q * q)
    dlogvar = (2.0 * q - 2.0 / q**3) / q2
    return dmean * dmean / var + 0.5 * dlogvar * dlogvar


def fisher_information_numeric(q: float, V: float, mu: float, N: float, h: float = 1e-5) -> float:
    """Same quantity by integrating the squared score, with the score from central differences."""
    mean, var = minus_current_model(q, V, mu, N)
    sd = math.sqrt(var)

    def logf(x, qq):
        m, v = minus_current_model(qq, V, mu, N)
        return -0.5 * math.log(2 * math.pi * v) - 0.5 * (x - m) ** 2 / v

    def integrand(x):
        score = (logf(x, q + h) - logf(x, q - h)) / (2 * h)
        return score * score * math.exp(logf(x, q))

    val, _ = integrate.quad(integrand, mean - 14 * sd, mean + 14 * sd, limit=200, epsabs=0, epsrel=1e-10)
    return val


def cramer_rao_bound(info: float) -> float:
    """Lower bound ``1 / I`` on the variance; ``inf`` when the information vanishes."""
    if info < 0:
        raise ValueError("Fisher information cannot be negative")
    return math.inf if info == 0 else 1.0 / info
