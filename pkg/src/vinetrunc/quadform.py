"""Distribution of a weighted sum of independent chi-square(1) variables.

``Q = sum_i w_i Z_i**2`` with real (possibly negative) weights.  The exact
distribution function comes from Imhof's inversion formula

    P(Q > x) = 1/2 + (1/pi) * int_0^inf sin(theta(t)) / (t * rho(t)) dt,
    theta(t) = 1/2 * sum_i arctan(w_i t) - x t / 2,
    rho(t)   = prod_i (1 + w_i**2 t**2) ** (1/4).

The integral is split at a cut point ``a``: the head ``[0, a]`` goes to
adaptive quadrature, the tail is rewritten as two Fourier integrals of the
smooth factors ``sin(phi)/(t rho)`` and ``cos(phi)/(t rho)`` (``phi`` being
the arctan sum) and handed to QUADPACK's QAWF routine, so no truncation of
the upper limit is needed.  When the oscillation in ``x`` is slow compared
with the head, the stretch up to a few cycles is integrated directly in
decade pieces first, which keeps QAWF's cycles well-conditioned.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy import integrate

from .errors import NumericalFailure

ABS_TOL = 1e-6
DROP_RTOL = 1e-10
# |x| below this (relative to max|w|) is treated as 0; P(|Q| <= eps) <= sqrt(4 eps / pi) ~ 1e-15
ZERO_X_RTOL = 1e-30


def effective_weights(weights) -> np.ndarray:
    """Weights with numerically-zero entries removed."""
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0:
        return w
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    scale = np.max(np.abs(w))
    if scale == 0.0:
        return w[:0]
    return w[np.abs(w) > DROP_RTOL * scale]


def _imhof_integral(x: float, w: np.ndarray) -> tuple[float, float]:
    def phi(t):
        return 0.5 * np.sum(np.arctan(w * t))

    def envelope(t):
        # log(1 + (w t)^2) without overflow for huge t
        return np.exp(-0.25 * np.sum(np.logaddexp(0.0, 2.0 * np.log(np.abs(w * t))))) / t

    def head(t):
        if t == 0.0:
            return 0.5 * (np.sum(w) - x)
        return np.sin(phi(t) - 0.5 * x * t) * envelope(t)

    scale = np.max(np.abs(w))
    a = 10.0 / scale
    if x != 0.0:
        a = max(a, 4.0 * np.pi / abs(x))
    a = min(a, 1e3 / scale)
    total, err = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            v, e = integrate.quad(head, 0.0, a, limit=2000, epsabs=1e-10, epsrel=1e-10)
            total, err = total + v, err + e
            if x == 0.0:
                v, e = integrate.quad(lambda t: np.sin(phi(t)) * envelope(t), a, np.inf,
                                      limit=2000, epsabs=1e-10, epsrel=1e-10)
                total, err = total + v, err + e
            else:
                omega = 0.5 * abs(x)
                sgn = np.sign(x)
                # slow oscillation: cover a few cycles directly, decade by decade
                stop = max(a, 4.0 * np.pi / omega)
                while a < stop:
                    b = min(10.0 * a, stop)
                    v, e = integrate.quad(head, a, b, limit=2000, epsabs=1e-12, epsrel=1e-10)
                    total, err, a = total + v, err + e, b
                # sin(phi - sgn*omega*t) = sin(phi)cos(omega t) - sgn*cos(phi)sin(omega t)
                v1, e1 = integrate.quad(lambda t: np.sin(phi(t)) * envelope(t), a, np.inf,
                                        weight="cos", wvar=omega, limlst=200, limit=2000,
                                        epsabs=1e-11)
                v2, e2 = integrate.quad(lambda t: np.cos(phi(t)) * envelope(t), a, np.inf,
                                        weight="sin", wvar=omega, limlst=200, limit=2000,
                                        epsabs=1e-11)
                total += v1 - sgn * v2
                err += e1 + e2
        except integrate.IntegrationWarning as exc:
            raise NumericalFailure(f"Imhof quadrature failed at x={x}: {exc}") from None
    return total, err


def sf(x: float, weights) -> float:
    """Upper tail ``P(Q > x)`` clamped to [0, 1]."""
    w = effective_weights(weights)
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("x must be finite")
    if w.size == 0:
        return 1.0 if x < 0.0 else 0.0
    if abs(x) <= ZERO_X_RTOL * np.max(np.abs(w)):
        x = 0.0
    val, err = _imhof_integral(x, w)
    if not np.isfinite(val) or err / np.pi > ABS_TOL:
        raise NumericalFailure(f"Imhof quadrature error estimate {err / np.pi:.2e} exceeds {ABS_TOL}")
    return float(min(1.0, max(0.0, 0.5 + val / np.pi)))


def cdf(x: float, weights) -> float:
    """``P(Q <= x)`` by Imhof inversion, clamped to [0, 1]."""
    w = effective_weights(weights)
    if w.size == 0:
        return 1.0 if float(x) >= 0.0 else 0.0
    return float(min(1.0, max(0.0, 1.0 - sf(x, w))))


def mc_cdf(x: float, weights, draws: int = 10**6, rng=None, chunk: int = 200_000) -> float:
    """Monte Carlo estimate of ``P(Q <= x)``; the verification route for :func:`cdf`."""
    if draws < 10**4:
        raise ValueError("use at least 10**4 draws")
    rng = np.random.default_rng(rng)
    w = np.asarray(weights, dtype=float).ravel()
    hits = 0
    left = int(draws)
    while left:
        m = min(chunk, left)
        z = rng.standard_normal((m, w.size))
        hits += int(np.count_nonzero((z * z) @ w <= x))
        left -= m
    return hits / draws
