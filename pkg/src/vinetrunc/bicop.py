"""Bivariate Gaussian and independence copulas.

All functions are vectorized over their probability arguments.  Arguments
strictly inside (0, 1) are clamped to ``[EPS, 1 - EPS]`` before the normal
quantile is taken; exact boundary values raise :class:`DomainError`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import DomainError

EPS = 1e-12


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    INDEPENDENCE = "indep"

    @property
    def n_params(self) -> int:
        return 1 if self is Family.GAUSSIAN else 0


@dataclass(frozen=True)
class PairCopulaSpec:
    family: Family
    rho: Optional[float] = None

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam is Family.INDEPENDENCE:
            if self.rho is not None:
                raise DomainError("the independence copula takes no parameter")
        else:
            if self.rho is None or not np.isfinite(self.rho) or not -1.0 < self.rho < 1.0:
                raise DomainError(f"Gaussian correlation must lie in (-1, 1), got {self.rho}")
            object.__setattr__(self, "rho", float(self.rho))

    @classmethod
    def gaussian(cls, rho: float) -> "PairCopulaSpec":
        return cls(Family.GAUSSIAN, rho)

    @classmethod
    def independence(cls) -> "PairCopulaSpec":
        return cls(Family.INDEPENDENCE)

    @property
    def n_params(self) -> int:
        return self.family.n_params

    @property
    def tau(self) -> float:
        return 0.0 if self.family is Family.INDEPENDENCE else rho_to_tau(self.rho)

    def to_record(self) -> dict:
        return {"family": self.family.value, "parameter": self.rho}


INDEPENDENCE = PairCopulaSpec(Family.INDEPENDENCE)


def std_normal_cdf(x):
    """Standard normal distribution function."""
    return special.ndtr(x)


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open unit interval."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise DomainError("normal quantile requires probabilities strictly inside (0, 1)")
    out = special.ndtri(p)
    return out[()] if out.ndim == 0 else out


def _interior(u):
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("copula arguments must lie strictly inside (0, 1)")
    return np.clip(u, EPS, 1.0 - EPS)


def _scores(u):
    return special.ndtri(_interior(u))


def tau_to_rho(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(~((tau > -1.0) & (tau < 1.0))):
        raise DomainError("Kendall's tau must lie in (-1, 1)")
    out = np.sin(np.pi * tau / 2.0)
    return out[()] if out.ndim == 0 else out


def rho_to_tau(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(~((rho > -1.0) & (rho < 1.0))):
        raise DomainError("correlation must lie in (-1, 1)")
    out = 2.0 / np.pi * np.arcsin(rho)
    return out[()] if out.ndim == 0 else out


def gaussian_log_density_scores(rho, x, y):
    """Gaussian copula log-density expressed in normal scores ``x, y``."""
    r2 = rho * rho
    return -0.5 * np.log1p(-r2) + (2.0 * rho * (x * y) - r2 * (x * x + y * y)) / (2.0 * (1.0 - r2))


def log_density(spec: PairCopulaSpec, u, v):
    if spec.family is Family.INDEPENDENCE:
        u, v = _interior(u), _interior(v)
        return np.zeros(np.broadcast(u, v).shape)[()]
    x, y = _scores(u), _scores(v)
    return gaussian_log_density_scores(spec.rho, x, y)


def hfunc(spec: PairCopulaSpec, u, v):
    """Conditional distribution ``C(u | v)``."""
    if spec.family is Family.INDEPENDENCE:
        _interior(v)
        return _interior(u)[()]
    x, y = _scores(u), _scores(v)
    rho = spec.rho
    z = (x - rho * y) / np.sqrt(1.0 - rho * rho)
    return np.clip(special.ndtr(z), EPS, 1.0 - EPS)


def hinv(spec: PairCopulaSpec, w, v):
    """Inverse of :func:`hfunc` in its first argument."""
    if spec.family is Family.INDEPENDENCE:
        _interior(v)
        return _interior(w)[()]
    z, y = _scores(w), _scores(v)
    rho = spec.rho
    x = z * np.sqrt(1.0 - rho * rho) + rho * y
    return np.clip(special.ndtr(x), EPS, 1.0 - EPS)
