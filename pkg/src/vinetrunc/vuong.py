"""Vuong likelihood-ratio model selection tests for (truncated) vine copulas.

Two variants are provided:

* ``vuong_nested`` for a smaller model G nested in a larger model F.  The
  statistic ``2 * LR`` is referred to a weighted sum of chi-square(1)
  variables whose weights are the eigenvalues of the block matrix ``W``
  built from empirical Hessians and score cross-products of both models.
* ``vuong_snn`` for strictly non-nested comparisons, using the standardized
  mean of per-observation log-density differences against N(0, 1).

All models are unconditional copula models; derivatives are taken with
respect to the Gaussian-edge correlations by central finite differences.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from . import quadform
from .bicop import Family
from .errors import NotNested, NumericalFailure, SingularInformation, ZeroVariance
from .vine import VineModel, _as_points, _log_density_terms

_EPS = np.finfo(float).eps
COND_MAX = 1e12
IMAG_RTOL = 1e-8


class TestKind(str, enum.Enum):
    NESTED = "nested"
    SNN = "snn"


class Decision(str, enum.Enum):
    PREFER_LARGER = "PreferLarger"
    PREFER_SMALLER = "PreferSmaller"
    INDISTINGUISHABLE = "Indistinguishable"


@dataclass(frozen=True)
class InfoMatrices:
    A_hat: np.ndarray
    B_hat: np.ndarray


@dataclass(frozen=True, eq=False)
class VuongReport:
    """Outcome of one Vuong test.

    For the SNN test, "larger" in :class:`Decision` refers to the first
    model passed (F) and "smaller" to the second (G).
    """

    kind: TestKind
    lr: float
    n: int
    statistic: float
    p_value: float
    eigenvalues: Optional[np.ndarray] = None
    omega_hat: Optional[float] = None
    degenerate: bool = False
    per_point_terms: np.ndarray = field(default=None, repr=False)

    def to_dict(self, alpha: float | None = None) -> dict:
        out = {"kind": self.kind.value, "lr": self.lr, "n": self.n, "statistic": self.statistic,
               "p_value": self.p_value}
        if self.kind is TestKind.NESTED:
            out["eigenvalues"] = [float(v) for v in self.eigenvalues]
            out["degenerate"] = self.degenerate
        else:
            out["omega_hat"] = self.omega_hat
        if alpha is not None:
            out["alpha"] = alpha
            out["decision"] = decide(self, alpha).value
        return out


def _per_point(model: VineModel, u: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return _log_density_terms(model.with_parameters(theta), u)


def score_matrix(model: VineModel, data) -> np.ndarray:
    """Per-observation gradients of the log-density, shape (n, p)."""
    u, _ = _as_points(model, data)
    theta = model.parameters()
    S = np.empty((u.shape[0], theta.size))
    for j in range(theta.size):
        h = np.sqrt(_EPS) * max(1.0, abs(theta[j]))
        tp, tm = theta.copy(), theta.copy()
        tp[j] += h
        tm[j] -= h
        S[:, j] = (_per_point(model, u, tp) - _per_point(model, u, tm)) / (2.0 * h)
    return S


def hessian_mean(model: VineModel, data) -> np.ndarray:
    """Finite-difference Hessian of the average log-density (symmetrized)."""
    u, _ = _as_points(model, data)
    theta = model.parameters()
    p = theta.size
    H = np.empty((p, p))

    def f(t):
        return float(np.mean(_per_point(model, u, t)))

    steps = _EPS ** (1.0 / 3.0) * np.maximum(1.0, np.abs(theta))
    for j in range(p):
        for k in range(j, p):
            acc = 0.0
            for sj, sk, sign in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                t = theta.copy()
                t[j] += sj * steps[j]
                t[k] += sk * steps[k]
                acc += sign * f(t)
            H[j, k] = H[k, j] = acc / (4.0 * steps[j] * steps[k])
    return H


def info_matrices(model: VineModel, data) -> InfoMatrices:
    """Empirical Hessian mean ``A_hat`` and score outer-product mean ``B_hat``."""
    S = score_matrix(model, data)
    A = hessian_mean(model, data)
    A = 0.5 * (A + A.T)
    B = S.T @ S / S.shape[0]
    if A.size:
        if not np.all(np.isfinite(A)) or np.linalg.cond(A) > COND_MAX:
            raise SingularInformation("empirical Hessian is not invertible")
    return InfoMatrices(A, 0.5 * (B + B.T))


def cross_matrix(model_f: VineModel, model_g: VineModel, data) -> np.ndarray:
    """Score cross-product mean ``B_fg`` of shape (p, q)."""
    Sf, Sg = score_matrix(model_f, data), score_matrix(model_g, data)
    return Sf.T @ Sg / Sf.shape[0]


def _right_inverse(B, A):
    # B @ inv(A) without forming inv(A)
    if A.size == 0:
        return np.zeros((B.shape[0], 0))
    try:
        return np.linalg.solve(A.T, B.T).T
    except np.linalg.LinAlgError:
        raise SingularInformation("information matrix is singular") from None


def w_matrix(A_f, B_f, A_g, B_g, B_fg) -> tuple[np.ndarray, np.ndarray]:
    """Assemble ``W`` and return it with its (real) eigenvalues, sorted descending.

    Raises
    ------
    SingularInformation
        ``A_f`` or ``A_g`` cannot be inverted.
    NumericalFailure
        The eigenvalues carry non-negligible imaginary parts.
    """
    A_f, B_f, A_g, B_g = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A_f, B_f, A_g, B_g))
    p, q = A_f.shape[0] if A_f.size else 0, A_g.shape[0] if A_g.size else 0
    B_fg = np.asarray(B_fg, dtype=float).reshape(p, q)
    W = np.zeros((p + q, p + q))
    W[:p, :p] = -_right_inverse(B_f.reshape(p, p), A_f.reshape(p, p))
    W[:p, p:] = -_right_inverse(B_fg, A_g.reshape(q, q))
    W[p:, :p] = _right_inverse(B_fg.T, A_f.reshape(p, p))
    W[p:, p:] = _right_inverse(B_g.reshape(q, q), A_g.reshape(q, q))
    if p + q == 0:
        return W, np.zeros(0)
    scale = np.linalg.norm(W)
    if np.linalg.norm(W @ W) <= 1e-10 * (1.0 + scale * scale):
        # nilpotent: every eigenvalue is exactly zero
        return W, np.zeros(p + q)
    lam = np.linalg.eigvals(W)
    radius = float(np.max(np.abs(lam)))
    if np.max(np.abs(lam.imag)) > IMAG_RTOL * (1.0 + radius):
        raise NumericalFailure(f"W has complex eigenvalues (max |Im| = {np.max(np.abs(lam.imag)):.3g})")
    return W, np.sort(lam.real)[::-1]


def check_nested(small: VineModel, large: VineModel) -> None:
    if small.structure != large.structure:
        raise NotNested("models must share one vine structure")
    for st, lt in zip(small.pair_copulas, large.pair_copulas):
        for sp, lp in zip(st, lt):
            if sp.family is Family.GAUSSIAN and lp.family is not Family.GAUSSIAN:
                raise NotNested("every dependent edge of the smaller model must be dependent in the larger one")


def vuong_nested(model_g: VineModel, model_f: VineModel, data) -> VuongReport:
    """Nested test of G (smaller) against F (larger).

    Both models should be maximum-likelihood fits on ``data``, with F
    warm-started from G so that ``LR >= 0``.
    """
    check_nested(model_g, model_f)
    u, _ = _as_points(model_f, data)
    lf, lg = _log_density_terms(model_f, u), _log_density_terms(model_g, u)
    m = lf - lg
    lr = float(np.sum(lf) - np.sum(lg))
    stat = 2.0 * lr
    info_f, info_g = info_matrices(model_f, u), info_matrices(model_g, u)
    B_fg = cross_matrix(model_f, model_g, u)
    _, lam = w_matrix(info_f.A_hat, info_f.B_hat, info_g.A_hat, info_g.B_hat, B_fg)
    if lam.size == 0 or quadform.effective_weights(lam).size == 0:
        return VuongReport(TestKind.NESTED, lr, u.shape[0], stat, 1.0, lam, degenerate=True,
                           per_point_terms=m)
    p_value = quadform.sf(stat, lam)
    return VuongReport(TestKind.NESTED, lr, u.shape[0], stat, p_value, lam, per_point_terms=m)


def snn_from_terms(m) -> VuongReport:
    """SNN statistic ``sqrt(n) * mean(m) / omega_hat`` from per-point log-density differences."""
    m = np.asarray(m, dtype=float).ravel()
    n = m.size
    mbar = float(np.mean(m))
    omega2 = float(np.mean(m * m)) - mbar * mbar
    omega = float(np.sqrt(max(omega2, 0.0)))
    if omega < 1e-12:
        raise ZeroVariance("per-observation log-density differences have zero variance")
    nu = np.sqrt(n) * mbar / omega
    p_value = float(min(1.0, 2.0 * special.ndtr(-abs(nu))))
    return VuongReport(TestKind.SNN, float(np.sum(m)), n, float(nu), p_value, omega_hat=omega,
                       per_point_terms=m)


def vuong_snn(model_f: VineModel, model_g: VineModel, data) -> VuongReport:
    """Strictly non-nested test; positive statistics favour F."""
    u, _ = _as_points(model_f, data)
    m = _log_density_terms(model_f, u) - _log_density_terms(model_g, u)
    return snn_from_terms(m)


def decide(report: VuongReport, alpha: float = 0.05) -> Decision:
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if report.kind is TestKind.NESTED:
        return Decision.PREFER_LARGER if report.p_value < alpha else Decision.PREFER_SMALLER
    crit = float(special.ndtri(1.0 - alpha / 2.0))
    if report.statistic > crit:
        return Decision.PREFER_LARGER
    if report.statistic < -crit:
        return Decision.PREFER_SMALLER
    return Decision.INDISTINGUISHABLE
