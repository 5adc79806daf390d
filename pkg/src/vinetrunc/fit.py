"""Maximum-likelihood estimation of Gaussian pair-copula parameters.

Correlations are optimized as ``rho = tanh(psi)`` so the optimizer never
sees the boundary of (-1, 1); everything returned is in rho-space.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from . import bicop
from .bicop import Family
from .errors import DimensionMismatch, NonConvergence, StructureMismatch
from .structure import RVineStructure
from .vine import VineModel, _as_points, _edge, _log_density_terms, from_families

log = logging.getLogger(__name__)

RHO_MAX = 1.0 - 1e-6
PSI_MAX = float(np.arctanh(RHO_MAX))
MAX_ITER = 500


@dataclass(frozen=True)
class FitResult:
    model: VineModel
    loglik: float
    converged: bool
    iterations: int


def _fit_pair(a: np.ndarray, b: np.ndarray) -> float:
    x, y = special.ndtri(a), special.ndtri(b)

    def nll(psi):
        return -np.sum(bicop.gaussian_log_density_scores(np.tanh(psi), x, y))

    res = optimize.minimize_scalar(nll, bounds=(-PSI_MAX, PSI_MAX), method="bounded",
                                   options={"xatol": 1e-9, "maxiter": MAX_ITER})
    if not res.success:
        raise NonConvergence(f"pair fit failed: {res.message}")
    return float(np.tanh(res.x))


def sequential_estimate(structure: RVineStructure, families, data) -> VineModel:
    """Tree-by-tree estimates; pseudo-data for each tree come from the fitted trees below it."""
    template = from_families(structure, families)
    u, _ = _as_points(template, data)
    lvl = template.truncation_level
    cond = {(v, frozenset()): u[:, v - 1] for v in range(1, structure.d + 1)}
    theta = []
    pcs = [list(t) for t in template.pair_copulas]
    for i in range(1, lvl + 1):
        for pos, e in enumerate(structure.trees[i - 1]):
            j, k = e.conditioned
            D = frozenset(e.conditioning)
            a, b = cond[(j, D)], cond[(k, D)]
            if pcs[i - 1][pos].family is Family.GAUSSIAN:
                rho = _fit_pair(a, b)
                theta.append(rho)
                pcs[i - 1][pos] = bicop.PairCopulaSpec.gaussian(rho)
            if i < lvl:
                _, ha, hb = _edge(pcs[i - 1][pos], a, b, need_h=True)
                cond[(j, D | {k})] = ha
                cond[(k, D | {j})] = hb
    return template.with_parameters(theta)


def _central_grad(f, x, h=None):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        step = (np.finfo(float).eps ** (1 / 3)) * max(1.0, abs(x[i])) if h is None else h
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2 * step)
    return g


def fit_mle(structure: RVineStructure, families, data, start=None) -> FitResult:
    """Joint maximum-likelihood fit over all Gaussian edges.

    Parameters
    ----------
    structure : RVineStructure
    families : nested sequence of Family
        One family per edge, tree by tree; missing trees are independence.
    data : Dataset or array of shape (n, d)
    start : array_like, optional
        One correlation per Gaussian edge.  Defaults to the sequential
        estimate.

    Returns
    -------
    FitResult
    """
    template = from_families(structure, families)
    try:
        u, _ = _as_points(template, data)
    except StructureMismatch as exc:
        raise DimensionMismatch(str(exc)) from None
    p = template.n_params
    if start is None:
        theta0 = sequential_estimate(structure, families, u).parameters()
    else:
        theta0 = np.asarray(start, dtype=float).ravel()
        if theta0.size != p:
            raise DimensionMismatch(f"start needs {p} entries, got {theta0.size}")
        if np.any(~((theta0 > -1.0) & (theta0 < 1.0))):
            raise DimensionMismatch("start correlations must lie in (-1, 1)")
    theta0 = np.clip(theta0, -RHO_MAX, RHO_MAX)
    if p == 0:
        model = template
        return FitResult(model, float(np.sum(_log_density_terms(model, u))), True, 0)

    n = u.shape[0]

    def objective(psi):
        # mean negative log-likelihood keeps the gradient tolerance sample-size free
        rho = np.tanh(np.clip(psi, -PSI_MAX, PSI_MAX))
        return -np.sum(_log_density_terms(template.with_parameters(rho), u)) / n

    psi0 = np.arctanh(theta0)
    f0 = objective(psi0)
    res = optimize.minimize(objective, psi0, jac=lambda z: _central_grad(objective, z), method="BFGS",
                            options={"gtol": 1e-6, "xrtol": 1e-8, "maxiter": MAX_ITER})
    psi = np.clip(res.x, -PSI_MAX, PSI_MAX)
    f = objective(psi)
    if not f <= f0:
        psi, f = psi0, f0
    grad = _central_grad(objective, psi)
    converged = bool(res.success) or float(np.max(np.abs(grad))) <= 1e-6 * max(1.0, abs(f))
    if not converged:
        if res.nit >= MAX_ITER or float(np.max(np.abs(grad))) > 1e-4 * max(1.0, abs(f)):
            raise NonConvergence(f"joint fit stopped after {res.nit} iterations: {res.message}")
        log.debug("accepting fit with gradient %.2e: %s", np.max(np.abs(grad)), res.message)
        converged = True
    model = template.with_parameters(np.tanh(psi))
    return FitResult(model, float(np.sum(_log_density_terms(model, u))), converged, int(res.nit))


def fit_nested(structure: RVineStructure, families, data, smaller: FitResult,
               start=None) -> FitResult:
    """Fit a larger model so that its loglik cannot fall below a nested smaller fit.

    ``start`` is tried first (the simulation studies pass the true parameters);
    the smaller fit, extended with zeros on the extra edges, is used as the
    warm start whenever that fails to dominate.
    """
    big = from_families(structure, families)
    warm = _embed(smaller.model, big)
    fits = []
    if start is not None:
        fits.append(fit_mle(structure, families, data, start=start))
        if fits[-1].loglik >= smaller.loglik:
            return fits[-1]
    fits.append(fit_mle(structure, families, data, start=warm))
    return max(fits, key=lambda r: r.loglik)


def _embed(small: VineModel, big: VineModel) -> np.ndarray:
    theta = []
    for st, bt in zip(small.pair_copulas, big.pair_copulas):
        for sp, bp in zip(st, bt):
            if bp.family is Family.GAUSSIAN:
                theta.append(sp.rho if sp.family is Family.GAUSSIAN else 0.0)
            elif sp.family is Family.GAUSSIAN:
                raise StructureMismatch("the smaller model is not nested in the larger one")
    return np.array(theta)
