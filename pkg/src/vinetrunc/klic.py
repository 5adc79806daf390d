"""Empirical Kullback-Leibler information criterion against a known true model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import EmptyInput
from .vine import VineModel, _as_points, _log_density_terms


@dataclass(frozen=True)
class KlicRecord:
    rep: int
    model_tag: str
    value: float


def empirical_klic(true_model: VineModel, fitted_model: VineModel, data) -> float:
    """Average log-density of the true model minus that of the fitted model (nats per observation).

    Finite-sample values can be negative.
    """
    u, _ = _as_points(true_model, data)
    return float(np.mean(_log_density_terms(true_model, u)) - np.mean(_log_density_terms(fitted_model, u)))


def mean_klic(records: Iterable[Union[KlicRecord, float]]) -> float:
    values = [r.value if isinstance(r, KlicRecord) else float(r) for r in records]
    if not values:
        raise EmptyInput("mean_klic needs at least one record")
    return float(np.mean(values))
