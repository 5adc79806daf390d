"""Truncated regular-vine copulas and Vuong model-selection tests."""
from .bicop import Family, PairCopulaSpec, rho_to_tau, tau_to_rho
from .fit import FitResult, fit_mle, fit_nested, sequential_estimate
from .klic import empirical_klic, mean_klic
from .structure import EdgeSpec, RVineStructure, cvine, dvine, pair_count, validate
from .vine import Dataset, VineModel, gaussian_from_taus, log_density, log_likelihood, sample, truncate
from .vuong import Decision, VuongReport, decide, vuong_nested, vuong_snn

__version__ = "0.1.0"
