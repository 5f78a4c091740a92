"""Effective sample size, autocorrelation, and energy-transition diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import ChainOutput
from .errors import ConfigurationError
from .phase import HamiltonianSystem


def autocorrelation(x: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Normalized autocorrelations rho_0..rho_K by direct sums (rho_0 == 1)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise ConfigurationError("need at least 2 values")
    if max_lag is None:
        max_lag = n - 1
    max_lag = min(max_lag, n - 1)
    centered = x - x.mean()
    c0 = float(np.dot(centered, centered)) / n
    if c0 == 0.0:
        return np.full(max_lag + 1, np.nan)
    rho = np.empty(max_lag + 1)
    rho[0] = 1.0
    for t in range(1, max_lag + 1):
        rho[t] = float(np.dot(centered[:-t], centered[t:])) / n / c0
    return rho


def _geyer_pair_sums(x: np.ndarray) -> list[float]:
    """Initial-monotone sequence of positive autocorrelation pair sums.

    Pairs (rho_{2k}, rho_{2k+1}) are accumulated while their sum stays
    positive, then forced non-increasing. Autocorrelations are computed
    lazily so a fast-mixing series never touches large lags.
    """
    n = x.size
    centered = x - x.mean()
    c0 = float(np.dot(centered, centered)) / n
    if c0 == 0.0:
        return []

    def rho(t: int) -> float:
        if t == 0:
            return 1.0
        if t >= n:
            return 0.0
        return float(np.dot(centered[:-t], centered[t:])) / n / c0

    pair_sums: list[float] = []
    k = 0
    while 2 * k < n:
        g = rho(2 * k) + rho(2 * k + 1)
        if g <= 0.0:
            break
        if pair_sums and g > pair_sums[-1]:
            g = pair_sums[-1]
        pair_sums.append(g)
        k += 1
    return pair_sums


def ess(x: np.ndarray) -> float:
    """Effective sample size with Geyer initial-monotone truncation.

    Returns n / (1 + 2 * sum of truncated autocorrelations), clipped to
    (0, n]. A zero-variance series has no defined ESS and returns NaN.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 10:
        raise ConfigurationError("need at least 10 draws to estimate ESS")
    centered = x - x.mean()
    if float(np.dot(centered, centered)) == 0.0:
        return math.nan
    pair_sums = _geyer_pair_sums(x)
    # tau = 1 + 2 sum_{t>=1} rho_t = 2 * sum_k (rho_{2k} + rho_{2k+1}) - 1
    tau = max(2.0 * sum(pair_sums) - 1.0, 1.0 / n)
    return min(n / tau, float(n))


@dataclass
class EnergyStats:
    """Variance of the energy series vs variance of its per-draw changes."""

    var_e: float
    var_de: float
    ratio: float


def energy_diagnostics(energies: np.ndarray) -> EnergyStats:
    """Compare how far each transition moves the energy to the marginal spread.

    var_de is the mean squared successive difference; ratio = var_de / var_e
    is about 2 for independent energies and shrinks when momentum
    resampling explores the energy distribution slowly. Degenerate series
    yield NaN markers.
    """
    e = np.asarray(energies, dtype=float)
    if e.size < 2:
        raise ConfigurationError("need at least 2 energies")
    var_e = float(np.var(e, ddof=1))
    var_de = float(np.mean(np.diff(e) ** 2))
    if var_e == 0.0:
        return EnergyStats(var_e=math.nan, var_de=math.nan, ratio=math.nan)
    return EnergyStats(var_e=var_e, var_de=var_de, ratio=var_de / var_e)


@dataclass
class DiagnosticsSummary:
    """Derived per-chain summary: moments, ESS, energy and cost statistics."""

    ess_per_param: np.ndarray
    autocorr_curves: list[np.ndarray]
    mean: np.ndarray
    variance: np.ndarray
    se: np.ndarray
    energy: EnergyStats
    ess_min: float
    ess_median: float
    ess_max: float
    total_leapfrog: int
    total_wasted_leapfrog: int
    total_cost_leapfrog: int
    total_grad_evals: int
    ess_per_transition: float
    ess_per_grad: float
    num_draws: int
    num_divergent: int

    def to_dict(self) -> dict:
        return {
            "ess_per_param": [_float_or_none(v) for v in self.ess_per_param],
            "mean": list(map(float, self.mean)),
            "variance": list(map(float, self.variance)),
            "se": [_float_or_none(v) for v in self.se],
            "energy": {
                "var_e": _float_or_none(self.energy.var_e),
                "var_de": _float_or_none(self.energy.var_de),
                "ratio": _float_or_none(self.energy.ratio),
            },
            "ess_min": _float_or_none(self.ess_min),
            "ess_median": _float_or_none(self.ess_median),
            "ess_max": _float_or_none(self.ess_max),
            "total_leapfrog": self.total_leapfrog,
            "total_wasted_leapfrog": self.total_wasted_leapfrog,
            "total_cost_leapfrog": self.total_cost_leapfrog,
            "total_grad_evals": self.total_grad_evals,
            "ess_per_transition": _float_or_none(self.ess_per_transition),
            "ess_per_grad": _float_or_none(self.ess_per_grad),
            "num_draws": self.num_draws,
            "num_divergent": self.num_divergent,
            "ess_truncation": "geyer_initial_monotone",
        }


def _float_or_none(v: float) -> float | None:
    v = float(v)
    return None if math.isnan(v) else v


def summarize(output: ChainOutput, sys: HamiltonianSystem) -> DiagnosticsSummary:
    """Pure post-processing of one chain output.

    Chains too short for the ESS estimator get NaN markers instead of an
    error so summaries of pilot runs still carry the other fields.
    """
    draws = output.draws
    n, dim = draws.shape
    if n >= 10:
        ess_values = np.array([ess(draws[:, j]) for j in range(dim)])
    else:
        ess_values = np.full(dim, math.nan)
    curves = []
    for j in range(dim):
        pair_sums = _geyer_pair_sums(draws[:, j])
        max_lag = max(2 * len(pair_sums) - 1, 1)
        curves.append(autocorrelation(draws[:, j], max_lag=max_lag))
    mean = draws.mean(axis=0)
    variance = draws.var(axis=0, ddof=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        se = np.sqrt(variance / ess_values)
    all_nan = bool(np.all(np.isnan(ess_values)))
    total_leap = int(output.n_leapfrog.sum())
    total_wasted = int(output.wasted_leapfrog.sum())
    median_ess = math.nan if all_nan else float(np.nanmedian(ess_values))
    return DiagnosticsSummary(
        ess_per_param=ess_values,
        autocorr_curves=curves,
        mean=mean,
        variance=variance,
        se=se,
        energy=energy_diagnostics(output.energy),
        ess_min=math.nan if all_nan else float(np.nanmin(ess_values)),
        ess_median=median_ess,
        ess_max=math.nan if all_nan else float(np.nanmax(ess_values)),
        total_leapfrog=total_leap,
        total_wasted_leapfrog=total_wasted,
        total_cost_leapfrog=total_leap + total_wasted,
        total_grad_evals=output.total_grad_evals,
        ess_per_transition=median_ess / n,
        ess_per_grad=median_ess / output.total_grad_evals,
        num_draws=n,
        num_divergent=int(output.divergent.sum()),
    )
