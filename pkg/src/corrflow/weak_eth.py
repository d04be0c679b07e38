"""Diagonal matrix-element statistics and the late-time factorization error."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import ThermalEnsemble


@dataclass(frozen=True)
class DeviationStats:
    """Deviations Delta_k = A_kk - tr(rho A) and their rho-weighted tails."""

    deviations: np.ndarray
    expectation: float
    mean: float
    variance: float
    delta_grid: np.ndarray
    tail_mass: np.ndarray


def _expectation(ens: ThermalEnsemble, A: np.ndarray) -> float:
    return math.fsum(ens.weights * np.diagonal(A).real)


def diagonal_deviations(ens: ThermalEnsemble, A: np.ndarray, delta_grid=(0.05, 0.1, 0.2, 0.4),
                        tol: float = 1e-10) -> DeviationStats:
    grid = np.asarray(delta_grid, dtype=float)
    if grid.ndim != 1 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("delta grid must be positive and strictly ascending")
    rho = ens.weights
    expval = _expectation(ens, A)
    dev = np.diagonal(A).real - expval
    mean = math.fsum(rho * dev)
    if abs(mean) > tol:
        raise AssertionError(f"weighted mean deviation {mean:.3e} does not vanish")
    var = math.fsum(rho * dev**2)
    absdev = np.abs(dev)
    tails = np.array([math.fsum(rho[absdev >= d]) for d in grid])
    return DeviationStats(dev, expval, mean, var, grid, tails)


def factorization_error(ens: ThermalEnsemble, A: np.ndarray, B: np.ndarray) -> float:
    """sum_k rho_kk Delta_{k,A} Delta_{k,B}."""
    rho = ens.weights
    da = np.diagonal(A).real - _expectation(ens, A)
    db = np.diagonal(B).real - _expectation(ens, B)
    return math.fsum(rho * da * db)


@dataclass(frozen=True)
class FactorizationSplit:
    threshold: float
    inside: float
    outside: float
    outside_weight: float

    @property
    def total(self) -> float:
        return self.inside + self.outside


def factorization_split(ens: ThermalEnsemble, A: np.ndarray, B: np.ndarray,
                        threshold: float) -> FactorizationSplit:
    """Split the error over eigenstates with both |Delta_A|, |Delta_B| < threshold.

    ``outside_weight`` is the ensemble mass of the complement.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    rho = ens.weights
    da = np.diagonal(A).real - _expectation(ens, A)
    db = np.diagonal(B).real - _expectation(ens, B)
    inside = (np.abs(da) < threshold) & (np.abs(db) < threshold)
    terms = rho * da * db
    return FactorizationSplit(threshold, math.fsum(terms[inside]), math.fsum(terms[~inside]),
                              math.fsum(rho[~inside]))


def loglog_slope(sizes, values) -> float:
    """Least-squares slope of log|value| against log(size); report only."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.abs(np.asarray(values, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])
