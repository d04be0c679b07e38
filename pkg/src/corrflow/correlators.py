"""Two-point functions from spectral data.

Phase convention (used everywhere): C(t) = sum_jk M_jk exp(-i (E_j - E_k) t),
with pair weights M_jk = rho_jj A_jk B_kj for the plain correlator.

Grid evaluation builds the pair-weight matrix once and then evaluates time
blocks as two real matrix products (or one complex product for complex
weights), so each time point costs O(d^2) in BLAS.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_trapezoid

from .spectral import (
    DEGENERACY_TOL,
    DegeneracyReport,
    ThermalEnsemble,
    audit_degeneracies,
    warn_if_degenerate,
)

KINDS = ("plain", "symmetric", "kubo")
KUBO_DEGENERATE_TOL = 1e-12
BLOCK = 1024


def _check_dims(ens: ThermalEnsemble, *ops: np.ndarray) -> None:
    for op in ops:
        if op.shape != (ens.dim, ens.dim):
            raise ValueError(f"operator shape {op.shape} does not match ensemble dimension {ens.dim}")


def kubo_pair_weights(ens: ThermalEnsemble, A: np.ndarray, tol: float = KUBO_DEGENERATE_TOL) -> np.ndarray:
    """Unnormalized Kubo weights divided by beta.

    For E_j != E_k this is (rho_k - rho_j) / (beta (E_j - E_k)) |A_jk|^2; pairs
    with |E_j - E_k| < ``tol`` take the analytic limit rho_j |A_jk|^2.  The
    common 1/beta keeps the weights finite at beta = 0 and cancels on
    normalization.  Evaluated as max(rho_j, rho_k) (1 - e^{-x}) / x with
    x = beta |E_j - E_k| >= 0, which cannot overflow.
    """
    if not ens.is_thermal:
        raise ValueError("Kubo correlation needs a thermal (Gibbs) ensemble")
    _check_dims(ens, A)
    E = ens.energies
    rho = ens.weights
    G = np.abs(E[:, None] - E[None, :])
    x = ens.beta * G
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.where(x > 0, -np.expm1(-x) / x, 1.0)
    phi[G < tol] = 1.0
    w = np.maximum(rho[:, None], rho[None, :]) * phi
    w *= np.abs(A) ** 2
    return w


def pair_weights(ens: ThermalEnsemble, A: np.ndarray, B: np.ndarray | None = None, kind: str = "plain") -> np.ndarray:
    """Matrix M with C(t) = sum_jk M_jk exp(-i (E_j - E_k) t).

    ``plain`` gives the unnormalized tr(rho A(t) B).  ``symmetric`` and
    ``kubo`` are autocorrelations of A; the Kubo weights are normalized so
    that C_Kubo(0) = 1.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown correlation kind {kind!r}")
    _check_dims(ens, A)
    rho = ens.weights
    if kind == "plain":
        B = A if B is None else B
        _check_dims(ens, B)
        return rho[:, None] * A * B.T
    if B is not None and B is not A:
        raise ValueError(f"{kind} correlation is defined for a single observable")
    if kind == "symmetric":
        return 0.5 * (rho[:, None] + rho[None, :]) * np.abs(A) ** 2
    w = kubo_pair_weights(ens, A)
    total = math.fsum(w.ravel())
    if total <= 0:
        raise ValueError("Kubo normalization vanishes")
    return w / total


def _evaluate(M: np.ndarray, E: np.ndarray, times: np.ndarray, real_only: bool) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty(times.size, dtype=float if real_only else complex)
    complex_weights = np.iscomplexobj(M)
    Mt = np.ascontiguousarray(M.T)
    for start in range(0, times.size, BLOCK):
        tb = times[start:start + BLOCK]
        ang = np.outer(tb, E)
        _accumulate(out, start, np.cos(ang), np.sin(ang), Mt, complex_weights, real_only)
    return out


def _accumulate(out, start, c, s, Mt, complex_weights, real_only):
    n = c.shape[0]
    if complex_weights:
        P = c + 1j * s
        Y = P @ Mt
        vals = np.einsum("tj,tj->t", P.conj(), Y)
        out[start:start + n] = vals.real if real_only else vals
        return
    MC = c @ Mt
    MS = s @ Mt
    re = np.einsum("tj,tj->t", c, MC) + np.einsum("tj,tj->t", s, MS)
    if real_only:
        out[start:start + n] = re
    else:
        im = np.einsum("tj,tj->t", c, MS) - np.einsum("tj,tj->t", s, MC)
        out[start:start + n] = re + 1j * im


def _evaluate_grid(M: np.ndarray, E: np.ndarray, dt: float, n_points: int, real_only: bool) -> np.ndarray:
    """Evaluate on t_k = k dt by block phase accumulation.

    The within-block phases exp(i E m dt) are tabulated once; each block is
    rotated by exp(i E t0) evaluated directly at its start time, so rounding
    does not build up across blocks.
    """
    out = np.empty(n_points, dtype=float if real_only else complex)
    complex_weights = np.iscomplexobj(M)
    Mt = np.ascontiguousarray(M.T)
    m = np.arange(min(BLOCK, n_points)) * dt
    base_c = np.cos(np.outer(m, E))
    base_s = np.sin(np.outer(m, E))
    for start in range(0, n_points, BLOCK):
        n = min(BLOCK, n_points - start)
        t0 = start * dt
        c0 = np.cos(E * t0)
        s0 = np.sin(E * t0)
        c = base_c[:n] * c0 - base_s[:n] * s0
        s = base_s[:n] * c0 + base_c[:n] * s0
        _accumulate(out, start, c, s, Mt, complex_weights, real_only)
    return out


def correlation_trace(ens: ThermalEnsemble, A: np.ndarray, B: np.ndarray, t):
    """tr(rho A(t) B) = sum_jk rho_jj A_jk B_kj exp(-i (E_j - E_k) t)."""
    M = pair_weights(ens, A, B, "plain")
    vals = _evaluate(M, ens.energies, t, real_only=False)
    return vals[0] if np.ndim(t) == 0 else vals


def symmetric_correlation(ens: ThermalEnsemble, A: np.ndarray, t):
    """(1/2) tr(rho {A, A(t)}), the real part of the autocorrelation."""
    M = pair_weights(ens, A, kind="symmetric")
    vals = _evaluate(M, ens.energies, t, real_only=True)
    return vals[0] if np.ndim(t) == 0 else vals


def kubo_correlation(ens: ThermalEnsemble, A: np.ndarray, t):
    """Kubo correlation of A, normalized to 1 at t = 0."""
    M = pair_weights(ens, A, kind="kubo")
    vals = _evaluate(M, ens.energies, t, real_only=True)
    return vals[0] if np.ndim(t) == 0 else vals


def infinite_time_average(ens: ThermalEnsemble, A: np.ndarray, B: np.ndarray | None = None,
                          tol: float = DEGENERACY_TOL) -> float:
    """Diagonal-ensemble value sum_k rho_kk A_kk B_kk.

    This equals the infinite-time average only for a nondegenerate spectrum;
    a :class:`~corrflow.spectral.DegeneracyWarning` is issued otherwise.
    """
    B = A if B is None else B
    _check_dims(ens, A, B)
    warn_if_degenerate(ens.energies, tol)
    terms = ens.weights * np.diagonal(A) * np.diagonal(B)
    return math.fsum(terms.real)


@dataclass(frozen=True)
class CorrelationSeries:
    kind: str
    dt: float
    values: np.ndarray
    c_infinity: float
    c_zero: float
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt

    def __len__(self):
        return self.values.size


def correlation_series(ens: ThermalEnsemble, A: np.ndarray, B: np.ndarray | None = None, *,
                       kind: str = "plain", dt: float, t_max: float) -> CorrelationSeries:
    """Evaluate a correlator on the grid t_k = k dt, k = 0..round(t_max/dt)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_max < dt:
        raise ValueError("t_max must be at least dt")
    n_points = int(round(t_max / dt)) + 1
    M = pair_weights(ens, A, B, kind)
    real_only = kind != "plain"
    values = _evaluate_grid(M, ens.energies, dt, n_points, real_only)
    c_inf = math.fsum(np.diagonal(M).real)
    c0 = math.fsum(M.real.ravel())
    return CorrelationSeries(kind, float(dt), values, c_inf, c0)


def running_time_average(series: CorrelationSeries, method: str = "running",
                         square: str = "modulus") -> np.ndarray:
    """Cumulative time average of the squared deviation from ``c_infinity``.

    ``method="running"`` is the grid mean (1/(k+1)) sum_{i<=k} dev_i;
    ``"trapezoid"`` is (1/t_k) times the cumulative trapezoid integral, with
    dev_0 at k = 0.  ``square="modulus"`` uses |C - C_inf|^2, ``"signed"``
    the real part of (C - C_inf)^2.
    """
    if len(series) == 0:
        raise ValueError("empty series")
    diff = series.values - series.c_infinity
    if square == "modulus":
        dev = np.abs(diff) ** 2
    elif square == "signed":
        dev = (diff * diff).real
    else:
        raise ValueError(f"unknown square mode {square!r}")
    if method == "running":
        return np.cumsum(dev) / np.arange(1, dev.size + 1)
    if method == "trapezoid":
        out = np.empty_like(dev)
        out[0] = dev[0]
        if dev.size > 1:
            integral = cumulative_trapezoid(dev, dx=series.dt)
            out[1:] = integral / (np.arange(1, dev.size) * series.dt)
        return out
    raise ValueError(f"unknown averaging method {method!r}")


@dataclass(frozen=True)
class FluctuationReport:
    sigma_c_squared_exact: float
    theorem2_bound: float
    time_domain_estimate: float | None
    horizon: float | None
    gaps_nondegenerate: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def operator_norm(A: np.ndarray) -> float:
    """Spectral norm of a Hermitian matrix."""
    d = A.shape[0]
    lo = scipy.linalg.eigvalsh(A, subset_by_index=[0, 0])[0]
    hi = scipy.linalg.eigvalsh(A, subset_by_index=[d - 1, d - 1])[0]
    return float(max(abs(lo), abs(hi)))


def fluctuation_variance(ens: ThermalEnsemble, A: np.ndarray, B: np.ndarray | None = None, *,
                         horizon: float | None = None, dt: float = 0.01,
                         method: str = "running",
                         audit: DegeneracyReport | None = None,
                         norms: tuple[float, float] | None = None) -> FluctuationReport:
    """Exact late-time variance, its purity bound and an optional time-domain check.

    The exact value is sum_{j!=k} rho_j rho_k A_jk A_kj B_jk B_kj, valid for
    nondegenerate gaps (reported in ``gaps_nondegenerate``).  The time-domain
    estimate is the grid average of (C(t) - C_inf)^2 over [0, horizon].
    """
    B = A if B is None else B
    _check_dims(ens, A, B)
    rho = ens.weights
    off = ~np.eye(ens.dim, dtype=bool)
    terms = (rho[:, None] * rho[None, :]) * (A * A.T) * (B * B.T)
    exact = math.fsum(terms[off].real)

    if norms is None:
        na = operator_norm(A)
        nb = na if B is A else operator_norm(B)
    else:
        na, nb = norms
    max_off = float(np.abs(A.T * B)[off].max()) if ens.dim > 1 else 0.0
    bound = na * nb * max_off * ens.purity

    if audit is None:
        audit = audit_degeneracies(ens.energies)

    estimate = None
    if horizon is not None:
        series = correlation_series(ens, A, B, kind="plain", dt=dt, t_max=horizon)
        estimate = float(running_time_average(series, method=method, square="signed")[-1])
    return FluctuationReport(exact, bound, estimate, horizon, audit.gaps_nondegenerate)
