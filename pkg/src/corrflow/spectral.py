"""Full Hermitian eigendecomposition, degeneracy audits and thermal weights.

Eigenvector phases are left as LAPACK returns them.  Every downstream
quantity depends only on |A_jk|^2, rho_jj and diagonal products A_kk B_kk,
which do not see the phase.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEGENERACY_TOL = 1e-8


class DegeneracyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Spectrum:
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    def residuals(self, H: np.ndarray) -> tuple[float, float]:
        """(max |HV - VE|, max |V^dag V - I|)."""
        V = self.vectors
        r1 = np.abs(H @ V - V * self.energies).max()
        r2 = np.abs(V.conj().T @ V - np.eye(self.dim)).max()
        return float(r1), float(r2)


@dataclass(frozen=True)
class ThermalEnsemble:
    """Diagonal ensemble in the energy eigenbasis.

    ``beta`` is None for an arbitrary stationary (non-Gibbs) ensemble built
    with :func:`diagonal_ensemble`.
    """

    energies: np.ndarray
    weights: np.ndarray
    beta: float | None
    log_z: float | None
    purity: float

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @property
    def is_thermal(self) -> bool:
        return self.beta is not None


@dataclass(frozen=True)
class DegeneracyReport:
    tol: float
    energy_collisions: int
    min_energy_spacing: float
    n_gaps: int
    distinct_gaps: int
    max_gap_multiplicity: int

    @property
    def energies_nondegenerate(self) -> bool:
        return self.energy_collisions == 0

    @property
    def gaps_nondegenerate(self) -> bool:
        return self.max_gap_multiplicity <= 1

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "energy_collisions": self.energy_collisions,
            "min_energy_spacing": self.min_energy_spacing,
            "n_gaps": self.n_gaps,
            "distinct_gaps": self.distinct_gaps,
            "max_gap_multiplicity": self.max_gap_multiplicity,
        }


def _hermiticity_error(M: np.ndarray) -> float:
    return float(np.abs(M - M.conj().T).max()) if M.size else 0.0


def diagonalize(H: np.ndarray, herm_tol: float = 1e-12) -> Spectrum:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.abs(H).max())) if H.size else 1.0
    if _hermiticity_error(H) > herm_tol * scale:
        raise ValueError("matrix is not Hermitian")
    try:
        energies, vectors = scipy.linalg.eigh(H, driver="evd", check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigensolver did not converge: {exc}") from exc
    return Spectrum(energies, vectors)


def _cluster_sorted(values: np.ndarray, tol: float) -> tuple[int, int]:
    """Number of clusters and largest cluster size of an ascending array."""
    if values.size == 0:
        return 0, 0
    breaks = np.flatnonzero(np.diff(values) > tol)
    sizes = np.diff(np.concatenate(([0], breaks + 1, [values.size])))
    return int(sizes.size), int(sizes.max())


def audit_degeneracies(s: Spectrum | np.ndarray, tol: float = DEGENERACY_TOL) -> DegeneracyReport:
    """Count energy collisions and gap-value multiplicities at tolerance ``tol``.

    Gaps are all E_j - E_k with j != k (d(d-1) of them), sorted and split into
    clusters wherever adjacent values differ by more than ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    E = np.sort(np.asarray(s.energies if isinstance(s, Spectrum) else s, dtype=float))
    d = E.size
    spacings = np.diff(E)
    collisions = int(np.count_nonzero(spacings <= tol))
    min_spacing = float(spacings.min()) if spacings.size else math.inf

    G = (E[:, None] - E[None, :])[~np.eye(d, dtype=bool)]
    G.sort(kind="stable")
    distinct, mult = _cluster_sorted(G, tol)
    del G
    return DegeneracyReport(tol, collisions, min_spacing, d * (d - 1), distinct, mult)


def to_eigenbasis(A: np.ndarray, s: Spectrum) -> np.ndarray:
    """Matrix elements A_jk = <E_j|A|E_k>."""
    A = np.asarray(A)
    if A.shape != (s.dim, s.dim):
        raise ValueError(f"operator shape {A.shape} does not match spectrum dimension {s.dim}")
    V = s.vectors
    out = V.conj().T @ (A @ V)
    # Symmetrize away rounding so downstream |A_jk|^2 is exactly symmetric.
    return 0.5 * (out + out.conj().T)


def thermal_ensemble(s: Spectrum, beta: float) -> ThermalEnsemble:
    beta = float(beta)
    if not math.isfinite(beta):
        raise ValueError(f"beta must be finite, got {beta}")
    if beta < 0:
        raise ValueError(f"negative beta ({beta}) is not supported")
    E = s.energies
    shifted = -beta * (E - E[0])
    w = np.exp(shifted)
    z_shift = math.fsum(w)
    w /= z_shift
    log_z = math.log(z_shift) - beta * float(E[0])
    return ThermalEnsemble(E, w, beta, log_z, math.fsum(w * w))


def diagonal_ensemble(s: Spectrum, weights: np.ndarray) -> ThermalEnsemble:
    """Stationary ensemble with arbitrary nonnegative eigenbasis weights."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (s.dim,):
        raise ValueError("weights must have one entry per eigenstate")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    w = w / math.fsum(w)
    return ThermalEnsemble(s.energies, w, None, None, math.fsum(w * w))


def density_matrix(ens: ThermalEnsemble, s: Spectrum) -> np.ndarray:
    """rho in the computational basis, V diag(rho_jj) V^dag."""
    V = s.vectors
    return (V * ens.weights) @ V.conj().T


def warn_if_degenerate(energies: np.ndarray, tol: float = DEGENERACY_TOL) -> bool:
    spacings = np.diff(np.sort(energies))
    if spacings.size and spacings.min() <= tol:
        n = int(np.count_nonzero(spacings <= tol))
        warnings.warn(
            f"{n} energy spacing(s) below {tol:g}; the diagonal-ensemble value "
            "is not the true infinite-time average",
            DegeneracyWarning,
            stacklevel=3,
        )
        return True
    return False
