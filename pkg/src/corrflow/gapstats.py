"""Gap-weight distributions and their window statistics.

A distribution is a flat, gap-sorted list of (G_alpha, p_alpha) pairs with
G_alpha = E_j - E_k.  The central quantity is

    xi(x) = max_lambda sum_{alpha : G_alpha in [G_lambda, G_lambda + x]} p_alpha,

the heaviest closed window of width x anchored at an existing gap, from
which a(eps) = xi(eps) sigma_G / eps and delta(eps) = xi(eps) follow.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numba
import numpy as np

from .correlators import kubo_pair_weights
from .spectral import ThermalEnsemble

KINDS = ("plain_v", "symmetric_v", "kubo_w")
SWEEP_POINTS = 200
SWEEP_RANGE = (1e-4, 10.0)
MC_BLOCK = 1024
BOUND_PREFACTOR = 3.0 * math.pi


# ---------------------------------------------------------------- kernels

@numba.njit(cache=True)
def _kahan_prefix(p):
    out = np.empty(p.size + 1)
    out[0] = 0.0
    s = 0.0
    comp = 0.0
    for i in range(p.size):
        y = p[i] - comp
        t = s + y
        comp = (t - s) - y
        s = t
        # compensation can step back by an ulp; keep window sums monotone
        out[i + 1] = s if s > out[i] else out[i]
    return out


@numba.njit(cache=True)
def _xi_sweep(g, prefix, x):
    n = g.size
    j = 0
    best = 0.0
    for i in range(n):
        if j < i:
            j = i
        lim = g[i] + x
        while j < n and g[j] <= lim:
            j += 1
        v = prefix[j] - prefix[i]
        if v > best:
            best = v
    return best


@numba.njit(cache=True)
def _uniform_average(gaps, probs, T, n_steps):
    """Trapezoid average of |sum_a p_a exp(i G_a t)|^2 over [0, T]."""
    h = T / n_steps
    m = gaps.size
    step = np.empty(m, dtype=np.complex128)
    z = np.empty(m, dtype=np.complex128)
    for a in range(m):
        step[a] = complex(math.cos(gaps[a] * h), math.sin(gaps[a] * h))
        z[a] = 1.0
    total = 0.0
    for k in range(n_steps + 1):
        if k > 0 and k % 512 == 0:
            # resynchronize the phase recurrence
            t = k * h
            for a in range(m):
                z[a] = complex(math.cos(gaps[a] * t), math.sin(gaps[a] * t))
        re = 0.0
        im = 0.0
        for a in range(m):
            re += probs[a] * z[a].real
            im += probs[a] * z[a].imag
        f = re * re + im * im
        total += 0.5 * f if (k == 0 or k == n_steps) else f
        for a in range(m):
            z[a] *= step[a]
    return total * h / T


# ----------------------------------------------------------- distributions

@dataclass(frozen=True, eq=False)
class GapDistribution:
    """Sorted (gap, weight) pairs.

    ``total_weight`` is the mass held in ``weights``; ``discarded_weight`` the
    mass removed by a weight cutoff, and ``diagonal_weight`` the j = k mass
    removed when built with ``diagonal="drop"``.  The three sum to 1.
    Moments are taken over the stored entries without renormalization, so a
    dropped diagonal (all at G = 0) leaves mu_G and sigma_G unchanged.
    """

    kind: str
    gaps: np.ndarray
    weights: np.ndarray
    total_weight: float
    discarded_weight: float = 0.0
    diagonal_weight: float = 0.0
    c_zero: float = 1.0

    def __post_init__(self):
        if self.gaps.shape != self.weights.shape or self.gaps.ndim != 1:
            raise ValueError("gaps and weights must be 1-d arrays of equal length")
        if self.gaps.size and np.any(np.diff(self.gaps) < 0):
            raise ValueError("gaps must be sorted ascending")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")

    @classmethod
    def from_pairs(cls, gaps, weights, kind: str = "plain_v") -> "GapDistribution":
        """Distribution from raw pairs; sorts by gap and keeps weights as given."""
        g = np.asarray(gaps, dtype=float).ravel()
        p = np.asarray(weights, dtype=float).ravel()
        order = np.argsort(g, kind="stable")
        return cls(kind, g[order], p[order], math.fsum(p))

    def __len__(self):
        return self.gaps.size

    @cached_property
    def prefix(self) -> np.ndarray:
        return _kahan_prefix(self.weights)

    @cached_property
    def mean(self) -> float:
        return math.fsum(self.weights * self.gaps)

    @cached_property
    def second_moment(self) -> float:
        return math.fsum(self.weights * self.gaps**2)

    @cached_property
    def sampling_moments(self) -> tuple[float, float]:
        """Mean and standard deviation of the stored entries renormalized to 1."""
        tot = float(self.prefix[-1])
        if not tot > 0:
            raise ValueError("distribution carries no weight")
        mu = self.mean / tot
        var = self.second_moment / tot - mu * mu
        return mu, math.sqrt(max(var, 0.0))

    @cached_property
    def sigma_g(self) -> float:
        var = self.second_moment - self.mean**2
        return math.sqrt(max(var, 0.0))


def _weight_matrix(ens: ThermalEnsemble, A: np.ndarray, kind: str) -> tuple[np.ndarray, float]:
    rho = ens.weights
    if kind == "plain_v":
        W = rho[:, None] * np.abs(A) ** 2
    elif kind == "symmetric_v":
        W = 0.5 * (rho[:, None] + rho[None, :]) * np.abs(A) ** 2
    elif kind == "kubo_w":
        W = kubo_pair_weights(ens, A)
    else:
        raise ValueError(f"unknown distribution kind {kind!r}")
    return W, math.fsum(W.ravel())


def build_gap_distribution(ens: ThermalEnsemble, A: np.ndarray, kind: str = "plain_v", *,
                           cutoff: float = 0.0, diagonal: str = "keep") -> GapDistribution:
    """Enumerate all d^2 pairs (j, k) with their normalized weights.

    ``diagonal="drop"`` removes the j = k entries, which carry the
    time-independent part C_inf and never contribute to C(t) - C_inf.
    Entries with weight below ``cutoff`` are removed and counted in
    ``discarded_weight``; entries of weight exactly zero are always removed.
    """
    if A.shape != (ens.dim, ens.dim):
        raise ValueError("operator and ensemble dimensions differ")
    if diagonal not in ("keep", "drop"):
        raise ValueError("diagonal must be 'keep' or 'drop'")
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    W, c0 = _weight_matrix(ens, A, kind)
    if not c0 > 0:
        raise ValueError("C(0) vanishes: observable has no weight on the ensemble support")
    E = ens.energies
    d = ens.dim
    P = W / c0
    del W
    diag_w = 0.0
    if diagonal == "drop":
        diag_w = math.fsum(np.diagonal(P))
        off = ~np.eye(d, dtype=bool)
        G = (E[:, None] - E[None, :])[off]
        p = P[off]
    else:
        G = (E[:, None] - E[None, :]).ravel()
        p = P.ravel()
    del P
    discarded = 0.0
    if cutoff > 0:
        small = p < cutoff
        discarded = math.fsum(p[small])
        G = G[~small]
        p = p[~small]
    # Exact zeros carry no mass; dropping them is lossless.
    nz = p > 0
    if not nz.all():
        G = G[nz]
        p = p[nz]
    order = np.argsort(G, kind="stable")
    G = G[order]
    p = p[order]
    del order
    total = math.fsum(p)
    return GapDistribution(kind, G, p, total, discarded, diag_w, c0)


# ------------------------------------------------------------- xi and stats

def xi_exact(dist: GapDistribution, x: float) -> float:
    """Heaviest closed window [G_l, G_l + x] anchored at an existing gap."""
    if x < 0 or not math.isfinite(x):
        raise ValueError(f"window width must be finite and nonnegative, got {x}")
    if len(dist) == 0:
        return 0.0
    return float(_xi_sweep(dist.gaps, dist.prefix, float(x)))


def _mc_normals(seed: int, samples: int) -> np.ndarray:
    """Standard normals from independent Philox streams per fixed-size block."""
    out = np.empty(samples)
    for b, start in enumerate(range(0, samples, MC_BLOCK)):
        bg = np.random.Philox(key=int(seed), counter=[0, b, 0, 0])
        n = min(MC_BLOCK, samples - start)
        out[start:start + n] = np.random.Generator(bg).standard_normal(n)
    return out


def xi_monte_carlo_many(dist: GapDistribution, xs, samples: int = 10_000, seed: int = 0) -> np.ndarray:
    """Sampled-window estimate of xi at each width in ``xs``.

    Window centres are drawn from N(mu_G, sigma_G); each window is snapped
    to the first gap at or above its left edge, so every sampled window is
    one of the anchored windows the exact sweep scans and the estimate can
    only undershoot.  The same draws are reused for every width.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if len(dist) == 0:
        raise ValueError("empty distribution")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs < 0):
        raise ValueError("window widths must be nonnegative")
    g = dist.gaps
    c = dist.prefix
    z = _mc_normals(seed, samples)
    mu, sigma = dist.sampling_moments
    out = np.empty(xs.size)
    for k, x in enumerate(xs):
        left = mu + sigma * z - 0.5 * x
        i = np.searchsorted(g, left, side="left")
        i = i[i < g.size]
        if i.size == 0:
            out[k] = 0.0
            continue
        hi = np.searchsorted(g, g[i] + x, side="right")
        out[k] = float((c[hi] - c[i]).max())
    return out


def xi_monte_carlo(dist: GapDistribution, x: float, samples: int = 10_000, seed: int = 0) -> float:
    return float(xi_monte_carlo_many(dist, [x], samples, seed)[0])


@dataclass(frozen=True)
class WindowStats:
    epsilon: float
    xi_of_epsilon: float
    a: float
    delta: float
    sigma_g: float
    method: str = "exact"
    samples: int | None = None
    seed: int | None = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def window_stats(dist: GapDistribution, epsilon: float, method: str = "exact", *,
                 samples: int = 10_000, seed: int = 0) -> WindowStats:
    """xi(eps), a(eps) and delta(eps) with sigma_G from the moments.

    ``delta`` includes ``discarded_weight`` as slack so bounds stay rigorous
    after a cutoff.  When sigma_G = 0 the slope is undefined: ``a`` is NaN
    and ``degenerate`` is set.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if method == "exact":
        xi = xi_exact(dist, epsilon)
        samples_, seed_ = None, None
    elif method == "monte_carlo":
        xi = xi_monte_carlo(dist, epsilon, samples, seed)
        samples_, seed_ = samples, seed
    else:
        raise ValueError(f"unknown method {method!r}")
    sigma = dist.sigma_g
    degenerate = sigma == 0.0
    a = math.nan if degenerate else xi * sigma / epsilon
    delta = xi + dist.discarded_weight
    return WindowStats(float(epsilon), xi, a, delta, sigma, method, samples_, seed_, degenerate)


@dataclass(frozen=True)
class EpsilonSweep:
    epsilon: np.ndarray
    xi: np.ndarray
    a: np.ndarray
    delta: np.ndarray
    sigma_g: float

    def stats(self, i: int) -> WindowStats:
        return WindowStats(float(self.epsilon[i]), float(self.xi[i]), float(self.a[i]),
                           float(self.delta[i]), self.sigma_g)

    def min_delta_index(self) -> int:
        """Index of the smallest delta; ties go to the largest epsilon (smallest a)."""
        return int(np.flatnonzero(self.delta == self.delta.min())[-1])

    def best_rhs_index(self, T: float) -> int:
        return int(np.argmin(BOUND_PREFACTOR * (self.a / (self.sigma_g * T) + self.delta)))

    def find(self, a_max: float, delta_max: float) -> int | None:
        ok = np.flatnonzero((self.a <= a_max) & (self.delta <= delta_max))
        return int(ok[0]) if ok.size else None

    def plateaus(self) -> int:
        """Number of consecutive grid pairs with identical delta."""
        return int(np.count_nonzero(self.delta[1:] == self.delta[:-1]))


def epsilon_grid(sigma_g: float, n: int = SWEEP_POINTS, lo: float = SWEEP_RANGE[0],
                 hi: float = SWEEP_RANGE[1]) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n) * sigma_g


def epsilon_sweep(dist: GapDistribution, epsilons=None) -> EpsilonSweep:
    sigma = dist.sigma_g
    if sigma == 0:
        raise ValueError("sigma_G is zero; the epsilon sweep is undefined")
    eps = epsilon_grid(sigma) if epsilons is None else np.asarray(epsilons, dtype=float)
    xi = np.array([xi_exact(dist, e) for e in eps])
    return EpsilonSweep(eps, xi, xi * sigma / eps, xi + dist.discarded_weight, sigma)


def bound_rhs(stats: WindowStats, T):
    """3 pi (a / (sigma_G T) + delta); infinite at T = 0."""
    if stats.degenerate:
        raise ValueError("sigma_G is zero; the bound is undefined")
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise ValueError("T must be nonnegative")
    with np.errstate(divide="ignore"):
        out = BOUND_PREFACTOR * (stats.a / (stats.sigma_g * T) + stats.delta)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------- commutator sigma

def sigma_g_commutator(dist: GapDistribution, H: np.ndarray, A: np.ndarray, rho: np.ndarray,
                       beta: float | None = None) -> float:
    """sigma_G from commutator traces instead of gap moments.

    ``H``, ``A`` and ``rho`` must share one basis (typically the
    computational one).  Per kind:

    plain_v      tr(rho [A,H][H,A])/C0 - (tr(rho [H,A] A)/C0)^2, C0 = tr(rho A^2)
    symmetric_v  tr(rho [A,H][H,A])/C0 (the first moment vanishes)
    kubo_w       tr([A,rho][A,H]) / (beta * dist.c_zero), since the stored
                 Kubo normalization carries a factor 1/beta
    """
    HA = H @ A - A @ H
    if dist.kind in ("plain_v", "symmetric_v"):
        c0 = np.trace(rho @ A @ A).real
        second = np.trace(rho @ (-HA) @ HA).real / c0
        mean = np.trace(rho @ HA @ A).real / c0 if dist.kind == "plain_v" else 0.0
        return math.sqrt(max(second - mean**2, 0.0))
    if dist.kind == "kubo_w":
        if not beta:
            raise ValueError("the Kubo commutator form needs beta > 0")
        num = np.trace((A @ rho - rho @ A) @ (-HA)).real
        return math.sqrt(max(num / (beta * dist.c_zero), 0.0))
    raise ValueError(f"unknown distribution kind {dist.kind!r}")


# ------------------------------------------------------------ bound report

@dataclass(frozen=True)
class BoundReport:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    stats: WindowStats

    @property
    def epsilon(self) -> float:
        return self.stats.epsilon

    def index_at(self, T: float) -> int:
        return int(np.argmin(np.abs(self.times - T)))

    def ratio_at(self, T: float) -> float:
        i = self.index_at(T)
        return float(self.rhs[i] / self.lhs[i])

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs))

    @property
    def worst_margin(self) -> float:
        """min(rhs - lhs) over the grid; negative means a violation."""
        return float(np.min(self.rhs - self.lhs))


def bound_report(series, stats: WindowStats, method: str = "running") -> BoundReport:
    """Running average of |C - C_inf|^2 / C(0)^2 against the bound."""
    from .correlators import running_time_average

    lhs = running_time_average(series, method=method) / series.c_zero**2
    times = series.times
    return BoundReport(times, lhs, bound_rhs(stats, times), stats)


# ------------------------------------------------------------ uniform-average bound

@dataclass(frozen=True)
class Lemma2Report:
    T: np.ndarray
    average: np.ndarray
    average_refined: np.ndarray
    bound: np.ndarray
    step: np.ndarray

    @property
    def violations(self) -> int:
        return int(np.count_nonzero(self.average > self.bound))

    @property
    def refinement_change(self) -> float:
        return float(np.max(np.abs(self.average - self.average_refined)))


def quadrature_steps(gaps: np.ndarray, T: float, base: float = 0.01) -> int:
    gmax = float(np.max(np.abs(gaps))) if gaps.size else 0.0
    h = min(base, base / gmax) if gmax > 0 else base
    return max(1, int(math.ceil(T / h)))


def uniform_average(dist: GapDistribution, T: float, n_steps: int | None = None) -> float:
    """<|sum p exp(i G t)|^2>_T by trapezoid quadrature."""
    if T <= 0:
        raise ValueError("T must be positive")
    n = quadrature_steps(dist.gaps, T) if n_steps is None else int(n_steps)
    return float(_uniform_average(dist.gaps, dist.weights, float(T), n))


def uniform_average_closed_form(dist: GapDistribution, T: float) -> float:
    """sum_ab p_a p_b sin(D T)/(D T) with D = G_a - G_b."""
    D = dist.gaps[:, None] - dist.gaps[None, :]
    return float(dist.weights @ np.sinc(D * T / math.pi) @ dist.weights)


def lemma2_property_check(dist: GapDistribution, T_grid) -> Lemma2Report:
    """Check <f>_T <= 3 pi xi(1/T) for each T, with a 2x refined quadrature."""
    if dist.discarded_weight or dist.diagonal_weight:
        raise ValueError("the uniform-average check needs a complete distribution")
    Ts = np.asarray(T_grid, dtype=float)
    avg, fine, bound, steps = [], [], [], []
    for T in Ts:
        n = quadrature_steps(dist.gaps, T)
        avg.append(uniform_average(dist, T, n))
        fine.append(uniform_average(dist, T, 2 * n))
        bound.append(BOUND_PREFACTOR * xi_exact(dist, 1.0 / T))
        steps.append(T / n)
    return Lemma2Report(Ts, np.array(avg), np.array(fine), np.array(bound), np.array(steps))


def random_distribution(rng: np.random.Generator, max_gaps: int = 50, span: float = 5.0) -> GapDistribution:
    """Uniform gaps in [-span, span] with flat-Dirichlet weights."""
    m = int(rng.integers(1, max_gaps + 1))
    g = rng.uniform(-span, span, m)
    p = rng.dirichlet(np.ones(m))
    return GapDistribution.from_pairs(g, p)


def lemma2_kappa(alpha: float, reading: str = "alpha") -> float:
    """sqrt(2 pi) alpha exp(1/(8 alpha^2)) sum_{n>=0} r^{-n^2}.

    ``reading="alpha"`` takes r = exp(alpha/2); ``"alpha_squared"`` takes
    r = exp(alpha^2/2).  Both are exposed because the two choices give
    different constants; neither enters the bound, which uses 3 pi.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if reading == "alpha":
        log_r = alpha / 2
    elif reading == "alpha_squared":
        log_r = alpha * alpha / 2
    else:
        raise ValueError(f"unknown reading {reading!r}")
    total = 0.0
    n = 0
    while True:
        term = math.exp(-log_r * n * n)
        total += term
        if term < 1e-17 * total:
            break
        n += 1
    return math.sqrt(2 * math.pi) * alpha * math.exp(1 / (8 * alpha * alpha)) * total


# ------------------------------------------------------------- histograms

@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    weights: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def coarse_grain(dist: GapDistribution, n_bins: int = 80) -> Histogram:
    """Equal-width bins over [G_min, G_max]; right-open except the last."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if len(dist) == 0:
        raise ValueError("empty distribution")
    w, edges = np.histogram(dist.gaps, bins=n_bins, weights=dist.weights)
    return Histogram(edges, w)


def smooth(weights: np.ndarray, window: int = 5) -> np.ndarray:
    """Centred moving average with zero padding at the edges."""
    return np.convolve(weights, np.ones(window) / window, mode="same")


def is_unimodal(weights: np.ndarray, window: int = 5) -> bool:
    """Nondecreasing up to the smoothed maximum and nonincreasing after it."""
    s = smooth(np.asarray(weights, dtype=float), window)
    k = int(np.argmax(s))
    return bool(np.all(np.diff(s[: k + 1]) >= 0) and np.all(np.diff(s[k:]) <= 0))


# ------------------------------------------------------------------ dumps

_DUMP = struct.Struct("<8sII16sQddd")
_DUMP_MAGIC = b"CFGAPDST"


def save_distribution(path, dist: GapDistribution) -> None:
    """Little-endian binary: header then interleaved (gap, weight) float64 pairs."""
    header = _DUMP.pack(_DUMP_MAGIC, 1, 0, dist.kind.encode().ljust(16, b"\0"), len(dist),
                        dist.total_weight, dist.discarded_weight, dist.diagonal_weight)
    pairs = np.empty((len(dist), 2), dtype="<f8")
    pairs[:, 0] = dist.gaps
    pairs[:, 1] = dist.weights
    with open(Path(path), "wb") as fh:
        fh.write(header)
        fh.write(pairs.tobytes())


def load_distribution(path) -> GapDistribution:
    raw = Path(path).read_bytes()
    magic, version, _, kind, n, total, discarded, diag = _DUMP.unpack_from(raw)
    if magic != _DUMP_MAGIC or version != 1:
        raise ValueError(f"{path}: not a gap-distribution dump")
    pairs = np.frombuffer(raw, dtype="<f8", offset=_DUMP.size)
    if pairs.size != 2 * n:
        raise ValueError(f"{path}: truncated payload")
    pairs = pairs.reshape(n, 2).astype(float)
    return GapDistribution(kind.rstrip(b"\0").decode(), pairs[:, 0].copy(), pairs[:, 1].copy(),
                           total, discarded, diag)
