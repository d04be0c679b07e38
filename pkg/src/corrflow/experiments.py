"""Config-driven experiments that write CSV data plus a metadata JSON file."""
from __future__ import annotations

import copy
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cache import cache_path, cached_spectrum, read_header
from .correlators import (
    correlation_series,
    fluctuation_variance,
    infinite_time_average,
    kubo_pair_weights,
    running_time_average,
)
from .gapstats import (
    KINDS as DIST_KINDS,
    bound_report,
    build_gap_distribution,
    coarse_grain,
    epsilon_grid,
    epsilon_sweep,
    is_unimodal,
    lemma2_property_check,
    random_distribution,
    sigma_g_commutator,
    smooth,
    xi_exact,
    xi_monte_carlo_many,
)
from .io import write_csv, write_json
from .spectral import audit_degeneracies, density_matrix, thermal_ensemble, to_eigenbasis
from .spinchain import (
    PauliString,
    SpinChainSpec,
    build_hamiltonian,
    build_pauli_string,
    central_pair,
    mid_site,
)
from .weak_eth import diagonal_deviations, factorization_error, loglog_slope

EXPERIMENTS = (
    "bound_check",
    "ab_factorization",
    "fluctuations",
    "gapstats_sweep",
    "lemma2_suite",
    "histogram",
    "mc_forward_error",
    "integrable_contrast",
)
AUDIT_MAX_LENGTH = 12


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    def __init__(self, check: str, detail: str):
        super().__init__(f"invariant '{check}' violated: {detail}")
        self.check = check
        self.detail = detail


DEFAULTS: dict = {
    "experiment": "bound_check",
    "spec": {"length": 8, "gamma": 0.8, "lambda": 0.5, "j1": 1.0, "j2": 1.0, "boundary": "open"},
    "beta": 1.0,
    "observable": None,
    "observable_b": None,
    "kinds": ["plain_v"],
    "diagonal": "drop",
    "cutoff": 0.0,
    "grid": {"dt": 0.001, "t_max": 100.0},
    "epsilon": {"points": 200, "lo": 1e-4, "hi": 10.0, "fixed": 1e-3},
    "mc": {"samples": 10000, "seed": 0},
    "bins": 80,
    "sizes": [6, 8, 10, 12],
    "lemma2": {"distributions": 1000, "max_gaps": 50, "T": [0.1, 1.0, 10.0, 100.0]},
    "output": "corrflow-out",
    "cache": True,
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    spec: SpinChainSpec
    beta: float = 1.0
    observable: str | None = None
    observable_b: str | None = None
    kinds: tuple[str, ...] = ("plain_v",)
    diagonal: str = "drop"
    cutoff: float = 0.0
    dt: float = 0.001
    t_max: float = 100.0
    eps_points: int = 200
    eps_lo: float = 1e-4
    eps_hi: float = 10.0
    eps_fixed: float = 1e-3
    samples: int = 10000
    seed: int = 0
    bins: int = 80
    sizes: tuple[int, ...] = (6, 8, 10, 12)
    lemma2_distributions: int = 1000
    lemma2_max_gaps: int = 50
    lemma2_T: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    output: str = "corrflow-out"
    cache: bool = True
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        merged = _deep_merge(DEFAULTS, d)
        try:
            spec = SpinChainSpec.from_dict(merged["spec"])
            cfg = cls(
                experiment=merged["experiment"],
                spec=spec,
                beta=float(merged["beta"]),
                observable=merged["observable"],
                observable_b=merged["observable_b"],
                kinds=tuple(merged["kinds"]),
                diagonal=merged["diagonal"],
                cutoff=float(merged["cutoff"]),
                dt=float(merged["grid"]["dt"]),
                t_max=float(merged["grid"]["t_max"]),
                eps_points=int(merged["epsilon"]["points"]),
                eps_lo=float(merged["epsilon"]["lo"]),
                eps_hi=float(merged["epsilon"]["hi"]),
                eps_fixed=float(merged["epsilon"]["fixed"]),
                samples=int(merged["mc"]["samples"]),
                seed=int(merged["mc"]["seed"]),
                bins=int(merged["bins"]),
                sizes=tuple(int(x) for x in merged["sizes"]),
                lemma2_distributions=int(merged["lemma2"]["distributions"]),
                lemma2_max_gaps=int(merged["lemma2"]["max_gaps"]),
                lemma2_T=tuple(float(x) for x in merged["lemma2"]["T"]),
                output=str(merged["output"]),
                cache=bool(merged["cache"]),
                raw=merged,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        for key, value in (overrides or {}).items():
            set_dotted(d, key, value)
        return cls.from_dict(d)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if not self.dt > 0:
            raise ConfigError("grid.dt must be positive")
        if self.t_max < self.dt:
            raise ConfigError("grid.t_max must be >= grid.dt")
        if self.samples < 1:
            raise ConfigError("mc.samples must be >= 1")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ConfigError("beta must be finite and nonnegative")
        bad = [k for k in self.kinds if k not in DIST_KINDS]
        if bad:
            raise ConfigError(f"unknown distribution kinds {bad}")
        if self.diagonal not in ("keep", "drop"):
            raise ConfigError("diagonal must be 'keep' or 'drop'")
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        if not (0 < self.eps_lo < self.eps_hi) or self.eps_points < 2:
            raise ConfigError("epsilon grid needs 0 < lo < hi and at least two points")
        for label in (self.observable, self.observable_b):
            if label is not None:
                try:
                    PauliString.parse(label)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw) if self.raw else asdict(self)


def _deep_merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        if k not in out:
            raise ConfigError(f"unknown config field {k!r}")
        if isinstance(out[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"config field {k!r} must be an object")
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_value(text: str):
    """JSON literal if it parses, else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_dotted(d: dict, path: str, value) -> None:
    keys = path.split(".")
    node = d
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {path}: {k} is not an object")
    node[keys[-1]] = value


# ----------------------------------------------------------------- context

@dataclass
class Context:
    """Spectrum, ensemble and eigenbasis operators for one spec and beta."""

    spec: SpinChainSpec
    beta: float
    spectrum: object
    ensemble: object
    cache_hash: str | None

    @classmethod
    def build(cls, spec: SpinChainSpec, beta: float, use_cache: bool = True) -> "Context":
        s = cached_spectrum(spec, use_cache=use_cache)
        h = None
        if use_cache:
            h = read_header(cache_path(spec))["data_hash"]
        return cls(spec, beta, s, thermal_ensemble(s, beta), h)

    def observable(self, label: str | None, default_site: int | None = None) -> np.ndarray:
        if label is None:
            site = mid_site(self.spec.length) if default_site is None else default_site
            ps = PauliString.single(site, "X")
        else:
            ps = PauliString.parse(label)
        return to_eigenbasis(build_pauli_string(ps, self.spec.length), self.spectrum)

    def audit(self) -> dict | None:
        if self.spec.length > AUDIT_MAX_LENGTH:
            return None
        return audit_degeneracies(self.spectrum).to_dict()


def _check(name: str, ok: bool, detail: str) -> None:
    if not ok:
        raise InvariantViolation(name, detail)


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.output)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _sweep_csv(path: Path, sw) -> None:
    write_csv(path, {"epsilon": sw.epsilon, "xi": sw.xi, "a": sw.a, "delta": sw.delta,
                     "sigma_g": np.full(sw.epsilon.size, sw.sigma_g)})


def _sweep_for(cfg: RunConfig, dist):
    return epsilon_sweep(dist, epsilon_grid(dist.sigma_g, cfg.eps_points, cfg.eps_lo, cfg.eps_hi))


# ------------------------------------------------------------- experiments

def _bound_check(cfg: RunConfig, out: Path) -> dict:
    ctx = Context.build(cfg.spec, cfg.beta, cfg.cache)
    A = ctx.observable(cfg.observable)
    dist = build_gap_distribution(ctx.ensemble, A, "plain_v", cutoff=cfg.cutoff, diagonal=cfg.diagonal)
    sw = _sweep_for(cfg, dist)
    _sweep_csv(out / "sweep.csv", sw)
    i = sw.min_delta_index()
    stats = sw.stats(i)
    series = correlation_series(ctx.ensemble, A, kind="plain", dt=cfg.dt, t_max=cfg.t_max)
    rep = bound_report(series, stats)
    write_csv(out / "bound.csv", {"t": rep.times, "lhs": rep.lhs, "rhs": rep.rhs})
    j = sw.best_rhs_index(cfg.t_max)
    env = sw.stats(j)
    env_rhs = 3 * math.pi * (env.a / (env.sigma_g * cfg.t_max) + env.delta)
    fig1 = sw.find(1.0, 0.1)
    _check("bound_validity", rep.holds, f"worst margin rhs - lhs = {rep.worst_margin:.3e}")
    return {
        "epsilon": stats.to_dict(),
        "lhs_at_tmax": float(rep.lhs[-1]),
        "rhs_at_tmax": float(rep.rhs[-1]),
        "ratio_at_tmax": rep.ratio_at(cfg.t_max),
        "worst_margin": rep.worst_margin,
        "best_epsilon_at_tmax": env.to_dict(),
        "best_ratio_at_tmax": env_rhs / float(rep.lhs[-1]),
        "fig1_triple": None if fig1 is None else
        {"epsilon": float(sw.epsilon[fig1]), "a": float(sw.a[fig1]), "delta": float(sw.delta[fig1])},
        "degeneracy": ctx.audit(),
        "cache_hash": ctx.cache_hash,
    }


def _ab_factorization(cfg: RunConfig, out: Path) -> dict:
    rows, tails = [], []
    deltas = (0.05, 0.1, 0.2, 0.4)
    hashes = {}
    for L in cfg.sizes:
        spec = SpinChainSpec.from_dict({**cfg.spec.to_dict(), "length": L})
        ctx = Context.build(spec, cfg.beta, cfg.cache)
        hashes[L] = ctx.cache_hash
        sa, sb = central_pair(L)
        A = ctx.observable(cfg.observable, sa)
        B = ctx.observable(cfg.observable_b, sb)
        fe = factorization_error(ctx.ensemble, A, B)
        rho = ctx.ensemble.weights
        ea = math.fsum(rho * np.diagonal(A).real)
        eb = math.fsum(rho * np.diagonal(B).real)
        ident = infinite_time_average(ctx.ensemble, A, B) - ea * eb
        _check("factorization_identity", abs(fe - ident) <= 1e-10, f"L={L}: |{fe} - {ident}| > 1e-10")
        rows.append((L, fe))
        dev = diagonal_deviations(ctx.ensemble, A, deltas)
        tails.extend((L, cfg.beta, d, m) for d, m in zip(dev.delta_grid, dev.tail_mass))
    Ls, fes = zip(*rows)
    write_csv(out / "factorization.csv", {"L": np.array(Ls), "factorization_error": np.array(fes)})
    t = np.array(tails)
    write_csv(out / "tails.csv", {"L": t[:, 0].astype(int), "beta": t[:, 1], "tail_delta": t[:, 2],
                                  "tail_mass": t[:, 3]})
    absfe = np.abs(fes)
    return {
        "factorization_error": dict(zip(map(str, Ls), map(float, fes))),
        "monotone_decreasing": bool(np.all(np.diff(absfe) < 0)),
        "loglog_slope": loglog_slope(Ls, fes) if len(Ls) > 1 else None,
        "cache_hash": hashes,
    }


def _fluctuations(cfg: RunConfig, out: Path) -> dict:
    ctx = Context.build(cfg.spec, cfg.beta, cfg.cache)
    A = ctx.observable(cfg.observable)
    B = A if cfg.observable_b is None else ctx.observable(cfg.observable_b)
    audit = audit_degeneracies(ctx.spectrum)
    rep = fluctuation_variance(ctx.ensemble, A, B, horizon=cfg.t_max, dt=cfg.dt, audit=audit)
    if rep.gaps_nondegenerate:
        _check("theorem2_bound", rep.sigma_c_squared_exact <= rep.theorem2_bound,
               f"{rep.sigma_c_squared_exact} > {rep.theorem2_bound}")
    write_csv(out / "fluctuations.csv", {
        "sigma_c2_exact": [rep.sigma_c_squared_exact], "theorem2_bound": [rep.theorem2_bound],
        "time_domain": [rep.time_domain_estimate], "horizon": [rep.horizon]})
    rel = abs(rep.time_domain_estimate - rep.sigma_c_squared_exact) / rep.sigma_c_squared_exact
    return {**rep.to_dict(), "relative_difference": rel, "degeneracy": audit.to_dict(),
            "cache_hash": ctx.cache_hash}


def _commutator_sigma(ctx: Context, dist, A_eig: np.ndarray) -> float:
    V = ctx.spectrum.vectors
    H = build_hamiltonian(ctx.spec)
    A = V @ A_eig @ V.conj().T
    rho = density_matrix(ctx.ensemble, ctx.spectrum)
    return sigma_g_commutator(dist, H, A, rho, ctx.beta)


def _gapstats_sweep(cfg: RunConfig, out: Path) -> dict:
    ctx = Context.build(cfg.spec, cfg.beta, cfg.cache)
    A = ctx.observable(cfg.observable)
    result = {}
    for kind in cfg.kinds:
        dist = build_gap_distribution(ctx.ensemble, A, kind, cutoff=cfg.cutoff, diagonal=cfg.diagonal)
        sw = _sweep_for(cfg, dist)
        _sweep_csv(out / f"sweep_{kind}.csv", sw)
        entry = {"sigma_g": dist.sigma_g, "mu_g": dist.mean, "total_weight": dist.total_weight,
                 "discarded_weight": dist.discarded_weight, "diagonal_weight": dist.diagonal_weight}
        if cfg.spec.length <= AUDIT_MAX_LENGTH:
            sc = _commutator_sigma(ctx, dist, A)
            entry["sigma_g_commutator"] = sc
            _check(f"sigma_g_agreement[{kind}]", abs(sc - dist.sigma_g) <= 1e-8,
                   f"moment {dist.sigma_g!r} vs commutator {sc!r}")
        k = sw.find(1.0, 0.1)
        entry["fig1_triple"] = None if k is None else {
            "epsilon": float(sw.epsilon[k]), "a": float(sw.a[k]), "delta": float(sw.delta[k])}
        i = sw.min_delta_index()
        entry["min_delta"] = sw.stats(i).to_dict()
        result[kind] = entry
    result["cache_hash"] = ctx.cache_hash
    return result


def _lemma2_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, index, 1, 0]))


def _lemma2_suite(cfg: RunConfig, out: Path) -> dict:
    idx, Ts, avg, fine, bound = [], [], [], [], []
    for n in range(cfg.lemma2_distributions):
        dist = random_distribution(_lemma2_rng(cfg.seed, n), cfg.lemma2_max_gaps)
        rep = lemma2_property_check(dist, cfg.lemma2_T)
        idx.extend([n] * rep.T.size)
        Ts.extend(rep.T)
        avg.extend(rep.average)
        fine.extend(rep.average_refined)
        bound.extend(rep.bound)
    avg, fine, bound = map(np.array, (avg, fine, bound))
    write_csv(out / "lemma2.csv", {"index": np.array(idx), "T": np.array(Ts), "average": avg,
                                   "average_refined": fine, "bound": bound})
    violations = int(np.count_nonzero(avg > bound))
    refine = float(np.max(np.abs(avg - fine)))
    _check("lemma2_bound", violations == 0, f"{violations} violations")
    _check("lemma2_quadrature", refine < 1e-4, f"refinement changed the average by {refine:.3e}")
    return {"distributions": cfg.lemma2_distributions, "violations": violations,
            "max_refinement_change": refine, "max_ratio": float(np.max(avg / bound))}


def _histogram(cfg: RunConfig, out: Path) -> dict:
    ctx = Context.build(cfg.spec, cfg.beta, cfg.cache)
    A = ctx.observable(cfg.observable)
    res = {"cache_hash": ctx.cache_hash}
    for kind in cfg.kinds:
        dist = build_gap_distribution(ctx.ensemble, A, kind, cutoff=cfg.cutoff, diagonal=cfg.diagonal)
        h = coarse_grain(dist, cfg.bins)
        write_csv(out / f"histogram_{kind}.csv", {
            "left": h.edges[:-1], "right": h.edges[1:], "center": h.centers, "weight": h.weights,
            "smoothed": smooth(h.weights)})
        gap = abs(math.fsum(h.weights) - dist.total_weight)
        _check(f"histogram_mass[{kind}]", gap <= 1e-12, f"bin sum differs from total by {gap:.3e}")
        res[kind] = {"unimodal": is_unimodal(h.weights), "mass_error": gap,
                     "peak_center": float(h.centers[np.argmax(smooth(h.weights))])}
    return res


def _mc_forward_error(cfg: RunConfig, out: Path) -> dict:
    ctx = Context.build(cfg.spec, cfg.beta, cfg.cache)
    A = ctx.observable(cfg.observable)
    dist = build_gap_distribution(ctx.ensemble, A, "plain_v", cutoff=cfg.cutoff, diagonal=cfg.diagonal)
    eps = epsilon_grid(dist.sigma_g, cfg.eps_points, cfg.eps_lo, cfg.eps_hi)
    ex = np.array([xi_exact(dist, e) for e in eps])
    mc = xi_monte_carlo_many(dist, eps, cfg.samples, cfg.seed)
    err = np.abs(ex - mc)
    write_csv(out / "mc_forward_error.csv", {"epsilon": eps, "xi_exact": ex, "xi_mc": mc, "abs_error": err})
    _check("mc_underestimates", bool(np.all(mc <= ex)), f"max overshoot {float(np.max(mc - ex)):.3e}")
    return {"max_abs_error": float(err.max()), "argmax_epsilon": float(eps[err.argmax()]),
            "within_1e-3": bool(err.max() <= 1e-3), "samples": cfg.samples, "seed": cfg.seed,
            "cache_hash": ctx.cache_hash}


def _integrable_contrast(cfg: RunConfig, out: Path) -> dict:
    L = cfg.spec.length
    res = {}
    curves = {}
    for name, spec in (("eth", SpinChainSpec.eth(L)), ("integrable", SpinChainSpec.integrable(L))):
        ctx = Context.build(spec, cfg.beta, cfg.cache)
        A = ctx.observable(cfg.observable)
        dist = build_gap_distribution(ctx.ensemble, A, "plain_v", cutoff=cfg.cutoff, diagonal=cfg.diagonal)
        sw = _sweep_for(cfg, dist)
        halved = np.array([xi_exact(dist, e / 2) for e in sw.epsilon]) + dist.discarded_weight
        curves[name] = sw
        res[name] = {
            "delta_at_fixed": xi_exact(dist, cfg.eps_fixed) + dist.discarded_weight,
            "sigma_g": dist.sigma_g,
            "halving_plateaus": int(np.count_nonzero(halved == sw.delta)),
            "consecutive_plateaus": sw.plateaus(),
            "max_gap_multiplicity": ctx.audit()["max_gap_multiplicity"] if ctx.audit() else None,
        }
    write_csv(out / "contrast.csv", {
        "eps_over_sigma": curves["eth"].epsilon / curves["eth"].sigma_g,
        "delta_eth": curves["eth"].delta, "delta_integrable": curves["integrable"].delta})
    res["epsilon"] = cfg.eps_fixed
    res["integrable_exceeds_eth"] = res["integrable"]["delta_at_fixed"] > res["eth"]["delta_at_fixed"]
    return res


_RUNNERS = {
    "bound_check": _bound_check,
    "ab_factorization": _ab_factorization,
    "fluctuations": _fluctuations,
    "gapstats_sweep": _gapstats_sweep,
    "lemma2_suite": _lemma2_suite,
    "histogram": _histogram,
    "mc_forward_error": _mc_forward_error,
    "integrable_contrast": _integrable_contrast,
}


def run_experiment(cfg: RunConfig) -> dict:
    """Run one experiment; always writes ``metadata.json`` (also on violation)."""
    out = _out(cfg)
    meta = {
        "config": cfg.to_dict(),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": cfg.seed,
        "spec_hash": cfg.spec.content_hash(),
        "convention": {"phase": "exp(-i(E_j-E_k)t)", "mid_site": "floor(L/2), 0-based",
                       "running_average": "grid mean", "diagonal": cfg.diagonal},
    }
    try:
        meta["results"] = _RUNNERS[cfg.experiment](cfg, out)
        meta["status"] = "ok"
    except InvariantViolation as exc:
        meta["status"] = "invariant_violation"
        meta["violation"] = {"check": exc.check, "detail": exc.detail}
        write_json(out / "metadata.json", meta)
        raise
    write_json(out / "metadata.json", meta)
    return meta


# ------------------------------------------------------------------ verify

def verify(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    """Invariant checks for the configured spec; no experiment output."""
    checks: list[tuple[str, bool, str]] = []

    def add(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    spec = cfg.spec
    H = build_hamiltonian(spec)
    ctx = Context.build(spec, cfg.beta, cfg.cache)
    s, ens = ctx.spectrum, ctx.ensemble
    r1, r2 = s.residuals(H)
    scale = max(1.0, float(np.abs(H).max()))
    add("eigen_residual", r1 <= 1e-9 * scale, f"{r1:.2e}")
    add("orthonormality", r2 <= 1e-10, f"{r2:.2e}")
    add("hamiltonian_symmetric", np.array_equal(H, H.T))
    add("weights_normalized", abs(math.fsum(ens.weights) - 1) <= 1e-12)
    add("weights_monotone", ens.beta == 0 or bool(np.all(np.diff(ens.weights) <= 0)))
    add("purity_range", 1 / ens.dim - 1e-15 <= ens.purity <= 1 + 1e-15, f"{ens.purity:.6g}")

    A = ctx.observable(cfg.observable)
    sa, sb = central_pair(spec.length)
    B = ctx.observable(cfg.observable_b, sb)
    add("eigenbasis_hermitian", np.abs(A - A.conj().T).max() <= 1e-10)
    fe = factorization_error(ens, A, B)
    rho = ens.weights
    ident = infinite_time_average(ens, A, B) - math.fsum(rho * np.diagonal(A).real) * math.fsum(
        rho * np.diagonal(B).real)
    add("factorization_identity", abs(fe - ident) <= 1e-10, f"{abs(fe - ident):.2e}")

    if ens.is_thermal:
        w = kubo_pair_weights(ens, A)
        add("kubo_weights_nonnegative", bool(np.all(w >= 0)))

    audit = audit_degeneracies(s) if spec.length <= AUDIT_MAX_LENGTH else None
    norms = (1.0, 1.0) if cfg.observable is None else None
    rep = fluctuation_variance(ens, A, A, audit=audit, norms=norms) if audit else None
    if rep is not None and rep.gaps_nondegenerate:
        add("theorem2_bound", rep.sigma_c_squared_exact <= rep.theorem2_bound,
            f"{rep.sigma_c_squared_exact:.3e} <= {rep.theorem2_bound:.3e}")

    if spec.length <= 10:
        for kind in DIST_KINDS:
            if kind == "kubo_w" and not ens.beta:
                continue
            dist = build_gap_distribution(ens, A, kind)
            sc = _commutator_sigma(ctx, dist, A)
            add(f"sigma_g_agreement[{kind}]", abs(sc - dist.sigma_g) <= 1e-8,
                f"{abs(sc - dist.sigma_g):.2e}")
        dist = build_gap_distribution(ens, A, "plain_v", diagonal=cfg.diagonal)
        eps = epsilon_grid(dist.sigma_g, 20)
        ex = np.array([xi_exact(dist, e) for e in eps])
        mc = xi_monte_carlo_many(dist, eps, min(cfg.samples, 2000), cfg.seed)
        add("mc_underestimates", bool(np.all(mc <= ex)))
        series = correlation_series(ens, A, kind="plain", dt=0.05, t_max=5.0)
        add("series_bounded", bool(np.all(np.abs(series.values) <= series.c_zero + 1e-9)))
        add("running_average_nonnegative", bool(np.all(running_time_average(series) >= 0)))
    return checks
