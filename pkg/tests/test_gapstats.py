import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from corrflow import gapstats as gs
from corrflow.gapstats import (
    GapDistribution,
    bound_rhs,
    build_gap_distribution,
    coarse_grain,
    epsilon_sweep,
    is_unimodal,
    lemma2_kappa,
    lemma2_property_check,
    random_distribution,
    sigma_g_commutator,
    uniform_average,
    uniform_average_closed_form,
    window_stats,
    xi_exact,
    xi_monte_carlo,
    xi_monte_carlo_many,
)
from corrflow.spectral import density_matrix, diagonalize, thermal_ensemble, to_eigenbasis
from corrflow.spinchain import SpinChainSpec

from conftest import Chain, chain


def brute_xi(g, p, x):
    return max(sum(pb for gb, pb in zip(g, p) if ga <= gb <= ga + x) for ga in g)


def dist_of(pairs):
    g, p = zip(*pairs)
    return GapDistribution.from_pairs(g, p)


dists = st.lists(
    st.tuples(st.floats(-5, 5, allow_nan=False), st.floats(0.0, 1.0, allow_nan=False)),
    min_size=1, max_size=40,
)


# ------------------------------------------------------------- building

def test_identity_observable_all_mass_at_zero(eth6):
    d = build_gap_distribution(eth6.ens, np.eye(eth6.spectrum.dim))
    assert np.all(d.gaps == 0)
    assert d.total_weight == pytest.approx(1.0, abs=1e-14)
    assert xi_exact(d, 0.0) == pytest.approx(1.0, abs=1e-14)


def test_single_spin_example():
    s = diagonalize(np.diag([1.0, -1.0]))
    ens = thermal_ensemble(s, 0.0)
    A = to_eigenbasis(np.array([[0.0, 1.0], [1.0, 0.0]]), s)
    d = build_gap_distribution(ens, A)
    np.testing.assert_allclose(d.gaps, [-2.0, 2.0], atol=1e-15)
    np.testing.assert_allclose(d.weights, [0.5, 0.5], atol=1e-15)


def test_eth_normalization_and_commutator(eth6):
    d = build_gap_distribution(eth6.ens, eth6.A, "plain_v")
    assert abs(math.fsum(d.weights) - 1) <= 1e-10
    HA = eth6.H @ eth6.A_comp - eth6.A_comp @ eth6.H
    rho = density_matrix(eth6.ens, eth6.spectrum)
    c0 = np.trace(rho @ eth6.A_comp @ eth6.A_comp)
    assert d.second_moment == pytest.approx(np.trace(rho @ (-HA) @ HA).real / c0, abs=1e-8)


@pytest.mark.parametrize("L", [6, 8])
@pytest.mark.parametrize("kind", gs.KINDS)
def test_sigma_moment_vs_commutator(L, kind):
    c = chain(L)
    d = build_gap_distribution(c.ens, c.A, kind)
    rho = density_matrix(c.ens, c.spectrum)
    assert abs(sigma_g_commutator(d, c.H, c.A_comp, rho, c.ens.beta) - d.sigma_g) <= 1e-8
    if kind != "plain_v":
        assert abs(d.mean) <= 1e-10


def test_drop_diagonal_and_cutoff(eth6):
    full = build_gap_distribution(eth6.ens, eth6.A)
    drop = build_gap_distribution(eth6.ens, eth6.A, diagonal="drop")
    assert drop.sigma_g == pytest.approx(full.sigma_g, abs=1e-12)
    assert drop.total_weight + drop.diagonal_weight == pytest.approx(1.0, abs=1e-10)
    d = eth6.spectrum.dim
    assert len(drop) <= d * (d - 1) < len(full) + 1
    cut = build_gap_distribution(eth6.ens, eth6.A, cutoff=1e-4)
    assert cut.discarded_weight > 0
    assert cut.total_weight + cut.discarded_weight == pytest.approx(1.0, abs=1e-10)
    assert np.all(cut.weights >= 1e-4)
    st_ = window_stats(cut, 0.1)
    assert st_.delta == pytest.approx(st_.xi_of_epsilon + cut.discarded_weight)


def test_build_errors(eth6):
    with pytest.raises(ValueError):
        build_gap_distribution(eth6.ens, eth6.A, "nope")
    with pytest.raises(ValueError):
        build_gap_distribution(eth6.ens, np.zeros_like(eth6.A))
    with pytest.raises(ValueError):
        build_gap_distribution(eth6.ens, eth6.A, diagonal="maybe")


def test_unsorted_rejected():
    with pytest.raises(ValueError):
        GapDistribution("plain_v", np.array([1.0, 0.0]), np.array([0.5, 0.5]), 1.0)


# ------------------------------------------------------------------- xi

def test_xi_point_mass():
    d = dist_of([(0.0, 1.0)])
    for x in (0.0, 0.3, 10.0):
        assert xi_exact(d, x) == 1.0


def test_xi_three_points():
    d = dist_of([(0, 0.5), (1, 0.3), (2, 0.2)])
    assert xi_exact(d, 0.5) == pytest.approx(0.5)
    assert xi_exact(d, 1.0) == pytest.approx(0.8)
    assert xi_exact(d, 2.0) == pytest.approx(1.0)


def test_xi_zero_width_groups_ties():
    d = dist_of([(0, 0.2), (1, 0.25), (1, 0.25), (3, 0.3)])
    assert xi_exact(d, 0.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        xi_exact(d, -0.1)


@settings(max_examples=150, deadline=None)
@given(dists, st.floats(0, 4))
def test_xi_matches_brute_force(pairs, x):
    d = dist_of(pairs)
    assert xi_exact(d, x) == pytest.approx(brute_xi(d.gaps, d.weights, x), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(dists, st.floats(0, 3), st.floats(0, 3))
def test_xi_monotone_and_bounded(pairs, x1, x2):
    d = dist_of(pairs)
    lo, hi = sorted((x1, x2))
    assert xi_exact(d, lo) <= xi_exact(d, hi)
    assert xi_exact(d, hi) <= d.total_weight + 1e-12
    assert xi_exact(d, lo) >= d.weights.max() - 1e-15


@settings(max_examples=100, deadline=None)
@given(dists, st.floats(0.01, 3))
def test_linear_envelope(pairs, eps):
    d = dist_of(pairs)
    assume(d.sigma_g > 0)
    s = window_stats(d, eps)
    xs = np.linspace(0, 12, 241)
    env = s.a / s.sigma_g * xs + s.delta
    assert all(xi_exact(d, x) <= e + 1e-12 for x, e in zip(xs, env))


def test_envelope_on_eth(eth6):
    d = build_gap_distribution(eth6.ens, eth6.A, diagonal="drop")
    sw = epsilon_sweep(d)
    xs = np.linspace(0, 2 * d.sigma_g, 101)
    xi = np.array([xi_exact(d, x) for x in xs])
    for i in range(0, sw.epsilon.size, 20):
        s = sw.stats(i)
        assert np.all(xi <= s.a / s.sigma_g * xs + s.delta + 1e-12)


# ------------------------------------------------------------------- MC

def test_mc_single_entry():
    d = dist_of([(0.7, 1.0)])
    assert xi_monte_carlo(d, 0.5, 50, seed=3) in (0.0, 1.0)


def test_mc_eth_accuracy(eth6):
    d = build_gap_distribution(eth6.ens, eth6.A, diagonal="drop")
    assert abs(xi_monte_carlo(d, 0.1, 10_000, seed=0) - xi_exact(d, 0.1)) <= 1e-3


@settings(max_examples=60, deadline=None)
@given(dists, st.floats(0, 3), st.integers(0, 2**32))
def test_mc_never_exceeds_exact(pairs, x, seed):
    d = dist_of(pairs)
    assume(d.total_weight > 0)
    assert xi_monte_carlo(d, x, 300, seed) <= xi_exact(d, x)


def test_mc_deterministic(eth6):
    d = build_gap_distribution(eth6.ens, eth6.A, diagonal="drop")
    xs = np.array([0.01, 0.1, 1.0])
    a = xi_monte_carlo_many(d, xs, 3000, seed=11)
    b = xi_monte_carlo_many(d, xs, 3000, seed=11)
    assert np.array_equal(a, b)
    # prefix property of the counter-based streams
    c = xi_monte_carlo_many(d, xs, 2048, seed=11)
    assert np.all(c <= a)


def test_mc_normals_blocks():
    z1 = gs._mc_normals(5, 3000)
    z2 = gs._mc_normals(5, 1500)
    assert np.array_equal(z1[:1500], z2)
    assert abs(z1.mean()) < 0.1 and abs(z1.std() - 1) < 0.1


def test_mc_errors():
    d = dist_of([(0.0, 1.0)])
    with pytest.raises(ValueError):
        xi_monte_carlo(d, 0.1, 0)
    with pytest.raises(ValueError):
        xi_monte_carlo(GapDistribution("plain_v", np.array([]), np.array([]), 0.0), 0.1)


# ---------------------------------------------------------- window stats

def test_point_mass_flag():
    s = window_stats(dist_of([(1.5, 1.0)]), 0.1)
    assert s.degenerate and math.isnan(s.a) and s.delta == 1.0
    with pytest.raises(ValueError):
        bound_rhs(s, 10.0)


def test_two_point_example():
    d = dist_of([(-1, 0.5), (1, 0.5)])
    assert d.mean == 0 and d.sigma_g == 1
    s = window_stats(d, 0.5)
    assert (s.xi_of_epsilon, s.a, s.delta) == (0.5, 1.0, 0.5)
    m = window_stats(d, 0.5, "monte_carlo", samples=500, seed=1)
    assert m.method == "monte_carlo" and m.seed == 1 and m.xi_of_epsilon <= 0.5
    with pytest.raises(ValueError):
        window_stats(d, 0.0)


def test_bound_rhs_examples():
    s = gs.WindowStats(0.1, 0.01, 0.4, 0.01, 2.0)
    assert bound_rhs(s, 1e15) == pytest.approx(3 * math.pi * 0.01, rel=1e-9)
    assert bound_rhs(s, 0.4 / (2.0 * 0.01)) == pytest.approx(6 * math.pi * 0.01)
    r = bound_rhs(s, np.array([0.0, 1.0, 10.0]))
    assert r[0] == np.inf and r[1] > r[2] > 3 * math.pi * 0.01


def test_sweep_selection():
    sw = gs.EpsilonSweep(np.array([1.0, 2.0, 3.0, 4.0]), np.array([0.2, 0.1, 0.1, 0.3]),
                         np.array([0.2, 0.05, 0.033, 0.075]), np.array([0.2, 0.1, 0.1, 0.3]), 1.0)
    assert sw.min_delta_index() == 2
    assert sw.find(0.1, 0.15) == 1
    assert sw.plateaus() == 1


# --------------------------------------------------------------- Lemma 2

def test_lemma2_single_gap():
    rep = lemma2_property_check(dist_of([(0.4, 1.0)]), [0.1, 1.0, 10.0])
    np.testing.assert_allclose(rep.average, 1.0, atol=1e-12)
    np.testing.assert_allclose(rep.bound, 3 * math.pi)
    assert rep.violations == 0


@pytest.mark.parametrize("delta", [0.3, 2.0, 4.5])
@pytest.mark.parametrize("T", [0.1, 1.0, 10.0, 100.0])
def test_lemma2_two_gap_closed_form(delta, T):
    d = dist_of([(0.0, 0.5), (delta, 0.5)])
    exact = 0.5 + 0.5 * math.sin(delta * T) / (delta * T)
    assert uniform_average_closed_form(d, T) == pytest.approx(exact, abs=1e-14)
    assert uniform_average(d, T) == pytest.approx(exact, abs=1e-5)


def test_quadrature_matches_closed_form_random():
    # Trapezoid error <= h^2 max|f''| / 12 with |f''| <= (2 max|G|)^2 and
    # h <= 0.01 / max|G|, i.e. at most 4e-4 / 12.
    rng = np.random.default_rng(7)
    for _ in range(20):
        d = random_distribution(rng)
        for T in (0.1, 1.0, 10.0, 100.0):
            assert abs(uniform_average(d, T) - uniform_average_closed_form(d, T)) <= 4e-4 / 12


def test_lemma2_rejects_partial():
    d = GapDistribution("plain_v", np.array([0.0]), np.array([0.5]), 0.5, 0.5)
    with pytest.raises(ValueError):
        lemma2_property_check(d, [1.0])


def test_kappa_readings():
    for reading in ("alpha", "alpha_squared"):
        k = lemma2_kappa(0.6347, reading)
        assert math.isfinite(k) and k > 0
    assert lemma2_kappa(0.6347, "alpha") != lemma2_kappa(0.6347, "alpha_squared")
    # sum_{n>=0} r^{-n^2} -> 1 as r grows, so kappa -> sqrt(2 pi) alpha e^{1/(8 alpha^2)}
    a = 30.0
    assert lemma2_kappa(a, "alpha_squared") == pytest.approx(math.sqrt(2 * math.pi) * a * math.exp(1 / (8 * a * a)))
    with pytest.raises(ValueError):
        lemma2_kappa(-1.0)


# ------------------------------------------------------------ histograms

def test_coarse_grain_examples():
    h = coarse_grain(dist_of([(0.3, 1.0)]), 1)
    np.testing.assert_array_equal(h.weights, [1.0])
    h = coarse_grain(dist_of([(0.0, 0.5), (1.0, 0.5)]), 2)
    np.testing.assert_array_equal(h.weights, [0.5, 0.5])
    with pytest.raises(ValueError):
        coarse_grain(dist_of([(0.0, 1.0)]), 0)


def test_coarse_grain_edges_right_open():
    h = coarse_grain(dist_of([(0.0, 0.25), (1.0, 0.25), (2.0, 0.25), (4.0, 0.25)]), 4)
    np.testing.assert_array_equal(h.weights, [0.25, 0.25, 0.25, 0.25])
    h = coarse_grain(dist_of([(0.0, 0.5), (2.0, 0.25), (4.0, 0.25)]), 2)
    np.testing.assert_array_equal(h.weights, [0.5, 0.5])


def test_coarse_grain_mass(eth8):
    d = build_gap_distribution(eth8.ens, eth8.A, diagonal="drop")
    h = coarse_grain(d, 80)
    assert abs(math.fsum(h.weights) - d.total_weight) <= 1e-12


def test_is_unimodal():
    assert is_unimodal(np.array([0, 1, 3, 7, 3, 1, 0.0]))
    assert is_unimodal(np.ones(3))
    assert not is_unimodal(np.array([5, 0, 0, 0, 0, 0, 0, 0, 0, 0, 5.0]))


# ----------------------------------------------------------------- dumps

def test_dump_roundtrip(tmp_path, eth6):
    d = build_gap_distribution(eth6.ens, eth6.A, "kubo_w", diagonal="drop")
    gs.save_distribution(tmp_path / "d.bin", d)
    e = gs.load_distribution(tmp_path / "d.bin")
    assert e.kind == "kubo_w"
    assert np.array_equal(e.gaps, d.gaps) and np.array_equal(e.weights, d.weights)
    assert (e.total_weight, e.discarded_weight, e.diagonal_weight) == (
        d.total_weight, d.discarded_weight, d.diagonal_weight)
    (tmp_path / "bad.bin").write_bytes(b"\0" * 80)
    with pytest.raises(ValueError):
        gs.load_distribution(tmp_path / "bad.bin")
