"""
Averaged deviation against the equilibration bound
==================================================

Running average of |C(t) - C_inf|^2 / C(0)^2 next to
3 pi (a / (sigma_G T) + delta), for two choices of eps: the one with the
smallest delta on the sweep, and the one minimizing the bound at T = 100.
"""

import math

from corrflow import SpinChainSpec, correlation_series, default_observable, diagonalize, thermal_ensemble
from corrflow import to_eigenbasis
from corrflow.gapstats import bound_report, build_gap_distribution, epsilon_sweep
from corrflow.spinchain import build_hamiltonian

T = 100.0
for L in (6, 8, 10):
    spec = SpinChainSpec.eth(L)
    s = diagonalize(build_hamiltonian(spec))
    ens = thermal_ensemble(s, 1.0)
    A = to_eigenbasis(default_observable(spec), s)
    dist = build_gap_distribution(ens, A, diagonal="drop")
    sw = epsilon_sweep(dist)
    series = correlation_series(ens, A, dt=0.01, t_max=T)
    for label, i in (("min delta", sw.min_delta_index()), ("best at T", sw.best_rhs_index(T))):
        rep = bound_report(series, sw.stats(i))
        print(f"L={L:2d} {label:>9}: eps/sigma={sw.epsilon[i] / sw.sigma_g:.2e} a={sw.a[i]:8.3f} "
              f"delta={sw.delta[i]:.4f}  lhs(T)={rep.lhs[-1]:.3e} rhs(T)={rep.rhs[-1]:.3e} "
              f"ratio={rep.ratio_at(T):7.1f} holds={rep.holds}")

###############################################################################
# The slope term needs T of order a / (sigma_G delta) before the floor
# 3 pi delta dominates.
st = sw.stats(sw.min_delta_index())
print(f"L=10 crossover time a/(sigma_G delta) = {st.a / (st.sigma_g * st.delta):.1f}, "
      f"floor 3 pi delta = {3 * math.pi * st.delta:.4f}")
