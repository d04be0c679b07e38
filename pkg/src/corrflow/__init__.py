"""Thermal two-point functions of spin chains from exact spectra, with gap statistics."""

__version__ = "0.1.0"

from .spinchain import (  # noqa: E402
    PauliString,
    SpinChainSpec,
    build_hamiltonian,
    build_pauli_string,
    central_pair,
    default_observable,
    mid_site,
)
from .spectral import (  # noqa: E402
    DegeneracyReport,
    DegeneracyWarning,
    Spectrum,
    ThermalEnsemble,
    audit_degeneracies,
    diagonal_ensemble,
    diagonalize,
    thermal_ensemble,
    to_eigenbasis,
)
from .correlators import (  # noqa: E402
    CorrelationSeries,
    FluctuationReport,
    correlation_series,
    correlation_trace,
    fluctuation_variance,
    infinite_time_average,
    kubo_correlation,
    running_time_average,
    symmetric_correlation,
)
from .gapstats import (  # noqa: E402
    BoundReport,
    GapDistribution,
    WindowStats,
    bound_report,
    bound_rhs,
    build_gap_distribution,
    coarse_grain,
    epsilon_sweep,
    lemma2_property_check,
    window_stats,
    xi_exact,
    xi_monte_carlo,
)
from .weak_eth import DeviationStats, diagonal_deviations, factorization_error  # noqa: E402
