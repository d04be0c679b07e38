import os
from functools import lru_cache

import numpy as np
import pytest

from corrflow import SpinChainSpec, thermal_ensemble, to_eigenbasis
from corrflow.spectral import diagonalize
from corrflow.spinchain import build_hamiltonian, default_observable


@pytest.fixture(autouse=True, scope="session")
def _isolated_cache(tmp_path_factory):
    old = os.environ.get("CORRFLOW_CACHE_DIR")
    os.environ["CORRFLOW_CACHE_DIR"] = str(tmp_path_factory.mktemp("spectra"))
    yield
    if old is None:
        os.environ.pop("CORRFLOW_CACHE_DIR", None)
    else:
        os.environ["CORRFLOW_CACHE_DIR"] = old


class Chain:
    """Spectrum, beta=1 ensemble and mid-chain X for one spec."""

    def __init__(self, spec, beta=1.0):
        self.spec = spec
        self.H = build_hamiltonian(spec)
        self.spectrum = diagonalize(self.H)
        self.ens = thermal_ensemble(self.spectrum, beta)
        self.A_comp = default_observable(spec)
        self.A = to_eigenbasis(self.A_comp, self.spectrum)


@lru_cache(maxsize=None)
def chain(length, which="eth", beta=1.0):
    spec = SpinChainSpec.eth(length) if which == "eth" else SpinChainSpec.integrable(length)
    return Chain(spec, beta)


@pytest.fixture(scope="session")
def eth6():
    return chain(6)


@pytest.fixture(scope="session")
def eth8():
    return chain(8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion."""

    def _record(number, passed, detail):
        ACCEPTANCE_LINES.append(f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
