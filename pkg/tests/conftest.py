from __future__ import annotations

import warnings

import numpy as np
import pytest

from nlsgraph import NLSParams, StarGrid, build_state, kirchhoff_state, sample


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tail_params():
    return NLSParams(3, 1.0, -1.0)


@pytest.fixture
def tail_state(tail_params):
    return build_state(tail_params, 1.0, 0)


def sampled(state, edge_length=30.0, h=1e-2):
    grid = StarGrid.from_spacing(state.params.n_edges, edge_length, h)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sample(state, grid)


def kirchhoff_sample(n=3, omega=1.0, a=0.0, h=1e-2, edge_length=30.0, mu=1.0):
    return sampled(kirchhoff_state(NLSParams(n, mu, 0.0), omega, a), edge_length, h)


# ---------------------------------------------------------------- acceptance reporting

_acceptance = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_acceptance] = []


@pytest.fixture
def report(request, capsys):
    """Print one PASS/FAIL line per acceptance criterion and return the verdict."""

    def _report(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {detail}"
        request.config.stash[_acceptance].append((number, line))
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_acceptance, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
