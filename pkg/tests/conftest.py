from __future__ import annotations

import numpy as np
import pytest

from dcclab.model import DccSpec, benchmark_spec


def random_spd(rng, m, floor=0.1):
    X = rng.standard_normal((m, m))
    return X @ X.T + floor * np.eye(m)


def random_spec(rng, m=None, max_order=2, diagonal=False, contraction=0.9):
    """Random admissible spec whose lag families are scaled to contract.

    Volatility rows and lifted correlation norms are scaled so the stationarity
    sums stay below `contraction` most of the time, keeping simulations tame.
    """
    m = m or int(rng.integers(2, 4))
    r, s, nu, mu = (int(x) for x in rng.integers(1, max_order + 1, size=4))

    def fam(n, nonneg):
        mats = []
        for _ in range(n):
            X = rng.uniform(0, 1, (m, m)) if nonneg else rng.standard_normal((m, m))
            if diagonal:
                X = np.diag(np.diag(X))
            mats.append(X)
        return mats

    A, B = fam(r, True), fam(s, True)
    vol_scale = contraction * rng.uniform(0.2, 1.0) / sum(
        np.abs(X).sum(axis=1).max() for X in A + B
    )
    A = [vol_scale * X for X in A]
    B = [vol_scale * X for X in B]
    M = fam(nu, False)
    corr_scale = np.sqrt(contraction * rng.uniform(0.2, 1.0) / sum(
        np.abs(X).sum(axis=1).max() ** 2 for X in M
    ))
    M = [corr_scale * X for X in M]
    N = [rng.uniform(0.1, 0.6) * X for X in fam(mu, False)]
    return DccSpec(
        V0=rng.uniform(0.05, 1.0, m),
        A=A,
        B=B,
        W0=random_spd(rng, m),
        M=M,
        N=N,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def s4_stable():
    return benchmark_spec(0.999)


@pytest.fixture
def s4_explosive():
    return benchmark_spec(1.001)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
