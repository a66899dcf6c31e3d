import functools

import numpy as np
import pytest

from spinsphere.forms import killing_base
from spinsphere.spinframe import SpinorSpace


@functools.lru_cache(maxsize=None)
def space(n: int, K: int = 3, quad_degree=None) -> SpinorSpace:
    """Shared truncated spaces (building n = 5 takes a few seconds)."""
    return SpinorSpace(n, K, quad_degree)


@functools.lru_cache(maxsize=None)
def base(n: int, K: int = 3):
    return killing_base(space(n, K))


def unit_phi0(N: int) -> np.ndarray:
    phi0 = np.zeros(N, dtype=complex)
    phi0[0] = 1.0 / np.sqrt(2.0)
    return phi0


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[2, 3, 4, 5], ids=lambda n: f"n{n}")
def dim(request):
    return request.param


@pytest.fixture(params=[2, 3], ids=lambda n: f"n{n}")
def small_dim(request):
    return request.param


# --- acceptance summary -----------------------------------------------------

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, msg = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {msg}")
