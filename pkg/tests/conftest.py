import os

# single-threaded BLAS keeps floating point results reproducible across runs
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=30, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def stable_matrix(rng, n, complex_=False, shift=None):
    """``G - c I`` with the field of values in the open left half-plane."""
    G = rng.standard_normal((n, n))
    if complex_:
        G = G + 1j * rng.standard_normal((n, n))
    c = shift if shift is not None else np.linalg.norm(G, 2) + 0.5
    return G - c * np.eye(n)


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record ``(passed, detail)`` for a numbered acceptance criterion and fail the test if not passed.

    The records are printed as one PASS/FAIL line per criterion in the terminal summary.
    """
    store = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(number: int, passed: bool, detail: str) -> None:
        store[number] = (bool(passed), detail)
        if not passed:
            pytest.fail(f"criterion {number}: {detail}", pytrace=False)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        ok, detail = store[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
