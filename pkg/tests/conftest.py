import numpy as np
import pytest

from ppm_frontier.linalg import SpdMatrix


def random_spd(rng, n, shift=1.0):
    M = rng.normal(size=(n, n))
    return SpdMatrix(M.T @ M + shift * np.eye(n))


def random_diag_instance(seed, n=5):
    """Simplex instances with a diagonal shape (the exact-equivalence regime)."""
    rng = np.random.default_rng(seed)
    Sigma = SpdMatrix(np.diag(rng.uniform(0.5, 2.0, n)))
    a0 = rng.uniform(-1.0, 1.0, n)
    return a0, Sigma


def grid_simplex2(fun, step=1e-7):
    """Minimize ``fun(X)`` over ``x = (t, 1 - t)`` on a uniform grid; ``X`` is (k, 2)."""
    best_t, best_v = None, np.inf
    # chunked so memory stays small
    ts = np.arange(0.0, 1.0 + step / 2, step)
    for chunk in np.array_split(ts, 20):
        X = np.stack([chunk, 1.0 - chunk], axis=1)
        v = fun(X)
        i = int(np.argmin(v))
        if v[i] < best_v:
            best_v, best_t = v[i], chunk[i]
    return np.array([best_t, 1.0 - best_t]), best_v


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
