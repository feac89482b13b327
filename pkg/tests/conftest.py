import numpy as np
import pytest

from krrselect import GaussianKernel, TrigMercerKernel, build_cache, gram_matrix


def random_instance(rng, n=None, kind=None):
    """A small random (cache, y) pair from either kernel family."""
    n = int(rng.integers(2, 60)) if n is None else n
    kind = rng.choice(["gaussian", "trig"]) if kind is None else kind
    xs = rng.uniform(0, 1, n)
    spec = GaussianKernel(float(rng.uniform(0.05, 0.5))) if kind == "gaussian" else TrigMercerKernel(2.0, 50)
    y = rng.standard_normal(n)
    return build_cache(gram_matrix(spec, xs), y, kernel=spec), y


def random_spd(rng, n):
    a = rng.standard_normal((n, n))
    g = a @ a.T / n + 0.1 * np.eye(n)
    return (g + g.T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
