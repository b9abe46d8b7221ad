import sys

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_simplex(rng, n, size=None, zeros=0.0):
    """Random points on the probability simplex, optionally with sparse zeros."""
    shape = (n,) if size is None else (size, n)
    x = rng.gamma(0.7, size=shape)
    if zeros:
        x = np.where(rng.random(shape) < zeros, 0.0, x)
        # keep at least one positive entry per vector
        flat = x.reshape(-1, n)
        flat[flat.sum(axis=1) == 0, 0] = 1.0
    return x / x.sum(axis=-1, keepdims=True)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
