import numpy as np
import pytest

from lprnn.lstm import init_model
from lprnn.quant import QuantSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model():
    def make(kw=32, ka=32, v=20, e=8, h=16, seed=3, dtype=np.float32, quant="spec"):
        q = QuantSpec(kw, ka) if quant == "spec" else quant
        return init_model(v, e, h, q, seed=seed, dtype=dtype)
    return make


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
