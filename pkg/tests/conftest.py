import os

import numpy as np
import pytest
from hypothesis import settings


def pytest_configure(config):
    # demapper tables are cached across runs; honour an explicit location
    if "TURBOEQ_LUT_DIR" not in os.environ:
        os.environ["TURBOEQ_LUT_DIR"] = str(config.cache.mkdir("turboeq-luts"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# first calls into compiled kernels pay the JIT cost
settings.register_profile("turboeq", deadline=None)
settings.load_profile("turboeq")


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one verdict line per acceptance criterion."""

    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
