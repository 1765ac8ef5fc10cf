import numpy as np
import pytest

from tgi3d import build_integral_table, generate_reference
from tgi3d import reconstruct, scene, signal
from tgi3d.backend import fallback

_report_lines = []


@pytest.fixture(scope="session")
def acceptance_report():
    return _report_lines


def pytest_terminal_summary(terminalreporter):
    if _report_lines:
        terminalreporter.section("acceptance criteria")
        for line in _report_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_table():
    return build_integral_table(generate_reference(400, 60, seed=11))


@pytest.fixture
def python_backend(monkeypatch):
    """Route every module through the NumPy fallback kernels."""
    for mod in (signal, scene, reconstruct):
        monkeypatch.setattr(mod, "kernels", fallback)
    return fallback
