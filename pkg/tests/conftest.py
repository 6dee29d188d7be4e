import numpy as np
import pytest

from paulitomo import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    monkeypatch.setattr(kernels, "_impl", kernels.BACKENDS[request.param])
    return request.param


def pytest_terminal_summary(terminalreporter):
    from ._acceptance_results import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail}")
