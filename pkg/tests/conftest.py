import numpy as np
import pytest

from mfou_lan.model import ModelParams, scheme_from_kappa

BASE = ModelParams(1.0, 0.8, 1.0)
GRID = (512, 1024, 2048, 4096)

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def base_params():
    return BASE


@pytest.fixture(scope="session")
def small_model():
    from mfou_lan.likelihood import build_model
    return build_model(BASE, scheme_from_kappa(128, 0.5), project=True)


@pytest.fixture(scope="session")
def sweep():
    """Deterministic finite-n summaries along the default grid (built once per session)."""
    from mfou_lan.harness import trace_sweep
    return trace_sweep(BASE, 0.5, GRID)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (int(k.rstrip("abc")), k)):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
