"""Shared fixtures.  Full-size physics runs are session-scoped and computed once."""

import pytest
from hypothesis import HealthCheck, settings

from superrad.dynamics import run_simulation
from superrad.units import build_scaled_model, params_for_rate

from helpers import KD_ORDERS, KD_RATE, LOW_ORDERS, LOW_RATE

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_report():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def low_rate_params():
    return params_for_rate(LOW_RATE)


@pytest.fixture(scope="session")
def low_rate_run(low_rate_params):
    """Default parameters at R = 0.447e3/s over the full 200 us pulse."""
    model = build_scaled_model(low_rate_params, n_orders=LOW_ORDERS)
    return model, run_simulation(model, low_rate_params)


@pytest.fixture(scope="session")
def kd_run():
    params = params_for_rate(KD_RATE)
    model = build_scaled_model(params, n_orders=KD_ORDERS)
    return params, model, run_simulation(model, params)

