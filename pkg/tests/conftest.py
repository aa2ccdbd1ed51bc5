import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sensbn import compiler, fixtures

settings.register_profile(
    "sensbn",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("sensbn")


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {name}: {outcome}")


@pytest.fixture(scope="session")
def asia_net():
    return fixtures.asia_network()


@pytest.fixture(scope="session")
def asia_tables():
    return fixtures.asia_tables_tree()


@pytest.fixture(scope="session")
def asia_compiled(asia_net):
    tree, report = compiler.compile_network(
        asia_net, forced_groups=(("x_C", "x_E", "x_G"),)
    )
    return tree, report


def table1_priors():
    return {
        "X_1": np.array([0.9900, 0.0100]),
        "X_2": np.array([0.9896, 0.0104]),
        "X_3": np.array([0.5210, 0.4141, 0.0055, 0.0044, 0.0235, 0.0315]),
        "X_4": np.array([0.8897, 0.1103]),
        "X_5": np.array([0.5000, 0.5000]),
        "X_6": np.array([0.5640, 0.4360]),
    }
