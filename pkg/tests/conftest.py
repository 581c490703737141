import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

# filled by tests/test_acceptance.py; printed once at the end of the run
ACCEPTANCE_LINES = {}


def record_acceptance(key, passed, detail):
    line = f"{key} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session", autouse=True)
def _compile_kernels():
    """Trigger numba compilation once so individual tests are not charged for it."""
    from seqfs.bench import warm_up

    warm_up()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
