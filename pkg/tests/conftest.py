import sys

import pytest

from ehcell.engine import WorldConfig, run


@pytest.fixture(scope="session", autouse=True)
def compiled_kernel():
    # load the compiled loop once so timing-sensitive tests do not pay for it
    run(WorldConfig(horizon=10))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
