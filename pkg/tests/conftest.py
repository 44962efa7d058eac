import dataclasses

import pytest

from amchooser import MarketParams, NumericsConfig, validate
from amchooser.pipeline import run_pipeline

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE_KEY]


@pytest.fixture(scope="session")
def std_market():
    return MarketParams.standard()


@pytest.fixture(scope="session")
def std_cfg(std_market):
    return validate(std_market)


@pytest.fixture(scope="session")
def std_result(std_cfg):
    return run_pipeline(std_cfg)


@pytest.fixture(scope="session")
def small_cfg(std_market):
    return validate(std_market, NumericsConfig(M=200, N=100))


@pytest.fixture(scope="session")
def small_result(small_cfg):
    return run_pipeline(small_cfg, check=False)


def market(**changes):
    return dataclasses.replace(MarketParams.standard(), **changes)
