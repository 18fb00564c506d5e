import warnings

import numpy as np
import pytest

from climhouse.config import load_config

ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str = "") -> None:
    line = f"ACCEPTANCE {number} [{'PASS' if passed else 'FAIL'}] {title}"
    if detail:
        line += f" -- {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])


@pytest.fixture(scope="session")
def france():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return load_config("builtin:france")


@pytest.fixture(scope="session")
def toy():
    return load_config("builtin:toy")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
