import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("sphconv", deadline=None, max_examples=200)
settings.load_profile("sphconv")

# (criterion number, description, passed, detail) rows from test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
