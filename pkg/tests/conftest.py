from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from cfid.graph import parse_graph

settings.register_profile("cfid", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("cfid")

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load(name: str):
    return parse_graph((FIXTURES / f"{name}.txt").read_text())


@pytest.fixture
def fig1a():
    return load("fig1a")


@pytest.fixture
def wgraph():
    return load("wgraph")


def pytest_terminal_summary(terminalreporter):
    from .acceptance_report import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
