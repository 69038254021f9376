import pytest

from convcsp.gadgets import CORPUS_NAMES, corpus
from convcsp.mmorph import classify

_acceptance = {}


@pytest.fixture(scope="session")
def corpus_witnesses():
    return {name: classify(corpus(name)) for name in CORPUS_NAMES}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance[report.nodeid] = report.outcome
    elif "test_acceptance.py" in report.nodeid and report.failed:
        _acceptance[report.nodeid] = "failed"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(_acceptance.items(), key=lambda kv: kv[0]):
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
