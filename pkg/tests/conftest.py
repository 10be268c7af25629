from __future__ import annotations

from importlib import resources

import pytest
from hypothesis import HealthCheck, settings

from picr.reduction import System
from picr.syntax import parse
from picr.types import parse_env

settings.register_profile(
    "thorough",
    max_examples=1000,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("thorough")

CORPUS = resources.files("picr") / "corpus"


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text()


def proc(name: str):
    return parse(corpus_text(f"{name}.pi"))


def env(name: str):
    return parse_env(corpus_text(f"{name}.env"))


def system(name: str, observer) -> System:
    p = proc(name)
    return System.of(p, observer.domain() | p.fn)


@pytest.fixture(scope="session")
def gamma1():
    return env("gamma1")


@pytest.fixture(scope="session")
def buffer_ext():
    return env("buffer_ext")


# --------------------------------------------------------------------------
# Acceptance reporting

OUTCOMES: dict = {}
CRITERIA: list = []


def pytest_collection_modifyitems(items):
    # the property criterion reads the outcomes of the property suites
    last = [it for it in items if it.name == "test_criterion_6_property_suites"]
    items[:] = [it for it in items if it not in last] + last


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        OUTCOMES[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
