import functools

import pytest

from gossipscope.classify import IndexCache
from gossipscope.core import CallType
from gossipscope.logic import GossipModel


@functools.lru_cache(maxsize=None)
def model(n, bound, calltype):
    if isinstance(calltype, str):
        calltype = CallType.parse(calltype)
    return GossipModel.build(n, bound, calltype)


@pytest.fixture(scope="session")
def index_cache():
    return IndexCache()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
