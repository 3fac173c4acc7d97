import pytest

from jcscoop import presets
from jcscoop.channel import BlockerStats, LognormalHeightModel


@pytest.fixture
def radio():
    return presets.radio()


@pytest.fixture
def blockers():
    return presets.blockers()


@pytest.fixture
def blockers_01():
    return BlockerStats(0.9953, 0.1, LognormalHeightModel(1.1, 0.13))


@pytest.fixture
def sensing_field():
    return presets.sensing_field()


@pytest.fixture
def comm_field():
    return presets.comm_field()


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Records one PASS/FAIL line per criterion and asserts the outcome."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def report(tag, ok, detail, verdict=True):
        line = f"{('PASS' if ok else 'FAIL') if verdict else 'INFO'} {tag}: {detail}"
        lines.append(line)
        print(line)
        if verdict:
            assert ok, line
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
