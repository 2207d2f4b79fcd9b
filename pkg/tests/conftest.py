import pytest

from resample_es import ProblemSpec, SeedSpec, StrategyConfig


@pytest.fixture
def sphere15():
    return ProblemSpec(d=15, p=2, z=2.1)


@pytest.fixture
def reference_strategy():
    return StrategyConfig(mu=2, lam=4, Y=12, budget=500_000)


@pytest.fixture
def seed():
    return SeedSpec(20240601)


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion; printed in the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def record(number, status, detail):
        line = f"criterion {number:>2}: {status:<6} {detail}"
        lines[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
