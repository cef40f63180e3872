import pytest

from prefccd.weights import solve_weights

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log(request, capsys):
    """Record one PASS/FAIL line per criterion; echoed live and in the summary."""
    def log(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        request.config.stash[_ACCEPTANCE].append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return passed

    return log


@pytest.fixture(scope="session")
def ccd8_solution():
    return solve_weights("ccd8", "spectral", n_starts=64, seed=42)


@pytest.fixture(scope="session")
def ccd6_solution():
    return solve_weights("ccd6", "spectral", n_starts=64, seed=42)
