import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def criterion(request):
    """record(number, ok, detail) -> ok; lines are printed in the terminal summary."""
    def record(number, ok, detail=""):
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        request.config.stash[_RESULTS].append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_RESULTS, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: (int(s.split()[1].rstrip(":")), "supplement" in s)):
            terminalreporter.write_line(line)
