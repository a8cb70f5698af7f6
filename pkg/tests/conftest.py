import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def acceptance(request):
    """Record one summary line; all lines are printed after the run."""
    lines = request.config.stash[_LINES]

    def record(label: str, ok: bool | None, detail: str) -> None:
        status = "PASS" if ok else "FAIL" if ok is not None else "NOTE"
        line = f"{status} {label}: {detail}"
        lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
