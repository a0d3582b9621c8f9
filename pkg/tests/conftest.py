import pytest

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one ``CRITERION ...: PASS/FAIL`` line per acceptance check."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(label, ok, detail):
        line = f"CRITERION {label}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
