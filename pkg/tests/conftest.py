import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record(capsys):
    """Log one ``criterion N: PASS|FAIL|SKIP`` line; it is echoed now and in the summary.

    ``ok=None`` marks a criterion whose gate cannot be evaluated on this host.
    """

    def _record(number: int, ok: bool | None, detail: str) -> bool | None:
        verdict = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {number}: {verdict} {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
