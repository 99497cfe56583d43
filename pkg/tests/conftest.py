import pytest

# criterion number -> list of (ok, detail); filled in by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[number]
        failed = [d for ok, d in checks if not ok]
        status = "FAIL" if failed else "PASS"
        if len(checks) <= 3:
            details = "; ".join(d for _, d in checks)
        else:
            details = f"{len(checks) - len(failed)}/{len(checks)} checks passed"
            if failed:
                details += "; failing: " + "; ".join(failed)
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {details}")


@pytest.fixture
def record():
    def _record(number: int, ok: bool, detail: str):
        ACCEPTANCE.setdefault(number, []).append((bool(ok), detail))
        return ok
    return _record
