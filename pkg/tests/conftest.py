import pytest

# (criterion id, title, passed, detail) in the order the acceptance tests ran
ACCEPTANCE: list[tuple[str, str, bool, str]] = []


@pytest.fixture
def criterion():
    def record(cid: str, title: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE.append((cid, title, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {cid} {title}: {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, title, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {cid:<4} {title}: {detail}")
    n = sum(1 for row in ACCEPTANCE if row[2])
    terminalreporter.write_line(f"{n}/{len(ACCEPTANCE)} acceptance criteria pass")
