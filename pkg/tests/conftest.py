"""Collects acceptance verdicts and prints them as one block at the end of the run."""

RESULTS = []


def record(number: int, title: str, ok: bool, detail: str, seconds: float):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail} | {seconds:.1f} s"
    RESULTS.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(RESULTS):
        terminalreporter.write_line(line)
