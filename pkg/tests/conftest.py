"""Prints the acceptance summary (one PASS/FAIL line per criterion) after the run."""


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        passed, detail = RESULTS[k]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {k}: {detail}")
