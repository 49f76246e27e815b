import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for num in range(1, 12):
        line = mod.RESULTS.get(num, f"criterion {num:2d} [FAIL] did not complete (see the failure above)")
        terminalreporter.write_line(line)
