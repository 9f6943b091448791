"""Shared pytest configuration.

The acceptance module's outcomes are echoed one line per criterion in the
terminal summary, so a suite run doubles as the acceptance checklist.
"""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and "::" in nodeid:
                name = nodeid.split("::")[-1].removeprefix("test_")
                results.append((name, outcome == "passed"))
    if not results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, passed in results:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}")
