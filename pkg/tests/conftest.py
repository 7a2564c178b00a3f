"""Shared pytest configuration.

After the run, prints one PASS/FAIL line per acceptance criterion so the
gate's outcome is readable without scanning the full test listing.
"""

import re

_ACCEPTANCE = re.compile(r"test_acceptance_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome, status in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(outcome, []):
            if getattr(report, "when", "call") != "call":
                continue
            match = _ACCEPTANCE.search(getattr(report, "nodeid", ""))
            if match:
                number = int(match.group(1))
                name = match.group(2).replace("_", " ")
                lines.append((number, f"[acceptance {number:02d}] {name}: {status}"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
