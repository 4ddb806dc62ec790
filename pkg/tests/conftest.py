import pytest

import scanspread as ss


@pytest.fixture
def four_hosts() -> ss.HostSet:
    """Two hosts clustered in 10.0.0.0/16, one in 10.255/16, one in 192.168/16."""
    return ss.parse_host_list("10.0.0.1\n10.0.0.2\n10.255.0.1\n192.168.1.1\n").hosts


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    lines = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid or "::test_criterion_" not in nodeid:
                continue
            name = nodeid.split("::test_criterion_")[-1]
            num, _, rest = name.partition("_")
            label = f"criterion {num}: {rest.replace('_', ' ')}"
            if status != "passed":
                lines[label] = "FAIL"
            else:
                lines.setdefault(label, "PASS")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for label in sorted(lines):
            terminalreporter.write_line(f"[{lines[label]}] {label}")
