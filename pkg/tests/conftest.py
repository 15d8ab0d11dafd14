from pathlib import Path

import pytest

FIXTURES_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES_DIR


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    outcomes: dict[str, str] = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid or getattr(report, "when", "call") != "call":
                continue
            name = nodeid.split("::")[-1].split("[")[0]
            if status == "passed":
                outcomes.setdefault(name, "PASS")
            else:
                outcomes[name] = "FAIL"
    if outcomes:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name in sorted(outcomes):
            terminalreporter.write_line(f"{outcomes[name]:4s}  {name}")
