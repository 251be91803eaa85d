"""Shared pytest config: acceptance-criterion summary lines.

Tests marked ``@pytest.mark.acceptance(num, label)`` get one PASS/FAIL
line each in the terminal summary, so a full run ends with a readable
scorecard of the top-level criteria.
"""

from __future__ import annotations

from hypothesis import settings

settings.register_profile("medguard", deadline=None)
settings.load_profile("medguard")


def pytest_collection_modifyitems(config, items):
    mapping = {}
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            mapping[item.nodeid] = (str(marker.args[0]), str(marker.args[1]))
    config._acceptance_map = mapping


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mapping = getattr(config, "_acceptance_map", {})
    if not mapping:
        return
    outcomes: dict[str, str] = {}
    for status in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", None)
            if nodeid in mapping:
                when = getattr(report, "when", "call")
                if status == "passed" and when != "call":
                    continue
                outcomes[nodeid] = status
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid, (num, label) in sorted(mapping.items(), key=lambda kv: int(kv[1][0])):
        status = outcomes.get(nodeid, "not run")
        word = {"passed": "PASS", "failed": "FAIL", "error": "FAIL"}.get(status, status.upper())
        terminalreporter.write_line(f"criterion {num} ({label}): {word}")
