"""Shared pytest wiring.

The acceptance suite (test_acceptance.py) holds one test per acceptance
criterion, with the criterion stated as the first docstring line. After any
run that included those tests, the terminal summary prints an explicit
PASS/FAIL line per criterion so the gate is readable at a glance.
"""

ACCEPTANCE_MODULE = "test_acceptance"


def pytest_collection_modifyitems(config, items):
    labels = {}
    for item in items:
        if item.module.__name__ == ACCEPTANCE_MODULE:
            doc = (item.function.__doc__ or "").strip().splitlines()
            labels[item.nodeid] = doc[0] if doc else item.name
    config._acceptance_labels = labels


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    labels = getattr(config, "_acceptance_labels", {})
    if not labels:
        return
    outcomes = {}
    for bucket, reports in terminalreporter.stats.items():
        for report in reports:
            nodeid = getattr(report, "nodeid", None)
            if nodeid not in labels:
                continue
            # a test passes only if its call phase passed; any failed or
            # errored phase (setup/call/teardown) fails the criterion
            if getattr(report, "failed", False):
                outcomes[nodeid] = "FAIL"
            elif getattr(report, "skipped", False):
                outcomes.setdefault(nodeid, "SKIP")
            elif getattr(report, "when", "") == "call" and getattr(report, "passed", False):
                outcomes.setdefault(nodeid, "PASS")
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid, label in labels.items():
        if nodeid in outcomes:
            terminalreporter.write_line(f"{outcomes[nodeid]}  {label}")
