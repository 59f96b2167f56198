"""Shared test configuration.

Collects acceptance-criterion outcomes and prints one line per criterion in
the terminal summary, so the verdicts are visible without -s even though
pytest captures stdout during the tests themselves.
"""

from contextlib import contextmanager

import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for one numbered acceptance criterion.

    Usage::

        with criterion(3, "single-path capacity identity") as info:
            ... asserts ...
            info["detail"] = "max rel err 2.1e-12"
    """

    @contextmanager
    def record(number, label):
        info = {"detail": ""}
        try:
            yield info
        except BaseException as exc:
            reason = f"{type(exc).__name__}: {exc}"
            _CRITERIA[number] = (label, "FAIL", reason.splitlines()[0][:120])
            raise
        else:
            _CRITERIA[number] = (label, "PASS", info["detail"])

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        label, verdict, detail = _CRITERIA[number]
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"criterion {number}: {verdict} - {label}{suffix}")
