import contextlib

import pytest

_ACCEPTANCE = []


class _Criterion:
    def __init__(self, name):
        self.name = name
        self.detail = ""

    def note(self, text):
        self.detail = text


@pytest.fixture
def criterion():
    """Context manager that records one PASS/FAIL line per acceptance criterion."""

    @contextlib.contextmanager
    def run(name):
        c = _Criterion(name)
        try:
            yield c
        except BaseException as exc:
            _ACCEPTANCE.append(("FAIL", name, c.detail or f"{type(exc).__name__}: {exc}".splitlines()[0]))
            raise
        _ACCEPTANCE.append(("PASS", name, c.detail))

    return run


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{status}  {name}" + (f"  ({detail})" if detail else ""))
