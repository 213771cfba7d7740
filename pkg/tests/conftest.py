import pytest

VERDICTS = []


class Verdict:
    """Records one acceptance line; the test still fails through ``check``."""

    def __init__(self, name):
        self.name = name
        self.lines = []

    def note(self, text):
        self.lines.append(text)
        print(f"  {text}")

    def check(self, ok, summary):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] {self.name}: {summary}"
        VERDICTS.append(line)
        print(line)
        assert ok, line


@pytest.fixture
def verdict(request):
    v = Verdict(request.node.name)
    yield v
    if not any(line.split("] ", 1)[1].startswith(v.name + ":") for line in VERDICTS):
        # the test raised before reaching its check
        VERDICTS.append(f"[FAIL] {v.name}: error before verdict")


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
