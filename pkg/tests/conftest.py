import itertools

import numpy as np
import pytest

from mcqnet import builtin_fixture


class ScriptedRng:
    """Deterministic stand-in for a Generator: replays a fixed uniform script.

    Block draws (``random(n)``) are returned reversed so consumers that pop
    from the end of a prefetched buffer still see the script in order; once
    the script is exhausted the fill value is used.
    """

    def __init__(self, script, fill=0.5):
        self.script = list(script)
        self.fill = fill

    def random(self, n=None):
        if n is None:
            return self.script.pop(0) if self.script else self.fill
        take = [self.script.pop(0) if self.script else self.fill for _ in range(n)]
        return np.asarray(take[::-1])

    def spawn(self, n):
        return [self] * n  # children share the script, consumed in call order


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def all_sequences(classes, max_len):
    """Every configuration over ``classes`` with length <= max_len."""
    out = [()]
    for n in range(1, max_len + 1):
        out.extend(itertools.product(classes, repeat=n))
    return out


@pytest.fixture(params=["mm1", "tandem2", "lk-prop", "lk-sbp", "fcfs-reentrant"])
def any_fixture(request):
    return builtin_fixture(request.param)


# acceptance-criterion result lines, echoed after the run (capture-proof)
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
