import sys

import numpy as np
import pytest

from csdia.annotation import CLASS_NAMES
from csdia.synthgen import CorpusSpec, example_rng, generate_corpus, generate_diagram


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(CorpusSpec(per_class_count=4, seed=7))


@pytest.fixture(scope="session")
def examples_by_class():
    return {c: [generate_diagram(c, example_rng(11, c, i)) for i in range(25)] for c in CLASS_NAMES}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    lines = {}
    for mod in list(sys.modules.values()):
        lines.update(getattr(mod, "ACCEPTANCE_LINES", None) or {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
