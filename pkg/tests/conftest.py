from pathlib import Path

import numpy as np
import pytest

from gbsc.mushroom import load_dataset

DATA_PATH = Path(__file__).resolve().parents[1] / "data" / "agaricus-lepiota.data"


@pytest.fixture(scope="session")
def data_path():
    return DATA_PATH


@pytest.fixture(scope="session")
def dataset():
    return load_dataset(DATA_PATH)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line; it is printed now and again in the terminal summary."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
