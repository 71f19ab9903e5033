import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from remote_stability import channel_model as cm  # noqa: E402

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "remote_stability" / "configs"


def random_channel(rng, n_freq=2, regime="uniform"):
    labels = cm.binary_labels(n_freq)
    return cm.MarkovChannelModel(cm.random_transition(rng, labels.shape[0], regime), labels,
                                 validate_ergodic=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def config_dir():
    return CONFIG_DIR


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """Record the one-line outcome of an acceptance criterion."""
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
