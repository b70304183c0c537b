import numpy as np
import pytest

from hullreplay.core import Batch, Split, StreamConfig, TimedSample
from hullreplay.datagen import StreamSpec, generate_stream


def make_batch(t, codes, test_codes=()):
    """Batch at timestamp ``t`` from raw train/test code arrays."""
    train = [TimedSample(c, t, i, Split.TRAIN) for i, c in enumerate(codes)]
    test = [TimedSample(c, t, i, Split.TEST) for i, c in enumerate(test_codes)]
    return Batch(t, train, test)


def small_spec(seed=0, T=4, n=6, test=4, d=6, id_dims=2, drift=1.0):
    return StreamSpec(StreamConfig(T, n, test, d, seed), id_dims=id_dims, style_drift=drift)


@pytest.fixture
def small_stream():
    return generate_stream(small_spec())


@pytest.fixture
def default_stream():
    return generate_stream(StreamSpec())


# One line per acceptance criterion, echoed in the terminal summary so the
# verdicts show up even when pytest captures test output.
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
