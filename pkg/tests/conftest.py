import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tsawf.trace import Trace


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


def trace_of(*events, label=None, source_id="t"):
    """Build a trace from (time, dir) pairs."""
    times = np.array([e[0] for e in events], dtype=np.float64)
    dirs = np.array([e[1] for e in events], dtype=np.int8)
    return Trace(times, dirs, label=label, source_id=source_id)


@pytest.fixture
def tiny_trace():
    return trace_of((0.0, 1), (1.0, -1), (2.5, 1), (4.0, -1), (4.5, 1))
