import numpy as np
import pytest

from reluflow.schedule import ControlSchedule, Neuron, Segment


def random_schedule(rng, d, n_segments=5, scale=2.0, max_duration=1.0):
    """Random schedule with entries in [-scale, scale], durations <= max_duration."""
    segs = []
    for _ in range(n_segments):
        w = rng.uniform(-scale, scale, size=d)
        a = rng.uniform(-scale, scale, size=d)
        b = rng.uniform(-scale, scale)
        segs.append(Segment(Neuron(w, a, b), rng.uniform(0, max_duration)))
    return ControlSchedule(tuple(segs))


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
