import numpy as np
import pytest

from shadowlab.core import MapSystem


class ToyDoubling(MapSystem):
    """Piecewise-linear 2x mod 1 on [0,1] with the absolute-value metric.

    Minimal stand-in used by tests that only need a concrete expanding map;
    the full interval family lives in shadowlab.interval.
    """

    map_id = "toy-doubling"
    forward_tol = 1e-9

    def forward(self, state):
        x = float(state)
        return 2.0 * x if x <= 0.5 else 2.0 * x - 1.0

    def forward_many(self, states):
        s = np.asarray(states, float)
        return np.where(s <= 0.5, 2.0 * s, 2.0 * s - 1.0)

    def metric(self, a, b):
        return abs(float(a) - float(b))

    def metric_many(self, a, b):
        return np.abs(np.asarray(a, float) - np.asarray(b, float))

    def in_domain(self, state):
        return 0.0 <= float(state) <= 1.0

    def backward_sample(self, state, rng=None):
        branch = 0 if rng is None else int(rng.integers(2))
        return float(state) / 2.0 + 0.5 * branch


@pytest.fixture(scope="session")
def doubling():
    return ToyDoubling()
