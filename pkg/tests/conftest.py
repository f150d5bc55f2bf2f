import numpy as np
import pytest

from subsep.signal import Signal, SynthSpec, synth_scenario
from subsep.spline import BSplineBasis, Partition, design_matrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_scenario():
    """120-sample scenario, cheap enough for CLI and sweep tests."""
    return synth_scenario(SynthSpec(length=120, seed=3, noise_n_max=5))


def spline_dictionary(length: int, interior: int, order: int = 4) -> np.ndarray:
    """Raw clamped B-spline design on 0..length-1 with uniformly spaced interior knots."""
    knots = np.linspace(0.0, length - 1.0, interior + 2)[1:-1]
    basis = BSplineBasis.from_partition(Partition(0.0, length - 1.0, knots), order)
    return design_matrix(basis, np.arange(length, dtype=float))


def sine_signal(length: int = 200, dt: float = 0.05) -> Signal:
    t = dt * np.arange(length)
    return Signal(np.sin(t) + 0.3 * np.sin(2.7 * t), dt)
