import numpy as np
import pytest

from cfsync.types import LinkChannel, ObservationWindow, PilotSequence, SyncOffset


@pytest.fixture
def pilot32():
    return PilotSequence.random_bpsk(32, seed=11)


@pytest.fixture
def pilot64():
    return PilotSequence.random_bpsk(64, seed=12)


def random_link(rng, num_taps=3, max_extra_chips=3.0, large_scale=1.0,
                chip_interval_s=1e-6, min_gap=1.2):
    """Random multipath channel with spread taps (identifiable timing)."""
    slack = max_extra_chips - (num_taps - 1) * min_gap
    assert slack >= 0, "too many taps for the requested spread"
    offsets = np.sort(rng.uniform(0.0, slack, size=num_taps - 1))
    extras = min_gap * np.arange(1, num_taps) + offsets
    delays = np.concatenate([[0.0], extras]) * chip_interval_s
    gains = np.concatenate([[1.0], np.sort(rng.uniform(0.1, 1.0, num_taps - 1))[::-1]])
    fades = (rng.standard_normal(num_taps) + 1j * rng.standard_normal(num_taps)) / np.sqrt(2)
    return LinkChannel(delays_s=delays, gains=gains, fades=fades,
                       large_scale=large_scale)


def window_for(pilot: PilotSequence, to_bound=3, extra=4.0) -> ObservationWindow:
    return ObservationWindow.covering(pilot.length, to_bound, extra)


def offset_of(cfo_norm, to_chips, to_bound=3, cfo_bound_norm=3.0) -> SyncOffset:
    return SyncOffset.from_normalized(cfo_norm, to_chips, cfo_bound_norm, to_bound)
