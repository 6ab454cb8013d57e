import math
from dataclasses import replace

import numpy as np
import pytest

from src.acoustics.geometry import Pose
from src.acoustics.localization import direct_arrival, localize_source
from src.acoustics.simulator import BinauralRir, simulate_rir
from src.errors import LocalizationError


def test_direct_arrival_finds_first_strong_peak():
    x = np.zeros(300)
    x[50] = 0.3  # below half of the maximum
    x[120] = 1.0
    x[200] = 0.9
    arrival = direct_arrival(x, 8000)
    assert arrival.time == pytest.approx(120 / 8000)
    assert arrival.amplitude == pytest.approx(1.0)


def test_direct_arrival_rejects_silence():
    with pytest.raises(LocalizationError):
        direct_arrival(np.zeros(100), 8000)


@pytest.mark.parametrize("bearing_deg", [-40.0, 0.0, 25.0])
def test_localizes_anechoic_source(room, sim_cfg, bearing_deg):
    cfg = replace(sim_cfg, max_reflection_order=0)
    receiver = Pose(1.0, 2.0, 0.0)
    distance = 2.5
    bearing = math.radians(bearing_deg)
    source = (receiver.x + distance * math.cos(bearing), receiver.y + distance * math.sin(bearing))
    estimate = localize_source(simulate_rir(room, source, receiver, cfg), receiver, cfg)
    assert estimate.error_to(source) < 0.3
    assert estimate.distance == pytest.approx(distance, abs=0.2)


def test_localizes_in_reverberant_room(room, sim_cfg):
    receiver = Pose(1.5, 1.0, math.pi / 4)
    source = (3.5, 3.0)
    estimate = localize_source(simulate_rir(room, source, receiver, sim_cfg), receiver, sim_cfg)
    assert estimate.error_to(source) < 0.5


def test_silent_rir_cannot_be_localized(sim_cfg):
    with pytest.raises(LocalizationError):
        localize_source(BinauralRir(np.zeros((2, 200)), 8000), Pose(0.0, 0.0), sim_cfg)
