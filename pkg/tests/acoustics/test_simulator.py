import math
from dataclasses import replace

import numpy as np
import pytest

from src.acoustics.analysis import spectrogram_rt60
from src.acoustics.geometry import Pose, RoomSpec
from src.acoustics.simulator import (
    BinauralRir,
    image_sources,
    simulate_echo,
    simulate_mono_rir,
    simulate_rir,
)
from src.errors import ConfigurationError, PreconditionError, ShapeError


def test_order_zero_has_only_the_source(room):
    images = image_sources(room, (1.0, 1.0, 1.5), 0)
    assert images.positions.shape == (1, 3)
    assert images.positions[0] == pytest.approx([1.0, 1.0, 1.5])
    assert images.gains[0] == 1.0


def test_first_order_images_mirror_walls(room):
    images = image_sources(room, (1.0, 1.0, 1.5), 1)
    first = images.positions[images.orders == 1]
    assert first.shape == (6, 3)
    xs = sorted(first[:, 0])
    # x0 wall mirror at -1, x1 wall mirror at 2 * 5 - 1.
    assert xs[0] == pytest.approx(-1.0)
    assert xs[-1] == pytest.approx(9.0)
    beta = math.sqrt(1.0 - 0.4)
    assert images.gains[images.orders == 1] == pytest.approx(np.full(6, beta))


def test_direct_path_delay(room, sim_cfg):
    cfg = replace(sim_cfg, max_reflection_order=0)
    src, mic = (1.0, 1.0, 1.5), (4.0, 3.0, 1.5)
    x = simulate_mono_rir(room, src, mic, cfg)
    expected = math.dist(src, mic) / cfg.speed_of_sound * cfg.sample_rate
    assert abs(int(np.argmax(np.abs(x))) - expected) <= 1.0


def test_rir_shape_and_rate(room, sim_cfg, pose):
    rir = simulate_rir(room, (4.0, 3.0), pose, sim_cfg)
    assert rir.samples.shape == (2, sim_cfg.rir_samples)
    assert rir.sample_rate == sim_cfg.sample_rate
    assert rir.energy() > 0


def test_side_source_is_louder_in_near_ear(room, sim_cfg):
    cfg = replace(sim_cfg, max_reflection_order=0)
    receiver = Pose(2.0, 1.5, 0.0)
    # Facing +x, so +y is to the left.
    rir = simulate_rir(room, (2.0, 3.0), receiver, cfg)
    assert np.sum(rir.left**2) > 0
    assert np.sum(rir.right**2) == 0.0
    turned = simulate_rir(room, (2.0, 3.0), Pose(2.0, 1.5, math.pi), cfg)
    assert np.sum(turned.left**2) == 0.0
    assert np.sum(turned.right**2) > 0


def test_rt60_falls_with_absorption(sim_cfg, stft_cfg):
    cfg = replace(sim_cfg, max_reflection_order=12, rir_length=0.5)
    receiver = Pose(3.2, 2.1, 0.4)
    values = []
    for alpha in (0.3, 0.8):
        room = RoomSpec(5.0, 4.0, 3.0, (alpha,) * 6, 1.5)
        values.append(spectrogram_rt60(simulate_rir(room, (1.3, 1.1), receiver, cfg), stft_cfg))
    lively, dead = values
    assert np.all(lively > dead)


def test_echo_is_colocated(room, sim_cfg, pose):
    echo = simulate_echo(room, pose, sim_cfg)
    assert echo.samples.shape == (2, sim_cfg.rir_samples)
    # The direct path spans min_distance at most, so it lands in the first few samples.
    assert int(np.argmax(np.abs(echo.left))) < 10


def test_points_outside_room_are_rejected(room, sim_cfg, pose):
    with pytest.raises(PreconditionError):
        simulate_rir(room, (6.0, 1.0), pose, sim_cfg)
    with pytest.raises(PreconditionError):
        simulate_rir(room, (1.0, 1.0), Pose(-0.5, 1.0, 0.0), sim_cfg)


def test_direct_path_must_fit(room, sim_cfg):
    short = replace(sim_cfg, rir_length=0.005)
    with pytest.raises(ConfigurationError):
        simulate_rir(room, (0.5, 0.5), Pose(4.5, 3.5, 0.0), short)


def test_translated_room_gives_same_rir(room, sim_cfg):
    a = simulate_rir(room, (1.2, 2.5), Pose(3.7, 1.1, 0.3), sim_cfg)
    moved = room.translated(10.0, -4.0)
    b = simulate_rir(moved, (11.2, -1.5), Pose(13.7, -2.9, 0.3), sim_cfg)
    np.testing.assert_allclose(a.samples, b.samples, atol=1e-9)


def test_binaural_rir_validates_shape():
    with pytest.raises(ShapeError):
        BinauralRir(np.zeros((1, 10)), 8000)
    with pytest.raises(ShapeError):
        BinauralRir(np.full((2, 4), np.nan), 8000)


def test_mono_rir_is_reciprocal(sim_cfg):
    room = RoomSpec(
        width=5.0,
        depth=4.0,
        height=3.0,
        wall_absorption=(0.2, 0.5, 0.3, 0.6, 0.4, 0.7),
        agent_height=1.5,
    )
    a, b = (1.2, 0.8, 1.1), (3.9, 2.7, 1.8)
    forward = simulate_mono_rir(room, a, b, sim_cfg)
    backward = simulate_mono_rir(room, b, a, sim_cfg)
    np.testing.assert_allclose(backward, forward, rtol=0, atol=1e-6 * np.max(np.abs(forward)))
