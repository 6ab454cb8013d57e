import json

import numpy as np
import pytest

from src.acoustics.geometry import Pose, RoomSpec
from src.data.dataset import RirDataset
from src.errors import ConfigurationError, DatasetError, PreconditionError
from src.evaluation.error_map import MAP_FIELDS, compute_error_map, source_grid
from src.predictors.ground_truth import GroundTruthPredictor
from src.predictors.nearest_neighbor import NearestNeighborPredictor


def test_source_grid_is_row_major(room):
    grid = source_grid(room, 1.0, 0.5)
    assert grid.shape == (20, 2)
    np.testing.assert_allclose(grid[:2], [[0.5, 0.5], [1.5, 0.5]])
    np.testing.assert_allclose(grid[-1], [4.5, 3.5])


def test_source_grid_follows_room_origin(room):
    moved = room.translated(10.0, -2.0)
    np.testing.assert_allclose(source_grid(moved, 1.0, 0.5), source_grid(room, 1.0, 0.5) + [10.0, -2.0])


def test_source_grid_rejects_bad_arguments(room):
    with pytest.raises(ConfigurationError):
        source_grid(room, 0.0, 0.5)
    with pytest.raises(PreconditionError):
        source_grid(room, 0.5, 2.5)


def test_error_map_with_nearest_neighbor(rendered_dataset, tmp_path):
    dataset = RirDataset.open(rendered_dataset)
    ctx = dataset.manifest.contexts[0]
    room = dataset.manifest.room(ctx.room_id).spec
    receiver = ctx.observations[0].pose
    emap = compute_error_map(dataset, NearestNeighborPredictor(), ctx, receiver, step=1.0, workers=1)
    grid = source_grid(room, 1.0, dataset.manifest.dataset.min_wall_clearance)
    np.testing.assert_array_equal(emap.points, grid)
    assert emap.values.shape == (grid.shape[0],)
    assert np.all(np.isfinite(emap.values)) and emap.vmin >= 0.0
    assert emap.vmin <= emap.median <= emap.vmax
    assert emap.value_at(*grid[0]) == emap.values[0]

    csv_path, json_path = emap.save(tmp_path, stem="map")
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(MAP_FIELDS)
    assert len(lines) == grid.shape[0] + 1
    summary = json.loads(json_path.read_text(encoding="utf-8"))
    assert summary["predictor"] == "nearest_neighbor"
    assert summary["n_points"] == grid.shape[0]
    assert summary["room_id"] == ctx.room_id


def test_error_map_rejects_receiver_outside_room(rendered_dataset):
    dataset = RirDataset.open(rendered_dataset)
    ctx = dataset.manifest.contexts[0]
    with pytest.raises(PreconditionError):
        compute_error_map(dataset, NearestNeighborPredictor(), ctx, Pose(-50.0, -50.0, 0.0), step=1.0)


def test_error_map_refuses_target_readers(rendered_dataset):
    dataset = RirDataset.open(rendered_dataset)
    ctx = dataset.manifest.contexts[0]
    with pytest.raises(DatasetError):
        compute_error_map(dataset, GroundTruthPredictor(), ctx, ctx.observations[0].pose, step=1.0, workers=1)
