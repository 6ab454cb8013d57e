import json
import shutil
from dataclasses import replace

import numpy as np
import pytest

from src.acoustics.dsp import LOG
from src.acoustics.simulator import BinauralRir, simulate_rir
from src.data.dataset import CACHE_DIR, RirDataset
from src.data.manifest import MANIFEST_NAME, DatasetManifest
from src.data.rendering import read_rir, render_dataset, sample_rooms, write_rir
from src.errors import ConfigurationError, DatasetError


@pytest.fixture
def dataset(rendered_dataset):
    return RirDataset.open(rendered_dataset)


def test_wav_round_trip(tmp_path, rng):
    rir = BinauralRir(rng.uniform(-0.5, 0.5, (2, 300)), 8000)
    write_rir(tmp_path / "x.wav", rir)
    back = read_rir(tmp_path / "x.wav")
    assert back.sample_rate == 8000
    np.testing.assert_allclose(back.samples, rir.samples, atol=1e-7)


def test_read_missing_wav(tmp_path):
    with pytest.raises(DatasetError):
        read_rir(tmp_path / "nope.wav")


def test_manifest_layout(dataset, experiment):
    manifest = dataset.manifest
    ds = experiment.dataset
    assert [r.split for r in manifest.rooms] == ["seen", "unseen"]
    assert len(manifest.contexts) == 2 * ds.contexts_per_room
    assert manifest.n_queries() == 2 * ds.contexts_per_room * ds.queries_per_context
    for ctx in manifest.contexts:
        assert len(ctx.observations) == ds.observations_per_context
        assert all(o.depth.n_rays == ds.n_rays for o in ctx.observations)


def test_query_splits(dataset, experiment):
    manifest = dataset.manifest
    held_out = int(round(experiment.dataset.test_fraction * experiment.dataset.queries_per_context))
    for ctx in manifest.contexts_in("seen"):
        assert len(ctx.queries_in("test")) == held_out
    for ctx in manifest.contexts_in("unseen"):
        assert all(q.split == "test" for q in ctx.queries)


def test_points_stay_clear_of_walls(dataset, experiment):
    clearance = experiment.dataset.min_wall_clearance
    for ctx in dataset.manifest.contexts:
        room = dataset.manifest.room(ctx.room_id).spec
        points = [(o.pose.x, o.pose.y) for o in ctx.observations]
        points += [q.query.source for q in ctx.queries] + [(q.query.receiver.x, q.query.receiver.y) for q in ctx.queries]
        for x, y in points:
            assert clearance - 1e-9 <= x <= room.width - clearance + 1e-9
            assert clearance - 1e-9 <= y <= room.depth - clearance + 1e-9


def test_rendering_is_deterministic(experiment, rendered_dataset, tmp_path):
    again = render_dataset(sample_rooms(experiment), experiment, tmp_path / "again")
    first = (rendered_dataset / MANIFEST_NAME).read_bytes()
    assert (tmp_path / "again" / MANIFEST_NAME).read_bytes() == first
    ctx = again.contexts[0]
    np.testing.assert_array_equal(
        read_rir(tmp_path / "again" / ctx.queries[0].rir_file).samples,
        read_rir(rendered_dataset / ctx.queries[0].rir_file).samples,
    )


def test_stored_rir_matches_simulation(dataset, experiment):
    ctx = dataset.manifest.contexts[0]
    query = ctx.queries[0]
    room = dataset.manifest.room(ctx.room_id).spec
    expected = simulate_rir(room, query.query.source, query.query.receiver, experiment.sim)
    np.testing.assert_allclose(dataset.target_rir(query).samples, expected.samples, atol=1e-5)


def test_target_spectrogram_shape(dataset, experiment):
    ctx = dataset.manifest.contexts[0]
    spec = dataset.target_spectrogram(ctx.queries[0])
    assert spec.domain == LOG
    assert spec.shape == tuple(experiment.model.output_shape)
    batch = dataset.target_batch(ctx.queries[:3])
    assert batch.shape == (3, *experiment.model.output_shape)
    with pytest.raises(DatasetError):
        dataset.target_batch([])


def test_context_arrays_anchor_on_first_used_observation(dataset, experiment):
    ctx = dataset.manifest.contexts[0]
    arrays, anchor = dataset.context_arrays(ctx, experiment.model, [2, 0])
    assert anchor == ctx.observations[2].pose
    assert arrays.size == 2
    assert arrays.echo.shape[1] == experiment.model.echo_feature_dim
    q = dataset.query_arrays(ctx.queries[:4], anchor, experiment.model)
    assert q.shape[0] == 4


def test_feature_cache_matches_fresh_features(rendered_dataset, experiment, tmp_path):
    root = tmp_path / "copy"
    shutil.copytree(rendered_dataset, root)
    cfg = experiment.model
    fresh = RirDataset.open(root)
    expected = fresh.features(fresh.manifest.contexts[0], cfg.echo_bands, cfg.echo_time_bins)
    fresh.write_feature_cache(cfg.echo_bands, cfg.echo_time_bins)
    assert any((root / CACHE_DIR).iterdir())
    cached = RirDataset.open(root)
    got = cached.features(cached.manifest.contexts[0], cfg.echo_bands, cfg.echo_time_bins)
    for a, b in zip(expected, got):
        np.testing.assert_allclose(a.echo, b.echo)


def test_check_compatible(dataset, experiment):
    dataset.check_compatible(experiment.model)
    with pytest.raises(ConfigurationError):
        dataset.check_compatible(replace(experiment.model, output_shape=(2, 64, 64)))


def test_open_without_target_files(rendered_dataset, tmp_path):
    root = tmp_path / "context_only"
    shutil.copytree(rendered_dataset, root)
    shutil.rmtree(root / "rirs")
    dataset = RirDataset.open(root)
    ctx = dataset.manifest.contexts[0]
    assert dataset.observations(ctx)
    with pytest.raises(DatasetError):
        dataset.target_rir(ctx.queries[0])
    with pytest.raises(DatasetError):
        dataset.manifest.validate(root)


def test_manifest_rejects_bad_content(rendered_dataset, tmp_path):
    data = json.loads((rendered_dataset / MANIFEST_NAME).read_text(encoding="utf-8"))
    data["rooms"][1]["room_id"] = data["rooms"][0]["room_id"]
    with pytest.raises(DatasetError):
        DatasetManifest.from_dict(data).validate()
    data["version"] = 99
    with pytest.raises(DatasetError):
        DatasetManifest.from_dict(data)
    (tmp_path / MANIFEST_NAME).write_text("{", encoding="utf-8")
    with pytest.raises(DatasetError):
        DatasetManifest.load(tmp_path)
