import numpy as np
import pytest

from src.acoustics.dsp import LINEAR, LOG, Spectrogram
from src.acoustics.geometry import Pose, Query
from src.data.dataset import RirDataset
from src.data.manifest import QueryEntry
from src.errors import ConfigurationError, DomainError, PreconditionError
from src.predictors.base import PredictionRequest
from src.predictors.linear_interpolation import (
    LinearInterpolationPredictor,
    interpolation_weights,
    linear_interp_predict,
)
from src.predictors.nearest_neighbor import NearestNeighborPredictor, nearest_neighbor_predict


def log_specs(rng, n, shape=(2, 5, 4)):
    return [Spectrogram(rng.uniform(0.0, 2.0, shape), None, LOG) for _ in range(n)]


POSES = [Pose(1.0, 1.0, 0.0), Pose(3.0, 1.0, 0.0), Pose(1.0, 3.0, 0.0), Pose(3.0, 3.0, 0.0), Pose(2.0, 2.0, 0.0)]


def test_nearest_neighbor_returns_echo_at_query_receiver(rng):
    echoes = log_specs(rng, len(POSES))
    for i, pose in enumerate(POSES):
        got = nearest_neighbor_predict(POSES, echoes, Query((0.5, 0.5), Pose(pose.x, pose.y, 1.0)))
        assert got is echoes[i]


def test_nearest_neighbor_ties_go_to_lowest_index(rng):
    echoes = log_specs(rng, 2)
    poses = [Pose(1.0, 2.0, 0.0), Pose(3.0, 2.0, 0.0)]
    assert nearest_neighbor_predict(poses, echoes, Query((0.0, 0.0), Pose(2.0, 2.0, 0.0))) is echoes[0]


def test_nearest_neighbor_needs_observations():
    with pytest.raises(PreconditionError):
        nearest_neighbor_predict([], [], Query((0.0, 0.0), Pose(1.0, 1.0, 0.0)))


def test_nearest_neighbor_rejects_linear_echo(rng):
    echo = Spectrogram(rng.uniform(0.0, 1.0, (2, 5, 4)), None, LINEAR)
    with pytest.raises(DomainError):
        nearest_neighbor_predict([POSES[0]], [echo], Query((0.0, 0.0), POSES[0]))


def test_interpolation_weights():
    np.testing.assert_allclose(interpolation_weights(np.array([1.0, 1.0, 2.0, 4.0]), "uniform"), [0.25] * 4)
    w = interpolation_weights(np.array([1.0, 2.0]))
    np.testing.assert_allclose(w, [2 / 3, 1 / 3])
    assert np.isfinite(interpolation_weights(np.array([0.0, 1.0]))).all()
    with pytest.raises(ConfigurationError):
        interpolation_weights(np.array([1.0]), "cubic")


def test_single_observation_interpolates_to_itself(rng):
    echo = log_specs(rng, 1)[0]
    got = linear_interp_predict([POSES[0]], [echo], Query((0.0, 0.0), POSES[3]))
    np.testing.assert_allclose(got.data, echo.data, atol=1e-12)
    assert got.domain == LOG


def test_equal_echoes_interpolate_to_the_same_echo(rng):
    data = rng.uniform(0.0, 2.0, (2, 5, 4))
    echoes = [Spectrogram(data.copy(), None, LOG) for _ in POSES]
    for weighting in ("uniform", "inverse_distance"):
        got = linear_interp_predict(POSES, echoes, Query((0.0, 0.0), Pose(1.7, 2.4, 0.0)), weighting)
        np.testing.assert_allclose(got.data, data, atol=1e-12)


def test_interpolation_mixes_in_linear_domain():
    a = Spectrogram(np.log1p(np.full((2, 3, 2), 1.0)), None, LOG)
    b = Spectrogram(np.log1p(np.full((2, 3, 2), 3.0)), None, LOG)
    poses = [Pose(1.0, 2.0, 0.0), Pose(3.0, 2.0, 0.0)]
    got = linear_interp_predict(poses, [a, b], Query((0.0, 0.0), Pose(2.0, 2.0, 0.0)))
    np.testing.assert_allclose(got.data, np.log1p(2.0))


def test_interpolation_uses_four_nearest(rng):
    echoes = log_specs(rng, len(POSES))
    far = Spectrogram(np.full((2, 5, 4), 50.0), None, LOG)
    poses = POSES[:4] + [Pose(40.0, 40.0, 0.0)]
    got = linear_interp_predict(poses, echoes[:4] + [far], Query((0.0, 0.0), Pose(2.0, 2.0, 0.0)), "uniform")
    expected = np.log1p(np.mean([np.expm1(e.data) for e in echoes[:4]], axis=0))
    np.testing.assert_allclose(got.data, expected, atol=1e-12)


def test_predictors_on_dataset_context(rendered_dataset):
    dataset = RirDataset.open(rendered_dataset)
    ctx = dataset.manifest.contexts[0]
    echoes = dataset.echo_spectrograms(ctx)
    target = ctx.observations[2].pose
    entry = QueryEntry("probe", Query(ctx.queries[0].query.source, target), "")
    request = PredictionRequest(dataset, ctx, [entry, *ctx.queries[:2]])

    nn = NearestNeighborPredictor().predict(request)
    assert len(nn) == 3
    np.testing.assert_array_equal(nn[0].spectrogram.data, echoes[2].data)
    assert all(p.waveform is None for p in nn)

    li = LinearInterpolationPredictor(weighting="uniform").predict(request)
    assert [p.spectrogram.shape for p in li] == [echoes[0].shape] * 3


def test_context_size_limits_observations(rendered_dataset):
    dataset = RirDataset.open(rendered_dataset)
    ctx = dataset.manifest.contexts[0]
    echoes = dataset.echo_spectrograms(ctx)
    # the last observation is out of reach with a context of one
    entry = QueryEntry("probe", Query(ctx.queries[0].query.source, ctx.observations[-1].pose), "")
    got = NearestNeighborPredictor().predict(PredictionRequest(dataset, ctx, [entry], context_size=1))
    np.testing.assert_array_equal(got[0].spectrogram.data, echoes[0].data)


def test_unknown_weighting_is_rejected():
    with pytest.raises(ConfigurationError):
        LinearInterpolationPredictor(weighting="cubic")
