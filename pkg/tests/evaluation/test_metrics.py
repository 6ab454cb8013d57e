import math

import numpy as np
import pytest

from src.config.models import EvalConfig
from src.data.dataset import RirDataset
from src.evaluation.metrics import Evaluator, evaluation_queries, query_metrics
from src.predictors.base import Prediction
from src.predictors.ground_truth import GroundTruthPredictor
from src.predictors.nearest_neighbor import NearestNeighborPredictor


@pytest.fixture
def dataset(rendered_dataset):
    return RirDataset.open(rendered_dataset)


def zero_or_undefined(value):
    return math.isnan(value) or value == pytest.approx(0.0, abs=1e-9)


def test_evaluation_queries(dataset):
    manifest = dataset.manifest
    seen = manifest.contexts_in("seen")[0]
    unseen = manifest.contexts_in("unseen")[0]
    assert all(q.split == "test" for q in evaluation_queries(seen, "seen"))
    assert len(evaluation_queries(seen, "seen")) < len(seen.queries)
    assert evaluation_queries(unseen, "unseen") == unseen.queries


def test_ground_truth_scores_zero(dataset):
    report = Evaluator(dataset, GroundTruthPredictor(), EvalConfig(localize=False, workers=1)).run({"seed": 0})
    assert len(report.rows) == 2 * 3 + 2 * 6
    for row in report.rows:
        assert row.stft == 0.0
        assert zero_or_undefined(row.rte)
        assert zero_or_undefined(row.drre)
        assert math.isnan(row.sle)
    assert set(report.aggregates) == {"seen", "unseen"}
    assert report.metadata == {"predictor": "ground_truth", "context_size": 0, "seed": 0}
    report.verify()


def test_parallel_evaluation_keeps_row_order(dataset):
    serial = Evaluator(dataset, NearestNeighborPredictor(), EvalConfig(localize=False, workers=1), context_size=2).run()
    parallel = Evaluator(dataset, NearestNeighborPredictor(), EvalConfig(localize=False, workers=3), context_size=2).run()
    assert [r.query_id for r in serial.rows] == [r.query_id for r in parallel.rows]
    np.testing.assert_array_equal([r.stft for r in serial.rows], [r.stft for r in parallel.rows])
    assert serial.mean("seen", "stft") > 0


def test_split_filter(dataset):
    report = Evaluator(dataset, NearestNeighborPredictor(), EvalConfig(localize=False, workers=1), splits=("unseen",)).run()
    assert {r.split for r in report.rows} == {"unseen"}


def test_query_metrics_localizes_predicted_waveform(dataset, experiment):
    ctx = dataset.manifest.contexts[0]
    query = ctx.queries[0]
    prediction = Prediction(dataset.target_spectrogram(query), dataset.target_rir(query))
    m = query_metrics(prediction, dataset.target_spectrogram(query), query, dataset.sim, EvalConfig())
    assert m.stft == 0.0
    assert math.isnan(m.sle) or m.sle >= 0.0
