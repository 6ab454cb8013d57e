import numpy as np

from src.nn import tensor as T
from src.nn.gradcheck import GradCheckEntry, check_array_gradient, gradient_check
from src.nn.layers import MLP
from src.nn.tensor import Tensor


def test_correct_gradient_passes(rng):
    x = rng.standard_normal((3, 4))
    report = check_array_gradient(lambda v: float(np.sum(v**3)), x, 3.0 * x**2, n_samples=12, rng=rng)
    assert report.passed
    assert len(report.entries) == 12


def test_wrong_gradient_fails(rng):
    x = rng.standard_normal(5) + 3.0
    report = check_array_gradient(lambda v: float(np.sum(v**3)), x, 2.0 * x**2, n_samples=5, rng=rng)
    assert not report.passed
    assert report.to_dict()["passed"] is False
    assert report.max_rel_error > 0.3


def test_sampling_never_exceeds_size(rng):
    x = np.ones(3)
    report = check_array_gradient(lambda v: float(np.sum(v)), x, np.ones(3), n_samples=50, rng=rng)
    assert len(report.entries) == 3


def test_rel_error_uses_absolute_floor():
    entry = GradCheckEntry("p", (0,), 0.0, 1e-9)
    assert entry.rel_error < 1e-3


def test_gradient_check_restores_parameters(rng):
    mlp = MLP([3, 5, 2], rng, dtype="float64")
    before = mlp.state_dict()
    x = Tensor(rng.standard_normal((4, 3)))
    report = gradient_check(lambda: T.mean(T.mul(mlp(x), mlp(x))), list(mlp.named_parameters()), rng=rng)
    assert report.passed
    for name, value in mlp.state_dict().items():
        np.testing.assert_array_equal(value, before[name])
