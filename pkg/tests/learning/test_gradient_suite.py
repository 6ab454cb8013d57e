from src.learning.gradient_suite import check_losses, check_model, run_suite


def test_loss_gradients_match_finite_differences():
    results = check_losses(n_instances=5, seed=3)
    assert [r.name for r in results] == ["l1", "energy_decay", "total"]
    for r in results:
        assert len(r.report.entries) == 5 * 4
        assert r.report.passed, r.to_dict()


def test_model_gradients_match_finite_differences():
    result = check_model(n_instances=1, seed=1)
    assert result.name == "model"
    assert result.report.passed, result.to_dict()
    params = {e.param for e in result.report.entries}
    assert any(p.startswith("encoder.") for p in params)
    assert any(p.startswith("echo_encoder.") for p in params)
    assert any(p.startswith("head.") for p in params)


def test_suite_reports_every_check():
    results = run_suite(n_instances=2, model_instances=1, seed=0)
    assert [r.name for r in results] == ["l1", "energy_decay", "total", "model"]
    summary = results[-1].to_dict()
    assert set(summary) >= {"name", "tolerance", "checked", "max_rel_error", "passed"}
