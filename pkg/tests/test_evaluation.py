"""
Unit tests for the relabeling-minimal distance and the synthetic sweep runner.
"""

import math

import numpy as np
import pytest

from app.schemas.report import ExperimentConfig
from app.services import evaluation
from app.services.evaluation import CSV_COLUMNS, csv_columns, dist_metric, run_synthetic


@pytest.fixture
def sweep_config():
    """A small, fast synthetic experiment."""
    return ExperimentConfig(
        n=6, K=2, L=3, m=200, seed=10, repetitions=3, max_em_iter=10, record_runtime=False
    )


class TestDistMetric:
    """Test the relabeling-minimal Frobenius distance."""

    def test_zero_for_identical(self, separated_mixture):
        """Test d(θ, θ) = 0."""
        assert dist_metric(separated_mixture, separated_mixture) == 0.0

    def test_zero_for_permuted(self, separated_mixture):
        """Test that swapping components does not change the distance."""
        assert dist_metric(separated_mixture.permuted([1, 0]), separated_mixture) == 0.0

    def test_shift_invariance(self):
        """Test that adding a constant to a column is ignored."""
        theta = np.array([[1.0, -1.0], [0.0, 2.0], [-1.0, -1.0]])
        assert dist_metric(theta + np.array([5.0, -3.0]), theta) == pytest.approx(0.0, abs=1e-12)

    def test_mean_zero_bump(self, rng):
        """Test that a mean-zero perturbation of norm 0.3 gives distance 0.3."""
        theta = rng.normal(size=6)
        bump = rng.normal(size=6)
        bump -= bump.mean()
        bump *= 0.3 / np.linalg.norm(bump)
        assert dist_metric(theta + bump, theta) == pytest.approx(0.3, abs=1e-12)

    def test_triangle_inequality(self):
        """Test the triangle inequality on random triples."""
        rng = np.random.default_rng(0)
        for _ in range(20):
            A, B, C = (rng.normal(size=(5, 3)) for _ in range(3))
            assert dist_metric(A, C) <= dist_metric(A, B) + dist_metric(B, C) + 1e-12

    def test_symmetric(self, rng):
        """Test d(A, B) = d(B, A)."""
        A, B = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
        assert dist_metric(A, B) == pytest.approx(dist_metric(B, A))

    def test_shape_mismatch(self):
        """Test that differing shapes are rejected."""
        with pytest.raises(ValueError):
            dist_metric(np.zeros((4, 2)), np.zeros((4, 3)))


class TestRunSynthetic:
    """Test the synthetic sweep runner."""

    def test_rows_in_seed_order(self, sweep_config):
        """Test one row per repetition with consecutive seeds."""
        report = run_synthetic(sweep_config)
        assert [row["seed"] for row in report.rows] == [10, 11, 12]
        assert report.failures == 0
        assert all(set(CSV_COLUMNS) <= set(row) for row in report.rows)

    def test_deterministic(self, sweep_config):
        """Test that equal configs reproduce every row exactly."""
        a = run_synthetic(sweep_config)
        b = run_synthetic(sweep_config)
        assert a.rows == b.rows
        assert a.dist == b.dist

    def test_metrics_sane(self, sweep_config):
        """Test ranges of the per-repetition metrics."""
        report = run_synthetic(sweep_config)
        for row in report.rows:
            assert row["dist_final"] >= 0.0
            assert 0.0 <= row["miscluster"] <= 0.5
            assert row["loglik_val"] < 0.0
            assert row["runtime_s"] == 0.0
        assert report.dist == pytest.approx(np.median([r["dist_final"] for r in report.rows]))

    def test_without_em(self, sweep_config):
        """Test that run_em=False scores the initializer only."""
        config = sweep_config.model_copy(update={"run_em": False, "repetitions": 1})
        row = run_synthetic(config).rows[0]
        assert row["dist_final"] == row["dist_init"]

    def test_model_selection_column(self, sweep_config):
        """Test that k_candidates adds the k_selected column."""
        config = sweep_config.model_copy(update={"k_candidates": [1, 2], "repetitions": 1})
        assert csv_columns(config) == CSV_COLUMNS + ["k_selected"]
        assert run_synthetic(config).rows[0]["k_selected"] in {1, 2}

    def test_failed_repetition_recorded(self, sweep_config, monkeypatch):
        """Test that a failing repetition yields NaN metrics and the sweep continues."""

        def explode(config, seed):
            raise RuntimeError("boom")

        monkeypatch.setattr(evaluation, "run_repetition", explode)
        report = run_synthetic(sweep_config)
        assert report.failures == 3
        assert len(report.rows) == 3
        assert math.isnan(report.rows[0]["dist_final"])
        assert math.isnan(report.dist)


class TestExperimentConfig:
    """Test experiment validation."""

    def test_L_above_n(self):
        """Test that L may not exceed n."""
        with pytest.raises(ValueError):
            ExperimentConfig(n=4, K=2, L=5, m=10)

    def test_fit_config_seeded(self):
        """Test that fit_config carries the repetition seed."""
        config = ExperimentConfig(n=4, K=2, L=4, m=10)
        assert config.fit_config(7).seed == 7
        assert config.fit_config(7).init == "spectral"
