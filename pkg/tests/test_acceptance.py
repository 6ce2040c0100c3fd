"""
Desk-scale statistical checks of the full pipeline.

These runs take minutes; deselect them with ``-m "not slow"``.
"""

import itertools

import numpy as np
import pytest

from app.schemas.ranking import MixtureParams
from app.schemas.report import ExperimentConfig, FitConfig
from app.services.em_mixture import fit_em, random_init, select_k, spectral_init, split_dataset
from app.services.evaluation import dist_metric, run_repetition, run_synthetic
from app.services.spectral_cluster import (
    default_threshold,
    embed_pairwise,
    misclustering_rate,
    spectral_cluster,
)
from app.services.synthetic import generate_top_L, sample_mixture
from app.utils.preflib import parse_soc, write_soc

pytestmark = pytest.mark.slow


class TestEMMonotonicity:
    """Test that EM never lowers the likelihood."""

    def test_twenty_fits(self):
        """Test consecutive trace differences ≥ -1e-6 on 20 synthetic fits."""
        for seed in range(20):
            rng = np.random.default_rng(seed)
            truth = generate_top_L(10, 10, 2, rng)
            dataset, _ = sample_mixture(truth, 500, rng)
            report = fit_em(dataset, 2, FitConfig(max_em_iter=50, seed=seed))
            assert np.all(np.diff(report.loglik_trace) >= -1e-6), f"seed {seed}"

    def test_sharply_peaked_fits(self):
        """Test that fits with utilities scaled by 3 complete and stay monotone."""
        for seed in range(6):
            rng = np.random.default_rng(seed)
            truth = generate_top_L(10, 10, 2, rng)
            truth = MixtureParams(thetas=3.0 * truth.thetas, beta=truth.beta)
            dataset, _ = sample_mixture(truth, 500, rng)
            report = fit_em(dataset, 2, FitConfig(max_em_iter=50, seed=seed))
            assert np.all(np.diff(report.loglik_trace) >= -1e-6), f"seed {seed}"


class TestClusteringRecovery:
    """Test spectral clustering in the high-SNR regime."""

    def test_mean_misclustering(self):
        """Test mean misclustering ≤ 0.05 for n=20, K=2, m=2000 over 10 seeds."""
        rates = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            truth = generate_top_L(20, 20, 2, rng)
            dataset, labels = sample_mixture(truth, 2000, rng)
            X = embed_pairwise(dataset)
            assignment = spectral_cluster(X, 2, default_threshold(dataset.n, dataset.m), rng)
            rates.append(misclustering_rate(assignment.labels, labels, 2))
        assert np.mean(rates) <= 0.05


class TestErrorScaling:
    """Test that the estimation error shrinks like m^(-1/2)."""

    def test_quadrupling_m_halves_dist(self):
        """Test the median dist ratio between m=2000 and m=8000 lies in [1.4, 2.8]."""
        base = dict(n=15, K=2, L=15, seed=0, repetitions=10, max_em_iter=50, record_runtime=False)
        small = run_synthetic(ExperimentConfig(m=2000, **base))
        large = run_synthetic(ExperimentConfig(m=8000, **base))
        assert small.failures == 0 and large.failures == 0
        assert 1.4 <= small.dist / large.dist <= 2.8


class TestInitializationComparison:
    """Test spectral against random initialization."""

    def test_spectral_beats_random(self):
        """Test spectral < random init dist in ≥ 8/10 seeds and EM improving in ≥ 9/10."""
        config = ExperimentConfig(n=20, K=2, L=20, m=2000, max_em_iter=50, record_runtime=False)
        spectral_wins = 0
        em_improves = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            truth = generate_top_L(20, 20, 2, rng)
            dataset, _ = sample_mixture(truth, 2000, rng)
            spectral = spectral_init(dataset, 2, "logit", rng)
            random = random_init(20, 2, rng)
            spectral_wins += dist_metric(spectral, truth) < dist_metric(random, truth)

            row = run_repetition(config, seed)
            em_improves += row["dist_final"] <= row["dist_init"]
        assert spectral_wins >= 8
        assert em_improves >= 9


class TestModelSelection:
    """Test BIC-based selection of K."""

    def test_selects_two(self):
        """Test that candidates {1, 2, 4} give K=2 in ≥ 8/10 seeds."""
        hits = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            base = rng.standard_normal(10)
            thetas = np.column_stack([2.0 * base, -2.0 * base])
            truth = MixtureParams(thetas=thetas, beta=[0.5, 0.5])
            dataset, _ = sample_mixture(truth, 4000, rng)
            train, validation = split_dataset(dataset, 0.2, seed)
            best, _ = select_k(train, validation, [1, 2, 4], FitConfig(max_em_iter=50, seed=seed))
            hits += best == 2
        assert hits >= 8


class TestFormatRoundTrip:
    """Test PrefLib writing and parsing at scale."""

    def test_thousand_rankings(self):
        """Test parse/write identity on 1000 sampled rankings."""
        rng = np.random.default_rng(0)
        dataset, _ = sample_mixture(generate_top_L(8, 8, 2, rng), 1000, rng)
        text = write_soc(dataset)
        parsed = parse_soc(text)
        assert parsed.rankings == dataset.rankings
        assert write_soc(parsed) == text

    @pytest.mark.parametrize("size", [2, 3])
    def test_tie_group_expansion(self, size):
        """Test that a tied group expands to every extension with equal share."""
        group = list(range(2, 2 + size))
        line = "6: 1,{" + ",".join(str(i) for i in group) + "}"
        ds = parse_soc(f"# NUMBER ALTERNATIVES: {size + 1}\n{line}\n")

        expected = {(0,) + tuple(i - 1 for i in p) for p in itertools.permutations(group)}
        assert {r.items for r in ds.rankings} == expected
        np.testing.assert_allclose(ds.weights, np.full(len(expected), 6.0 / len(expected)))
