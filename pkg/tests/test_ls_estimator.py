"""
Unit tests for pairwise estimation, link transforms and least squares.
"""

import math

import numpy as np
import pytest

from app.schemas.estimation import PairwisePreferenceMatrix, TransformedMatrix
from app.schemas.ranking import PLParams, RankingDataset
from app.services.ls_estimator import (
    default_clamp,
    estimate_pairwise,
    fit_component,
    inverse_link,
    least_squares_fit,
    link_transform,
)
from app.services.pl_model import sample_orders


@pytest.fixture
def two_to_one():
    """Three rankings over two items: item 0 first twice."""
    return RankingDataset.from_lists(2, [[0, 1], [0, 1], [1, 0]])


def pair_system(phi):
    """Rows θ_i - θ_j = φ_ij over every ordered pair i ≠ j."""
    n = phi.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    design = np.zeros((len(pairs), n))
    for row, (i, j) in enumerate(pairs):
        design[row, i], design[row, j] = 1.0, -1.0
    return design, np.array([phi[i, j] for i, j in pairs])


class TestEstimatePairwise:
    """Test empirical pairwise preference probabilities."""

    def test_counts(self, two_to_one):
        """Test P_01 = 2/3 and complementary symmetry."""
        P = estimate_pairwise(two_to_one, [0, 1, 2])
        assert P.probs[0, 1] == pytest.approx(2 / 3)
        assert P.probs[1, 0] == pytest.approx(1 / 3)
        assert P.probs[0, 0] == 0.5
        assert P.count == 3

    def test_multiplicities_weight_votes(self):
        """Test that multiplicities act as vote counts."""
        ds = RankingDataset.from_lists(2, [[0, 1], [1, 0]], multiplicities=[3, 1])
        assert estimate_pairwise(ds, [0, 1]).probs[0, 1] == pytest.approx(0.75)

    def test_member_subset(self, small_dataset):
        """Test that only member rankings are counted."""
        P = estimate_pairwise(small_dataset, [3])
        # ranking [3, 2, 1, 0]
        assert P.probs[3, 0] == 1.0
        assert P.probs[1, 2] == 0.0

    def test_empty_members(self, two_to_one):
        """Test that an empty member set is rejected."""
        with pytest.raises(ValueError):
            estimate_pairwise(two_to_one, [])

    def test_partial_rejected(self):
        """Test that partial rankings are rejected."""
        ds = RankingDataset.from_lists(3, [[0, 1]])
        with pytest.raises(ValueError):
            estimate_pairwise(ds, [0])


class TestLinkTransform:
    """Test clamped logit/probit transforms."""

    def test_default_clamp(self):
        """Test the clamp rule and its cap."""
        assert default_clamp(1) == 0.25
        assert default_clamp(1000) == pytest.approx(5e-4)
        assert default_clamp(1e9) == pytest.approx(1e-6)

    def test_logit(self):
        """Test φ = ln(p / (1 - p)) off the diagonal."""
        probs = np.array([[0.5, 0.8], [0.2, 0.5]])
        phi = link_transform(PairwisePreferenceMatrix(probs=probs, count=100), "logit").phi
        assert phi[0, 1] == pytest.approx(math.log(4))
        assert phi[1, 0] == pytest.approx(-math.log(4))
        assert phi[0, 0] == 0.0

    def test_probit_inverts(self):
        """Test that probit transform and its inverse round-trip."""
        d = 0.7
        p = float(inverse_link(np.array(d), "probit"))
        probs = np.array([[0.5, p], [1 - p, 0.5]])
        phi = link_transform(PairwisePreferenceMatrix(probs=probs, count=1e6), "probit").phi
        assert phi[0, 1] == pytest.approx(d, abs=1e-10)

    def test_extreme_probabilities_clamped(self):
        """Test that unanimous preferences stay finite."""
        probs = np.array([[0.5, 1.0], [0.0, 0.5]])
        phi = link_transform(PairwisePreferenceMatrix(probs=probs, count=4), "logit").phi
        assert phi[0, 1] == pytest.approx(math.log(7))

    def test_invalid_clamp(self):
        """Test that the clamp must lie in (0, 0.5)."""
        probs = np.full((2, 2), 0.5)
        with pytest.raises(ValueError):
            link_transform(PairwisePreferenceMatrix(probs=probs, count=1), clamp=0.5)

    def test_unknown_link(self):
        """Test that an unknown link is rejected."""
        probs = np.full((2, 2), 0.5)
        with pytest.raises(ValueError):
            link_transform(PairwisePreferenceMatrix(probs=probs, count=1), "cloglog")


class TestLeastSquares:
    """Test the closed-form least-squares solver."""

    def test_exact_recovery(self):
        """Test exact φ_ij = θ_i - θ_j recovery for random θ."""
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 13))
            theta = rng.normal(size=n)
            theta -= theta.mean()
            phi = TransformedMatrix(phi=theta[:, None] - theta[None, :])
            np.testing.assert_allclose(least_squares_fit(phi).theta, theta, atol=1e-10)

    def test_mean_zero(self, rng):
        """Test that the solution is centered."""
        A = rng.normal(size=(5, 5))
        phi = TransformedMatrix(phi=A - A.T)
        assert least_squares_fit(phi).theta.mean() == pytest.approx(0.0, abs=1e-12)

    def test_inconsistent_triangle(self):
        """Test φ_01 = φ_02 = φ_12 = 1, whose best mean-zero fit is (2/3, 0, -2/3)."""
        upper = np.array([[0.0, 1.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
        phi = TransformedMatrix(phi=upper - upper.T)
        np.testing.assert_allclose(least_squares_fit(phi).theta, [2 / 3, 0.0, -2 / 3], atol=1e-12)

    def test_matches_dense_solve(self):
        """Test the closed form against a generic least-squares solve of the pair system."""
        for seed in range(10):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 9))
            A = rng.normal(size=(n, n))
            phi = A - A.T
            design, target = pair_system(phi)
            # Minimum-norm solution is orthogonal to the all-ones null space
            expected = np.linalg.lstsq(design, target, rcond=None)[0]
            theta = least_squares_fit(TransformedMatrix(phi=phi)).theta
            np.testing.assert_allclose(theta, expected, atol=1e-9)

    def test_single_coordinate_perturbations(self):
        """Test that no ±1e-3 move of one coordinate lowers the squared residual."""
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(3, 8))
            A = rng.normal(size=(n, n))
            phi = A - A.T
            design, target = pair_system(phi)
            theta = least_squares_fit(TransformedMatrix(phi=phi)).theta
            best = np.sum((design @ theta - target) ** 2)
            for i in range(n):
                for step in (-1e-3, 1e-3):
                    moved = theta.copy()
                    moved[i] += step
                    moved -= moved.mean()
                    assert np.sum((design @ moved - target) ** 2) >= best - 1e-12


class TestFitComponent:
    """Test the composed single-component estimator."""

    def test_two_items(self, two_to_one):
        """Test θ = ±ln(2)/2 from a 2:1 split."""
        theta = fit_component(two_to_one, [0, 1, 2]).theta
        np.testing.assert_allclose(theta, [math.log(2) / 2, -math.log(2) / 2], atol=1e-12)

    @pytest.mark.slow
    def test_consistency(self):
        """Test accuracy on 20000 PL samples with small dynamic range."""
        rng = np.random.default_rng(11)
        theta_star = PLParams(theta=rng.uniform(-1, 1, 8)).normalized().theta
        orders = sample_orders(theta_star, 20_000, rng)
        ds = RankingDataset.from_lists(8, orders.tolist())
        theta = fit_component(ds, range(ds.num_rankings)).theta
        assert np.linalg.norm(theta - theta_star) <= 0.05
