"""Unit tests for the noise-reduction least-squares fitting module."""

import math

import numpy as np
import pytest

from ramansim.fitting import (
    DegenerateDesignError,
    FitConfig,
    InsufficientDataError,
    NoiseDataset,
    bootstrap_uncertainty,
    correlation_from_fit,
    finite_lambda_correlation,
    fit_dataset,
    fit_datasets_shared_loss,
    load_noise_csv,
)
from ramansim.model import closed_form_noise_reduction, joint_quadrature_variance

GQ_GRID = np.array([2.0, 4.0, 8.0, 12.0, 16.0, 24.0, 32.0, 64.0])


def synthetic_dataset(mu, l1, l2, sigma_rel=None, seed=None, pairing="cascade", label=""):
    r = closed_form_noise_reduction(mu, l1, l2, GQ_GRID, pairing=pairing)
    sigma = None
    if sigma_rel is not None:
        sigma = sigma_rel * r
        r = r + np.random.default_rng(seed).normal(0.0, sigma)
    return NoiseDataset(GQ_GRID, r, sigma, label)


def loss_recovery_error(fit, l1, l2):
    """Parameter error allowing the documented loss-ordering swap."""
    direct = max(abs(fit.l1_hat - l1), abs(fit.l2_hat - l2))
    swapped = max(abs(fit.l1_hat - l2), abs(fit.l2_hat - l1))
    return min(direct, swapped)


class TestNoiseDataset:
    def test_sorts_by_gain(self):
        data = NoiseDataset(np.array([8.0, 2.0, 4.0]), np.array([0.5, 0.9, 0.7]))
        assert data.quantum_gain == pytest.approx([2.0, 4.0, 8.0])
        assert data.noise_ratio == pytest.approx([0.9, 0.7, 0.5])

    def test_sigma_sorted_with_data(self):
        data = NoiseDataset(
            np.array([8.0, 2.0]), np.array([0.5, 0.9]), np.array([0.02, 0.01])
        )
        assert data.sigma == pytest.approx([0.01, 0.02])

    def test_weights_normalized_to_mean_one(self):
        data = NoiseDataset(
            np.array([2.0, 4.0, 8.0]),
            np.array([0.9, 0.7, 0.5]),
            np.array([0.004, 0.002, 0.008]),
        )
        assert data.weights.mean() == pytest.approx(1.0, abs=1e-14)
        assert data.weights[1] == data.weights.max()

    def test_unweighted_default(self):
        data = NoiseDataset(np.array([2.0, 4.0]), np.array([0.9, 0.7]))
        assert data.weights == pytest.approx([1.0, 1.0])

    @pytest.mark.parametrize(
        "gq,r",
        [
            ([0.5, 2.0], [0.9, 0.8]),
            ([2.0, 4.0], [0.9, -0.1]),
            ([2.0, 4.0], [0.9, 1.2]),
            ([2.0, 2.0, 4.0], [0.9, 0.8, 0.7]),
        ],
    )
    def test_validation(self, gq, r):
        with pytest.raises(ValueError):
            NoiseDataset(np.array(gq, dtype=float), np.array(r, dtype=float))

    def test_constant_design_rejected(self):
        with pytest.raises(DegenerateDesignError):
            NoiseDataset(np.array([8.0, 8.0, 8.0]), np.array([0.5, 0.5, 0.5]))


class TestFitRoundTrip:
    def test_noiseless_recovery_unequal_losses(self):
        data = synthetic_dataset(1.3, 0.05, 0.25, label="clean")
        fit = fit_dataset(data)
        assert abs(fit.mu_hat - 1.3) < 1e-6
        assert loss_recovery_error(fit, 0.05, 0.25) < 1e-6
        assert fit.projected_grad_norm < 1e-8
        assert fit.dataset_label == "clean"
        # at finite gain the loss ordering is identifiable
        assert fit.objective_swapped_losses > fit.objective + 1e-6
        assert not fit.loss_ordering_degenerate

    def test_joint_variance_swap_invariant(self):
        data = synthetic_dataset(1.3, 0.05, 0.25)
        fit = fit_dataset(data)
        truth = joint_quadrature_variance(1.3, 0.05, 0.25)
        assert abs(fit.correlation_x_plus - truth) < 1e-8
        x_plus, db = correlation_from_fit(fit)
        assert x_plus == pytest.approx(fit.correlation_x_plus, abs=1e-14)
        assert db == pytest.approx(fit.correlation_db, abs=1e-12)

    def test_equal_losses_flagged_degenerate(self):
        fit = fit_dataset(synthetic_dataset(1.17, 0.1, 0.1))
        assert fit.loss_ordering_degenerate
        assert abs(fit.mu_hat - 1.17) < 1e-6

    def test_vacuum_dataset(self):
        data = NoiseDataset(GQ_GRID, np.ones(GQ_GRID.size))
        fit = fit_dataset(data)
        assert fit.mu_hat == pytest.approx(1.0, abs=1e-6)
        assert fit.correlation_db == pytest.approx(0.0, abs=1e-5)

    def test_swapped_pairing_round_trip(self):
        data = synthetic_dataset(1.4, 0.3, 0.08, pairing="swapped")
        fit = fit_dataset(data, FitConfig(pairing="swapped"))
        assert abs(fit.mu_hat - 1.4) < 1e-6
        assert loss_recovery_error(fit, 0.3, 0.08) < 1e-6

    def test_weighted_fit_uses_sigma(self):
        data = synthetic_dataset(1.25, 0.15, 0.15, sigma_rel=0.01, seed=3)
        fit = fit_dataset(data)
        assert fit.projected_grad_norm < 1e-8
        assert abs(fit.mu_hat - 1.25) < 0.1

    def test_insufficient_points(self):
        data = NoiseDataset(np.array([2.0, 4.0, 8.0]), np.array([0.9, 0.8, 0.7]))
        with pytest.raises(InsufficientDataError):
            fit_dataset(data)

    def test_deterministic(self):
        data = synthetic_dataset(1.3, 0.05, 0.25)
        a = fit_dataset(data, FitConfig(seed=5))
        b = fit_dataset(data, FitConfig(seed=5))
        assert a.mu_hat == b.mu_hat
        assert a.objective == b.objective


class TestCorrelationHelpers:
    def test_single_point_estimate(self):
        assert finite_lambda_correlation(0.4, 32.0) == pytest.approx(0.8, abs=1e-14)

    def test_validation(self):
        with pytest.raises(ValueError):
            finite_lambda_correlation(0.0, 32.0)
        with pytest.raises(ValueError):
            finite_lambda_correlation(0.4, 0.5)


class TestBootstrap:
    def test_interval_covers_truth(self):
        data = synthetic_dataset(1.17, 0.1, 0.1, sigma_rel=0.01, seed=7)
        config = FitConfig()
        fit = fit_dataset(data, config)
        boot = bootstrap_uncertainty(data, fit, n_resamples=100, config=config)
        truth_db = 10 * math.log10(joint_quadrature_variance(1.17, 0.1, 0.1) / 2.0)
        lo, hi = boot.correlation_db_ci
        assert lo < truth_db < hi
        assert hi - lo < 0.5
        assert boot.n_failures <= 20
        assert boot.covariance.shape == (3, 3)
        assert np.allclose(boot.covariance, boot.covariance.T, atol=1e-15)
        assert np.all(np.diag(boot.covariance) >= 0.0)

    def test_reproducible(self):
        data = synthetic_dataset(1.2, 0.1, 0.2, sigma_rel=0.01, seed=1)
        config = FitConfig(seed=9)
        fit = fit_dataset(data, config)
        a = bootstrap_uncertainty(data, fit, n_resamples=100, config=config)
        b = bootstrap_uncertainty(data, fit, n_resamples=100, config=config)
        assert a.correlation_db_ci == b.correlation_db_ci

    def test_resample_count_validated(self):
        data = synthetic_dataset(1.2, 0.1, 0.2)
        fit = fit_dataset(data)
        with pytest.raises(ValueError):
            bootstrap_uncertainty(data, fit, n_resamples=50)


class TestSharedLossFit:
    def test_joint_recovery(self):
        sets = [
            synthetic_dataset(1.10, 0.15, 0.05, label="low"),
            synthetic_dataset(1.35, 0.15, 0.05, label="high"),
        ]
        fits = fit_datasets_shared_loss(sets)
        assert [f.dataset_label for f in fits] == ["low", "high"]
        assert abs(fits[0].mu_hat - 1.10) < 1e-6
        assert abs(fits[1].mu_hat - 1.35) < 1e-6
        for f in fits:
            assert loss_recovery_error(f, 0.15, 0.05) < 1e-6
        assert fits[0].l1_hat == fits[1].l1_hat
        assert fits[0].l2_hat == fits[1].l2_hat


class TestCsvLoader:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "sweep.csv"
        path.write_text(
            "# comment line\n"
            "sweep_value,gq_linear,R_linear,R_db\n"
            "1,2.0,0.9,-0.46\n"
            "2,8.0,0.7,-1.55\n"
        )
        data = load_noise_csv(str(path))
        assert data.quantum_gain == pytest.approx([2.0, 8.0])
        assert data.noise_ratio == pytest.approx([0.9, 0.7])
        assert data.sigma is None
        assert data.label == "sweep"

    def test_sigma_column(self, tmp_path):
        path = tmp_path / "meas.csv"
        path.write_text("gq_linear,R_linear,sigma\n2.0,0.9,0.01\n8.0,0.7,0.02\n")
        data = load_noise_csv(str(path))
        assert data.sigma == pytest.approx([0.01, 0.02])

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("gq_linear,R_linear\n2.0,0.9\nnot-a-number,0.7\n")
        with pytest.raises(ValueError, match="line 3"):
            load_noise_csv(str(path))

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="gq_linear"):
            load_noise_csv(str(path))

    def test_empty_data(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("gq_linear,R_linear\n")
        with pytest.raises(InsufficientDataError):
            load_noise_csv(str(path))
