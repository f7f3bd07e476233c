"""Least-squares fitting of noise-reduction data.

A dataset is a set of (quantum gain, noise reduction R) points measured at
fixed preparation stage and losses; the fitter recovers (mu, L1, L2) from
the closed-form model and extrapolates to the infinite-gain joint
quadrature variance, reported in dB relative to the uncorrelated value 2.

The model is evaluated through model.closed_form_noise_reduction (single
source of truth with the simulation pipeline).  Internally the optimizer
works in t = arccosh(mu): the model is smooth in t at the mu = 1 boundary,
whereas dR/dmu diverges there.  Multi-start Nelder-Mead with an L-BFGS-B
polish (analytic gradient) runs inside the box t in [0, arccosh(mu_max)],
losses in [0, 1]; every accepted refinement must not increase the
objective.

L1 and L2 become exactly interchangeable in the large-gain limit and
nearly so at lambda close to 1, so the fit reports the objective for both
orderings and flags near-degeneracy instead of pretending uniqueness.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .model import (
    closed_form_noise_reduction,
    gain_ratio_from_quantum_gain,
    joint_quadrature_variance,
    linear_to_db,
)

#: measured R may exceed 1 slightly through measurement noise
R_UPPER_SANITY = 1.05
#: two loss orderings are reported indistinguishable below this objective gap
DEGENERACY_TOL = 1e-10
#: required projected-gradient norm at the returned point
GRAD_TOL = 1e-8


class InsufficientDataError(ValueError):
    """Fewer points than the model has identifiable parameters."""


class DegenerateDesignError(ValueError):
    """The design carries no information (e.g. all gq identical)."""


class UnstableFitError(RuntimeError):
    """The fit (or too many bootstrap refits) failed to converge."""


@dataclass(frozen=True)
class NoiseDataset:
    """(gq, R[, sigma]) points; sorted by gq on construction."""

    quantum_gain: np.ndarray
    noise_ratio: np.ndarray
    sigma: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        gq = np.atleast_1d(np.asarray(self.quantum_gain, dtype=float))
        r = np.atleast_1d(np.asarray(self.noise_ratio, dtype=float))
        if gq.shape != r.shape or gq.ndim != 1 or gq.size == 0:
            raise ValueError("quantum_gain and noise_ratio must be matching 1-d arrays")
        if np.any(gq < 1.0):
            raise ValueError("quantum_gain values must be >= 1")
        if np.any(r <= 0.0):
            raise ValueError("noise_ratio values must be positive")
        if np.any(r > R_UPPER_SANITY):
            raise ValueError(
                f"noise_ratio above {R_UPPER_SANITY} is not a noise-reduction "
                "measurement; check the data reduction"
            )
        sigma = self.sigma
        if sigma is not None:
            sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
            if sigma.shape != gq.shape:
                raise ValueError("sigma must match the data length")
            if np.any(sigma <= 0.0):
                raise ValueError("sigma values must be positive")
        order = np.argsort(gq, kind="stable")
        gq, r = gq[order], r[order]
        if sigma is not None:
            sigma = sigma[order]
        if np.unique(gq).size == 1 and gq.size > 1:
            raise DegenerateDesignError("all quantum_gain values are identical")
        if np.any(np.diff(gq) <= 0.0):
            raise ValueError("quantum_gain values must be distinct")
        for arr in (gq, r) + (() if sigma is None else (sigma,)):
            arr.setflags(write=False)
        object.__setattr__(self, "quantum_gain", gq)
        object.__setattr__(self, "noise_ratio", r)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_points(self) -> int:
        return self.quantum_gain.size

    @property
    def weights(self) -> np.ndarray:
        """Inverse-variance weights, normalized to mean 1.

        The normalization leaves the minimizer unchanged but keeps the
        objective (and its gradient) on an O(1) scale regardless of the
        units of ``sigma``, so absolute convergence tolerances apply.
        """
        if self.sigma is None:
            return np.ones(self.n_points)
        w = 1.0 / (self.sigma * self.sigma)
        return w / w.mean()


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings.

    ``seed`` fixes the quasi-random start points (and, through
    bootstrap_uncertainty, the resampling), making runs reproducible.
    """

    n_starts: int = 16
    mu_max: float = 10.0
    seed: int = 0
    pairing: str = "cascade"

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.mu_max <= 1.0:
            raise ValueError("mu_max must be > 1")


@dataclass(frozen=True)
class FitResult:
    """Fit outcome, in physical parameters."""

    mu_hat: float
    l1_hat: float
    l2_hat: float
    residual_rms: float
    objective: float
    objective_swapped_losses: float
    loss_ordering_degenerate: bool
    correlation_x_plus: float
    correlation_db: float
    n_restarts_used: int
    projected_grad_norm: float
    dataset_label: str = ""
    covariance_estimate: np.ndarray | None = None

    @property
    def nu_hat(self) -> float:
        return math.sqrt(self.mu_hat * self.mu_hat - 1.0)


@dataclass(frozen=True)
class BootstrapResult:
    """Residual-resampling uncertainty estimate."""

    covariance: np.ndarray  # 3x3 over (mu, L1, L2)
    correlation_db_ci: tuple[float, float]  # 2.5 / 97.5 percentiles
    n_resamples: int
    n_failures: int


# ---------------------------------------------------------------------------
# model in internal coordinates


def _model(x: np.ndarray, gq: np.ndarray, pairing: str) -> np.ndarray:
    t, l1, l2 = x
    return np.atleast_1d(
        closed_form_noise_reduction(math.cosh(t), l1, l2, gq, pairing=pairing)
    )


def _model_grad(x: np.ndarray, gq: np.ndarray, pairing: str) -> np.ndarray:
    """d R / d (t, l1, l2), shape (3, n).  Smooth at t = 0."""
    t, l1, l2 = x
    lam = np.asarray(gain_ratio_from_quantum_gain(gq), dtype=float)
    lam2 = lam * lam
    denom = 1.0 + lam2
    c2t, s2t = math.cosh(2.0 * t), math.sinh(2.0 * t)
    t1 = max(1.0 - l1, 1e-300)
    t2 = max(1.0 - l2, 1e-300)
    s = math.sqrt(t1 * t2)
    if pairing == "cascade":
        q = (l1 + lam2 * l2) / denom
        dq_dl1, dq_dl2 = 1.0 / denom, lam2 / denom
    else:
        q = (l2 + lam2 * l1) / denom
        dq_dl1, dq_dl2 = lam2 / denom, 1.0 / denom
    # R = c2t - q (c2t - 1) - 2 lam s s2t / denom
    d_dt = 2.0 * s2t * (1.0 - q) - 4.0 * lam * s * c2t / denom
    d_dl1 = -(c2t - 1.0) * dq_dl1 + lam * s2t * s / (t1 * denom)
    d_dl2 = -(c2t - 1.0) * dq_dl2 + lam * s2t * s / (t2 * denom)
    return np.vstack([d_dt, d_dl1, d_dl2])


def _objective(x, gq, r, w, pairing):
    res = _model(x, gq, pairing) - r
    return float(np.sum(w * res * res))


def _objective_and_grad(x, gq, r, w, pairing):
    res = _model(x, gq, pairing) - r
    grad_r = _model_grad(x, gq, pairing)
    return float(np.sum(w * res * res)), 2.0 * (grad_r @ (w * res))


def _projected_gradient_norm(x, bounds, fun, h: float = 1e-6) -> float:
    """Finite-difference gradient, projected onto the feasible directions."""
    g = np.empty(len(x))
    for i in range(len(x)):
        lo, hi = bounds[i]
        hp = min(h, hi - x[i])
        hm = min(h, x[i] - lo)
        xp, xm = np.array(x), np.array(x)
        xp[i] += hp
        xm[i] -= hm
        g[i] = (fun(xp) - fun(xm)) / (hp + hm) if hp + hm > 0 else 0.0
    proj = np.array(g)
    for i, (lo, hi) in enumerate(bounds):
        if x[i] <= lo + 1e-12 and g[i] > 0:
            proj[i] = 0.0
        if x[i] >= hi - 1e-12 and g[i] < 0:
            proj[i] = 0.0
    return float(np.linalg.norm(proj))


def _local_refine(x0, f_best, args, bounds):
    """Nelder-Mead then gradient polish from x0; returns (x, f), accepting a
    candidate only if it does not increase the objective."""
    gq, r, w, pairing = args
    x, f = np.array(x0, dtype=float), f_best
    nm = optimize.minimize(
        _objective,
        x,
        args=args,
        method="Nelder-Mead",
        bounds=bounds,
        options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000, "maxfev": 8000},
    )
    if nm.fun <= f:
        x, f = np.clip(nm.x, [b[0] for b in bounds], [b[1] for b in bounds]), float(nm.fun)
    lb = optimize.minimize(
        _objective_and_grad,
        x,
        args=args,
        method="L-BFGS-B",
        jac=True,
        bounds=bounds,
        options={"ftol": 1e-16, "gtol": 1e-12, "maxiter": 1000},
    )
    if lb.fun <= f:
        x, f = np.clip(lb.x, [b[0] for b in bounds], [b[1] for b in bounds]), float(lb.fun)
    return x, f


def _sobol_sample(dim: int, n: int, seed: int) -> np.ndarray:
    """First ``n`` points of a scrambled Sobol sequence.

    Draws the next power of two and slices, which keeps the sequence's
    balance properties for any requested count.
    """
    m = math.ceil(math.log2(n)) if n > 1 else 0
    return qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(m)[:n]


def _fit_internal(data: NoiseDataset, config: FitConfig, extra_starts=()):
    """Multi-start minimization; returns (x, objective, grad_norm, n_starts)."""
    gq = data.quantum_gain
    r = data.noise_ratio
    w = data.weights
    args = (gq, r, w, config.pairing)
    t_max = math.acosh(config.mu_max)
    bounds = [(0.0, t_max), (0.0, 1.0), (0.0, 1.0)]

    unit = _sobol_sample(3, config.n_starts, config.seed)
    starts = [np.array([u[0] * t_max, u[1], u[2]]) for u in unit]
    starts.extend(np.asarray(x, dtype=float) for x in extra_starts)

    best_x, best_f = None, np.inf
    for x0 in starts:
        x, f = _local_refine(x0, _objective(x0, *args), args, bounds)
        if f < best_f:
            best_x, best_f = x, f

    # the loss orderings swap into each other's basins; polish from the
    # mirrored point so the better-labelled minimum is not missed
    mirrored = np.array([best_x[0], best_x[2], best_x[1]])
    x, f = _local_refine(mirrored, _objective(mirrored, *args), args, bounds)
    if f < best_f:
        best_x, best_f = x, f

    fun = lambda x: _objective(x, *args)
    grad_norm = _projected_gradient_norm(best_x, bounds, fun)
    for _ in range(3):
        if grad_norm < GRAD_TOL:
            break
        best_x, best_f = _local_refine(best_x, best_f, args, bounds)
        grad_norm = _projected_gradient_norm(best_x, bounds, fun)
    if grad_norm >= GRAD_TOL:
        raise UnstableFitError(
            f"projected gradient norm {grad_norm:.2e} after refinement; fit did not converge"
        )
    return best_x, best_f, grad_norm, len(starts)


def _result_from_internal(x, f_best, grad_norm, n_starts, data, config) -> FitResult:
    t, l1, l2 = x
    mu = math.cosh(t)
    gq = data.quantum_gain
    w = data.weights
    f_swapped = _objective(np.array([t, l2, l1]), gq, data.noise_ratio, w, config.pairing)
    x_plus = joint_quadrature_variance(mu, l1, l2)
    return FitResult(
        mu_hat=mu,
        l1_hat=float(l1),
        l2_hat=float(l2),
        residual_rms=math.sqrt(f_best / data.n_points),
        objective=f_best,
        objective_swapped_losses=f_swapped,
        loss_ordering_degenerate=bool(abs(f_best - f_swapped) < DEGENERACY_TOL),
        correlation_x_plus=x_plus,
        correlation_db=float(linear_to_db(x_plus / 2.0)),
        n_restarts_used=n_starts,
        projected_grad_norm=grad_norm,
        dataset_label=data.label,
    )


def fit_dataset(data: NoiseDataset, config: FitConfig | None = None) -> FitResult:
    """Weighted least-squares fit of (mu, L1, L2) to one dataset.

    Raises:
        InsufficientDataError: fewer than 4 points.
        DegenerateDesignError: no gq variation in the data.
        UnstableFitError: the optimizer could not reach a local minimum.
    """
    if config is None:
        config = FitConfig()
    if data.n_points < 4:
        raise InsufficientDataError(
            f"need >= 4 points to fit 3 parameters, got {data.n_points}"
        )
    x, f, grad_norm, n_starts = _fit_internal(data, config)
    return _result_from_internal(x, f, grad_norm, n_starts, data, config)


def correlation_from_fit(fit: FitResult) -> tuple[float, float]:
    """Infinite-gain joint quadrature variance implied by a fit, and its dB
    value relative to the uncorrelated 2."""
    x_plus = joint_quadrature_variance(fit.mu_hat, fit.l1_hat, fit.l2_hat)
    return x_plus, float(linear_to_db(x_plus / 2.0))


def finite_lambda_correlation(r_measured: float, quantum_gain: float) -> float:
    """Single-point estimate 2R of the joint quadrature variance, without
    the infinite-gain extrapolation; an upper-bound-style estimate since R
    still decreases toward the limit."""
    if r_measured <= 0:
        raise ValueError("r_measured must be positive")
    if quantum_gain < 1.0:
        raise ValueError("quantum_gain must be >= 1")
    return 2.0 * float(r_measured)


def bootstrap_uncertainty(
    data: NoiseDataset,
    fit: FitResult,
    n_resamples: int = 200,
    config: FitConfig | None = None,
) -> BootstrapResult:
    """Residual-resampling bootstrap around an existing fit.

    Residuals of the fit are resampled with replacement onto the model
    curve and each synthetic dataset is refit (warm-started at the fit).
    Returns the empirical covariance of (mu, L1, L2) and a 95% percentile
    interval for correlation_db.

    Raises:
        UnstableFitError: more than 20% of the refits fail.
    """
    if n_resamples < 100:
        raise ValueError("n_resamples must be >= 100")
    if config is None:
        config = FitConfig()
    rng = np.random.default_rng(config.seed + 0x5EED)
    gq = data.quantum_gain
    model_r = _model(
        np.array([math.acosh(fit.mu_hat), fit.l1_hat, fit.l2_hat]), gq, config.pairing
    )
    residuals = data.noise_ratio - model_r
    warm = np.array([math.acosh(fit.mu_hat), fit.l1_hat, fit.l2_hat])
    boot_config = replace(config, n_starts=2)

    params, corr_db = [], []
    failures = 0
    for _ in range(n_resamples):
        draw = residuals[rng.integers(0, data.n_points, size=data.n_points)]
        try:
            resampled = NoiseDataset(gq, model_r + draw, data.sigma, data.label)
            x, f, g, n = _fit_internal(resampled, boot_config, extra_starts=(warm,))
            res = _result_from_internal(x, f, g, n, resampled, boot_config)
        except (ValueError, UnstableFitError):
            failures += 1
            continue
        params.append([res.mu_hat, res.l1_hat, res.l2_hat])
        corr_db.append(res.correlation_db)
    if failures > 0.2 * n_resamples:
        raise UnstableFitError(
            f"{failures}/{n_resamples} bootstrap refits failed; uncertainty not trustworthy"
        )
    arr = np.asarray(params)
    cov = np.cov(arr.T, ddof=1) if arr.shape[0] > 1 else np.zeros((3, 3))
    lo, hi = np.percentile(corr_db, [2.5, 97.5])
    return BootstrapResult(cov, (float(lo), float(hi)), n_resamples, failures)


# ---------------------------------------------------------------------------
# shared-loss joint fit


def fit_datasets_shared_loss(
    datasets: Sequence[NoiseDataset], config: FitConfig | None = None
) -> list[FitResult]:
    """Joint fit of several datasets sharing (L1, L2), one mu per dataset.

    Returns one FitResult per dataset; the objective fields carry the total
    (summed) objective of the joint problem.
    """
    if config is None:
        config = FitConfig()
    if len(datasets) == 0:
        raise InsufficientDataError("no datasets given")
    if len(datasets) == 1:
        return [fit_dataset(datasets[0], config)]
    n_par = 2 + len(datasets)
    n_total = sum(d.n_points for d in datasets)
    if n_total < n_par + 1:
        raise InsufficientDataError(
            f"need >= {n_par + 1} points to fit {n_par} parameters, got {n_total}"
        )
    t_max = math.acosh(config.mu_max)
    bounds = [(0.0, 1.0), (0.0, 1.0)] + [(0.0, t_max)] * len(datasets)

    def total_objective(z):
        l1, l2 = z[0], z[1]
        return sum(
            _objective(np.array([t, l1, l2]), d.quantum_gain, d.noise_ratio, d.weights, config.pairing)
            for t, d in zip(z[2:], datasets)
        )

    unit = _sobol_sample(n_par, config.n_starts, config.seed)
    lows = np.array([b[0] for b in bounds])
    highs = np.array([b[1] for b in bounds])
    best_z, best_f = None, np.inf
    for u in unit:
        z0 = lows + u * (highs - lows)
        res = optimize.minimize(
            total_objective,
            z0,
            method="Nelder-Mead",
            bounds=bounds,
            options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 8000, "maxfev": 16000},
        )
        z, f = res.x, float(res.fun)
        res = optimize.minimize(
            total_objective, z, method="L-BFGS-B", bounds=bounds,
            options={"ftol": 1e-16, "maxiter": 1000},
        )
        if res.fun <= f:
            z, f = res.x, float(res.fun)
        if f < best_f:
            best_z, best_f = np.clip(z, lows, highs), f

    mirrored = np.array(best_z)
    mirrored[[0, 1]] = mirrored[[1, 0]]
    res = optimize.minimize(
        total_objective, mirrored, method="L-BFGS-B", bounds=bounds,
        options={"ftol": 1e-16, "maxiter": 1000},
    )
    if res.fun < best_f:
        best_z, best_f = np.clip(res.x, lows, highs), float(res.fun)

    grad_norm = _projected_gradient_norm(best_z, bounds, total_objective)
    if grad_norm >= GRAD_TOL:
        raise UnstableFitError(
            f"projected gradient norm {grad_norm:.2e}; joint fit did not converge"
        )
    l1, l2 = float(best_z[0]), float(best_z[1])
    f_swapped = total_objective(np.concatenate([[l2, l1], best_z[2:]]))
    results = []
    for t, d in zip(best_z[2:], datasets):
        mu = math.cosh(float(t))
        per_obj = _objective(np.array([t, l1, l2]), d.quantum_gain, d.noise_ratio, d.weights, config.pairing)
        x_plus = joint_quadrature_variance(mu, l1, l2)
        results.append(
            FitResult(
                mu_hat=mu,
                l1_hat=l1,
                l2_hat=l2,
                residual_rms=math.sqrt(per_obj / d.n_points),
                objective=best_f,
                objective_swapped_losses=f_swapped,
                loss_ordering_degenerate=bool(abs(best_f - f_swapped) < DEGENERACY_TOL),
                correlation_x_plus=x_plus,
                correlation_db=float(linear_to_db(x_plus / 2.0)),
                n_restarts_used=config.n_starts,
                projected_grad_norm=grad_norm,
                dataset_label=d.label,
            )
        )
    return results


# ---------------------------------------------------------------------------
# CSV interface


def load_noise_csv(path: str) -> NoiseDataset:
    """Load a (gq, R) dataset from CSV.

    Comment lines start with '#'.  The header row must contain gq_linear
    and R_linear columns (as written by the gain-sweep command); a sigma
    column is used as per-point standard deviation when present.

    Raises:
        ValueError: malformed content, with the offending line number.
    """
    gq, r, sigma = [], [], []
    header: dict[str, int] | None = None
    has_sigma = False
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if header is None:
                header = {name.strip(): i for i, name in enumerate(row)}
                if "gq_linear" not in header or "R_linear" not in header:
                    raise ValueError(
                        f"{path}: line {lineno}: header must contain gq_linear and R_linear"
                    )
                has_sigma = "sigma" in header
                continue
            try:
                gq.append(float(row[header["gq_linear"]]))
                r.append(float(row[header["R_linear"]]))
                if has_sigma:
                    sigma.append(float(row[header["sigma"]]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if header is None:
        raise ValueError(f"{path}: no header row found")
    if not gq:
        raise InsufficientDataError(f"{path}: no data rows")
    label = os.path.splitext(os.path.basename(path))[0]
    return NoiseDataset(
        np.array(gq), np.array(r), np.array(sigma) if has_sigma else None, label
    )
