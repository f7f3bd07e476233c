"""Acceptance suite: one test per release criterion.

Every test checks its criterion at the stated tolerance and enforces the
stated runtime budget.  Each emits a single PASS/FAIL line, replayed in
the terminal summary by conftest.py.
"""

import contextlib
import math
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from scipy.stats import qmc

from ramansim.crosscheck import run_battery
from ramansim.fitting import FitConfig, NoiseDataset, fit_dataset
from ramansim.gaussian import (
    apply_symplectic,
    homodyne_variance,
    phase_shift,
    symplectic_eigenvalues,
    symplectic_form,
    two_mode_squeezer,
    vacuum,
)
from ramansim.model import (
    AmplifierParams,
    CascadeScenario,
    ChannelParams,
    build_cascade,
    closed_form_noise_reduction,
    fringe_scan,
    fringe_visibility,
    gain_ratio_from_quantum_gain,
    joint_quadrature_variance,
    linear_to_db,
    min_noise_over_phase,
    reference_variance,
)


@contextlib.contextmanager
def criterion(number, summary, budget_s):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - t0
        if elapsed >= budget_s:
            raise AssertionError(
                f"criterion {number} runtime {elapsed:.2f}s exceeds {budget_s:g}s budget"
            )
        ok = True
    finally:
        elapsed = time.perf_counter() - t0
        line = (
            f"criterion {number} {'PASS' if ok else 'FAIL'} "
            f"[{elapsed:7.2f}s / {budget_s:g}s]  {summary}"
        )
        ACCEPTANCE_LINES.append(line)
        print(line)


def cascade(mu, gq, l1=0.0, l2=0.0, out=0.0, seed=0j):
    return CascadeScenario(
        AmplifierParams(mu),
        AmplifierParams.from_quantum_gain(gq),
        ChannelParams(l1, l2, 0.0, out),
        seed_amplitude=seed,
    )


def measured_noise_reduction_db(sc):
    """Noise-reduction ratio in dB from the numerical pipeline minimum."""
    _, var_min = min_noise_over_phase(sc)
    return float(linear_to_db(var_min / reference_variance(sc)))


def test_criterion_1_quantum_noise_gain():
    with criterion(1, "single stage on vacuum amplifies noise by 2G^2-1 (15.00 +/- 0.01 dB)", 1.0):
        stage = AmplifierParams.from_quantum_gain_db(15.0)
        state = apply_symplectic(vacuum(2), two_mode_squeezer(0, 1, stage.gain))
        var = homodyne_variance(state, 0)
        assert abs(var - stage.quantum_noise_gain) < 1e-10
        assert abs(float(linear_to_db(var)) - 15.00) <= 0.01


def test_criterion_2_gain_ratio_value():
    with criterion(2, "gain ratio at quantum gain 32 equals 0.969 +/- 0.001", 1.0):
        assert abs(gain_ratio_from_quantum_gain(32.0) - 0.969) <= 1e-3
        assert round(gain_ratio_from_quantum_gain(32.0), 2) == 0.97


def test_criterion_3_noise_reduction_regime():
    with criterion(
        3, "losses >= 0.1 per arm still allow R <= -3.5 dB and X+ near -4 dB", 1.0
    ):
        sc = cascade(1.17, 32.0, l1=0.1, l2=0.1)
        r_db = measured_noise_reduction_db(sc)
        assert r_db <= -3.5
        x_plus_db = float(linear_to_db(joint_quadrature_variance(1.17, 0.1, 0.1) / 2.0))
        assert -4.5 <= x_plus_db <= -3.5


def test_criterion_4_pipeline_formula_equivalence():
    with criterion(
        4, "pipeline minimum matches closed form < 1e-8; one loss pairing fits all", 30.0
    ):
        # equal losses: a single documented formula, agreement within 1e-8
        sample = qmc.Sobol(d=3, scramble=True, seed=1234).random_base2(10)
        worst_equal = 0.0
        for u in sample:
            mu = 1.0 + 1.5 * u[0]
            loss = 0.9 * u[1]
            gq = 10.0 ** ((0.2 + 24.8 * u[2]) / 10.0)
            sc = cascade(mu, gq, l1=loss, l2=loss)
            _, var_min = min_noise_over_phase(sc)
            r_pipe = var_min / reference_variance(sc)
            worst_equal = max(
                worst_equal, abs(r_pipe - closed_form_noise_reduction(mu, loss, loss, gq))
            )
        assert worst_equal < 1e-8

        # unequal losses: the cascade pairing agrees everywhere, the
        # swapped variant does not
        sample = qmc.Sobol(d=4, scramble=True, seed=4321).random_base2(10)
        worst_cascade = 0.0
        worst_swapped = 0.0
        for u in sample:
            mu = 1.0 + 1.5 * u[0]
            l1, l2 = 0.9 * u[1], 0.9 * u[2]
            gq = 10.0 ** ((0.2 + 24.8 * u[3]) / 10.0)
            sc = cascade(mu, gq, l1=l1, l2=l2)
            _, var_min = min_noise_over_phase(sc)
            r_pipe = var_min / reference_variance(sc)
            worst_cascade = max(
                worst_cascade,
                abs(r_pipe - closed_form_noise_reduction(mu, l1, l2, gq, pairing="cascade")),
            )
            worst_swapped = max(
                worst_swapped,
                abs(r_pipe - closed_form_noise_reduction(mu, l1, l2, gq, pairing="swapped")),
            )
        assert worst_cascade < 1e-8
        assert worst_swapped > 1e-8  # exactly one variant survives the sample


def test_criterion_5_oracle_equivalence():
    with criterion(
        5, "standard battery: Gaussian engine vs Fock oracle within 1e-6", 120.0
    ):
        result = run_battery()
        assert len(result.entries) >= 30
        assert result.max_deviation < 1e-6, (
            f"worst circuit {result.worst_circuit}: {result.max_deviation:.3e}"
        )


def test_criterion_6_fit_round_trip():
    with criterion(
        6, "fit recovers (1.5, 0.2, 0.3) to 1e-6; 1% noise keeps median X+ error < 3%", 60.0
    ):
        gq = np.array([2.0, 4.0, 8.0, 12.0, 16.0, 24.0, 32.0, 64.0])
        r0 = closed_form_noise_reduction(1.5, 0.2, 0.3, gq)
        truth = joint_quadrature_variance(1.5, 0.2, 0.3)

        fit = fit_dataset(NoiseDataset(gq, r0))
        assert abs(fit.mu_hat - 1.5) < 1e-6
        direct = max(abs(fit.l1_hat - 0.2), abs(fit.l2_hat - 0.3))
        swapped = max(abs(fit.l1_hat - 0.3), abs(fit.l2_hat - 0.2))
        assert min(direct, swapped) < 1e-6
        assert abs(fit.correlation_x_plus - truth) < 1e-8

        # Monte Carlo with 1% relative noise; a reduced start count per
        # trial keeps the loop fast and does not change the outcome
        config = FitConfig(n_starts=4)
        rel_errors = []
        for trial in range(100):
            rng = np.random.default_rng(1000 + trial)
            sigma = 0.01 * r0
            data = NoiseDataset(gq, r0 + rng.normal(0.0, sigma), sigma)
            mc_fit = fit_dataset(data, config)
            rel_errors.append(abs(mc_fit.correlation_x_plus - truth) / truth)
        assert float(np.median(rel_errors)) < 0.03


def test_criterion_7_output_loss_irrelevance():
    with criterion(
        7, "2.8 dB detection loss shifts R by < 0.2 dB at readout gain >= 15 dB", 1.0
    ):
        out_loss = 1.0 - 10.0 ** (-2.8 / 10.0)
        for gq_db in (15.0, 20.0):
            gq = 10.0 ** (gq_db / 10.0)
            clean_db = measured_noise_reduction_db(cascade(1.17, gq, 0.1, 0.1))
            lossy_db = measured_noise_reduction_db(cascade(1.17, gq, 0.1, 0.1, out=out_loss))
            assert abs(lossy_db - clean_db) < 0.2


def test_criterion_8_fringes():
    with criterion(
        8, "seeded fringe is a period-2pi cosine; visibility = 2AB/(A^2+B^2)", 1.0
    ):
        mu, gq, l1, l2 = 1.5, 32.0, 0.1, 0.2
        sc = cascade(mu, gq, l1=l1, l2=l2, seed=1.0 + 0j)
        readout = AmplifierParams.from_quantum_gain(gq)
        nu = math.sqrt(mu * mu - 1.0)
        a = readout.gain * math.sqrt(1.0 - l1) * mu
        b = readout.cross_gain * math.sqrt(1.0 - l2) * nu

        trace = fringe_scan(sc, 720)
        model = a * a + b * b + 2.0 * a * b * np.cos(trace.phases)
        scale = (a + b) ** 2
        assert np.max(np.abs(trace.seed_intensity - model)) < 1e-9 * scale

        assert abs(fringe_visibility(sc) - 2 * a * b / (a * a + b * b)) < 1e-9
        seed_int = trace.seed_intensity
        measured = (seed_int.max() - seed_int.min()) / (seed_int.max() + seed_int.min())
        assert abs(fringe_visibility(sc) - measured) < 1e-9

        flat = cascade(1.0, gq, seed=1.0 + 0j)
        assert fringe_visibility(flat) == 0.0
        assert np.ptp(fringe_scan(flat, 64).seed_intensity) < 1e-9


def test_criterion_9_property_suite():
    with criterion(
        9, "symplecticity, physicality, monotone R, high-gain asymptote (512 cases each)", 60.0
    ):
        # symplecticity of composed operations
        rng = np.random.default_rng(2024)
        omega = symplectic_form(2)
        for _ in range(512):
            op_a = two_mode_squeezer(0, 1, 1.0 + 2.0 * rng.random(), 2 * np.pi * rng.random())
            op_b = phase_shift(rng.integers(0, 2), 2 * np.pi * rng.random(), n_modes=2)
            s = op_a.matrix @ op_b.matrix
            assert np.allclose(s @ omega @ s.T, omega, atol=1e-10)

        # physicality of random cascade outputs
        sample = qmc.Sobol(d=5, scramble=True, seed=55).random_base2(9)
        for u in sample:
            sc = CascadeScenario(
                AmplifierParams(1.0 + 1.5 * u[0]),
                AmplifierParams.from_quantum_gain(1.0 + 99.0 * u[1]),
                ChannelParams(0.9 * u[2], 0.9 * u[3], 2 * np.pi * u[4]),
            )
            nus = symplectic_eigenvalues(build_cascade(sc).cov)
            assert np.all(nus >= 1.0 - 1e-9)

        # R non-increasing in prep gain (up to the readout gain, equal losses)
        sample = qmc.Sobol(d=2, scramble=True, seed=66).random_base2(9)
        for u in sample:
            loss = 0.9 * u[0]
            gq = 10.0 ** ((3.0 + 22.0 * u[1]) / 10.0)
            mu_top = math.sqrt((gq + 1.0) / 2.0)
            mus = np.linspace(1.0, mu_top, 9)
            r = closed_form_noise_reduction(mus, loss, loss, gq)
            assert np.all(np.diff(r) <= 1e-12)

        # R non-increasing in readout quantum gain (equal losses)
        sample = qmc.Sobol(d=2, scramble=True, seed=77).random_base2(9)
        gqs = np.linspace(1.5, 1e4, 60)
        for u in sample:
            mu = 1.0 + 1.0 * u[0]
            loss = 0.9 * u[1]
            r = closed_form_noise_reduction(mu, loss, loss, gqs)
            assert np.all(np.diff(r) <= 1e-12)

        # high-gain asymptote R -> X+/2 at quantum gain 1e6
        sample = qmc.Sobol(d=3, scramble=True, seed=7).random_base2(9)
        for u in sample:
            mu = 1.0 + 0.4 * u[0]
            l1, l2 = 0.9 * u[1], 0.9 * u[2]
            gap = abs(
                closed_form_noise_reduction(mu, l1, l2, 1e6)
                - joint_quadrature_variance(mu, l1, l2) / 2.0
            )
            assert gap < 1e-6
