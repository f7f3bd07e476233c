"""Two-stage amplifier cascade model.

The system is a pair of Raman parametric amplifiers acting on the Stokes
field (mode 0) and the collective atomic spin wave (mode 1).  Stage 1
("prep", gains mu/nu) correlates the two modes starting from vacuum; each
mode then suffers loss (L1 on the Stokes field, L2 on the spin wave); a
relative phase phi is scanned on the Stokes arm; stage 2 ("readout", gains
G/g) amplifies the pair and the Stokes output is measured by homodyne
detection.

With the X = a + a^dag scaling, a single stage seeded by an uncorrelated
(vacuum or coherent) Stokes input produces output variance 2G^2 - 1, the
quantum noise gain.  The figure of merit R is the minimum-over-phi cascade
output variance divided by that uncorrelated reference; R < 1 means the
pre-correlated input beats the standard amplification noise.

All noise levels in dB are 10*log10 of the linear value, vacuum = 0 dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .gaussian import (
    GaussianState,
    LossChannel,
    apply_loss,
    apply_symplectic,
    displacement,
    homodyne_variance,
    mean_amplitude,
    mean_photon_number,
    phase_shift,
    two_mode_squeezer,
    vacuum,
)

#: scan_variable labels allowed on a NoiseTrace
SCAN_VARIABLES = ("phase", "pump_power", "quantum_gain")

#: loss-pairing variants of the closed-form noise reduction (see
#: closed_form_noise_reduction)
PAIRINGS = ("cascade", "swapped")


def linear_to_db(value):
    """10*log10 of a linear noise power (vacuum = 1 -> 0 dB)."""
    return 10.0 * np.log10(value)


def db_to_linear(value_db):
    """Inverse of :func:`linear_to_db`."""
    return 10.0 ** (np.asarray(value_db) / 10.0)


@dataclass(frozen=True)
class AmplifierParams:
    """One parametric amplifier stage.

    Args:
        gain: amplitude gain G >= 1 of the retained mode.
        pump_phase: pump phase theta; 0 keeps the convention that the
            cascade noise minimum sits at scan phase pi.
    """

    gain: float
    pump_phase: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.gain) or self.gain < 1.0:
            raise ValueError("gain must be finite and >= 1")
        if not np.isfinite(self.pump_phase):
            raise ValueError("pump_phase must be finite")

    @property
    def cross_gain(self) -> float:
        """Conjugate-mode gain g = sqrt(G^2 - 1)."""
        return math.sqrt(self.gain * self.gain - 1.0)

    @property
    def quantum_noise_gain(self) -> float:
        """Output noise of the stage for uncorrelated input: 2 G^2 - 1."""
        return 2.0 * self.gain * self.gain - 1.0

    @property
    def gain_ratio(self) -> float:
        """g / G, the knob that interpolates between the finite-gain (< 1)
        and ideal large-gain (-> 1) regimes."""
        return self.cross_gain / self.gain

    @classmethod
    def from_quantum_gain(cls, quantum_gain: float, pump_phase: float = 0.0) -> "AmplifierParams":
        """Build a stage from its quantum noise gain 2G^2 - 1 >= 1."""
        if not quantum_gain >= 1.0:
            raise ValueError("quantum_gain must be >= 1")
        return cls(math.sqrt((quantum_gain + 1.0) / 2.0), pump_phase)

    @classmethod
    def from_quantum_gain_db(cls, quantum_gain_db: float, pump_phase: float = 0.0) -> "AmplifierParams":
        """Build a stage from the quantum noise gain expressed in dB."""
        return cls.from_quantum_gain(float(db_to_linear(quantum_gain_db)), pump_phase)


def gain_ratio_from_quantum_gain(quantum_gain):
    """Map quantum noise gain to the gain ratio g / G.

    With gq = 2G^2 - 1 and g^2 = G^2 - 1 this is sqrt((gq - 1)/(gq + 1));
    it tends to 1 for large gain (infinity maps to exactly 1).
    """
    gq = np.asarray(quantum_gain, dtype=float)
    if np.any(gq < 1.0):
        raise ValueError("quantum_gain must be >= 1")
    out = np.where(np.isinf(gq), 1.0, np.sqrt((gq - 1.0) / np.where(np.isinf(gq), 2.0, gq + 1.0)))
    return float(out) if np.isscalar(quantum_gain) or np.ndim(quantum_gain) == 0 else out


@dataclass(frozen=True)
class PhysicalRamanParams:
    """Microscopic parameters of one Raman stage.

    The far-detuned pump drives a two-photon process with effective rate
    eta = coupling_eg * coupling_em * sqrt(atom_number) / detuning, and the
    stage gain is G = cosh(eta * pump_amplitude * interaction_time).
    """

    coupling_eg: float
    coupling_em: float
    detuning: float
    pump_amplitude: float
    interaction_time: float
    atom_number: float = 1.0

    def __post_init__(self):
        if self.coupling_eg <= 0 or self.coupling_em <= 0:
            raise ValueError("couplings must be positive")
        if self.detuning <= 0:
            raise ValueError("detuning must be positive (magnitude of the single-photon detuning)")
        if self.pump_amplitude < 0:
            raise ValueError("pump_amplitude must be non-negative")
        if self.interaction_time < 0:
            raise ValueError("interaction_time must be non-negative")
        if self.atom_number < 1:
            raise ValueError("atom_number must be >= 1")

    @property
    def effective_rate(self) -> float:
        return self.coupling_eg * self.coupling_em * math.sqrt(self.atom_number) / self.detuning

    @property
    def squeeze_parameter(self) -> float:
        return self.effective_rate * self.pump_amplitude * self.interaction_time

    def to_amplifier(self, pump_phase: float = 0.0) -> AmplifierParams:
        return AmplifierParams(math.cosh(self.squeeze_parameter), pump_phase)


def gain_from_pump_power(power: float, rate: float) -> float:
    """Stage gain at a given pump power: G = cosh(rate * sqrt(power)).

    The squeeze parameter grows with the pump field amplitude, i.e. with
    sqrt(power), which is the mapping used when a sweep is labelled
    "pump_power".
    """
    if power < 0:
        raise ValueError("power must be non-negative")
    if rate <= 0:
        raise ValueError("rate must be positive")
    return math.cosh(rate * math.sqrt(power))


@dataclass(frozen=True)
class ChannelParams:
    """Losses and phases between and after the two stages.

    Args:
        loss_stokes: fraction L1 of the Stokes field lost between stages.
        loss_spinwave: fraction L2 of the spin wave lost between stages
            (decoherence during the delay).
        scan_phase: phase phi applied to the Stokes arm between stages.
        output_loss: detection-path loss after the readout stage.
    """

    loss_stokes: float = 0.0
    loss_spinwave: float = 0.0
    scan_phase: float = 0.0
    output_loss: float = 0.0

    def __post_init__(self):
        for name in ("loss_stokes", "loss_spinwave", "output_loss"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be within [0, 1]")
        if not np.isfinite(self.scan_phase):
            raise ValueError("scan_phase must be finite")


@dataclass(frozen=True)
class CascadeScenario:
    """Full description of one cascade run."""

    prep: AmplifierParams
    readout: AmplifierParams
    channel: ChannelParams = field(default_factory=ChannelParams)
    seed_amplitude: complex = 0j

    def __post_init__(self):
        if not np.isfinite(self.seed_amplitude):
            raise ValueError("seed_amplitude must be finite")


@dataclass(frozen=True)
class NoiseTrace:
    """Sampled noise level (or noise-reduction ratio) along one scan axis."""

    scan_variable: str
    values: np.ndarray
    variance_linear: np.ndarray

    def __post_init__(self):
        if self.scan_variable not in SCAN_VARIABLES:
            raise ValueError(f"scan_variable must be one of {SCAN_VARIABLES}")
        values = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        var = np.atleast_1d(np.asarray(self.variance_linear, dtype=float)).copy()
        if values.shape != var.shape or values.ndim != 1:
            raise ValueError("values and variance_linear must be matching 1-d arrays")
        if not np.all(var > 0.0):
            raise ValueError("variance_linear must be strictly positive")
        values.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "variance_linear", var)

    @property
    def variance_db(self) -> np.ndarray:
        return linear_to_db(self.variance_linear)


@dataclass(frozen=True)
class FringeTrace:
    """Interference fringe of a seeded cascade vs the scan phase.

    ``seed_intensity`` is the coherent (mean-field) photon number at the
    Stokes output; ``background`` is the seed-independent amplified-noise
    photon number.  They are kept separate because the seed term passes
    through exact zeros at destructive interference when the two paths
    balance.
    """

    phases: np.ndarray
    seed_intensity: np.ndarray
    background: np.ndarray

    def __post_init__(self):
        ph = np.atleast_1d(np.asarray(self.phases, dtype=float)).copy()
        si = np.atleast_1d(np.asarray(self.seed_intensity, dtype=float)).copy()
        bg = np.atleast_1d(np.asarray(self.background, dtype=float)).copy()
        if not (ph.shape == si.shape == bg.shape) or ph.ndim != 1:
            raise ValueError("phases, seed_intensity, background must be matching 1-d arrays")
        if np.any(si < -1e-12) or np.any(bg < -1e-12):
            raise ValueError("intensities must be non-negative")
        for a in (ph, si, bg):
            a.setflags(write=False)
        object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "seed_intensity", si)
        object.__setattr__(self, "background", bg)

    @property
    def total_intensity(self) -> np.ndarray:
        return self.seed_intensity + self.background


# ---------------------------------------------------------------------------
# cascade pipeline


def build_cascade(scenario: CascadeScenario) -> GaussianState:
    """Run the full cascade and return the output two-mode Gaussian state.

    Order of operations: vacuum -> coherent seed on the Stokes mode ->
    prep squeezer -> Stokes loss -> spin-wave loss -> scan phase on the
    Stokes arm -> readout squeezer -> output loss on the Stokes arm.
    Loss ancillas are traced out implicitly by the channel update.
    """
    ch = scenario.channel
    state = vacuum(2)
    if scenario.seed_amplitude != 0:
        state = apply_symplectic(state, displacement(0, scenario.seed_amplitude, n_modes=2))
    state = apply_symplectic(
        state,
        two_mode_squeezer(0, 1, scenario.prep.gain, scenario.prep.pump_phase, n_modes=2),
    )
    if ch.loss_stokes > 0:
        state = apply_loss(state, LossChannel(0, ch.loss_stokes))
    if ch.loss_spinwave > 0:
        state = apply_loss(state, LossChannel(1, ch.loss_spinwave))
    if ch.scan_phase != 0:
        state = apply_symplectic(state, phase_shift(0, ch.scan_phase, n_modes=2))
    state = apply_symplectic(
        state,
        two_mode_squeezer(0, 1, scenario.readout.gain, scenario.readout.pump_phase, n_modes=2),
    )
    if ch.output_loss > 0:
        state = apply_loss(state, LossChannel(0, ch.output_loss))
    return state


def simulate_cascade_noise(scenario: CascadeScenario, lo_phase: float = 0.0) -> float:
    """Homodyne variance of the Stokes output of the cascade.

    The output Stokes mode is phase-insensitive (its reduced state carries
    no squeezing ellipse), so the value does not depend on ``lo_phase``;
    the argument is kept for explicitness in tests.
    """
    return homodyne_variance(build_cascade(scenario), 0, lo_phase)


def _phase_sweep_evaluator(scenario: CascadeScenario):
    """Return var(phi) for the scenario with everything but the scan phase
    frozen.  Identical to the full pipeline, with the phase-independent
    front section precomputed once."""
    ch = scenario.channel
    pre = build_cascade(
        replace(
            scenario,
            readout=AmplifierParams(1.0, scenario.readout.pump_phase),
            channel=replace(ch, scan_phase=0.0, output_loss=0.0),
        )
    )
    readout_op = two_mode_squeezer(
        0, 1, scenario.readout.gain, scenario.readout.pump_phase, n_modes=2
    )
    out_loss = LossChannel(0, ch.output_loss) if ch.output_loss > 0 else None

    def var_at(phi: float) -> float:
        state = apply_symplectic(pre, phase_shift(0, phi, n_modes=2))
        state = apply_symplectic(state, readout_op)
        if out_loss is not None:
            state = apply_loss(state, out_loss)
        return homodyne_variance(state, 0)

    return var_at


def noise_vs_phase(scenario: CascadeScenario, n_points: int = 256) -> NoiseTrace:
    """Sample the cascade output variance over phi in [0, 2*pi).

    The variance is affine in cos(phi + const), so the extremes of the
    trace sit exactly pi apart; with both pump phases 0 the maximum is at
    phi = 0 and the minimum at phi = pi.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    var_at = _phase_sweep_evaluator(scenario)
    phis = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    return NoiseTrace("phase", phis, np.array([var_at(p) for p in phis]))


def _golden_min(f, a: float, b: float, xtol: float):
    """Golden-section minimum of a unimodal f on [a, b] to |dphi| < xtol."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > xtol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def min_noise_over_phase(
    scenario: CascadeScenario, grid_points: int = 64, xtol: float = 1e-7
) -> tuple[float, float]:
    """Minimum cascade output variance over the scan phase.

    A coarse grid over [0, 2*pi) brackets the minimum and a golden-section
    refinement localizes it; the returned variance never exceeds any grid
    sample.  For a prep gain of exactly 1 the trace is flat and the
    returned variance equals the uncorrelated reference 2G^2 - 1 (times
    the output-loss transmission).

    Returns:
        (phi_min, variance_min)
    """
    if grid_points < 4:
        raise ValueError("grid_points must be >= 4")
    var_at = _phase_sweep_evaluator(scenario)
    phis = np.linspace(0.0, 2.0 * np.pi, grid_points, endpoint=False)
    samples = np.array([var_at(p) for p in phis])
    i = int(np.argmin(samples))
    step = 2.0 * np.pi / grid_points
    phi_lo, phi_hi = phis[i] - step, phis[i] + step
    phi_g, var_g = _golden_min(var_at, phi_lo, phi_hi, xtol)
    if var_g <= samples[i]:
        return float(phi_g % (2.0 * np.pi)), float(var_g)
    return float(phis[i]), float(samples[i])


def reference_variance(scenario: CascadeScenario) -> float:
    """Uncorrelated-input reference: the readout stage driven by vacuum,
    measured through the same output loss (2G^2 - 1 when lossless)."""
    base = scenario.readout.quantum_noise_gain
    t_out = 1.0 - scenario.channel.output_loss
    return t_out * base + scenario.channel.output_loss


def noise_reduction_ratio(scenario: CascadeScenario) -> float:
    """R: minimum-over-phase cascade variance over the uncorrelated
    reference.  R < 1 is the noise reduction from the pre-correlation."""
    _, var_min = min_noise_over_phase(scenario)
    return var_min / reference_variance(scenario)


# ---------------------------------------------------------------------------
# closed forms


def closed_form_noise_reduction(
    prep_gain,
    loss_stokes,
    loss_spinwave,
    quantum_gain,
    pairing: str = "cascade",
):
    """Closed-form noise reduction R(mu, L1, L2, gq).

    With lambda = sqrt((gq - 1)/(gq + 1)), nu = sqrt(mu^2 - 1) and
    T_i = 1 - L_i:

        R = mu^2 + nu^2 - 2 nu^2 w(L1, L2) / (1 + lambda^2)
            - 4 lambda mu nu sqrt(T1 T2) / (1 + lambda^2)

    where the loss weighting w is ``L1 + lambda^2 L2`` for the default
    "cascade" pairing and ``L2 + lambda^2 L1`` for "swapped".  The cascade
    pairing is the one that reproduces the squeezer/loss/phase pipeline
    exactly (the two coincide when L1 = L2); the swapped variant is kept
    for comparison against data reduced under the other convention.

    Scalar or broadcastable array arguments are accepted.
    """
    if pairing not in PAIRINGS:
        raise ValueError(f"pairing must be one of {PAIRINGS}")
    mu = np.asarray(prep_gain, dtype=float)
    l1 = np.asarray(loss_stokes, dtype=float)
    l2 = np.asarray(loss_spinwave, dtype=float)
    if np.any(mu < 1.0):
        raise ValueError("prep_gain must be >= 1")
    for name, l in (("loss_stokes", l1), ("loss_spinwave", l2)):
        if np.any((l < 0.0) | (l > 1.0)):
            raise ValueError(f"{name} must be within [0, 1]")
    lam = np.asarray(gain_ratio_from_quantum_gain(quantum_gain), dtype=float)
    nu2 = mu * mu - 1.0
    nu = np.sqrt(nu2)
    lam2 = lam * lam
    if pairing == "cascade":
        w = l1 + lam2 * l2
    else:
        w = l2 + lam2 * l1
    r = (
        mu * mu
        + nu2
        - 2.0 * nu2 * w / (1.0 + lam2)
        - 4.0 * lam * mu * nu * np.sqrt((1.0 - l1) * (1.0 - l2)) / (1.0 + lam2)
    )
    return float(r) if r.ndim == 0 else r


def joint_quadrature_variance(prep_gain: float, loss_stokes: float, loss_spinwave: float) -> float:
    """Variance of the summed Stokes/spin-wave quadrature after the prep
    stage and the inter-stage losses.

    This is the infinite-readout-gain limit of 2R: the readout stage at
    lambda -> 1 measures exactly this joint quadrature.  Uncorrelated
    vacuum gives 2; values below 2 certify the correlation.
    """
    mu = float(prep_gain)
    if mu < 1.0:
        raise ValueError("prep_gain must be >= 1")
    for name, l in (("loss_stokes", loss_stokes), ("loss_spinwave", loss_spinwave)):
        if not 0.0 <= l <= 1.0:
            raise ValueError(f"{name} must be within [0, 1]")
    nu2 = mu * mu - 1.0
    nu = math.sqrt(nu2)
    t1t2 = (1.0 - loss_stokes) * (1.0 - loss_spinwave)
    return 2.0 * (
        mu * mu + nu2 - nu2 * (loss_stokes + loss_spinwave) - 2.0 * mu * nu * math.sqrt(t1t2)
    )


def correlation_estimate_from_ratio(noise_ratio: float, quantum_gain: float) -> float:
    """Single-point estimate of the joint quadrature variance from one
    measured R at finite gain: 2R.  Because R decreases toward the
    lambda -> 1 limit (for equal losses, and generically near lambda = 1),
    this estimate is an upper bound on the true value."""
    if noise_ratio <= 0:
        raise ValueError("noise_ratio must be positive")
    if quantum_gain < 1.0:
        raise ValueError("quantum_gain must be >= 1")
    return 2.0 * float(noise_ratio)


# ---------------------------------------------------------------------------
# sweeps and fringes


def prep_gain_sweep(
    prep_gains: Sequence[float],
    readout: AmplifierParams,
    channel: ChannelParams,
) -> NoiseTrace:
    """Noise reduction R for each prep-stage gain in ``prep_gains``.

    The abscissa is the stage-1 amplitude gain mu, the monotone image
    cosh(rate*sqrt(P)) of pump power; the trace is labelled "pump_power".
    """
    gains = np.atleast_1d(np.asarray(prep_gains, dtype=float))
    if gains.size == 0:
        raise ValueError("prep_gains must be non-empty")
    ratios = [
        noise_reduction_ratio(CascadeScenario(AmplifierParams(mu), readout, channel))
        for mu in gains
    ]
    return NoiseTrace("pump_power", gains, np.array(ratios))


def quantum_gain_sweep(
    quantum_gains: Sequence[float],
    prep: AmplifierParams,
    channel: ChannelParams,
) -> NoiseTrace:
    """Noise reduction R vs the readout quantum noise gain, at fixed prep.

    As the readout gain grows, R approaches half the joint quadrature
    variance of the prepared state (the lambda -> 1 limit)."""
    gqs = np.atleast_1d(np.asarray(quantum_gains, dtype=float))
    if gqs.size == 0:
        raise ValueError("quantum_gains must be non-empty")
    ratios = [
        noise_reduction_ratio(
            CascadeScenario(prep, AmplifierParams.from_quantum_gain(gq), channel)
        )
        for gq in gqs
    ]
    return NoiseTrace("quantum_gain", gqs, np.array(ratios))


def fringe_scan(scenario: CascadeScenario, n_points: int = 256) -> FringeTrace:
    """Seeded-interferometer fringe: Stokes output intensity vs scan phase.

    Requires a nonzero coherent seed.  The seed term is
    |A e^{i phi} + B|^2 = A^2 + B^2 + 2 A B cos(phi) with
    A = G mu sqrt(T1) |alpha| and B = g nu sqrt(T2) |alpha|; the reported
    background is the seed-independent amplified noise photon number.
    """
    if scenario.seed_amplitude == 0:
        raise ValueError(
            "fringe_scan needs a nonzero seed_amplitude; for vacuum-seeded "
            "noise scans use noise_vs_phase"
        )
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    phis = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    seed = np.empty_like(phis)
    background = np.empty_like(phis)
    for i, phi in enumerate(phis):
        state = build_cascade(replace(scenario, channel=replace(scenario.channel, scan_phase=phi)))
        coherent = abs(mean_amplitude(state, 0)) ** 2
        seed[i] = coherent
        background[i] = mean_photon_number(state, 0) - coherent
    return FringeTrace(phis, seed, background)


def fringe_visibility(scenario: CascadeScenario) -> float:
    """Visibility (max-min)/(max+min) of the seed fringe: 2AB/(A^2+B^2).

    Zero when either interfering path vanishes (prep gain 1, i.e. nu = 0,
    or a fully blocked arm)."""
    ch = scenario.channel
    a = (
        scenario.readout.gain
        * scenario.prep.gain
        * math.sqrt(1.0 - ch.loss_stokes)
        * abs(scenario.seed_amplitude)
    )
    b = (
        scenario.readout.cross_gain
        * scenario.prep.cross_gain
        * math.sqrt(1.0 - ch.loss_spinwave)
        * abs(scenario.seed_amplitude)
    )
    denom = a * a + b * b
    if denom == 0.0:
        return 0.0
    return 2.0 * a * b / denom
