"""Truncated Fock-space oracle.

Brute-force reference implementation of the same squeezer/loss/phase
circuits as the Gaussian engine, in a number basis truncated at
``n_max`` photons per mode.  Pure states are complex amplitude tensors of
shape (n_max+1,)*n_modes; loss converts to a density operator and is
applied through an explicit Kraus decomposition.

The two-mode squeezer is the exponential of its anti-Hermitian generator
K = r (e^{i theta} a^dag b^dag - e^{-i theta} a b), evaluated with
scipy.sparse.linalg.expm_multiply; for density operators the dense
unitary is built once per (r, theta, n_max) and cached, because it is
reused across the cross-check battery.

Truncation adequacy is policed, not assumed: every builder and squeezer
application checks the population at the truncation edge and raises
TruncationError instead of returning silently wrong numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import comb

#: maximum tolerated population at the truncation edge
EDGE_TOL = 1e-8
#: maximum tolerated relative amplitude of the highest retained TMSV term
TAIL_TOL = 1e-6
#: tolerated norm / trace drift through a unitary application
NORM_TOL = 1e-8
#: above this Hilbert-space dimension the dense squeezer unitary is not
#: cached (memory); expm_multiply is applied two-sided instead
_DENSE_UNITARY_MAX_DIM = 5000


class TruncationError(RuntimeError):
    """The requested operation is not representable at this truncation."""


def _destroy(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1.0, dim)), 1, format="csr")


def _embed(op: sp.spmatrix, mode: int, n_modes: int, dim: int) -> sp.csr_matrix:
    """Lift a single-mode operator to the n-mode product space (mode 0 is
    the slowest, i.e. leftmost, tensor factor)."""
    out = sp.identity(dim ** mode, format="csr")
    out = sp.kron(out, op, format="csr")
    out = sp.kron(out, sp.identity(dim ** (n_modes - mode - 1), format="csr"), format="csr")
    return out.tocsr()


@dataclass(frozen=True)
class FockState:
    """Pure state: amplitude tensor of shape (n_max+1,)*n_modes."""

    n_max: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        d = self.n_max + 1
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if amps.shape != (d,) * amps.ndim or amps.ndim < 1:
            raise ValueError(f"amps shape {amps.shape} inconsistent with n_max {self.n_max}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state norm {norm} deviates from 1 beyond 1e-9")
        amps = amps / norm
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def n_modes(self) -> int:
        return self.amps.ndim

    @property
    def dim(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True)
class DensityOperator:
    """Mixed state: matrix on the product space, plus truncation metadata."""

    n_max: int
    n_modes: int
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        d = (self.n_max + 1) ** self.n_modes
        if self.n_max < 1 or self.n_modes < 1:
            raise ValueError("n_max and n_modes must be >= 1")
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape}, expected {(d, d)}")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > 1e-9:
            raise ValueError(f"trace {tr} deviates from 1 beyond 1e-9")
        if not np.allclose(mat, mat.conj().T, atol=1e-10):
            raise ValueError("density matrix must be Hermitian")
        mat = mat / tr
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.n_max + 1


def vacuum_state(n_modes: int, n_max: int) -> FockState:
    """All modes in |0>."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    amps = np.zeros((n_max + 1,) * n_modes, dtype=complex)
    amps[(0,) * n_modes] = 1.0
    return FockState(n_max, amps)


def two_mode_squeezed_vacuum(r: float, theta: float = 0.0, n_max: int = 40) -> FockState:
    """TMSV in Schmidt form: psi(n, n) = (e^{i theta} tanh r)^n / cosh r.

    Refuses (TruncationError) when the highest retained coefficient is not
    negligible, i.e. tanh(r)^n_max / cosh(r) >= 1e-6.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    tail = np.tanh(r) ** n_max / np.cosh(r)
    if tail >= TAIL_TOL:
        raise TruncationError(
            f"TMSV r={r} tail amplitude {tail:.2e} at n_max={n_max} exceeds {TAIL_TOL}"
        )
    d = n_max + 1
    amps = np.zeros((d, d), dtype=complex)
    coeff = (np.exp(1j * theta) * np.tanh(r)) ** np.arange(d) / np.cosh(r)
    amps[np.arange(d), np.arange(d)] = coeff
    amps /= np.linalg.norm(amps)
    return FockState(n_max, amps)


def to_density(state: FockState) -> DensityOperator:
    flat = state.amps.reshape(-1)
    return DensityOperator(state.n_max, state.n_modes, np.outer(flat, flat.conj()))


def edge_population(state: FockState | DensityOperator) -> float:
    """Total population on basis states with any mode at n = n_max."""
    if isinstance(state, FockState):
        interior = state.amps[(slice(0, state.n_max),) * state.n_modes]
        return float(max(0.0, 1.0 - np.linalg.norm(interior) ** 2))
    diag = state.matrix.diagonal().real.reshape((state.dim,) * state.n_modes)
    interior = diag[(slice(0, state.n_max),) * state.n_modes]
    return float(max(0.0, diag.sum() - interior.sum()))


def _check_edge(state: FockState | DensityOperator) -> None:
    pop = edge_population(state)
    if pop >= EDGE_TOL:
        raise TruncationError(
            f"edge population {pop:.2e} at n_max={state.n_max} exceeds {EDGE_TOL}; "
            "increase the truncation"
        )


def _squeeze_generator(r: float, theta: float, dim: int, modes: tuple[int, int], n_modes: int) -> sp.csr_matrix:
    a = _embed(_destroy(dim), modes[0], n_modes, dim)
    b = _embed(_destroy(dim), modes[1], n_modes, dim)
    ab = (a @ b).tocsr()
    return (r * (np.exp(1j * theta) * ab.conj().T - np.exp(-1j * theta) * ab)).tocsr()


@lru_cache(maxsize=4)
def _squeeze_unitary(r: float, theta: float, dim: int, modes: tuple[int, int], n_modes: int) -> np.ndarray:
    """Dense exp(K); cached because the battery reuses few (r, n_max) pairs."""
    k = _squeeze_generator(r, theta, dim, modes, n_modes)
    u = expm_multiply(k, np.eye(k.shape[0], dtype=complex))
    u.setflags(write=False)
    return u


def _validate_modes(modes: tuple[int, int], n_modes: int) -> None:
    if len(modes) != 2 or modes[0] == modes[1]:
        raise ValueError("modes must be two distinct indices")
    if min(modes) < 0 or max(modes) >= n_modes:
        raise ValueError("mode index out of range")


def apply_two_mode_squeeze(
    state: FockState | DensityOperator,
    r: float,
    theta: float = 0.0,
    modes: tuple[int, int] = (0, 1),
):
    """Apply exp(r (e^{i theta} a^dag b^dag - h.c.)) to a state.

    Norm (trace) preservation is verified to 1e-8 and the edge population
    of the result must stay below 1e-8, otherwise TruncationError.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    modes = tuple(modes)
    _validate_modes(modes, state.n_modes)
    if isinstance(state, FockState):
        k = _squeeze_generator(r, theta, state.dim, modes, state.n_modes)
        flat = expm_multiply(k, state.amps.reshape(-1))
        norm = np.linalg.norm(flat)
        if abs(norm - 1.0) > NORM_TOL:
            raise RuntimeError(f"squeezer application drifted the norm to {norm}")
        out = FockState(state.n_max, (flat / norm).reshape(state.amps.shape))
        _check_edge(out)
        return out
    dim_total = state.matrix.shape[0]
    if dim_total <= _DENSE_UNITARY_MAX_DIM:
        u = _squeeze_unitary(float(r), float(theta), state.dim, modes, state.n_modes)
        mat = u @ state.matrix @ u.conj().T
    else:
        k = _squeeze_generator(r, theta, state.dim, modes, state.n_modes)
        mat = expm_multiply(k, state.matrix)
        mat = expm_multiply(k, mat.conj().T).conj().T
    mat = 0.5 * (mat + mat.conj().T)
    tr = np.trace(mat).real
    if abs(tr - 1.0) > NORM_TOL:
        raise RuntimeError(f"squeezer application drifted the trace to {tr}")
    out = DensityOperator(state.n_max, state.n_modes, mat / tr)
    _check_edge(out)
    return out


def apply_phase_rotation(state: FockState | DensityOperator, mode: int, phi: float):
    """Apply e^{i phi n} on one mode."""
    if isinstance(state, FockState):
        if not 0 <= mode < state.n_modes:
            raise ValueError("mode index out of range")
        phases = np.exp(1j * phi * np.arange(state.dim))
        shape = [1] * state.n_modes
        shape[mode] = state.dim
        return FockState(state.n_max, state.amps * phases.reshape(shape))
    if not 0 <= mode < state.n_modes:
        raise ValueError("mode index out of range")
    d, m = state.dim, state.n_modes
    phases = np.exp(1j * phi * np.arange(d))
    tensor = state.matrix.reshape((d,) * (2 * m)).copy()
    shape = [1] * (2 * m)
    shape[mode] = d
    tensor *= phases.reshape(shape)
    shape = [1] * (2 * m)
    shape[m + mode] = d
    tensor *= phases.conj().reshape(shape)
    return DensityOperator(state.n_max, m, tensor.reshape(state.matrix.shape))


def apply_loss_kraus(rho: DensityOperator, mode: int, loss: float) -> DensityOperator:
    """Pure-loss channel through its Kraus operators
    E_k = sum_n sqrt(C(n, k) T^{n-k} L^k) |n-k><n|.

    The truncated Kraus set still resolves the identity exactly
    (sum_k E_k^dag E_k = 1), so the trace is preserved to rounding.
    """
    if not 0.0 <= loss <= 1.0:
        raise ValueError("loss must be within [0, 1]")
    if not 0 <= mode < rho.n_modes:
        raise ValueError("mode index out of range")
    if loss == 0.0:
        return rho
    d, m = rho.dim, rho.n_modes
    t = 1.0 - loss
    tensor = rho.matrix.reshape((d,) * (2 * m))
    out = np.zeros_like(tensor)
    ax_row, ax_col = mode, m + mode
    for k in range(d):
        j = np.arange(d - k)
        w = np.sqrt(comb(j + k, k) * t ** j * loss ** k)
        w_row = w.reshape([w.size if ax == ax_row else 1 for ax in range(2 * m)])
        w_col = w.reshape([w.size if ax == ax_col else 1 for ax in range(2 * m)])
        src = [slice(None)] * (2 * m)
        dst = [slice(None)] * (2 * m)
        src[ax_row] = src[ax_col] = slice(k, d)
        dst[ax_row] = dst[ax_col] = slice(0, d - k)
        out[tuple(dst)] += (w_row * w_col) * tensor[tuple(src)]
    mat = out.reshape(rho.matrix.shape)
    tr = np.trace(mat).real
    if abs(tr - 1.0) > NORM_TOL:
        raise RuntimeError(f"loss channel drifted the trace to {tr}")
    return DensityOperator(rho.n_max, m, mat / tr)


def _quadrature_op(dim: int, mode: int, n_modes: int, lo_phase: float) -> sp.csr_matrix:
    a = _embed(_destroy(dim), mode, n_modes, dim)
    return (np.exp(-1j * lo_phase) * a + np.exp(1j * lo_phase) * a.conj().T).tocsr()


def quadrature_variance(state: FockState | DensityOperator, mode: int, lo_phase: float = 0.0) -> float:
    """Variance of X_phi = e^{-i phi} a + e^{i phi} a^dag on one mode."""
    if not 0 <= mode < state.n_modes:
        raise ValueError("mode index out of range")
    x = _quadrature_op(state.dim, mode, state.n_modes, lo_phase)
    if isinstance(state, FockState):
        flat = state.amps.reshape(-1)
        xv = x @ flat
        m1 = np.vdot(flat, xv).real
        m2 = np.vdot(xv, xv).real
        return float(m2 - m1 * m1)
    a = x @ state.matrix
    m1 = np.trace(a).real
    m2 = np.trace(x @ a).real
    return float(m2 - m1 * m1)


def mean_photon_number(state: FockState | DensityOperator, mode: int) -> float:
    """<n> of one mode."""
    if not 0 <= mode < state.n_modes:
        raise ValueError("mode index out of range")
    d, m = state.dim, state.n_modes
    n_diag = np.arange(d, dtype=float)
    shape = [d if ax == mode else 1 for ax in range(m)]
    if isinstance(state, FockState):
        return float(np.sum(np.abs(state.amps) ** 2 * n_diag.reshape(shape)))
    diag = state.matrix.diagonal().real.reshape((d,) * m)
    return float(np.sum(diag * n_diag.reshape(shape)))


def overlap(state_a: FockState, state_b: FockState) -> complex:
    """<a|b> for two pure states on the same space."""
    if state_a.n_max != state_b.n_max or state_a.n_modes != state_b.n_modes:
        raise ValueError("states live on different spaces")
    return complex(np.vdot(state_a.amps.reshape(-1), state_b.amps.reshape(-1)))
