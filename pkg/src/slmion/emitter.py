"""Coherently driven two-level ions: steady state, correlators, residual coefficients.

Single-ion operators use the basis (|e>, |g>) with sigma_z = |g><g| - |e><e|,
so the undriven steady state has r_z = 1. Density matrices are vectorised
by column stacking: vec(A X B) = (B^T kron A) vec(X).

All quantities refer to the frame rotating at the laser frequency. The
lab-frame phase exp(i omega_L tau) of the delayed correlator is carried
separately, because the detector formula folds it into the round-trip phase.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, GeometryError

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
_I2 = np.eye(2)


@dataclass(frozen=True)
class DriveParams:
    """Rabi frequency, detuning and half linewidth in rad/s.

    The excited state decays at rate 2 * half_linewidth.
    """

    rabi: float
    detuning: float = 0.0
    half_linewidth: float = 1.0
    laser_frequency: float = 0.0

    def __post_init__(self):
        if not self.half_linewidth > 0:
            raise DomainError(f"half linewidth must be positive, got {self.half_linewidth}")
        if self.rabi < 0:
            raise DomainError(f"Rabi frequency must be non-negative, got {self.rabi}")

    @property
    def saturation_denominator(self) -> float:
        return self.rabi ** 2 + 2 * self.detuning ** 2 + 2 * self.half_linewidth ** 2


@dataclass(frozen=True)
class SteadyState:
    r_plus: complex
    r_z: float

    @property
    def r_minus(self) -> complex:
        return np.conj(self.r_plus)

    @property
    def excited_population(self) -> float:
        """<sigma+ sigma->."""
        return (1 - self.r_z) / 2

    @property
    def sigma_minus(self) -> complex:
        """<sigma->."""
        return self.r_plus / 2

    @property
    def coherence(self) -> float:
        return abs(self.r_plus) / 2

    def density_matrix(self) -> np.ndarray:
        return 0.5 * (_I2 + self.r_plus * SIGMA_PLUS + self.r_minus * SIGMA_MINUS
                      + self.r_z * SIGMA_Z)


def steady_state(d: DriveParams) -> SteadyState:
    D = d.saturation_denominator
    g, delta, om = d.half_linewidth, d.detuning, d.rabi
    return SteadyState(2 * om * (delta - 1j * g) / D, 2 * (delta ** 2 + g ** 2) / D)


def _spre(a):
    return np.kron(_I2, a)


def _spost(a):
    return np.kron(a.T, _I2)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(2, 2, order="F")


def liouvillian(d: DriveParams) -> np.ndarray:
    """4x4 generator of the rotating-frame master equation.

    drho/dt = -i(Delta/2)[sz, rho] - i(Omega/2)[sx, rho] + 2 gamma D[sigma-] rho
    """
    H = 0.5 * d.detuning * SIGMA_Z + 0.5 * d.rabi * SIGMA_X
    L = -1j * (_spre(H) - _spost(H))
    c = SIGMA_MINUS
    cdc = c.conj().T @ c
    L = L + 2 * d.half_linewidth * (np.kron(c.conj(), c) - 0.5 * _spre(cdc) - 0.5 * _spost(cdc))
    return L


@dataclass(frozen=True)
class Correlator:
    """Delayed correlator <sigma+(tau) sigma->.

    ``value`` is the rotating-frame part, ``lab_phase`` the factor
    exp(i omega_L tau) that converts it to the lab frame.
    """

    value: complex
    lab_phase: complex

    @property
    def lab(self) -> complex:
        return self.value * self.lab_phase


def tau_correlator(tau: float, d: DriveParams) -> Correlator:
    """Quantum-regression evaluation tr[sigma+ exp(tau L)(sigma- rho_ss)]."""
    if tau < 0:
        raise DomainError(f"delay must be non-negative, got {tau}")
    rho = steady_state(d).density_matrix()
    start = vec(SIGMA_MINUS @ rho)
    evolved = unvec(expm(tau * liouvillian(d)) @ start)
    value = complex(np.trace(SIGMA_PLUS @ evolved))
    return Correlator(value, complex(np.exp(1j * d.laser_frequency * tau)))


def c1(d: DriveParams) -> float:
    """Saturation coefficient Omega^4 / (2 (Omega^2 + 2 Delta^2 + 2 gamma^2)^2)."""
    return d.rabi ** 4 / (2 * d.saturation_denominator ** 2)


def c1_from_state(d: DriveParams) -> float:
    """<sigma+ sigma-> - |<sigma->|^2 from the steady state."""
    ss = steady_state(d)
    return ss.excited_population - abs(ss.sigma_minus) ** 2


def c2(tau: float, d: DriveParams) -> complex:
    """Temporal-coherence coefficient in the rotating frame."""
    return tau_correlator(tau, d).value - steady_state(d).excited_population


def farfield_intensity(k, chain_positions, d: DriveParams):
    """Coherent and incoherent far-field intensity in units of kappa^2/R^2.

    ``k`` is an array of shape (..., 2) of in-plane wave vectors. Returns
    (I_c, I_i); I_i is a scalar independent of k.
    """
    pos = np.asarray(chain_positions, dtype=float).reshape(-1, 2)
    N = len(pos)
    D = d.saturation_denominator
    k = np.asarray(k, dtype=float)
    if N == 0:
        return np.zeros(k.shape[:-1]), 0.0
    structure = np.abs(np.exp(1j * (k @ pos.T)).sum(axis=-1)) ** 2
    amp = d.rabi * np.sqrt(d.detuning ** 2 + d.half_linewidth ** 2) / D
    I_c = amp ** 2 * structure
    I_i = N / 2 * (d.rabi ** 2 / D) ** 2
    return I_c, I_i


def _stack(images):
    arr = np.asarray(images, dtype=complex)
    if arr.ndim == 2:
        arr = arr[None]
    return arr


def detector_intensity_with_slm(f_images, g_images, d: DriveParams, tau: float, rho: float,
                                roundtrip_factor: complex = -1.0, path_phases=None):
    """Mean detector intensity with direct images f_n and SLM images g_n.

    ``roundtrip_factor`` is exp(i(psi + omega_L tau)); -1 is the destructive
    setting. ``path_phases`` are omega_L s_n / c per ion (default 0). The
    three terms are the coherent part |F + e G|^2 |<s->|^2, the saturation
    part C1 sum |f_n + e g_n|^2 and the delay part
    2 rho Re[e C2 sum conj(f_n) g_n], with e the round-trip factor.
    """
    f = _stack(f_images)
    g = _stack(g_images)
    if f.shape != g.shape:
        raise GeometryError(f"direct images {f.shape} and SLM images {g.shape} differ")
    n_ions = f.shape[0]
    phases = np.zeros(n_ions) if path_phases is None else np.asarray(path_phases, dtype=float)
    if phases.shape != (n_ions,):
        raise GeometryError("one path phase per ion is required")
    e = complex(roundtrip_factor)
    w = np.exp(1j * phases)[:, None, None]
    F = (f * w).sum(axis=0)
    G = (g * w).sum(axis=0)
    ss = steady_state(d)
    coherent = np.abs(F + rho * e * G) ** 2 * abs(ss.sigma_minus) ** 2
    saturation = c1(d) * (np.abs(f + rho * e * g) ** 2).sum(axis=0)
    delay = 2 * rho * np.real(e * c2(tau, d) * (np.conj(f) * g).sum(axis=0))
    return coherent + saturation + delay


def remainder_terms(f_images, g_images, d: DriveParams, tau: float):
    """Saturation and delay remainders left at rho = 1 with destructive phase.

    Returns (R1, R2) with R1 = C1 sum |f_n - g_n|^2 and
    R2 = -2 Re[C2 sum conj(f_n) g_n]. C2 is non-positive for resonant drive,
    so R2 is a non-negative residual.
    """
    f = _stack(f_images)
    g = _stack(g_images)
    if f.shape != g.shape:
        raise GeometryError(f"direct images {f.shape} and SLM images {g.shape} differ")
    R1 = c1(d) * (np.abs(f - g) ** 2).sum(axis=0)
    R2 = -2 * np.real(c2(tau, d) * (np.conj(f) * g).sum(axis=0))
    return R1, R2
