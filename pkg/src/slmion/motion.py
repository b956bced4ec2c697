"""Thermal motion of trapped ions and the contrast loss it causes."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import DomainError

HBAR = constants.hbar
K_B = constants.k
AMU = constants.atomic_mass
BARIUM_138_MASS = 138 * AMU


class ValidityWarning(UserWarning):
    """Parameters lie outside the range of the lowest-order expansion."""


def mean_phonon(omega: float, T: float) -> float:
    """Bose occupation 1 / (exp(hbar omega / k_B T) - 1); 0 at T = 0."""
    if not omega > 0:
        raise DomainError("trap frequency must be positive")
    if T < 0:
        raise DomainError("temperature must be non-negative")
    if T == 0:
        return 0.0
    x = HBAR * omega / (K_B * T)
    if x > 700:
        return 0.0
    return 1.0 / math.expm1(x)


def temperature_for_occupation(omega: float, nbar: float) -> float:
    """Inverse of :func:`mean_phonon`."""
    if nbar <= 0:
        return 0.0
    return HBAR * omega / (K_B * math.log1p(1 / nbar))


@dataclass(frozen=True)
class ThermalState:
    trap_frequency: float = 2 * math.pi * 1e6
    mass: float = BARIUM_138_MASS
    temperature: float = 0.0

    def __post_init__(self):
        if not self.trap_frequency > 0 or not self.mass > 0:
            raise DomainError("trap frequency and mass must be positive")
        if self.temperature < 0:
            raise DomainError("temperature must be non-negative")

    @property
    def nbar(self) -> float:
        return mean_phonon(self.trap_frequency, self.temperature)

    @property
    def sigma(self) -> float:
        return position_sigma(self)

    @property
    def zero_point_sigma(self) -> float:
        return math.sqrt(HBAR / (2 * self.trap_frequency * self.mass))


def position_sigma(state: ThermalState) -> float:
    """Thermal position spread sqrt((2 nbar + 1) hbar / (2 omega m))."""
    return math.sqrt((2 * state.nbar + 1) * HBAR / (2 * state.trap_frequency * state.mass))


def c3(sigma: float, s: float, wavelength: float) -> float:
    """Residual fraction from position fluctuations, (sigma/2s)^2 + (k sigma)^2.

    Warns with :class:`ValidityWarning` when sigma is not small against the
    image scale or the reduced wavelength.
    """
    k = 2 * math.pi / wavelength
    if sigma / s > 0.3 or k * sigma > 0.5:
        warnings.warn(f"sigma={sigma:.3g} m is outside the small-fluctuation regime",
                      ValidityWarning, stacklevel=2)
    return (sigma / (2 * s)) ** 2 + (k * sigma) ** 2


def c3_central(sigma: float, s: float, wavelength: float) -> float:
    """Integrated on-axis residual over one bare image, 2 (sigma/s)^2 + 4 (k sigma)^2.

    An ion on the optical axis is imaged onto itself, so its direct and
    reflected fluctuations add up and the axial term is four times larger.
    """
    k = 2 * math.pi / wavelength
    return 2 * (sigma / s) ** 2 + 4 * (k * sigma) ** 2


def residual_image_intensity(X, Y, centres, sigma_xyz, s: float, wavelength: float,
                             kappa: float | None = None):
    """Mean residual intensity from position fluctuations, summed over ions.

    ``centres`` are the mean image offsets a_n. For a_n = 0 the direct and
    reflected images coincide; otherwise they sit at +a_n and -a_n and are
    assumed not to overlap. ``kappa`` defaults to unit integrated intensity
    per image.
    """
    sx, sy, sz = sigma_xyz
    k = 2 * math.pi / wavelength
    if kappa is None:
        kappa = 1 / math.sqrt(2 * math.pi * s ** 2)
    out = np.zeros(np.broadcast(X, Y).shape)
    for ax, ay in np.asarray(centres, dtype=float).reshape(-1, 2):
        if ax == 0 and ay == 0:
            grad = (sx * X / s ** 2) ** 2 + (sy * Y / s ** 2) ** 2
            out += kappa ** 2 * (grad + 4 * k ** 2 * sz ** 2) * np.exp(-(X ** 2 + Y ** 2) / (2 * s ** 2))
            continue
        if math.hypot(ax, ay) < 3 * s:
            warnings.warn(f"images at ±({ax:.3g}, {ay:.3g}) overlap; expansion assumes they do not",
                          ValidityWarning, stacklevel=2)
        for sign in (-1, 1):
            dxr, dyr = X + sign * ax, Y + sign * ay
            grad = (sx * dxr / (2 * s ** 2)) ** 2 + (sy * dyr / (2 * s ** 2)) ** 2
            out += kappa ** 2 * (grad + k ** 2 * sz ** 2) * np.exp(-(dxr ** 2 + dyr ** 2) / (2 * s ** 2))
    return out


def monte_carlo_c3(sigma: float, s: float, wavelength: float, offset=(0.0, 0.0),
                   samples: int = 10_000, rng=None, grid: int = 64, batch: int = 500) -> float:
    """Sampled residual fraction for one ion with isotropic Gaussian displacements.

    Each draw moves the ion by (dx, dy, dz). The direct image shifts with the
    ion and picks up exp(i k dz); the SLM image shifts the opposite way with
    exp(-i k dz). The residual |delta f - delta g|^2 is integrated on a grid
    and divided by the integrated intensity of both bare images. No
    expansion in sigma is made.
    """
    rng = np.random.default_rng(rng)
    k = 2 * math.pi / wavelength
    ax, ay = offset
    half = 6 * s + max(abs(ax), abs(ay))
    x = np.linspace(-half, half, grid)
    dA = (x[1] - x[0]) ** 2
    X, Y = np.meshgrid(x, x)

    def img(cx, cy):
        return np.exp(-((X - cx[:, None, None]) ** 2 + (Y - cy[:, None, None]) ** 2) / (4 * s ** 2))

    zero = np.zeros(1)
    f0 = img(zero + ax, zero + ay)
    g0 = img(zero - ax, zero - ay)
    bare = (np.sum(np.abs(f0) ** 2) + np.sum(np.abs(g0) ** 2)) * dA
    total = 0.0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        d = rng.normal(0.0, sigma, size=(3, m))
        f = img(ax - d[0], ay - d[1]) * np.exp(1j * k * d[2])[:, None, None]
        g = img(-ax + d[0], -ay + d[1]) * np.exp(-1j * k * d[2])[:, None, None]
        total += np.sum(np.abs((f - f0) - (g - g0)) ** 2) * dA
        done += m
    return float(total / samples / bare)
