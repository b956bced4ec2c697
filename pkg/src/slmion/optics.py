"""Paraxial Fourier-optics chain of the half-cavity.

Fields live on square-pixel grids with the origin at index ``n // 2`` of
each axis, so sample ``i`` sits at ``(i - n/2) * d``. With this centering,
the discrete coordinate inversion ``r -> -r`` is the index map
``i -> (n - i) mod n`` and is exact for the discrete transform.

The transform between the ion plane and the Fourier plane uses the kernel
``exp(-i k.r)``. It is scaled so that ``sum(|samples|**2) * dx * dy`` is the
same on both planes, which equals the continuous transform divided by 2 pi.
Absolute intensities are arbitrary, so every physical check is a ratio.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DomainError, ExtentError, GeometryError, UndersamplingError

# Destructive round-trip phase for the suppression mask. Substituting the
# suppression mask into the reflected field gives u = f * (1 + rho*exp(i psi)),
# so cancellation happens at psi = pi.
DESTRUCTIVE_PSI = math.pi


class PlaneKind(str, enum.Enum):
    ION = "IonPlane"
    FOURIER = "FourierPlane"
    DETECTOR = "DetectorPlane"


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ComplexField2D:
    """Complex scalar amplitude sampled on a uniform grid.

    ``samples`` is indexed ``[iy, ix]``. Pitches are in metres on spatial
    planes and rad/m on the Fourier plane.
    """

    samples: np.ndarray
    dx: float
    dy: float
    plane_kind: PlaneKind = PlaneKind.ION

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if s.ndim != 2:
            raise GeometryError(f"samples must be 2D, got shape {s.shape}")
        ny, nx = s.shape
        if not (_is_power_of_two(nx) and _is_power_of_two(ny)):
            raise GeometryError(f"grid sizes must be powers of two >= 2, got {nx}x{ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise GeometryError("sample pitch must be positive")
        if not np.all(np.isfinite(s)):
            raise DomainError("field samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "plane_kind", PlaneKind(self.plane_kind))

    @property
    def nx(self) -> int:
        return self.samples.shape[1]

    @property
    def ny(self) -> int:
        return self.samples.shape[0]

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def power(self) -> float:
        return float(np.sum(self.intensity) * self.dx * self.dy)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """1D coordinate axes (x, y) of the sample centres."""
        x = (np.arange(self.nx) - self.nx // 2) * self.dx
        y = (np.arange(self.ny) - self.ny // 2) * self.dy
        return x, y

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes()
        return np.meshgrid(x, y)

    def fourier_pitch(self) -> tuple[float, float]:
        """Pitch of the conjugate grid."""
        return 2 * np.pi / (self.nx * self.dx), 2 * np.pi / (self.ny * self.dy)

    def with_samples(self, samples, plane_kind=None) -> "ComplexField2D":
        return replace(self, samples=samples,
                       plane_kind=self.plane_kind if plane_kind is None else plane_kind)

    def same_grid(self, other: "ComplexField2D") -> bool:
        return (self.samples.shape == other.samples.shape
                and math.isclose(self.dx, other.dx, rel_tol=1e-12)
                and math.isclose(self.dy, other.dy, rel_tol=1e-12))


@dataclass(frozen=True)
class GridSpec:
    """Square ion-plane grid: ``size`` samples spanning ``±half_extent``."""

    size: int = 512
    half_extent: float = 20e-6

    def __post_init__(self):
        if not _is_power_of_two(self.size):
            raise GeometryError(f"grid size must be a power of two >= 2, got {self.size}")
        if self.half_extent <= 0:
            raise GeometryError("half_extent must be positive")

    @property
    def pitch(self) -> float:
        return 2 * self.half_extent / self.size


@dataclass(frozen=True)
class OpticalTrain:
    """Wavelength, aperture, lenses and losses of the SLM round trip.

    ``roundtrip_phase`` is stored wrapped to [0, 2 pi).
    """

    wavelength: float = 493e-9
    numerical_aperture: float = 0.6
    f1: float = 10e-3
    f2: float = 10e-3
    f3: float = 10e-3
    slm_reflectivity: float = 0.83
    path_transmission: float = 0.08
    roundtrip_phase: float = 0.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise DomainError("wavelength must be positive")
        if not 0 < self.numerical_aperture < 1:
            raise DomainError("numerical aperture must lie in (0, 1)")
        for name in ("f1", "f2", "f3"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        for name in ("slm_reflectivity", "path_transmission"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")
        object.__setattr__(self, "roundtrip_phase", float(np.mod(self.roundtrip_phase, 2 * np.pi)))

    @property
    def rho(self) -> float:
        return self.slm_reflectivity * self.path_transmission

    @property
    def psf_width(self) -> float:
        """Gaussian image scale s = lambda / (2 NA)."""
        return self.wavelength / (2 * self.numerical_aperture)

    @property
    def magnification(self) -> float:
        return self.f3 / self.f2

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength

    def slm_k_per_metre(self) -> float:
        """Linear paraxial map from SLM position to wave vector."""
        return 2 * np.pi / (self.wavelength * self.f1)

    def with_rho(self, rho: float, psi: float | None = None) -> "OpticalTrain":
        """Copy with the whole round-trip efficiency put on the SLM."""
        return replace(self, slm_reflectivity=rho, path_transmission=1.0,
                       roundtrip_phase=self.roundtrip_phase if psi is None else psi)


@dataclass(frozen=True)
class IonChain:
    positions: tuple[tuple[float, float], ...]
    drive_phases: tuple[float, ...] = ()
    psf_width: float = 493e-9 / 1.2

    def __post_init__(self):
        pos = tuple((float(x), float(y)) for x, y in self.positions)
        phases = tuple(float(p) for p in self.drive_phases) or (0.0,) * len(pos)
        if len(phases) != len(pos):
            raise DomainError("positions and drive_phases must have equal length")
        if len(set(pos)) != len(pos):
            raise DomainError("ion positions must be pairwise distinct")
        if not self.psf_width > 0:
            raise DomainError("psf_width must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "drive_phases", phases)

    def __len__(self):
        return len(self.positions)

    @classmethod
    def linear(cls, n: int, spacing: float, psf_width: float, phases=None) -> "IonChain":
        """Chain of ``n`` ions on the x axis, centred on the optical axis."""
        xs = (np.arange(n) - (n - 1) / 2) * spacing
        return cls(tuple((x, 0.0) for x in xs), tuple(phases or ()), psf_width)

    def single(self, j: int) -> "IonChain":
        return IonChain((self.positions[j],), (self.drive_phases[j],), self.psf_width)


def ion_source_field(chain: IonChain, grid: GridSpec = GridSpec()) -> ComplexField2D:
    """Sum of Gaussian ion images, each normalised to unit integrated intensity."""
    s = chain.psf_width
    dx = grid.pitch
    if s < 2 * dx:
        raise UndersamplingError(f"psf width {s:.3g} m is below two grid pitches ({2 * dx:.3g} m)")
    reach = max((max(abs(x), abs(y)) for x, y in chain.positions), default=0.0) + 6 * s
    if reach > grid.half_extent:
        raise ExtentError(f"chain plus 6s margin reaches {reach:.3g} m, grid half extent is "
                          f"{grid.half_extent:.3g} m")
    kappa = 1 / np.sqrt(2 * np.pi * s ** 2)
    ax = (np.arange(grid.size) - grid.size // 2) * dx
    X, Y = np.meshgrid(ax, ax)
    f = np.zeros_like(X, dtype=complex)
    for (x0, y0), phi in zip(chain.positions, chain.drive_phases):
        f += np.exp(1j * phi) * kappa * np.exp(-((X - x0) ** 2 + (Y - y0) ** 2) / (4 * s ** 2))
    return ComplexField2D(f, dx, dx, PlaneKind.ION)


def invert_coordinates(a: np.ndarray) -> np.ndarray:
    """Map samples at r to -r on a centred grid (both axes)."""
    return np.roll(a[::-1, ::-1], 1, axis=(0, 1))


def _ft(a, dx, dy, sign):
    ny, nx = a.shape
    scale = dx * dy * np.sqrt(nx * ny) / (2 * np.pi)
    shifted = np.fft.ifftshift(a)
    if sign < 0:
        out = np.fft.fft2(shifted, norm="ortho")
    else:
        out = np.fft.ifft2(shifted, norm="ortho")
    return np.fft.fftshift(out) * scale


def forward_farfield(f: ComplexField2D) -> ComplexField2D:
    """Lens transform from a spatial plane to the Fourier plane."""
    if f.plane_kind is PlaneKind.FOURIER:
        raise GeometryError("forward_farfield expects a spatial-plane field")
    dkx, dky = f.fourier_pitch()
    return ComplexField2D(_ft(f.samples, f.dx, f.dy, -1), dkx, dky, PlaneKind.FOURIER)


def inverse_farfield(ft: ComplexField2D, plane_kind=PlaneKind.ION) -> ComplexField2D:
    """Inverse of :func:`forward_farfield`."""
    if ft.plane_kind is not PlaneKind.FOURIER:
        raise GeometryError("inverse_farfield expects a Fourier-plane field")
    dx, dy = ft.fourier_pitch()
    return ComplexField2D(_ft(ft.samples, ft.dx, ft.dy, +1), dx, dy, plane_kind)


def mask_on_fourier_grid(mask, spectrum: ComplexField2D, aperture_tolerance: float = 1e-3):
    """Complex reflectance of ``mask`` sampled at the points of ``spectrum``.

    ``mask`` may be None (flat mirror), a complex array already on the grid,
    or an object with a ``sampled_on(spectrum)`` method such as
    :class:`slmion.masks.SLMPhaseMask`. Raises GeometryError when the array
    shape differs or when more than ``aperture_tolerance`` of the spectral
    power falls outside the mask aperture.
    """
    if mask is None:
        return np.ones(spectrum.samples.shape, dtype=complex)
    if hasattr(mask, "sampled_on"):
        m = mask.sampled_on(spectrum)
    else:
        m = np.asarray(mask, dtype=complex)
    if m.shape != spectrum.samples.shape:
        raise GeometryError(f"mask shape {m.shape} does not match grid {spectrum.samples.shape}")
    total = float(np.sum(spectrum.intensity))
    if total > 0:
        lost = float(np.sum(spectrum.intensity[np.abs(m) == 0])) / total
        if lost > aperture_tolerance:
            raise GeometryError(f"{lost:.2%} of the spectral power misses the SLM aperture")
    return m


def reflect_via_slm(f: ComplexField2D, mask, train: OpticalTrain) -> ComplexField2D:
    """Field re-imaged onto the ion plane after the SLM round trip.

    Inverse transform of rho exp(i psi) m(k) f(k), followed by r -> -r.
    """
    spectrum = forward_farfield(f)
    m = mask_on_fourier_grid(mask, spectrum)
    refl = spectrum.with_samples(train.rho * np.exp(1j * train.roundtrip_phase) * m * spectrum.samples)
    image = inverse_farfield(refl, PlaneKind.ION)
    return image.with_samples(invert_coordinates(image.samples))


def composite_ion_plane_field(f: ComplexField2D, mask, train: OpticalTrain) -> ComplexField2D:
    """Direct plus reflected field in the ion plane."""
    if train.rho == 0:
        return f
    return f.with_samples(f.samples + reflect_via_slm(f, mask, train).samples)


def detector_farfield(f: ComplexField2D, mask, train: OpticalTrain) -> ComplexField2D:
    """Collimated field after the second lens: f(k) + rho e^{i psi} m(-k) f(-k)."""
    spectrum = forward_farfield(f)
    m = mask_on_fourier_grid(mask, spectrum)
    reflected = invert_coordinates(m * spectrum.samples)
    return spectrum.with_samples(spectrum.samples
                                 + train.rho * np.exp(1j * train.roundtrip_phase) * reflected)


def detector_image(f: ComplexField2D, mask, train: OpticalTrain) -> ComplexField2D:
    """Image of the ion plane on the detector, d(r') = u(-r').

    Detector coordinates carry the f3/f2 magnification.
    """
    u = composite_ion_plane_field(f, mask, train)
    mag = train.magnification
    return ComplexField2D(invert_coordinates(u.samples), u.dx * mag, u.dy * mag,
                          PlaneKind.DETECTOR)


def circular_centroid(intensity: np.ndarray, dx: float, dy: float) -> tuple[float, float]:
    """Intensity centroid on a periodic grid, in grid coordinates.

    Uses the phase of the first circular moment along each axis, which is
    insensitive to the wrap-around at the grid edge.
    """
    ny, nx = intensity.shape
    out = []
    for axis, n, d in ((1, nx, dx), (0, ny, dy)):
        profile = intensity.sum(axis=1 - axis)
        moment = np.sum(profile * np.exp(2j * np.pi * np.arange(n) / n))
        idx = np.angle(moment) * n / (2 * np.pi)
        # bring the index into [-n/2, n/2) relative to the centre sample
        rel = (idx - n // 2 + n / 2) % n - n / 2
        out.append(rel * d)
    return out[0], out[1]


def save_field(fld: ComplexField2D, path) -> None:
    """Text dump: header ``# nx ny dx dy plane_kind`` then one grid row per line."""
    path = Path(path)
    rows = np.empty((fld.ny, 2 * fld.nx))
    rows[:, 0::2] = fld.samples.real
    rows[:, 1::2] = fld.samples.imag
    header = f"{fld.nx} {fld.ny} {fld.dx!r} {fld.dy!r} {fld.plane_kind.value}"
    np.savetxt(path, rows, fmt="%.17g", header=header, comments="# ")


def load_field(path) -> ComplexField2D:
    path = Path(path)
    with path.open() as fh:
        head = fh.readline()
    if not head.startswith("#"):
        raise GeometryError(f"{path}: missing field header")
    nx, ny, dx, dy, kind = head[1:].split()
    rows = np.loadtxt(path, comments="#", ndmin=2)
    if rows.shape != (int(ny), 2 * int(nx)):
        raise GeometryError(f"{path}: body shape {rows.shape} disagrees with header")
    return ComplexField2D(rows[:, 0::2] + 1j * rows[:, 1::2], float(dx), float(dy), PlaneKind(kind))
