"""SLM phase masks: sectored blazed gratings, suppression masks, pixelation."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DomainError, GeometryError, ResolutionError
from .optics import ComplexField2D, IonChain, OpticalTrain, PlaneKind, forward_farfield

TWO_PI = 2 * np.pi

# Relative amplitude below which arg f(k) is treated as undefined.
AMPLITUDE_FLOOR = 1e-9


def wrap_phase(phase):
    """Wrap to [0, 2 pi). Values that round up to 2 pi are folded to 0."""
    w = np.mod(phase, TWO_PI)
    return np.where(w >= TWO_PI, 0.0, w)


@dataclass(frozen=True)
class SLMGeometry:
    """Pixel layout of the modulator. ``px`` columns by ``py`` rows."""

    px: int = 1272
    py: int = 1024
    pitch: float = 12.5e-6

    def __post_init__(self):
        if self.px < 2 or self.py < 2:
            raise GeometryError("an SLM needs at least 2x2 pixels")
        if not self.pitch > 0:
            raise GeometryError("pixel pitch must be positive")

    @classmethod
    def matched(cls, field: ComplexField2D, train: OpticalTrain) -> "SLMGeometry":
        """Geometry whose pixel centres map exactly onto the field's Fourier grid."""
        if field.plane_kind is PlaneKind.FOURIER:
            dkx, dky, nx, ny = field.dx, field.dy, field.nx, field.ny
        else:
            (dkx, dky), nx, ny = field.fourier_pitch(), field.nx, field.ny
        if not math.isclose(dkx, dky, rel_tol=1e-12):
            raise GeometryError("matched SLM geometry needs a square Fourier grid")
        return cls(nx, ny, dkx / train.slm_k_per_metre())


@dataclass(frozen=True)
class SLMPhaseMask:
    """Wrapped phase per pixel plus the pixel -> wave-vector map.

    ``phases`` is indexed ``[row, column]``. Pixel ``i`` sits at
    ``(i - p/2) * pitch`` on the SLM and reflects wave vector
    ``k = k_per_metre * x``. ``levels`` is None for continuous phase.
    ``flagged`` marks pixels whose phase was undefined at synthesis.
    """

    phases: np.ndarray
    pitch: float
    k_per_metre: float
    levels: int | None = None
    flagged: np.ndarray | None = None

    def __post_init__(self):
        ph = wrap_phase(np.array(self.phases, dtype=float))
        if ph.ndim != 2 or min(ph.shape) < 2:
            raise GeometryError(f"mask must be a 2D array of at least 2x2 pixels, got {ph.shape}")
        if not self.pitch > 0 or not self.k_per_metre > 0:
            raise GeometryError("pitch and k mapping must be positive")
        if self.levels is not None and self.levels < 2:
            raise DomainError("quantization needs at least 2 levels")
        ph.setflags(write=False)
        object.__setattr__(self, "phases", ph)
        if self.flagged is not None:
            fl = np.array(self.flagged, dtype=bool)
            fl.setflags(write=False)
            object.__setattr__(self, "flagged", fl)

    @property
    def px(self) -> int:
        return self.phases.shape[1]

    @property
    def py(self) -> int:
        return self.phases.shape[0]

    @property
    def k_pitch(self) -> float:
        return self.pitch * self.k_per_metre

    def k_axes(self) -> tuple[np.ndarray, np.ndarray]:
        kx = (np.arange(self.px) - self.px // 2) * self.k_pitch
        ky = (np.arange(self.py) - self.py // 2) * self.k_pitch
        return kx, ky

    def reflectance(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    def sampled_on(self, spectrum: ComplexField2D) -> np.ndarray:
        """Reflectance at each point of a Fourier-plane grid.

        Matched grids are used as is. Otherwise each point takes the pixel
        that contains it, and points beyond the SLM get zero reflectance.
        """
        if spectrum.plane_kind is not PlaneKind.FOURIER:
            raise GeometryError("masks are sampled on Fourier-plane grids")
        if (self.phases.shape == spectrum.samples.shape
                and math.isclose(self.k_pitch, spectrum.dx, rel_tol=1e-9)
                and math.isclose(self.k_pitch, spectrum.dy, rel_tol=1e-9)):
            return self.reflectance()
        kx, ky = spectrum.axes()
        ix = np.rint(kx / self.k_pitch).astype(int) + self.px // 2
        iy = np.rint(ky / self.k_pitch).astype(int) + self.py // 2
        okx = (ix >= 0) & (ix < self.px)
        oky = (iy >= 0) & (iy < self.py)
        out = np.zeros(spectrum.samples.shape, dtype=complex)
        sub = self.reflectance()[np.ix_(iy[oky], ix[okx])]
        out[np.ix_(oky, okx)] = sub
        return out


def flat_mask(geometry: SLMGeometry, train: OpticalTrain, phase: float = 0.0) -> SLMPhaseMask:
    return SLMPhaseMask(np.full((geometry.py, geometry.px), phase), geometry.pitch,
                        train.slm_k_per_metre())


def _pixel_k_mesh(geometry: SLMGeometry, train: OpticalTrain):
    kpm = train.slm_k_per_metre()
    kx = (np.arange(geometry.px) - geometry.px // 2) * geometry.pitch * kpm
    ky = (np.arange(geometry.py) - geometry.py // 2) * geometry.pitch * kpm
    return np.meshgrid(kx, ky)


@dataclass(frozen=True)
class SectorLayout:
    """Equal pie slices around the optical axis.

    ``assignment[i]`` is the ion addressed by sector ``i``.
    """

    n_sectors: int
    angular_offset: float = 0.0
    assignment: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_sectors < 1:
            raise DomainError("a layout needs at least one sector")
        assignment = tuple(self.assignment) or tuple(range(self.n_sectors))
        if len(assignment) != self.n_sectors:
            raise DomainError("assignment must name one ion per sector")
        object.__setattr__(self, "assignment", assignment)

    @property
    def width(self) -> float:
        return TWO_PI / self.n_sectors

    def labels(self, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
        """Sector index of every point; points on an edge go to the lower index."""
        if self.n_sectors == 1:
            return np.zeros(np.broadcast(kx, ky).shape, dtype=int)
        t = np.mod(np.arctan2(ky, kx) - self.angular_offset, TWO_PI)
        idx = np.ceil(t / self.width).astype(int) - 1
        return np.clip(idx, 0, self.n_sectors - 1)


def sector_partition(n: int, offset: float = 0.0) -> SectorLayout:
    if n < 1:
        raise DomainError(f"number of sectors must be >= 1, got {n}")
    return SectorLayout(n, offset)


def blazed_sector_mask(chain: IonChain, detector_point, layout: SectorLayout, sector_phases,
                       train: OpticalTrain, geometry: SLMGeometry) -> SLMPhaseMask:
    """Sectored blazed gratings that bring each addressed ion's image to ``detector_point``.

    Inside sector ``i`` (addressing ion ``j``) the phase is
    ``sector_phases[i] + k . (r_j - r_d)``. ``detector_point`` is referred to
    the ion plane, i.e. divided by the detector magnification.
    """
    phases_in = np.broadcast_to(np.asarray(sector_phases, dtype=float), (layout.n_sectors,))
    if max(layout.assignment) >= len(chain):
        raise DomainError("sector assignment refers to an ion outside the chain")
    xd, yd = detector_point
    KX, KY = _pixel_k_mesh(geometry, train)
    labels = layout.labels(KX, KY)
    k_step = geometry.pitch * train.slm_k_per_metre()
    out = np.zeros(KX.shape)
    for i, j in enumerate(layout.assignment):
        xj, yj = chain.positions[j]
        dxs, dys = xj - xd, yj - yd
        if max(abs(dxs), abs(dys)) * k_step > np.pi:
            raise ResolutionError(
                f"sector {i}: shift of ({dxs:.3g}, {dys:.3g}) m needs a grating period "
                f"below 2 pixels")
        sel = labels == i
        out[sel] = phases_in[i] + KX[sel] * dxs + KY[sel] * dys
    return SLMPhaseMask(wrap_phase(out), geometry.pitch, train.slm_k_per_metre())


def suppression_mask(f: ComplexField2D, train: OpticalTrain | None = None,
                     geometry: SLMGeometry | None = None) -> SLMPhaseMask:
    """Phase mask -2 arg f(k) that cancels a real, in-phase ion-plane field.

    Without ``geometry`` the mask is built on the field's own Fourier grid.
    Pixels where |f(k)| is below ``AMPLITUDE_FLOOR`` times its maximum get
    phase 0 and are flagged.
    """
    train = train or OpticalTrain()
    if f.plane_kind is not PlaneKind.ION:
        raise GeometryError("suppression_mask expects an ion-plane field")
    peak = np.max(np.abs(f.samples))
    if peak > 0 and np.max(np.abs(f.samples.imag)) > 1e-12 * peak:
        raise DomainError("suppression mask requires a real ion-plane field (emitters in phase)")
    spectrum = forward_farfield(f)
    if geometry is None:
        geometry = SLMGeometry.matched(f, train)
        values = spectrum.samples
    else:
        values = _interpolate_spectrum(spectrum, geometry, train)
    amp = np.abs(values)
    flagged = amp < AMPLITUDE_FLOOR * np.max(np.abs(spectrum.samples))
    phases = np.where(flagged, 0.0, -2 * np.angle(values))
    return SLMPhaseMask(wrap_phase(phases), geometry.pitch, train.slm_k_per_metre(),
                        flagged=flagged)


def _interpolate_spectrum(spectrum: ComplexField2D, geometry: SLMGeometry, train: OpticalTrain):
    KX, KY = _pixel_k_mesh(geometry, train)
    col = KX / spectrum.dx + spectrum.nx // 2
    row = KY / spectrum.dy + spectrum.ny // 2
    coords = np.array([row.ravel(), col.ravel()])
    re = ndimage.map_coordinates(spectrum.samples.real, coords, order=1, mode="constant")
    im = ndimage.map_coordinates(spectrum.samples.imag, coords, order=1, mode="constant")
    return (re + 1j * im).reshape(KX.shape)


@dataclass(frozen=True)
class Crosstalk:
    """Fringing between neighbouring pixels.

    The programmed (wrapped) phase is smoothed by a normalised 3x3 Gaussian
    kernel of ``width`` pixels. ``reflectivity`` is the bare mirror loss.
    """

    width: float = 0.572
    reflectivity: float = 0.98

    def kernel(self) -> np.ndarray:
        if self.width <= 0:
            k = np.zeros((3, 3))
            k[1, 1] = 1.0
            return k
        d2 = np.add.outer(np.arange(-1, 2) ** 2, np.arange(-1, 2) ** 2)
        k = np.exp(-d2 / (2 * self.width ** 2))
        return k / k.sum()


# Width calibrated so a blazed grating of REPRESENTATIVE_PERIOD pixels gives
# an overall efficiency of 0.83 with the 0.98 mirror reflectivity.
REPRESENTATIVE_PERIOD = 10
DEFAULT_CROSSTALK = Crosstalk(width=0.572, reflectivity=0.98)


def quantize_phases(phases: np.ndarray, levels: int | None) -> np.ndarray:
    if levels is None:
        return np.asarray(phases, dtype=float)
    if levels < 2:
        raise DomainError(f"quantization needs at least 2 levels, got {levels}")
    step = TWO_PI / levels
    return np.mod(np.rint(np.asarray(phases) / step), levels) * step


def quantize_and_losses(mask: SLMPhaseMask, levels: int | None = None,
                        crosstalk: Crosstalk | None = None) -> tuple[SLMPhaseMask, float]:
    """Pixelate a mask and estimate its diffraction efficiency.

    Returns the programmed (quantized) mask and ``eps1``, the fraction of the
    incident power that ends up in the designed reflected field. The
    efficiency is the squared overlap between the realised reflectance
    (quantized, then smoothed by cross-talk) and the ideal one.
    """
    if levels is not None and levels < 2:
        raise DomainError(f"quantization needs at least 2 levels, got {levels}")
    ideal = mask.phases
    programmed = quantize_phases(ideal, levels)
    realised = programmed
    reflectivity = 1.0
    if crosstalk is not None:
        realised = ndimage.convolve(programmed, crosstalk.kernel(), mode="nearest")
        reflectivity = crosstalk.reflectivity
    overlap = np.mean(np.exp(1j * (realised - ideal)))
    eps1 = reflectivity * float(np.abs(overlap) ** 2)
    out = replace(mask, phases=wrap_phase(programmed), levels=levels)
    return out, eps1


def blazed_grating(geometry: SLMGeometry, period_x: float, period_y: float = math.inf,
                   k_per_metre: float = 1.0) -> SLMPhaseMask:
    """Linear phase ramp with the given periods in pixels (inf for none)."""
    ix = np.arange(geometry.px)
    iy = np.arange(geometry.py)
    gx = 0.0 if math.isinf(period_x) else TWO_PI / period_x
    gy = 0.0 if math.isinf(period_y) else TWO_PI / period_y
    phases = np.add.outer(iy * gy, ix * gx)
    return SLMPhaseMask(wrap_phase(phases), geometry.pitch, k_per_metre)


def save_mask(mask: SLMPhaseMask, path) -> None:
    """Text matrix of wrapped phases with header ``# px py pitch levels``."""
    levels = "continuous" if mask.levels is None else str(mask.levels)
    header = f"{mask.px} {mask.py} {mask.pitch!r} {levels}"
    np.savetxt(Path(path), mask.phases, fmt="%.17g", header=header, comments="# ")


def load_mask(path, k_per_metre: float | None = None) -> SLMPhaseMask:
    path = Path(path)
    with path.open() as fh:
        head = fh.readline()
    if not head.startswith("#"):
        raise GeometryError(f"{path}: missing mask header")
    px, py, pitch, levels = head[1:].split()
    phases = np.loadtxt(path, comments="#", ndmin=2)
    if phases.shape != (int(py), int(px)):
        raise GeometryError(f"{path}: body shape {phases.shape} disagrees with header")
    kpm = k_per_metre if k_per_metre is not None else OpticalTrain().slm_k_per_metre()
    return SLMPhaseMask(phases, float(pitch), kpm, None if levels == "continuous" else int(levels))
