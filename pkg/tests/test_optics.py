from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slmion import masks, optics
from slmion.errors import ExtentError, GeometryError, UndersamplingError
from slmion.optics import (DESTRUCTIVE_PSI, ComplexField2D, GridSpec, IonChain, OpticalTrain,
                           PlaneKind)

from .oracles import dense_reflected_image

S = 493e-9 / 1.2
GRID = GridSpec()


def field_of(positions, phases=(), grid=GRID):
    return optics.ion_source_field(IonChain(tuple(positions), tuple(phases), S), grid)


def ideal(rho=1.0, psi=0.0):
    return OpticalTrain(slm_reflectivity=rho, path_transmission=1.0, roundtrip_phase=psi)


def peak_position(fld):
    iy, ix = np.unravel_index(np.argmax(fld.intensity), fld.samples.shape)
    x, y = fld.axes()
    return x[ix], y[iy]


# ComplexField2D


def test_field_rejects_non_power_of_two():
    with pytest.raises(GeometryError):
        ComplexField2D(np.zeros((6, 8), complex), 1.0, 1.0, PlaneKind.ION)


def test_field_rejects_non_finite():
    a = np.zeros((4, 4), complex)
    a[0, 0] = np.nan
    with pytest.raises(ValueError):
        ComplexField2D(a, 1.0, 1.0, PlaneKind.ION)


def test_field_samples_are_read_only():
    f = field_of([(0, 0)])
    with pytest.raises(ValueError):
        f.samples[0, 0] = 1


def test_train_wraps_phase_and_checks_range():
    assert OpticalTrain(roundtrip_phase=-np.pi / 2).roundtrip_phase == pytest.approx(1.5 * np.pi)
    with pytest.raises(ValueError):
        OpticalTrain(numerical_aperture=1.0)
    with pytest.raises(ValueError):
        OpticalTrain(slm_reflectivity=1.2)


def test_chain_rejects_duplicate_positions():
    with pytest.raises(ValueError):
        IonChain(((0, 0), (0, 0)), (), S)


# ion_source_field


def test_single_ion_is_real_symmetric_and_normalised():
    f = field_of([(0, 0)])
    assert np.max(np.abs(f.samples.imag)) == 0
    assert np.all(f.samples.real >= 0)
    np.testing.assert_allclose(f.samples, optics.invert_coordinates(f.samples), atol=0)
    np.testing.assert_allclose(f.samples, f.samples.T, atol=0)
    assert peak_position(f) == (0.0, 0.0)
    assert f.power() == pytest.approx(1.0, rel=1e-9)


def test_pair_is_even_under_inversion():
    a = 3e-6
    f = field_of([(-a, 0), (a, 0)])
    np.testing.assert_allclose(f.samples, optics.invert_coordinates(f.samples), atol=1e-15)


def test_three_resolved_spots_at_chain_spacing():
    spacing = 5e-6
    f = optics.ion_source_field(IonChain.linear(3, spacing, 493e-9 / (2 * 0.6)), GRID)
    row = f.intensity[f.ny // 2]
    x, _ = f.axes()
    peaks = [i for i in range(1, len(row) - 1) if row[i] > row[i - 1] and row[i] >= row[i + 1]
             and row[i] > 0.5 * row.max()]
    assert len(peaks) == 3
    np.testing.assert_allclose(np.diff(x[peaks]), spacing, atol=GRID.pitch / 2)


def test_extent_and_undersampling_errors():
    with pytest.raises(ExtentError):
        field_of([(19e-6, 0)])
    with pytest.raises(UndersamplingError):
        optics.ion_source_field(IonChain(((0, 0),), (), 1e-7), GRID)


# transforms


def test_gaussian_transform_pair():
    f = field_of([(0, 0)])
    spec = optics.forward_farfield(f)
    assert spec.plane_kind is PlaneKind.FOURIER
    kx, _ = spec.axes()
    # kappa exp(-r^2/4s^2) -> 2 kappa s^2 exp(-k^2 s^2), continuous FT / 2 pi
    kappa = 1 / np.sqrt(2 * np.pi * S ** 2)
    expected = 2 * kappa * S ** 2 * np.exp(-(kx * S) ** 2)
    np.testing.assert_allclose(spec.samples[spec.ny // 2].real, expected, atol=1e-12 * expected.max())


def test_parseval_and_unitarity():
    rng = np.random.default_rng(3)
    f = field_of([(x, y) for x, y in rng.uniform(-5e-6, 5e-6, (4, 2))], rng.uniform(0, 6, 4))
    spec = optics.forward_farfield(f)
    assert spec.power() == pytest.approx(f.power(), rel=1e-12)
    back = optics.inverse_farfield(spec)
    err = np.linalg.norm(back.samples - f.samples) / np.linalg.norm(f.samples)
    assert err < 1e-12


def test_shift_theorem():
    d = (8 * GRID.pitch, -5 * GRID.pitch)
    a = optics.forward_farfield(field_of([(0, 0)]))
    b = optics.forward_farfield(field_of([d]))
    KX, KY = a.mesh()
    expected = a.samples * np.exp(-1j * (KX * d[0] + KY * d[1]))
    np.testing.assert_allclose(b.samples, expected, atol=1e-12 * np.abs(a.samples).max())


# reflection and composition


def test_flat_mirror_images_to_inverted_position():
    rj = (4e-6, 2.5e-6)
    f = field_of([rj])
    g = optics.reflect_via_slm(f, None, ideal())
    assert g.power() == pytest.approx(f.power(), rel=1e-12)
    cx, cy = optics.circular_centroid(g.intensity, g.dx, g.dy)
    assert abs(cx + rj[0]) < g.dx and abs(cy + rj[1]) < g.dy


def test_reflected_power_scales_with_rho_squared():
    f = field_of([(2e-6, 0)])
    g = optics.reflect_via_slm(f, None, ideal(0.07))
    assert g.power() / f.power() == pytest.approx(0.0049, rel=1e-12)


def test_pure_phase_mask_conserves_reflected_power():
    f = field_of([(2e-6, 1e-6), (-3e-6, 0)])
    train = ideal(0.5)
    geo = masks.SLMGeometry.matched(f, train)
    rng = np.random.default_rng(0)
    mask = masks.SLMPhaseMask(rng.uniform(0, 2 * np.pi, (geo.py, geo.px)), geo.pitch,
                              train.slm_k_per_metre())
    g = optics.reflect_via_slm(f, mask, train)
    assert g.power() == pytest.approx(0.25 * f.power(), rel=1e-12)


def test_rho_zero_gives_direct_field():
    f = field_of([(1e-6, 0)])
    u = optics.composite_ion_plane_field(f, None, ideal(0.0))
    np.testing.assert_array_equal(u.samples, f.samples)
    np.testing.assert_array_equal(optics.detector_farfield(f, None, ideal(0.0)).samples,
                                  optics.forward_farfield(f).samples)


def test_on_axis_destructive_flat_mirror():
    f = field_of([(0, 0)])
    u = optics.composite_ion_plane_field(f, None, ideal(1.0, DESTRUCTIVE_PSI))
    c = u.nx // 2
    assert abs(u.samples[c, c]) < 1e-12 * abs(f.samples[c, c])


def test_constructive_farfield_doubles():
    f = field_of([(0, 0)])
    u = optics.detector_farfield(f, None, ideal(1.0, 0.0))
    np.testing.assert_allclose(u.samples, 2 * optics.forward_farfield(f).samples, atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 1), st.floats(0, 2 * np.pi), st.integers(0, 2 ** 31))
def test_detector_farfield_matches_transform_of_composite(rho, psi, seed):
    rng = np.random.default_rng(seed)
    grid = GridSpec(256, 20e-6)
    f = field_of([tuple(p) for p in rng.uniform(-8e-6, 8e-6, (3, 2))], rng.uniform(0, 6, 3), grid)
    train = ideal(rho, psi)
    geo = masks.SLMGeometry.matched(f, train)
    mask = masks.SLMPhaseMask(rng.uniform(0, 2 * np.pi, (geo.py, geo.px)), geo.pitch,
                              train.slm_k_per_metre())
    a = optics.detector_farfield(f, mask, train).samples
    b = optics.forward_farfield(optics.composite_ion_plane_field(f, mask, train)).samples
    assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(b)


def test_detector_image_inverts_once():
    rj = (-6e-6, 3e-6)
    d = optics.detector_image(field_of([rj]), None, ideal(0.0))
    assert d.plane_kind is PlaneKind.DETECTOR
    x, y = peak_position(d)
    assert abs(x - -rj[0]) < d.dx and abs(y - -rj[1]) < d.dy


def test_detector_magnification():
    f = field_of([(0, 0)])
    d = optics.detector_image(f, None, OpticalTrain(f3=30e-3, path_transmission=0.0))
    assert d.dx == pytest.approx(3 * f.dx)


def test_blazed_reflection_matches_dense_oracle():
    # coarse grid so the explicit double sums stay cheap
    grid = GridSpec(64, 10e-6)
    s = 0.8e-6
    chain = IonChain(((1.5e-6, 0.0),), (), s)
    f = optics.ion_source_field(chain, grid)
    train = ideal()
    rd = (-2.0e-6, 1.5e-6)
    geo = masks.SLMGeometry.matched(f, train)
    mask = masks.blazed_sector_mask(chain, rd, masks.sector_partition(1), [0.0], train, geo)
    g = optics.reflect_via_slm(f, mask, train)
    shift = np.subtract(chain.positions[0], rd)
    oracle = dense_reflected_image(f.samples, f.dx,
                                   lambda KX, KY: np.exp(1j * (KX * shift[0] + KY * shift[1])))
    np.testing.assert_allclose(g.samples, oracle, atol=1e-10 * np.abs(oracle).max())
    d = optics.detector_image(f, mask, train)
    refl = optics.invert_coordinates(g.samples)
    cx, cy = optics.circular_centroid(np.abs(refl) ** 2, d.dx, d.dy)
    assert abs(cx - rd[0]) < d.dx and abs(cy - rd[1]) < d.dy


def test_mask_mismatch_is_a_geometry_error():
    f = field_of([(0, 0)])
    with pytest.raises(GeometryError):
        optics.reflect_via_slm(f, np.ones((8, 8)), ideal())


def test_small_slm_aperture_is_a_geometry_error():
    f = field_of([(0, 0)])
    train = ideal()
    geo = masks.SLMGeometry.matched(f, train)
    tiny = masks.flat_mask(masks.SLMGeometry(4, 4, geo.pitch), train)
    with pytest.raises(GeometryError):
        optics.reflect_via_slm(f, tiny, train)


def test_device_geometry_resampling_is_close_to_matched():
    f = field_of([(3e-6, 0)])
    train = ideal(1.0, DESTRUCTIVE_PSI)
    dev = masks.SLMGeometry()  # 1272 x 1024 at 12.5 um
    mask = masks.flat_mask(dev, train)
    g = optics.reflect_via_slm(f, mask, train)
    assert g.power() == pytest.approx(f.power(), rel=1e-6)


def test_field_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    a = rng.normal(size=(4, 8)) + 1j * rng.normal(size=(4, 8))
    fld = ComplexField2D(a, 1.25e-7, 2.5e-7, PlaneKind.DETECTOR)
    path = tmp_path / "f.txt"
    optics.save_field(fld, path)
    assert path.read_text().splitlines()[0] == f"# 8 4 {1.25e-7!r} {2.5e-7!r} DetectorPlane"
    back = optics.load_field(path)
    np.testing.assert_array_equal(back.samples, fld.samples)
    assert (back.dx, back.dy, back.plane_kind) == (fld.dx, fld.dy, fld.plane_kind)
