import numpy as np
import pytest
from hypothesis import given, strategies as st

from landcover.destripe import (DestripeError, StripeFilter, averaged_log_spectrum, build_filter,
                                destripe, destripe_band, identity_filter, stripe_bin,
                                stripe_energy, suppressed_energy)
from landcover.synth import add_stripes, textured_band


def striped(period=4, amplitude=50.0, shape=(256, 256), orientation="cols", seed=0):
    clean = textured_band(*shape, seed=seed)
    return clean, add_stripes(clean, period, amplitude, orientation)


def test_constant_band_spectrum():
    avg = averaged_log_spectrum(np.full((256, 256), 100.0))
    assert avg[0, 0] == pytest.approx(np.log1p(100.0 * 128 * 128))
    off = avg.copy()
    off[0, 0] = 0
    assert np.abs(off).max() < 1e-9


def test_sinusoid_peak_location():
    x = np.arange(256)
    band = 100 + 50 * np.sin(2 * np.pi * x / 4)[None, :].repeat(256, axis=0)
    avg = averaged_log_spectrum(band)
    direct = np.log1p(np.abs(np.fft.fft2(band[:128, :128])))
    np.testing.assert_allclose(avg, direct, atol=1e-8)  # every block sees the same phase
    off = avg.copy()
    off[0, 0] = -np.inf
    r, c = np.unravel_index(np.argmax(off), off.shape)
    assert r == 0 and c in (32, 96)


@pytest.mark.parametrize("shape, block", [((64, 64), 128), ((256, 256), 96), ((256, 100), 128)])
def test_spectrum_preconditions(shape, block):
    with pytest.raises(DestripeError):
        averaged_log_spectrum(np.zeros(shape), block)


def test_flat_spectrum_gives_identity_filter():
    filt = build_filter(np.zeros((128, 128)), (256, 256))
    assert filt.suppressed == 0 and np.all(filt.mask == 1.0)


def test_single_peak_pair_is_zeroed():
    spec = np.zeros((128, 128))
    spec[0, 32] = spec[0, 96] = 5.0
    filt = build_filter(spec, (256, 256))
    zeros = {tuple(map(int, p)) for p in np.argwhere(filt.mask == 0)}
    assert zeros == {(0, 63), (0, 64), (0, 192), (0, 193)}
    assert set(filt.block_bins) == {(0, 32), (0, 96)}


def test_dc_always_kept():
    spec = np.zeros((128, 128))
    spec[0, 0] = spec[1, 1] = spec[0, 2] = 50.0
    filt = build_filter(spec, (256, 256))
    assert filt.mask[0, 0] == 1.0 and filt.suppressed == 0


def test_identity_filter_round_trip(rng):
    band = rng.normal(100, 10, size=(64, 96))
    out = destripe_band(band, identity_filter(band.shape))
    assert np.sqrt(np.mean((out - band) ** 2)) < 1e-9


def test_filter_shape_mismatch():
    with pytest.raises(DestripeError):
        destripe_band(np.zeros((8, 8)), identity_filter((8, 9)))


def test_striped_scene_is_cleaned():
    clean, band = striped()
    out, filt = destripe(band)
    assert filt.suppressed > 0
    r, c = stripe_bin(band.shape, "cols", 4)
    residual_amplitude = 2 * np.abs(np.fft.fft2(out)[r, c]) / band.size
    assert 2 * np.abs(np.fft.fft2(band)[r, c]) / band.size == pytest.approx(50.0, rel=1e-3)
    assert residual_amplitude < 5.0
    assert stripe_energy(out, "cols", 4) * 100 <= stripe_energy(band, "cols", 4)
    rms_change = np.sqrt(np.mean((out - clean) ** 2)) / np.std(clean)
    assert rms_change <= 0.05
    assert out.mean() == pytest.approx(band.mean(), rel=1e-6)


def test_constant_band_passes_through():
    band = np.full((256, 256), 100.0)
    out, filt = destripe(band)
    assert filt.suppressed == 0
    assert np.abs(out - band).max() <= 1e-9
    _, stripes = striped()
    other = build_filter(averaged_log_spectrum(stripes), band.shape)
    assert np.abs(destripe_band(band, other) - band).max() <= 1e-9


def test_stripe_energy_examples(rng):
    x = np.arange(128)
    wave = 50 * np.sin(2 * np.pi * x / 4)[None, :].repeat(128, axis=0)
    assert stripe_energy(wave, "cols", 4) == pytest.approx(1.0, abs=1e-9)
    assert stripe_energy(100 + wave.T, "rows", 4) == pytest.approx(1.0, abs=1e-9)
    assert stripe_energy(rng.normal(size=(128, 128)), "cols", 4) < 0.05
    assert stripe_energy(np.full((32, 32), 7.0), "cols", 4) == 0.0
    with pytest.raises(DestripeError):
        stripe_energy(wave, "cols", 1.5)
    with pytest.raises(DestripeError):
        stripe_energy(wave, "diagonal", 4)


def test_non_power_of_two_image():
    clean, band = striped(shape=(200, 300))
    out, filt = destripe(band)
    assert filt.shape == (200, 300)
    assert stripe_energy(out, "cols", 4) * 100 <= stripe_energy(band, "cols", 4)
    assert np.sqrt(np.mean((out - clean) ** 2)) / np.std(clean) <= 0.05


@given(st.integers(0, 50), st.sampled_from([4, 8, 16]), st.sampled_from(["rows", "cols"]),
       st.floats(20, 80))
def test_filter_properties(seed, period, orientation, amplitude):
    clean, band = striped(period, amplitude, (256, 256), orientation, seed)
    out, filt = destripe(band)
    np.testing.assert_array_equal(filt.mask, np.roll(filt.mask[::-1, ::-1], 1, axis=(0, 1)))
    assert set(np.unique(filt.mask)) <= {0.0, 1.0}
    full = np.fft.ifft2(np.fft.fft2(band) * filt.mask)
    assert np.abs(full.imag).max() <= 1e-9 * np.abs(band).max()
    assert np.sum(np.abs(np.fft.fft2(out)) ** 2) <= np.sum(np.abs(np.fft.fft2(band)) ** 2)
    np.testing.assert_allclose(destripe_band(out, filt), out, atol=1e-9)
    assert stripe_energy(out, orientation, period) * 100 <= stripe_energy(band, orientation, period)
    assert np.sqrt(np.mean((out - clean) ** 2)) / np.std(clean) <= 0.05
    assert suppressed_energy(out, filt) <= 1e-20


def test_filter_dataclass():
    f = StripeFilter(np.ones((4, 6)), (), 128)
    assert f.shape == (4, 6) and f.suppressed == 0
