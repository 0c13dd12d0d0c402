from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest

PACKAGE_ROOT = Path(__file__).resolve().parents[1]
if str(PACKAGE_ROOT) not in sys.path:
    sys.path.insert(0, str(PACKAGE_ROOT))

from perceptual_wavelets.config import DenoiseParams, GraphParams, InpaintParams, TransformParams
from perceptual_wavelets.imageio import add_gaussian_noise
from perceptual_wavelets.metrics import snr_per_channel, ssim_value
from perceptual_wavelets.restore import (
    MAD_NORMALIZER,
    RestorationError,
    denoise,
    estimate_noise,
    gaussian_smooth,
    hard_threshold,
    initial_fill,
    inpaint,
    noise_sweep,
    threshold_schedule,
)
from perceptual_wavelets.samples import block_mask, cartoon_image, constant_image, random_mask
from perceptual_wavelets.sgwt import WaveletCoefficients


EXACT = TransformParams(exact=True)


def coefficients(*wavelet_planes, scaling=None):
    planes = np.vstack(wavelet_planes)
    head = np.zeros(planes.shape[1]) if scaling is None else scaling
    return WaveletCoefficients(planes=np.vstack([head, planes]), channel="R")


def naive_smooth(channel, sigma):
    radius = int(math.ceil(3 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kernel_1d = np.exp(-(offsets**2) / (2 * sigma**2))
    kernel = np.outer(kernel_1d, kernel_1d)
    kernel /= kernel.sum()
    padded = np.pad(channel, radius, mode="edge")
    out = np.zeros_like(channel)
    height, width = channel.shape
    for y in range(height):
        for x in range(width):
            out[y, x] = np.sum(padded[y : y + 2 * radius + 1, x : x + 2 * radius + 1] * kernel)
    return out


def test_smoothing_keeps_constant_images():
    image = constant_image(12, 12)
    np.testing.assert_allclose(gaussian_smooth(image, 2.0), image, atol=1e-9)


def test_smoothing_an_impulse_gives_a_unit_mass_symmetric_blob():
    image = np.zeros((21, 21, 3))
    image[10, 10] = 1.0
    blob = gaussian_smooth(image, 2.0)[..., 0]
    assert blob.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(blob, blob.T, atol=1e-12)
    np.testing.assert_allclose(blob, blob[::-1, ::-1], atol=1e-12)
    assert blob.argmax() == 10 * 21 + 10


def test_smoothing_matches_direct_convolution():
    image = np.random.default_rng(0).uniform(0, 255, (15, 17, 3))
    smoothed = gaussian_smooth(image, 2.0)
    for c in range(3):
        np.testing.assert_allclose(smoothed[..., c], naive_smooth(image[..., c], 2.0), atol=1e-9)


def test_smoothing_rejects_nonpositive_sigma():
    with pytest.raises(RestorationError):
        gaussian_smooth(constant_image(4, 4), 0.0)


def test_noise_estimate_on_simple_planes():
    assert estimate_noise(coefficients(np.zeros(10))) == 0.0
    unit = np.where(np.arange(10) % 2 == 0, 1.0, -1.0)
    assert estimate_noise(coefficients(unit)) == pytest.approx(1.0 / MAD_NORMALIZER)


def test_noise_estimate_recovers_gaussian_std():
    plane = np.random.default_rng(1).normal(0.0, 2.0, 10_000)
    assert 1.9 <= estimate_noise(coefficients(plane)) <= 2.1


def test_noise_estimate_uses_finest_plane_and_support():
    coarse = np.full(6, 100.0)
    fine = np.array([1.0, 1.0, 1.0, 5.0, 5.0, 5.0])
    coeffs = coefficients(coarse, fine)
    assert estimate_noise(coeffs) == pytest.approx(3.0 / MAD_NORMALIZER)
    support = np.array([False, False, False, True, True, True])
    assert estimate_noise(coeffs, support=support) == pytest.approx(5.0 / MAD_NORMALIZER)
    with pytest.raises(RestorationError):
        estimate_noise(coeffs, support=np.zeros(6, dtype=bool))


def test_noise_estimate_is_scale_equivariant():
    plane = np.random.default_rng(2).normal(size=101)
    base = estimate_noise(coefficients(plane))
    assert estimate_noise(coefficients(-4.0 * plane)) == pytest.approx(4.0 * base, abs=1e-12)


def test_hard_threshold_kills_small_entries_only():
    scaling = np.array([0.1, -0.2, 0.3, 0.0])
    coeffs = coefficients(np.array([0.5, -2.0, 0.0, 3.0]), scaling=scaling)
    out = hard_threshold(coeffs, 1.0)
    np.testing.assert_array_equal(out.wavelets, [[0.0, -2.0, 0.0, 3.0]])
    np.testing.assert_array_equal(out.scaling, scaling)
    np.testing.assert_array_equal(hard_threshold(coeffs, 0.0).wavelets, coeffs.wavelets)
    np.testing.assert_array_equal(hard_threshold(coeffs, 3.0).wavelets, 0.0)
    with pytest.raises(RestorationError):
        hard_threshold(coeffs, -1.0)


def test_hard_threshold_is_idempotent_and_shrinks_support():
    coeffs = coefficients(np.random.default_rng(3).normal(size=(3, 50)))
    once = hard_threshold(coeffs, 0.7)
    twice = hard_threshold(once, 0.7)
    np.testing.assert_array_equal(once.planes, twice.planes)
    assert np.all((once.wavelets != 0) <= (coeffs.wavelets != 0))


@pytest.fixture(scope="module")
def cartoon():
    return cartoon_image(24, 24)


def test_denoise_is_near_identity_on_clean_image(cartoon):
    result = denoise(cartoon, DenoiseParams(transform=EXACT))
    assert result.image.shape == cartoon.shape
    assert np.mean(np.abs(result.image - cartoon)) <= 2.0


@pytest.mark.parametrize("mode", ["ed", "de2000"])
def test_denoise_improves_snr_and_ssim(cartoon, mode):
    noisy = add_gaussian_noise(cartoon, 10.0, seed=4)
    params = DenoiseParams(graph=GraphParams(mode=mode), transform=EXACT)
    result = denoise(noisy, params, reference=cartoon)
    before = snr_per_channel(cartoon, noisy)
    after = snr_per_channel(cartoon, result.image)
    assert all(a > b for a, b in zip(after, before))
    assert ssim_value(cartoon, result.image) > ssim_value(cartoon, noisy)
    assert result.report.quality is not None
    assert set(result.report.baselines) == {"noisy", "smoothed"}


def test_denoise_report_without_reference(cartoon):
    noisy = add_gaussian_noise(cartoon, 5.0, seed=5)
    report = denoise(noisy, DenoiseParams(transform=EXACT)).report
    assert report.quality is None and report.baselines is None
    assert [c.name for c in report.channels] == ["R", "G", "B"]
    assert all(c.tau is not None and c.alpha == pytest.approx(3.0 * c.tau) for c in report.channels)
    assert len(report.q_tau_mean) == 4
    assert report.graph.path == "exact"


def test_denoise_is_deterministic(cartoon):
    noisy = add_gaussian_noise(cartoon, 10.0, seed=6)
    params = DenoiseParams(transform=TransformParams(chebyshev_order=30))
    first = denoise(noisy, params, threads=1)
    second = denoise(noisy, params, threads=3)
    np.testing.assert_array_equal(first.image, second.image)
    assert first.report.to_json() == second.report.to_json()


def test_denoise_on_the_unsmoothed_graph_runs(cartoon):
    noisy = add_gaussian_noise(cartoon, 10.0, seed=7)
    result = denoise(noisy, DenoiseParams(smooth=False, transform=EXACT))
    assert result.image.shape == noisy.shape
    assert result.image.min() >= 0.0 and result.image.max() <= 255.0


def test_initial_fill_averages_known_neighbors():
    image = np.arange(27, dtype=float).reshape(3, 3, 3)
    known = np.ones((3, 3), dtype=bool)
    known[1, 1] = False
    filled = initial_fill(image, known)
    expected = np.mean([image[y, x] for y in range(3) for x in range(3) if (y, x) != (1, 1)], axis=0)
    np.testing.assert_allclose(filled[1, 1], expected)
    isolated = block_mask(5, 5, 0, 0, 3)
    assert np.all(initial_fill(np.full((5, 5, 3), 9.0), isolated)[0, 0] == 0.0)


def test_inpaint_with_empty_mask_returns_input(cartoon):
    result = inpaint(cartoon, np.ones(cartoon.shape[:2], dtype=bool))
    np.testing.assert_array_equal(result.image, cartoon)
    assert result.report.iterations == 0


def test_inpaint_rejects_invalid_masks(cartoon):
    with pytest.raises(RestorationError):
        inpaint(cartoon, np.zeros(cartoon.shape[:2], dtype=bool))
    with pytest.raises(RestorationError):
        inpaint(cartoon, np.ones((4, 4), dtype=bool))


def test_inpaint_recovers_block_in_constant_image():
    clean = constant_image(16, 16)
    known = block_mask(16, 16, 6, 6, 3)
    attacked = clean.copy()
    attacked[~known] = 0.0
    params = InpaintParams(transform=EXACT, iterations=30)
    result = inpaint(attacked, known, params)
    assert np.max(np.abs(result.image - clean)) <= 2.0
    np.testing.assert_array_equal(result.image[known], attacked[known])


def test_inpaint_beats_zero_fill_and_pins_known_pixels(cartoon):
    known = random_mask(24, 24, 0.1, seed=8)
    attacked = cartoon.copy()
    attacked[~known] = 0.0
    params = InpaintParams(transform=EXACT, iterations=10)
    result = inpaint(attacked, known, params, reference=cartoon)
    np.testing.assert_array_equal(result.image[known], attacked[known])
    assert ssim_value(cartoon, result.image) > ssim_value(cartoon, attacked)
    assert result.report.iterations == 10
    assert "attacked" in result.report.baselines


def test_decay_schedule_runs_from_largest_coefficient_to_noise_floor():
    coeffs = coefficients(np.array([4.0, -1.0, 0.5, 0.2]))
    missing = np.array([True, True, False, False])
    params = InpaintParams(iterations=5)
    schedule = threshold_schedule(params, coeffs, missing)
    tau = np.median([4.0, 1.0]) / MAD_NORMALIZER
    assert schedule[0] == pytest.approx(4.0)
    assert schedule[-1] == pytest.approx(min(3.0 * tau, 4.0))
    assert np.all(np.diff(schedule) <= 0.0)
    fixed = threshold_schedule(InpaintParams(iterations=5, schedule="fixed"), coeffs, missing)
    np.testing.assert_allclose(fixed, 3.0 * tau)
    explicit = threshold_schedule(InpaintParams(iterations=3, alpha=0.25), coeffs, missing)
    np.testing.assert_allclose(explicit, 0.25)


def test_noise_sweep_reports_every_level(cartoon):
    entries = noise_sweep(cartoon, [2.0, 10.0], DenoiseParams(transform=EXACT), seed=0)
    assert [e.noise_std for e in entries] == [2.0, 10.0]
    assert entries[0].noisy.ssim > entries[1].noisy.ssim
    assert all(e.restored.snr_definition == "power-ratio" for e in entries)


@pytest.mark.parametrize("n_known", [1, 5])
def test_inpaint_with_fewer_known_pixels_than_neighbors(n_known):
    clean = constant_image(12, 12)
    known = np.zeros((12, 12), dtype=bool)
    known.ravel()[np.arange(n_known) * 13] = True
    attacked = np.where(known[..., None], clean, 0.0)
    result = inpaint(attacked, known, InpaintParams(transform=EXACT, iterations=2))
    assert result.image.shape == clean.shape
    np.testing.assert_array_equal(result.image[known], clean[known])
    assert result.image.min() >= 0.0 and result.image.max() <= 255.0


@pytest.mark.parametrize("mode", ["ed", "de2000"])
def test_noise_sweep_restoration_beats_noisy_at_low_and_high_noise(cartoon, mode):
    params = DenoiseParams(graph=GraphParams(mode=mode), transform=EXACT)
    entries = noise_sweep(cartoon, [5.0, 20.0], params, seed=1)
    for entry in entries:
        assert entry.restored.ssim > entry.noisy.ssim
