from dataclasses import replace

import numpy as np
import pytest

from mictrans.calibrate import (
    CalibrationOffset,
    PsdEstimate,
    apply_offset,
    calibrate_magnitudes,
    compute_offset,
    measure_offset,
    measure_psd,
)
from mictrans.dsp import AudioClip, StftConfig, stft_log_spectrogram, stft_magnitude
from mictrans.error import ConfigError, FormatError, InputTooShortError
from mictrans.eval.metrics import psnr
from mictrans.micsim import MicProfile, TransferFunction, apply_microphone, get_profile

SR = 16000
CFG = StftConfig()
LTI_PRESETS = ["lowpass", "arrayA", "usbC"]


def noise_free(name, cfg=CFG):
    return replace(get_profile(name, cfg), noise_floor_db=-np.inf)


def excited(cfg=CFG):
    freqs = cfg.bin_frequencies()
    return (freqs > 100) & (freqs < 7800)


def smooth_profile(cfg=CFG):
    freqs = cfg.bin_frequencies()
    gains = 0.5 + 0.4 * np.cos(np.pi * freqs / 8000.0)
    return MicProfile("smooth", TransferFunction(gains, "cosine tilt"))


def flat_profile(gain, cfg=CFG):
    return MicProfile(f"flat{gain}", TransferFunction(np.full(cfg.freq_bins, gain)))


def test_silence_has_zero_power():
    psd = measure_psd(AudioClip(np.zeros(SR), SR))
    np.testing.assert_array_equal(psd.power, 0.0)
    assert len(psd) == CFG.freq_bins


def test_sine_power_scales_quadratically():
    t = np.arange(SR) / SR
    f0 = 40 * CFG.bin_hz
    a = measure_psd(AudioClip(0.2 * np.sin(2 * np.pi * f0 * t), SR)).power
    b = measure_psd(AudioClip(0.4 * np.sin(2 * np.pi * f0 * t), SR)).power
    assert a.argmax() == 40
    assert b[40] / a[40] == pytest.approx(4.0, rel=1e-6)


def test_white_noise_is_flat():
    rng = np.random.default_rng(0)
    psd = measure_psd(AudioClip(0.1 * rng.standard_normal(10 * SR).clip(-9, 9), SR)).power
    interior = psd[5:-5]
    level = 10 * np.log10(interior / interior.mean())
    assert np.abs(level).max() < 3.0


def test_too_short():
    with pytest.raises(InputTooShortError):
        measure_psd(AudioClip(np.zeros(1000), SR))


def test_identical_recordings():
    psd = PsdEstimate(np.linspace(1.0, 2.0, 8), 31.25)
    offset = compute_offset(psd, psd)
    np.testing.assert_array_equal(offset.gamma, 1.0)
    assert not offset.floor_applied


def test_floor_rule():
    r = PsdEstimate(np.array([1.0, 0.0, 4.0]), 31.25)
    s = PsdEstimate(np.array([4.0, 0.0, 1.0]), 31.25)
    offset = compute_offset(r, s)
    np.testing.assert_allclose(offset.gamma, [2.0, 1.0, 0.5])
    assert offset.floor_applied
    np.testing.assert_array_equal(offset.floored, [False, True, False])


def test_bin_count_mismatch():
    with pytest.raises(ConfigError):
        compute_offset(PsdEstimate(np.ones(3), 1.0), PsdEstimate(np.ones(4), 1.0))


def test_half_gain_microphone_gives_two():
    offset = measure_offset(flat_profile(0.5), get_profile("ref"), CFG)
    excited = offset.bin_hz * np.arange(len(offset))
    band = (excited > 100) & (excited < 7800)
    np.testing.assert_allclose(offset.gamma[band], 2.0, rtol=1e-2)


def test_sweep_recovers_true_gain_ratio():
    test_mic = smooth_profile()
    offset = measure_offset(test_mic, get_profile("ref"), CFG)
    freqs = CFG.bin_frequencies()
    band = (freqs > 100) & (freqs < 7800)
    truth = 1.0 / test_mic.tf.gains
    np.testing.assert_allclose(offset.gamma[band], truth[band], rtol=1e-2)


@pytest.mark.parametrize("name", LTI_PRESETS)
def test_sweep_recovers_preset_gains(name):
    test_mic = noise_free(name)
    offset = measure_offset(test_mic, get_profile("ref"), CFG)
    band = excited(CFG)
    truth = 1.0 / test_mic.tf.gains
    np.testing.assert_allclose(offset.gamma[band], truth[band], rtol=1e-2)


def test_sweep_between_two_distorting_mics():
    offset = measure_offset(noise_free("lowpass"), noise_free("arrayA"), CFG)
    band = excited(CFG)
    truth = noise_free("arrayA").tf.gains / noise_free("lowpass").tf.gains
    np.testing.assert_allclose(offset.gamma[band], truth[band], rtol=1e-2)


def test_oversampled_psd_reads_bin_centres():
    t = np.arange(2 * SR) / SR
    clip = AudioClip(0.5 * np.sin(2 * np.pi * 40 * CFG.bin_hz * t), SR)
    fine = measure_psd(clip, CFG, oversample=4)
    assert len(fine) == CFG.freq_bins
    assert fine.power.argmax() == 40
    with pytest.raises(ConfigError):
        measure_psd(clip, CFG, oversample=0)
    with pytest.raises(InputTooShortError):
        measure_psd(AudioClip(np.zeros(SR // 4), SR), CFG, oversample=8)


def test_apply_offset():
    rng = np.random.default_rng(1)
    mag = rng.uniform(0, 1, (CFG.freq_bins, 10))
    ones = CalibrationOffset(np.ones(CFG.freq_bins))
    np.testing.assert_array_equal(calibrate_magnitudes(mag, ones), mag)
    twos = CalibrationOffset(np.full(CFG.freq_bins, 2.0))
    np.testing.assert_allclose(calibrate_magnitudes(mag, twos), 2 * mag)
    with pytest.raises(ConfigError):
        calibrate_magnitudes(mag[:10], ones)


def noise(seed=2):
    rng = np.random.default_rng(seed)
    return AudioClip(0.1 * rng.standard_normal(SR).clip(-5, 5), SR, "x")


@pytest.mark.parametrize("name", LTI_PRESETS)
def test_oracle_calibration_restores_spectrogram(name):
    clip = noise()
    test_mic = noise_free(name)
    distorted = apply_microphone(clip, test_mic, CFG)
    truth = stft_log_spectrogram(clip, CFG)

    oracle = CalibrationOffset(1.0 / test_mic.tf.gains)
    calibrated = apply_offset(stft_magnitude(distorted, CFG), oracle, CFG, truth.log_range)
    assert calibrated.log_range == truth.log_range
    assert psnr(calibrated, truth) >= 40.0
    assert psnr(stft_log_spectrogram(distorted, CFG), truth) < psnr(calibrated, truth)


@pytest.mark.parametrize("name", LTI_PRESETS)
def test_sweep_calibration_restores_spectrogram(name):
    clip = noise(seed=3)
    test_mic = noise_free(name)
    offset = measure_offset(test_mic, get_profile("ref"), CFG)
    truth = stft_log_spectrogram(clip, CFG)
    magnitude = stft_magnitude(apply_microphone(clip, test_mic, CFG), CFG)
    calibrated = apply_offset(magnitude, offset, CFG, truth.log_range)
    assert psnr(calibrated, truth) >= 40.0
    # Same magnitudes, each grid on its own min-max range.
    own = apply_offset(magnitude, offset, CFG)
    np.testing.assert_allclose(own.on_range(truth.log_range).bins, calibrated.bins, atol=1e-5)


def test_offset_file(tmp_path):
    offset = compute_offset(
        PsdEstimate(np.array([1.0, 0.0, 4.0]), 31.25), PsdEstimate(np.array([4.0, 0.0, 1.0]), 31.25)
    )
    path = tmp_path / f"o{offset.name_suffix()}"
    offset.dump(path)
    back = CalibrationOffset.load(path)
    np.testing.assert_array_equal(back.gamma, offset.gamma)
    np.testing.assert_array_equal(back.floored, offset.floored)
    assert back.floor_applied and back.bin_hz == 31.25

    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(FormatError):
        CalibrationOffset.load(tmp_path / "bad.json")


def test_offsets_are_reciprocal():
    a = PsdEstimate(np.array([1.0, 4.0, 0.25, 1e-12]), 31.25)
    b = PsdEstimate(np.array([2.0, 1.0, 0.5, 3.0]), 31.25)
    forward = compute_offset(a, b)
    backward = compute_offset(b, a)
    kept = ~forward.floored
    np.testing.assert_array_equal(forward.floored, backward.floored)
    np.testing.assert_allclose(forward.gamma[kept] * backward.gamma[kept], 1.0, rtol=1e-12)
    assert forward.gamma[~kept].tolist() == [1.0]
