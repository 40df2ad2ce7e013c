import struct

import numpy as np
import pytest
from scipy.io import wavfile

from mictrans.dsp import AudioClip, read_wav, write_wav
from mictrans.error import FormatError, UnsupportedError


def test_read_zeros(tmp_path):
    path = tmp_path / "zeros.wav"
    wavfile.write(path, 16000, np.zeros(1600, dtype=np.int16))
    clip = read_wav(path)
    assert clip.sample_rate_hz == 16000
    assert len(clip) == 1600
    assert not clip.samples.any()
    assert clip.clip_id == "zeros"


def test_read_full_scale(tmp_path):
    path = tmp_path / "peak.wav"
    wavfile.write(path, 16000, np.array([32767, -32768, 0], dtype=np.int16))
    clip = read_wav(path)
    assert clip.samples[0] == pytest.approx(32767 / 32768)
    assert clip.samples[1] == -1.0


def test_stereo_downmix(tmp_path):
    path = tmp_path / "stereo.wav"
    frames = np.tile(np.array([[16384, -16384]], dtype=np.int16), (100, 1))
    wavfile.write(path, 16000, frames)
    clip = read_wav(path)
    assert clip.samples.shape == (100,)
    np.testing.assert_array_equal(clip.samples, 0.0)


def test_float_wav(tmp_path):
    path = tmp_path / "float.wav"
    wavfile.write(path, 16000, np.array([0.5, -0.25, 0.0, 1.0], dtype=np.float32))
    clip = read_wav(path)
    np.testing.assert_array_equal(clip.samples, [0.5, -0.25, 0.0, 1.0])


def test_float_wav_out_of_range(tmp_path):
    path = tmp_path / "loud.wav"
    wavfile.write(path, 16000, np.array([0.5, 2.0], dtype=np.float64))
    with pytest.raises(FormatError):
        read_wav(path)


def test_garbage_is_format_error(tmp_path):
    path = tmp_path / "junk.wav"
    path.write_bytes(b"RIFF\x00\x00")
    with pytest.raises(FormatError):
        read_wav(path)


def test_write_then_read(tmp_path):
    rng = np.random.default_rng(0)
    clip = AudioClip(rng.uniform(-0.5, 0.5, 800), 16000, "x")
    write_wav(tmp_path / "x.wav", clip)
    back = read_wav(tmp_path / "x.wav")
    np.testing.assert_allclose(back.samples, clip.samples, atol=1 / 32768)


def test_clip_contract():
    with pytest.raises(FormatError):
        AudioClip(np.array([]), 16000)
    with pytest.raises(FormatError):
        AudioClip(np.array([0.0, 1.5]), 16000)
    with pytest.raises(FormatError):
        AudioClip(np.array([0.0, np.nan]), 16000)


def test_compressed_wav_unsupported(tmp_path):
    path = tmp_path / "mp3.wav"
    fmt = struct.pack("<HHIIHH", 0x0055, 1, 16000, 2000, 1, 0)
    data = b"\x00" * 64
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(data)) + data
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(UnsupportedError):
        read_wav(path)
