import struct

import numpy as np
import pytest

from alignlab.audio import AudioClip, read_wav, resample_clip, write_wav
from alignlab.errors import WavFormatError

from oracles import sine


def _write_raw_wav(path, fmt_tag, channels, rate, bits, payload):
    byte_rate = rate * channels * bits // 8
    header = b"".join(
        [
            struct.pack("<4sI4s", b"RIFF", 36 + len(payload), b"WAVE"),
            struct.pack(
                "<4sIHHIIHH", b"fmt ", 16, fmt_tag, channels, rate, byte_rate,
                channels * bits // 8, bits,
            ),
            struct.pack("<4sI", b"data", len(payload)),
        ]
    )
    path.write_bytes(header + payload)


def test_full_scale_16bit_normalization(tmp_path):
    payload = struct.pack("<3h", 32767, 0, -32768)
    _write_raw_wav(tmp_path / "t.wav", 1, 1, 16000, 16, payload)
    clip = read_wav(tmp_path / "t.wav")
    assert clip.samples[0] == pytest.approx(32767 / 32768)
    assert clip.samples[1] == 0.0
    assert clip.samples[2] == -1.0


def test_silence_one_second(tmp_path):
    clip = AudioClip(np.zeros(16000, dtype=np.float32), 16000)
    write_wav(clip, tmp_path / "s.wav")
    back = read_wav(tmp_path / "s.wav")
    assert len(back) == 16000
    assert np.all(back.samples == 0.0)
    assert back.duration_seconds == 1.0


def test_stereo_averaged_to_mono(tmp_path):
    frames = struct.pack("<6h", 16384, -16384, 16384, -16384, 16384, -16384)
    _write_raw_wav(tmp_path / "st.wav", 1, 2, 8000, 16, frames)
    clip = read_wav(tmp_path / "st.wav")
    assert len(clip) == 3
    assert np.allclose(clip.samples, 0.0)


def test_write_read_roundtrip_error_bound(tmp_path, rng):
    samples = rng.uniform(-1.0, 1.0, size=4000).astype(np.float32)
    clip = AudioClip(samples, 16000)
    write_wav(clip, tmp_path / "r.wav")
    back = read_wav(tmp_path / "r.wav")
    assert np.max(np.abs(back.samples.astype(np.float64) - samples)) <= 1.0 / 32768


def test_sine_roundtrip_error_bound(tmp_path):
    clip = AudioClip(0.8 * sine(440, 0.5).astype(np.float32), 16000)
    write_wav(clip, tmp_path / "sine.wav")
    back = read_wav(tmp_path / "sine.wav")
    assert np.max(np.abs(back.samples - clip.samples)) <= 1.0 / 32768


def test_write_clamps_and_counts(tmp_path):
    clip = AudioClip(np.array([1.5, 0.0, -0.5], dtype=np.float32), 16000)
    clamped = write_wav(clip, tmp_path / "c.wav")
    assert clamped == 1
    back = read_wav(tmp_path / "c.wav")
    assert back.samples[0] == pytest.approx(32767 / 32768)


def test_empty_clip_refused(tmp_path):
    clip = AudioClip(np.zeros(0, dtype=np.float32), 16000)
    with pytest.raises(WavFormatError):
        write_wav(clip, tmp_path / "e.wav")


def test_zero_length_file_rejected(tmp_path):
    _write_raw_wav(tmp_path / "z.wav", 1, 1, 16000, 16, b"")
    with pytest.raises(WavFormatError, match="zero-length"):
        read_wav(tmp_path / "z.wav")


def test_malformed_header_rejected(tmp_path):
    (tmp_path / "bad.wav").write_bytes(b"not a wav file at all....")
    with pytest.raises(WavFormatError, match="RIFF"):
        read_wav(tmp_path / "bad.wav")


def test_unsupported_codec_named(tmp_path):
    _write_raw_wav(tmp_path / "u.wav", 7, 1, 8000, 8, b"\x00" * 8)  # mu-law
    with pytest.raises(WavFormatError, match="unsupported codec"):
        read_wav(tmp_path / "u.wav")


def test_8bit_and_24bit_and_float(tmp_path):
    _write_raw_wav(tmp_path / "b8.wav", 1, 1, 8000, 8, bytes([255, 128, 0]))
    clip8 = read_wav(tmp_path / "b8.wav")
    assert clip8.samples[1] == 0.0
    assert clip8.samples[2] == -1.0

    payload = b"\xff\xff\x7f" + b"\x00\x00\x00" + b"\x00\x00\x80"  # max, 0, min
    _write_raw_wav(tmp_path / "b24.wav", 1, 1, 8000, 24, payload)
    clip24 = read_wav(tmp_path / "b24.wav")
    assert clip24.samples[0] == pytest.approx((2**23 - 1) / 2**23)
    assert clip24.samples[2] == -1.0

    floats = struct.pack("<3f", 0.25, -0.25, 1.0)
    _write_raw_wav(tmp_path / "f32.wav", 3, 1, 8000, 32, floats)
    clip_f = read_wav(tmp_path / "f32.wav")
    assert np.allclose(clip_f.samples, [0.25, -0.25, 1.0])


def test_resample_preserves_duration():
    clip = AudioClip(sine(440, 1.0).astype(np.float32), 16000)
    down = resample_clip(clip, 8000)
    assert down.sample_rate == 8000
    assert abs(len(down) - 8000) <= 1
