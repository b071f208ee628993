import struct

import numpy as np
import pytest

from voxtract.audio_io import (
    AudioClip,
    ChannelCountError,
    EncodingError,
    SampleRateError,
    WavError,
    add_noise_snr,
    read_wav,
    write_wav,
)


def _make_wav(channels=1, rate=48000, bits=16, fmt=1, n_frames=10):
    frame_bytes = channels * bits // 8
    payload = b"\x00" * (n_frames * frame_bytes)
    header = b"".join([
        b"RIFF", struct.pack("<I", 36 + len(payload)), b"WAVE",
        b"fmt ", struct.pack("<IHHIIHH", 16, fmt, channels, rate,
                             rate * frame_bytes, frame_bytes, bits),
        b"data", struct.pack("<I", len(payload)),
    ])
    return header + payload


def _data_chunk_size(path):
    data = open(path, "rb").read()
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        if cid == b"data":
            return size
        pos += 8 + size + (size & 1)
    raise AssertionError("no data chunk")


def test_float32_round_trip_bitwise(tmp_path, rng):
    samples = rng.standard_normal(1000).astype(np.float32).astype(float)
    path = tmp_path / "f32.wav"
    write_wav(path, AudioClip(samples, 48000), "float32")
    back = read_wav(path)
    assert back.sample_rate_hz == 48000
    assert np.array_equal(back.samples, samples)


def test_pcm16_round_trip_within_half_lsb(tmp_path, rng):
    samples = rng.uniform(-0.9, 0.9, 1000)
    path = tmp_path / "p16.wav"
    assert write_wav(path, AudioClip(samples, 48000), "pcm16") == 0
    back = read_wav(path)
    assert np.max(np.abs(back.samples - samples)) <= 1.0 / 32768


def test_pcm16_negative_full_scale(tmp_path):
    path = tmp_path / "fs.wav"
    write_wav(path, AudioClip(np.array([-1.0]), 48000), "pcm16")
    assert read_wav(path).samples[0] == -1.0


def test_pcm16_clipping_counted(tmp_path):
    path = tmp_path / "clip.wav"
    clipped = write_wav(path, AudioClip(np.array([1.5, 0.0, -2.0]), 48000), "pcm16")
    assert clipped == 2
    raw = open(path, "rb").read()
    first = struct.unpack_from("<h", raw, 44)[0]
    assert first == 32767


def test_float32_data_chunk_size(tmp_path, rng):
    path = tmp_path / "sized.wav"
    write_wav(path, AudioClip(rng.standard_normal(48000), 48000), "float32")
    assert _data_chunk_size(path) == 192000


def test_empty_clip_round_trip(tmp_path):
    path = tmp_path / "empty.wav"
    write_wav(path, AudioClip(np.array([]), 48000), "pcm16")
    assert len(read_wav(path)) == 0


def test_stereo_rejected(tmp_path):
    path = tmp_path / "stereo.wav"
    path.write_bytes(_make_wav(channels=2))
    with pytest.raises(ChannelCountError):
        read_wav(path)


def test_wrong_rate_rejected(tmp_path):
    path = tmp_path / "rate.wav"
    path.write_bytes(_make_wav(rate=44100))
    with pytest.raises(SampleRateError):
        read_wav(path)


def test_unsupported_encoding_rejected(tmp_path):
    path = tmp_path / "enc.wav"
    path.write_bytes(_make_wav(bits=24))
    with pytest.raises(EncodingError):
        read_wav(path)


def test_not_a_wav_rejected(tmp_path):
    path = tmp_path / "bogus.wav"
    path.write_bytes(b"not a riff file at all")
    with pytest.raises(WavError):
        read_wav(path)


def test_unknown_write_encoding_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_wav(tmp_path / "x.wav", AudioClip(np.zeros(4), 48000), "mp3")


def test_clip_validation():
    with pytest.raises(ValueError):
        AudioClip(np.array([np.nan]), 48000)
    with pytest.raises(ValueError):
        AudioClip(np.zeros((2, 2)), 48000)
    with pytest.raises(ValueError):
        AudioClip(np.zeros(4), 0)


def test_noise_snr_zero_db_matches_rms(rng):
    clip = AudioClip(np.sin(np.linspace(0, 200, 48000)), 48000)
    noisy = add_noise_snr(clip, 0.0, seed=3)
    noise = noisy.samples - clip.samples
    sig_rms = np.sqrt(np.mean(clip.samples ** 2))
    noise_rms = np.sqrt(np.mean(noise ** 2))
    assert noise_rms == pytest.approx(sig_rms, rel=0.01)


def test_noise_snr_20_db_power_ratio():
    clip = AudioClip(np.sin(np.linspace(0, 200, 48000)), 48000)
    noisy = add_noise_snr(clip, 20.0, seed=4)
    noise = noisy.samples - clip.samples
    ratio = np.mean(clip.samples ** 2) / np.mean(noise ** 2)
    assert ratio == pytest.approx(100.0, rel=0.02)


def test_noise_snr_measured_within_tolerance():
    clip = AudioClip(np.sin(np.linspace(0, 200, 48000)), 48000)
    for seed in range(10):
        noisy = add_noise_snr(clip, 10.0, seed=seed)
        noise = noisy.samples - clip.samples
        measured = 10 * np.log10(np.mean(clip.samples ** 2) / np.mean(noise ** 2))
        assert abs(measured - 10.0) < 0.2


def test_noise_deterministic_and_seed_decorrelated():
    clip = AudioClip(np.sin(np.linspace(0, 200, 48000)), 48000)
    a = add_noise_snr(clip, 10.0, seed=7)
    b = add_noise_snr(clip, 10.0, seed=7)
    c = add_noise_snr(clip, 10.0, seed=8)
    assert np.array_equal(a.samples, b.samples)
    na, nc = a.samples - clip.samples, c.samples - clip.samples
    corr = np.corrcoef(na, nc)[0, 1]
    assert abs(corr) < 0.05


def test_noise_on_silent_clip_rejected():
    with pytest.raises(ValueError):
        add_noise_snr(AudioClip(np.zeros(100), 48000), 10.0, seed=0)


def test_probe_wav_reports_format(tmp_path):
    from voxtract.audio_io import probe_wav

    path = tmp_path / "probe.wav"
    path.write_bytes(_make_wav(channels=2, rate=44100, bits=16, fmt=1))
    spec = probe_wav(path)
    assert spec.channels == 2
    assert spec.sample_rate_hz == 44100
    assert spec.encoding == "pcm16"
