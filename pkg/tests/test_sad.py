import numpy as np
import pytest

from synchronizer.errors import InvalidArgumentError
from synchronizer.sad import SadParams, detect_activity, segment_is_active


def _bursty(rng, fs=16000):
    """1 s noise floor, 2 s loud, 1 s noise floor."""
    x = 1e-3 * rng.standard_normal(4 * fs)
    x[fs:3 * fs] += rng.standard_normal(2 * fs)
    return x


def test_detects_loud_region(rng):
    x = _bursty(rng)
    mask = detect_activity(x)
    starts = np.arange(mask.num_frames) * mask.frame_shift
    inside = (starts >= 16000) & (starts + mask.frame_size <= 48000)
    outside = (starts + mask.frame_size <= 16000) | (starts >= 48000)
    assert mask.frame_flags[inside].all()
    assert not mask.frame_flags[outside].any()


def test_digital_silence_is_never_active():
    mask = detect_activity(np.zeros(16000))
    assert not mask.frame_flags.any()


def test_continuous_activity_keeps_a_floor(rng):
    # no noise-only frames: the floor falls back to max - 30 dB
    mask = detect_activity(rng.standard_normal(32000))
    assert mask.frame_flags.all()


def test_segment_gate_ratio(rng):
    x = _bursty(rng)
    mask = detect_activity(x)
    assert segment_is_active(mask, 20000, 8192)
    assert not segment_is_active(mask, 0, 8192)
    # half active: passes a 0.4 gate, fails 0.75
    assert segment_is_active(mask, 16000 - 4096, 8192, min_ratio=0.4)
    assert not segment_is_active(mask, 16000 - 4096, 8192, min_ratio=0.75)


def test_segment_outside_stream(rng):
    mask = detect_activity(rng.standard_normal(10000))
    with pytest.raises(InvalidArgumentError):
        segment_is_active(mask, 9000, 2048)


def test_sample_mask_length(rng):
    x = _bursty(rng)
    samples = detect_activity(x).sample_mask()
    assert len(samples) == len(x)
    assert samples[32000]
    assert not samples[100]


def test_empty_signal():
    with pytest.raises(InvalidArgumentError):
        detect_activity(np.array([]))


def test_params_validate():
    with pytest.raises(InvalidArgumentError):
        SadParams(min_ratio=0.0).validate()
    with pytest.raises(InvalidArgumentError):
        SadParams(frame_shift=0).validate()


def test_params_detect_uses_frames(rng):
    params = SadParams(frame_size=512, frame_shift=256)
    mask = params.detect(rng.standard_normal(4096))
    assert mask.frame_size == 512
    assert mask.num_frames == (4096 - 512) // 256 + 1


def test_mask_csv(tmp_path, rng):
    from synchronizer.utils.atomic_write import read_csv

    mask = detect_activity(_bursty(rng))
    rows = read_csv(mask.to_csv(tmp_path / 'activity.csv'))
    assert len(rows) == mask.num_frames
    assert rows[40]['active'] == 'true'
