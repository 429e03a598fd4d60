import numpy as np
import pytest

from hwdkit import backbone as bb
from hwdkit import weights
from hwdkit.errors import (
    BadChecksum,
    BadMagic,
    MissingEntry,
    ShapeMismatch,
    TruncatedFile,
)


@pytest.fixture()
def saved(tmp_path):
    spec = bb.tinynet_spec(num_classes=4)
    params = bb.init_params(spec, seed=11)
    path = tmp_path / "w.hwdw"
    weights.save_weights(spec, params, path)
    return spec, params, path


def test_round_trip_bit_identical(saved):
    spec, params, path = saved
    loaded = weights.load_weights(spec, path)
    assert list(loaded) == list(spec.param_shapes())
    for k in params:
        assert np.array_equal(loaded[k], params[k])
        assert loaded[k].dtype == np.float32


def test_save_is_deterministic(saved, tmp_path):
    spec, params, path = saved
    other = tmp_path / "w2.hwdw"
    weights.save_weights(spec, params, other)
    assert path.read_bytes() == other.read_bytes()


def test_header_and_magic(saved):
    _, _, path = saved
    raw = path.read_bytes()
    assert raw[:4] == b"HWDW"
    assert int.from_bytes(raw[4:8], "little") == 1


def test_flipped_crc_byte(saved):
    spec, _, path = saved
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(BadChecksum):
        weights.load_weights(spec, path)


def test_flipped_payload_byte(saved):
    spec, _, path = saved
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(BadChecksum):
        weights.load_weights(spec, path)


def test_bad_magic(saved):
    spec, _, path = saved
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagic):
        weights.load_weights(spec, path)


def test_truncated_file(saved, tmp_path):
    spec, _, path = saved
    short = tmp_path / "short.hwdw"
    short.write_bytes(path.read_bytes()[:6])
    with pytest.raises(TruncatedFile):
        weights.load_weights(spec, short)


def test_cross_spec_mismatch(saved):
    _, _, path = saved
    vgg = bb.vgg16_32_spec()
    with pytest.raises(ShapeMismatch, match="block0.conv0.weight"):
        weights.load_weights(vgg, path)


def test_missing_entry(tmp_path):
    spec = bb.tinynet_spec(num_classes=4)
    params = bb.init_params(spec, seed=0)
    del params["head.bias"]
    with pytest.raises(MissingEntry, match="head.bias"):
        weights.save_weights(spec, params, tmp_path / "x.hwdw")


def test_headless_file_against_headed_spec(tmp_path):
    spec = bb.tinynet_spec()
    params = bb.init_params(spec, seed=0)
    path = tmp_path / "nohead.hwdw"
    weights.save_weights(spec, params, path)
    headed = bb.tinynet_spec(num_classes=4)
    with pytest.raises(MissingEntry, match="head"):
        weights.load_weights(headed, path)


def test_read_entry_shapes(saved):
    spec, _, path = saved
    assert weights.read_entry_shapes(path) == spec.param_shapes()
