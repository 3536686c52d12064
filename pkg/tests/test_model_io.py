import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dragonfruit import modelfile, network
from dragonfruit.data import synth_dataset
from dragonfruit.errors import (
    BadMagicError,
    ChecksumError,
    ModelFormatError,
    TruncatedFileError,
    VersionError,
)
from dragonfruit.modelfile import (
    dequantize,
    dequantize_tensor,
    load_any,
    load_checkpoint,
    load_model,
    load_quantized,
    quantize_int8,
    quantize_tensor,
    quantized_forward,
    read_container,
    save_checkpoint,
    save_model,
    save_quantized,
)
from dragonfruit.network import build_network, forward
from dragonfruit.training import TrainConfig, flatten_params, train

TINY_WIDTH = 1 / 32
PREFIX = struct.Struct("<4sHHfIQI")


def tiny_net(seed=0, width=TINY_WIDTH):
    return build_network(width=width, seed=seed)


def probe_image(seed=0):
    return np.random.default_rng(seed).random((256, 256, 3)).astype(np.float32)


def rewrite_header(path, mutate):
    """Decode the JSON header, apply mutate(header_dict), and re-pack the file."""
    raw = path.read_bytes()
    magic, version, flags, width, header_len, payload_len, crc = PREFIX.unpack_from(raw)
    header = json.loads(raw[PREFIX.size:PREFIX.size + header_len].decode())
    payload = raw[PREFIX.size + header_len:]
    mutate(header)
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    prefix = PREFIX.pack(magic, version, flags, width, len(blob), payload_len, crc)
    path.write_bytes(prefix + blob + payload)


# quantization arithmetic


def test_quantize_symmetric_example():
    t = quantize_tensor(np.array([-1.27, 0.64, 1.27], dtype=np.float32))
    assert t.scale == pytest.approx(0.01, rel=1e-6)
    assert t.q.dtype == np.int8
    assert t.q.tolist() == [-127, 64, 127]


def test_quantize_rounds_half_away_from_zero():
    # scale is exactly 1.0 when max|w| is 127
    w = np.array([0.5, -0.5, 2.5, -2.5, 126.5, 127.0], dtype=np.float32)
    t = quantize_tensor(w)
    assert t.scale == 1.0
    assert t.q.tolist() == [1, -1, 3, -3, 127, 127]


def test_quantize_all_zero_tensor_uses_unit_scale():
    t = quantize_tensor(np.zeros((3, 3), dtype=np.float32))
    assert t.scale == 1.0
    assert not t.q.any()
    assert np.array_equal(dequantize_tensor(t), np.zeros((3, 3), dtype=np.float32))


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1))
def test_quantize_roundtrip_error_within_half_scale(seed):
    r = np.random.default_rng(seed)
    w = r.normal(0, float(r.uniform(0.01, 3.0)), int(r.integers(1, 400))).astype(np.float32)
    t = quantize_tensor(w)
    err = np.abs(w.astype(np.float64) - t.q.astype(np.float64) * t.scale)
    assert float(err.max()) <= t.scale / 2
    assert int(np.abs(t.q).max()) <= 127


def test_dequantize_preserves_shape_and_dtype():
    w = np.linspace(-1, 1, 24, dtype=np.float32).reshape(2, 3, 4)
    t = quantize_tensor(w)
    back = dequantize_tensor(t)
    assert back.shape == (2, 3, 4)
    assert back.dtype == np.float32
    assert np.abs(back - w).max() <= t.scale / 2 + 1e-7


def test_quantize_network_keeps_biases_float():
    net = tiny_net()
    for p in net.params:
        if p is not None:
            p[1][:] = np.linspace(-0.5, 0.5, p[1].size, dtype=np.float32)
    qm = quantize_int8(net)
    for p, qw in zip(net.params, qm.weights):
        if p is None:
            assert qw is None
            continue
        assert qw[0].q.dtype == np.int8
        assert qw[1].dtype == np.float32
        assert np.array_equal(qw[1], p[1])


def test_quantized_forward_equals_dequantized_network():
    net = tiny_net(seed=3)
    qm = quantize_int8(net)
    x = probe_image()
    ref = forward(dequantize(qm), x)
    out = quantized_forward(qm, x)
    assert np.array_equal(out, ref)
    assert out.shape == (4,)
    assert abs(float(out.sum()) - 1.0) < 1e-5


# container round trips


def test_save_load_model_is_bit_exact(tmp_path):
    net = tiny_net(seed=1)
    path = tmp_path / "m.dfqn"
    save_model(net, path)
    back = load_model(path)
    assert back.layers == net.layers
    assert back.width == net.width
    assert back.input_shape == net.input_shape
    for a, b in zip(flatten_params(net), flatten_params(back)):
        assert a.dtype == b.dtype == np.float32
        assert np.array_equal(a, b)
    x = probe_image(1)
    assert np.array_equal(forward(net, x), forward(back, x))


def test_save_is_byte_deterministic(tmp_path):
    net = tiny_net(seed=2)
    p1, p2 = tmp_path / "a.dfqn", tmp_path / "b.dfqn"
    save_model(net, p1)
    save_model(net, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_width_survives_the_f32_prefix(tmp_path):
    net = build_network(width=0.25, seed=0)
    path = tmp_path / "w.dfqn"
    save_model(net, path)
    assert load_model(path).width == 0.25


def test_quantized_container_roundtrip(tmp_path):
    net = tiny_net(seed=4)
    qm = quantize_int8(net)
    path = tmp_path / "q.dfqn"
    save_quantized(qm, path)
    back = load_quantized(path)
    assert back.layers == qm.layers
    assert back.width == qm.width
    for a, b in zip(qm.weights, back.weights):
        if a is None:
            assert b is None
            continue
        assert np.array_equal(a[0].q, b[0].q)
        assert a[0].scale == b[0].scale  # json float round trip is exact
        assert np.array_equal(a[1], b[1])
    x = probe_image(4)
    assert np.array_equal(quantized_forward(qm, x), quantized_forward(back, x))


def test_load_any_dispatches_on_flag(tmp_path):
    net = tiny_net(seed=5)
    fp, qp = tmp_path / "f.dfqn", tmp_path / "q.dfqn"
    save_model(net, fp)
    save_quantized(quantize_int8(net), qp)
    assert isinstance(load_any(fp), network.Network)
    assert isinstance(load_any(qp), modelfile.QuantizedModel)


def test_loader_kind_mismatch_is_rejected(tmp_path):
    net = tiny_net(seed=6)
    fp, qp = tmp_path / "f.dfqn", tmp_path / "q.dfqn"
    save_model(net, fp)
    save_quantized(quantize_int8(net), qp)
    with pytest.raises(ModelFormatError):
        load_model(qp)
    with pytest.raises(ModelFormatError):
        load_quantized(fp)


def test_quantized_file_much_smaller_than_float(tmp_path):
    net = build_network(width=0.125, seed=0)
    fp, qp = tmp_path / "f.dfqn", tmp_path / "q.dfqn"
    save_model(net, fp)
    save_quantized(quantize_int8(net), qp)
    ratio = qp.stat().st_size / fp.stat().st_size
    assert ratio < 0.27


def test_header_carries_parameter_total(tmp_path):
    net = tiny_net(seed=7)
    path = tmp_path / "m.dfqn"
    save_model(net, path)
    c = read_container(path)
    assert c.header["total_parameters"] == network.total_parameters(net)
    assert c.header["kind"] == "model"
    assert c.header["input_shape"] == [256, 256, 3]


# corruption handling


def test_flipped_payload_byte_fails_checksum(tmp_path):
    net = tiny_net(seed=8)
    path = tmp_path / "m.dfqn"
    save_model(net, path)
    raw = bytearray(path.read_bytes())
    # flip one bit near the end, well inside the payload
    raw[-100] ^= 0x40
    path.write_bytes(bytes(raw))
    with pytest.raises(ChecksumError):
        load_model(path)


def test_bad_magic_rejected(tmp_path):
    net = tiny_net(seed=8)
    path = tmp_path / "m.dfqn"
    save_model(net, path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"JUNK"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagicError):
        load_model(path)


def test_unknown_version_rejected(tmp_path):
    net = tiny_net(seed=8)
    path = tmp_path / "m.dfqn"
    save_model(net, path)
    raw = bytearray(path.read_bytes())
    raw[4:6] = struct.pack("<H", 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(VersionError):
        load_model(path)


def test_truncated_files_rejected(tmp_path):
    net = tiny_net(seed=8)
    path = tmp_path / "m.dfqn"
    save_model(net, path)
    raw = path.read_bytes()
    for cut in (4, PREFIX.size + 10, len(raw) - 1):
        path.write_bytes(raw[:cut])
        with pytest.raises(TruncatedFileError):
            load_model(path)


def test_all_corruption_errors_share_a_base(tmp_path):
    assert issubclass(BadMagicError, ModelFormatError)
    assert issubclass(VersionError, ModelFormatError)
    assert issubclass(ChecksumError, ModelFormatError)
    assert issubclass(TruncatedFileError, ModelFormatError)


def test_header_layer_table_mismatch_rejected(tmp_path):
    net = tiny_net(seed=9)
    path = tmp_path / "m.dfqn"
    save_model(net, path)

    def shrink_first_conv(header):
        header["layers"][0]["out_channels"] = 2

    rewrite_header(path, shrink_first_conv)
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_quantized_tensor_without_scale_rejected(tmp_path):
    net = tiny_net(seed=9)
    path = tmp_path / "q.dfqn"
    save_quantized(quantize_int8(net), path)

    def drop_first_scale(header):
        for e in header["tensors"]:
            if "scale" in e:
                del e["scale"]
                return

    rewrite_header(path, drop_first_scale)
    with pytest.raises(ModelFormatError):
        load_quantized(path)


def test_garbled_header_json_rejected(tmp_path):
    net = tiny_net(seed=9)
    path = tmp_path / "m.dfqn"
    save_model(net, path)
    raw = bytearray(path.read_bytes())
    raw[PREFIX.size] ^= 0xFF  # first header byte, not CRC protected
    path.write_bytes(bytes(raw))
    with pytest.raises(ModelFormatError):
        load_model(path)


# checkpoints


def test_checkpoint_roundtrip_restores_training_state(tmp_path):
    net = tiny_net(seed=10)
    tr, val = synth_dataset(per_class=2, seed=0)
    cfg = TrainConfig(epochs=1, batch_size=2, seed=1)
    _, state = train(net, tr, val, cfg)
    path = tmp_path / "ck.dfqn"
    save_checkpoint(net, state, path, next_epoch=1)

    back_net, back_state, next_epoch = load_checkpoint(path)
    assert next_epoch == 1
    assert back_state.t == state.t
    for a, b in zip(flatten_params(net), flatten_params(back_net)):
        assert np.array_equal(a, b)
    for a, b in zip(state.m + state.v, back_state.m + back_state.v):
        assert np.array_equal(a, b)


def test_resume_from_checkpoint_file_matches_straight_run(tmp_path):
    tr, val = synth_dataset(per_class=2, seed=3)
    base = dict(batch_size=2, seed=5)

    straight = tiny_net(seed=11)
    train(straight, tr, val, TrainConfig(epochs=2, **base))

    resumed = tiny_net(seed=11)
    _, state = train(resumed, tr, val, TrainConfig(epochs=1, **base))
    path = tmp_path / "ck.dfqn"
    save_checkpoint(resumed, state, path, next_epoch=1)

    loaded_net, loaded_state, next_epoch = load_checkpoint(path)
    train(
        loaded_net, tr, val, TrainConfig(epochs=2, **base),
        state=loaded_state, start_epoch=next_epoch,
    )
    for a, b in zip(flatten_params(straight), flatten_params(loaded_net)):
        assert np.array_equal(a, b)


def test_load_checkpoint_rejects_plain_model(tmp_path):
    net = tiny_net(seed=12)
    path = tmp_path / "m.dfqn"
    save_model(net, path)
    with pytest.raises(ModelFormatError):
        load_checkpoint(path)
