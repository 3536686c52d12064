"""Binary model container and int8 weight quantization.

Layout (all integers little-endian):

    magic "DFQN" | version u16 | flags u16 | width f32 |
    header_len u32 | payload_len u64 | payload_crc32 u32 |
    header JSON (header_len bytes) | payload (payload_len bytes)

flags bit 0 marks a quantized container, bit 1 a training checkpoint with
optimizer state. The JSON header carries the layer table and a tensor table
(name, dtype, shape, offset into the payload, plus a scale for int8 tensors).
The CRC-32 covers the payload, so any single-bit payload corruption is
rejected at load time. Saving the same model twice yields identical bytes.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumError,
    ModelFormatError,
    TruncatedFileError,
    VersionError,
)
from .network import LayerSpec, Network, forward, total_parameters
from .training import AdamState, flatten_params

MAGIC = b"DFQN"
FORMAT_VERSION = 1
FLAG_QUANTIZED = 1 << 0
FLAG_CHECKPOINT = 1 << 1

_PREFIX = struct.Struct("<4sHHfIQI")

_DTYPES = {"f32": np.dtype("<f4"), "i8": np.dtype("|i1")}


@dataclass
class QuantizedTensor:
    q: np.ndarray  # int8, same shape as the source weights
    scale: float  # dequantized value = q * scale


@dataclass
class QuantizedModel:
    """Per-tensor symmetric weight-only int8 form of a Network."""

    layers: list[LayerSpec]
    weights: list[tuple[QuantizedTensor, np.ndarray] | None]  # (q weights, f32 bias)
    width: float
    input_shape: tuple[int, int, int]
    _dequantized: Network | None = field(default=None, repr=False)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_tensor(w: np.ndarray) -> QuantizedTensor:
    """scale = max|w|/127 (1.0 for an all-zero tensor), round half away from zero.

    Quantized values stay within [-127, 127], so |w - q*scale| <= scale/2.
    """
    w32 = w.astype(np.float32, copy=False)
    amax = np.float32(np.abs(w32).max()) if w32.size else np.float32(0.0)
    scale = amax / np.float32(127.0) if amax > 0 else np.float32(1.0)
    # divide in float64: keeps |w - q*scale| <= scale/2 even right at the
    # rounding boundaries, where a float32 quotient can land on the wrong side
    q = _round_half_away(w32.astype(np.float64) / float(scale))
    q = np.clip(q, -127, 127).astype(np.int8)
    return QuantizedTensor(q, float(scale))


def dequantize_tensor(t: QuantizedTensor) -> np.ndarray:
    return t.q.astype(np.float32) * np.float32(t.scale)


def quantize_int8(net: Network) -> QuantizedModel:
    """Quantize every weight tensor; biases stay float32."""
    weights: list[tuple[QuantizedTensor, np.ndarray] | None] = []
    for p in net.params:
        if p is None:
            weights.append(None)
        else:
            weights.append((quantize_tensor(p[0]), p[1].astype(np.float32, copy=True)))
    return QuantizedModel(list(net.layers), weights, net.width, net.input_shape)


def dequantize(qm: QuantizedModel) -> Network:
    """Materialize the float32 network the quantized model stands for."""
    params = [
        None if w is None else (dequantize_tensor(w[0]), w[1].copy())
        for w in qm.weights
    ]
    return Network(list(qm.layers), params, width=qm.width, input_shape=qm.input_shape)


def quantized_forward(qm: QuantizedModel, x: np.ndarray, **kwargs) -> np.ndarray:
    """Forward pass through the dequantized weights (cached after first use)."""
    if qm._dequantized is None:
        qm._dequantized = dequantize(qm)
    return forward(qm._dequantized, x, **kwargs)


def _spec_to_dict(spec: LayerSpec) -> dict:
    return {
        "kind": spec.kind,
        "out_channels": spec.out_channels,
        "kernel": spec.kernel,
        "padding": spec.padding,
        "units": spec.units,
        "rate": spec.rate,
    }


def _spec_from_dict(d: dict) -> LayerSpec:
    try:
        return LayerSpec(
            kind=str(d["kind"]),
            out_channels=int(d["out_channels"]),
            kernel=int(d["kernel"]),
            padding=str(d["padding"]),
            units=int(d["units"]),
            rate=float(d["rate"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad layer entry in header: {exc}") from exc


class _Writer:
    def __init__(self) -> None:
        self.payload = bytearray()
        self.tensors: list[dict] = []

    def add(self, name: str, arr: np.ndarray, scale: float | None = None) -> None:
        if arr.dtype == np.float32 or arr.dtype == np.float64:
            dtype, data = "f32", arr.astype("<f4").tobytes(order="C")
        elif arr.dtype == np.int8:
            dtype, data = "i8", arr.astype("|i1").tobytes(order="C")
        else:
            raise ModelFormatError(f"unsupported tensor dtype {arr.dtype}")
        entry = {
            "name": name,
            "dtype": dtype,
            "shape": list(arr.shape),
            "offset": len(self.payload),
            "nbytes": len(data),
        }
        if scale is not None:
            entry["scale"] = scale
        self.tensors.append(entry)
        self.payload.extend(data)


def _write_container(path, flags: int, width: float, header: dict, writer: _Writer) -> None:
    header = dict(header)
    header["tensors"] = writer.tensors
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = bytes(writer.payload)
    prefix = _PREFIX.pack(
        MAGIC, FORMAT_VERSION, flags, width, len(blob), len(payload), zlib.crc32(payload)
    )
    Path(path).write_bytes(prefix + blob + payload)


@dataclass
class Container:
    flags: int
    width: float
    header: dict
    tensors: dict[str, np.ndarray]
    scales: dict[str, float]

    @property
    def quantized(self) -> bool:
        return bool(self.flags & FLAG_QUANTIZED)

    @property
    def checkpoint(self) -> bool:
        return bool(self.flags & FLAG_CHECKPOINT)


def read_container(path) -> Container:
    """Parse and validate a container file; raises ModelFormatError subtypes."""
    raw = Path(path).read_bytes()
    if len(raw) < _PREFIX.size:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes is shorter than the fixed prefix")
    magic, version, flags, width, header_len, payload_len, crc = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported format version {version}")
    expect = _PREFIX.size + header_len + payload_len
    if len(raw) != expect:
        raise TruncatedFileError(f"{path}: expected {expect} bytes, found {len(raw)}")
    blob = raw[_PREFIX.size:_PREFIX.size + header_len]
    payload = raw[_PREFIX.size + header_len:]
    if zlib.crc32(payload) != crc:
        raise ChecksumError(f"{path}: payload checksum mismatch")
    try:
        header = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: header is not valid JSON: {exc}") from exc

    tensors: dict[str, np.ndarray] = {}
    scales: dict[str, float] = {}
    entries = header.get("tensors")
    if not isinstance(entries, list):
        raise ModelFormatError(f"{path}: header has no tensor table")
    for e in entries:
        try:
            name, dtype = e["name"], _DTYPES[e["dtype"]]
            shape = tuple(int(d) for d in e["shape"])
            offset, nbytes = int(e["offset"]), int(e["nbytes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"{path}: bad tensor entry: {exc}") from exc
        count = int(np.prod(shape)) if shape else 1
        if nbytes != count * dtype.itemsize:
            raise ModelFormatError(f"{path}: tensor {name}: nbytes {nbytes} != shape {shape}")
        if offset < 0 or offset + nbytes > len(payload):
            raise ModelFormatError(f"{path}: tensor {name}: offsets out of bounds")
        arr = np.frombuffer(payload, dtype=dtype, count=count, offset=offset).reshape(shape)
        tensors[name] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
        if "scale" in e:
            scales[name] = float(e["scale"])
    return Container(flags, float(width), header, tensors, scales)


def _param_names(layers: list[LayerSpec]) -> list[tuple[int, str, str] | None]:
    named = []
    for i, spec in enumerate(layers):
        if spec.kind in ("conv", "dense"):
            named.append((i, f"L{i:02d}.W", f"L{i:02d}.b"))
        else:
            named.append(None)
    return named


def _base_header(net: Network, kind: str) -> dict:
    return {
        "kind": kind,
        "input_shape": list(net.input_shape),
        "total_parameters": total_parameters(net),
        "layers": [_spec_to_dict(s) for s in net.layers],
    }


def save_model(net: Network, path) -> None:
    """Write a float32 weight container."""
    w = _Writer()
    for entry, p in zip(_param_names(net.layers), net.params):
        if entry is not None:
            _, wn, bn = entry
            w.add(wn, p[0])
            w.add(bn, p[1])
    _write_container(path, 0, net.width, _base_header(net, "model"), w)


def save_quantized(qm: QuantizedModel, path) -> None:
    """Write an int8-weight container (flags bit 0 set)."""
    net_shell = Network(qm.layers, [None if w is None else (w[0].q, w[1]) for w in qm.weights],
                        width=qm.width, input_shape=qm.input_shape)
    w = _Writer()
    for entry, qw in zip(_param_names(qm.layers), qm.weights):
        if entry is not None:
            _, wn, bn = entry
            w.add(wn, qw[0].q, scale=qw[0].scale)
            w.add(bn, qw[1])
    header = _base_header(net_shell, "quantized")
    _write_container(path, FLAG_QUANTIZED, qm.width, header, w)


def save_checkpoint(net: Network, state: AdamState, path, next_epoch: int = 0) -> None:
    """Write weights plus Adam moments so training can resume at an epoch boundary."""
    w = _Writer()
    flat_idx = 0
    for entry, p in zip(_param_names(net.layers), net.params):
        if entry is None:
            continue
        _, wn, bn = entry
        w.add(wn, p[0])
        w.add(bn, p[1])
        for arr, tag in ((p[0], "W"), (p[1], "b")):
            prefix = wn.rsplit(".", 1)[0]
            w.add(f"{prefix}.m{tag}", state.m[flat_idx])
            w.add(f"{prefix}.v{tag}", state.v[flat_idx])
            flat_idx += 1
    header = _base_header(net, "checkpoint")
    header["train"] = {"adam_t": state.t, "next_epoch": int(next_epoch)}
    _write_container(path, FLAG_CHECKPOINT, net.width, header, w)


def _expected_param_shapes(
    layers: list[LayerSpec], input_shape: tuple[int, ...]
) -> list[tuple[tuple[int, ...], tuple[int, ...]] | None]:
    from .network import _layer_out_shape  # shared shape walker

    out: list[tuple[tuple[int, ...], tuple[int, ...]] | None] = []
    shape = tuple(input_shape)
    for spec in layers:
        if spec.kind == "conv":
            k, c_in, c_out = spec.kernel, shape[2], spec.out_channels
            out.append(((k, k, c_in, c_out), (c_out,)))
        elif spec.kind == "dense":
            out.append(((shape[0], spec.units), (spec.units,)))
        else:
            out.append(None)
        shape = _layer_out_shape(spec, shape)
    return out


def _container_layers(c: Container, path) -> tuple[list[LayerSpec], tuple[int, int, int]]:
    raw_layers = c.header.get("layers")
    raw_input = c.header.get("input_shape")
    if not isinstance(raw_layers, list) or not isinstance(raw_input, list) or len(raw_input) != 3:
        raise ModelFormatError(f"{path}: header missing layer table or input shape")
    specs = [_spec_from_dict(d) for d in raw_layers]
    return specs, tuple(int(d) for d in raw_input)


def _gather(c: Container, layers: list[LayerSpec], input_shape, path, expect_dtype: str):
    """Pull (weights, bias) per layer out of the tensor table, shape-checked."""
    expected = _expected_param_shapes(layers, input_shape)
    pairs: list[tuple[np.ndarray, np.ndarray] | None] = []
    for entry, shapes in zip(_param_names(layers), expected):
        if entry is None:
            pairs.append(None)
            continue
        _, wn, bn = entry
        if wn not in c.tensors or bn not in c.tensors:
            raise ModelFormatError(f"{path}: missing tensors for {wn}")
        w_arr, b_arr = c.tensors[wn], c.tensors[bn]
        w_shape, b_shape = shapes
        if tuple(w_arr.shape) != w_shape or tuple(b_arr.shape) != b_shape:
            raise ModelFormatError(
                f"{path}: tensor {wn} shape {w_arr.shape} does not match layer table {w_shape}"
            )
        want = _DTYPES[expect_dtype]
        if w_arr.dtype.kind != want.kind or w_arr.dtype.itemsize != want.itemsize:
            raise ModelFormatError(f"{path}: tensor {wn} has dtype {w_arr.dtype}, want {expect_dtype}")
        if b_arr.dtype.kind != "f":
            raise ModelFormatError(f"{path}: tensor {bn} must be f32, got {b_arr.dtype}")
        pairs.append((w_arr, b_arr))
    return pairs


def load_model(path) -> Network:
    """Load a float32 container; quantized files need load_quantized."""
    c = read_container(path)
    if c.quantized:
        raise ModelFormatError(f"{path}: container is quantized; use load_quantized")
    specs, input_shape = _container_layers(c, path)
    pairs = _gather(c, specs, input_shape, path, "f32")
    return Network(specs, pairs, width=c.width, input_shape=input_shape)


def load_quantized(path) -> QuantizedModel:
    c = read_container(path)
    if not c.quantized:
        raise ModelFormatError(f"{path}: container is not quantized")
    specs, input_shape = _container_layers(c, path)
    pairs = _gather(c, specs, input_shape, path, "i8")
    weights = []
    for entry, pair in zip(_param_names(specs), pairs):
        if entry is None:
            weights.append(None)
            continue
        _, wn, _ = entry
        if wn not in c.scales:
            raise ModelFormatError(f"{path}: quantized tensor {wn} has no scale")
        weights.append((QuantizedTensor(pair[0], c.scales[wn]), pair[1].astype(np.float32)))
    return QuantizedModel(specs, weights, c.width, input_shape)


def load_any(path) -> Network | QuantizedModel:
    """Load either container kind, dispatching on the quantized flag bit."""
    c = read_container(path)
    return load_quantized(path) if c.quantized else load_model(path)


def load_checkpoint(path) -> tuple[Network, AdamState, int]:
    """Restore (net, adam state, next epoch) from a checkpoint container."""
    c = read_container(path)
    if not c.checkpoint:
        raise ModelFormatError(f"{path}: container is not a checkpoint")
    specs, input_shape = _container_layers(c, path)
    pairs = _gather(c, specs, input_shape, path, "f32")
    net = Network(specs, pairs, width=c.width, input_shape=input_shape)
    m: list[np.ndarray] = []
    v: list[np.ndarray] = []
    for entry, p in zip(_param_names(specs), pairs):
        if entry is None:
            continue
        _, wn, _ = entry
        prefix = wn.rsplit(".", 1)[0]
        for tag, ref in (("W", p[0]), ("b", p[1])):
            for store, key in ((m, f"{prefix}.m{tag}"), (v, f"{prefix}.v{tag}")):
                if key not in c.tensors:
                    raise ModelFormatError(f"{path}: checkpoint missing {key}")
                arr = c.tensors[key]
                if arr.shape != ref.shape:
                    raise ModelFormatError(f"{path}: {key} shape {arr.shape} != {ref.shape}")
                store.append(arr)
    train_meta = c.header.get("train", {})
    try:
        t = int(train_meta["adam_t"])
        next_epoch = int(train_meta["next_epoch"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: checkpoint missing train metadata: {exc}") from exc
    return net, AdamState(m, v, t), next_epoch
