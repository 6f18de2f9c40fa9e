"""The TPWF weight container.

Little-endian layout::

    b"TPWF" | version u32 | arch id (u32 length + UTF-8) | tensor count u32
    then per tensor: name (u32 length + UTF-8) | rank u32 | extents u32 * rank
                     | float32 data, row-major

Parameters are stored as float32; models built by ``build_architecture``
start float32-exact, trained parameters are rounded on save.
"""
from __future__ import annotations

import os
import struct

import numpy as np

from ..errors import ConfigurationError, CorruptionError, FormatError
from .model import Model, build_architecture

MAGIC = b"TPWF"
VERSION = 1


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def dumps_weights(model: Model) -> bytes:
    params = list(model.named_params())
    parts = [MAGIC, struct.pack("<I", VERSION), _pack_str(model.name), struct.pack("<I", len(params))]
    for name, value in params:
        parts.append(_pack_str(name))
        parts.append(struct.pack("<I", value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return b"".join(parts)


def save_weights(model: Model, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_weights(model))


class _Reader:
    def __init__(self, buf: bytes, source: str):
        self.buf = buf
        self.pos = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptionError(f"{self.source}: truncated at byte {self.pos} (needed {n} more)")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        raw = self.take(self.u32())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptionError(f"{self.source}: invalid UTF-8 string") from exc


def read_container(buf: bytes, source: str = "<bytes>") -> tuple[str, list[tuple[str, np.ndarray]]]:
    """Decode a container into ``(arch_id, [(name, float64 array), ...])``."""
    r = _Reader(buf, source)
    if r.take(4) != MAGIC:
        raise CorruptionError(f"{source}: bad magic, not a TPWF weight file")
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"{source}: unsupported format version {version}")
    arch = r.string()
    tensors = []
    for _ in range(r.u32()):
        name = r.string()
        rank = r.u32()
        shape = struct.unpack(f"<{rank}I", r.take(4 * rank))
        count = int(np.prod(shape))
        data = np.frombuffer(r.take(4 * count), dtype="<f4").astype(np.float64).reshape(shape)
        tensors.append((name, data))
    if r.pos != len(buf):
        raise CorruptionError(f"{source}: {len(buf) - r.pos} trailing bytes after last tensor")
    return arch, tensors


def load_weights(path: str | os.PathLike, arch: str | None = None, dropout: float = 0.5) -> Model:
    """Load a weight file into a fresh model of its declared architecture.

    With ``arch`` the tensors are matched against that architecture instead,
    which lets a caller insist on a particular model kind.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    declared, tensors = read_container(buf, str(path))
    target = arch or declared
    try:
        model = build_architecture(target, dropout=dropout, init=False)
    except ConfigurationError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    expected = list(_expected_shapes(model).items())
    for (name, data), (exp_name, exp_shape) in zip(tensors, expected):
        if name != exp_name:
            raise FormatError(f"{path}: tensor {name!r} found where {exp_name!r} was expected")
        if data.shape != exp_shape:
            raise FormatError(f"{path}: tensor {name!r} has shape {data.shape}, "
                              f"{target} expects {exp_shape}")
    if len(tensors) != len(expected):
        raise FormatError(f"{path}: file holds {len(tensors)} tensors, {target} expects {len(expected)}")
    by_name = dict(tensors)
    for layer in model.layers:
        for key in _param_keys(layer):
            layer.params[key] = by_name[f"{layer.name}/{key}"].copy()
    model.version += 1
    return model


def _param_keys(layer) -> tuple[str, ...]:
    return ("kernel", "bias") if layer.kind in ("conv2d", "dense") else ()


def _expected_shapes(model: Model) -> dict[str, tuple[int, ...]]:
    shapes = {}
    for layer, in_shape in zip(model.layers, model.shapes):
        if layer.kind == "conv2d":
            shapes[f"{layer.name}/kernel"] = (3, 3, in_shape[2], layer.filters)
            shapes[f"{layer.name}/bias"] = (layer.filters,)
        elif layer.kind == "dense":
            shapes[f"{layer.name}/kernel"] = (in_shape[0], layer.units)
            shapes[f"{layer.name}/bias"] = (layer.units,)
    return shapes
