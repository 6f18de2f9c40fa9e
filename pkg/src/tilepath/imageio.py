"""Binary PPM (P6) / PGM (P5) reading and writing, 8-bit only."""
from __future__ import annotations

import os

import numpy as np

from .errors import CorruptionError


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise CorruptionError("unexpected end of header")
    return buf[start:pos], pos


def read_pnm_raw(path: str | os.PathLike) -> np.ndarray:
    """Read a P5/P6 file as uint8 of shape (H, W, C) with C in {1, 3}."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _read_token(buf, 0)
    if magic not in (b"P5", b"P6"):
        raise CorruptionError(f"{path}: not a binary PGM/PPM (magic {magic!r})")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError as exc:
            raise CorruptionError(f"{path}: bad header field {tok!r}") from exc
    width, height, maxval = fields
    if maxval != 255:
        raise CorruptionError(f"{path}: only 8-bit images are supported (maxval {maxval})")
    channels = 3 if magic == b"P6" else 1
    pos += 1  # single whitespace byte ends the header
    need = width * height * channels
    data = buf[pos:pos + need]
    if len(data) != need:
        raise CorruptionError(f"{path}: expected {need} pixel bytes, found {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width, channels).copy()


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Read a PPM/PGM and scale it to float64 values in [0, 1]."""
    return read_pnm_raw(path).astype(np.float64) / 255.0


def to_uint8(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img
    return np.clip(np.floor(np.asarray(img, float) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_image(path: str | os.PathLike, img: np.ndarray) -> None:
    """Write an (H, W), (H, W, 1) or (H, W, 3) image; floats are taken in [0, 1]."""
    px = to_uint8(img)
    if px.ndim == 3 and px.shape[2] == 1:
        px = px[:, :, 0]
    if px.ndim == 2:
        magic = b"P5"
    elif px.ndim == 3 and px.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot write image of shape {px.shape}")
    height, width = px.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (width, height))
        fh.write(np.ascontiguousarray(px).tobytes())
