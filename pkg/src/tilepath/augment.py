"""Center-anchored affine augmentation: rotation, shift, shear, zoom, flip.

Points are homogeneous column vectors ``(row, col, 1)`` with 1-based pixel
coordinates, so the image center is ``((h + 1) / 2, (w + 1) / 2)``. The row
axis is the height axis; ``tx`` shifts rows and ``ty`` shifts columns.

Images are warped by inverse mapping: output pixel ``p`` reads the source at
``inv(M) @ p``. Nearest-neighbour rounding is ``floor(x + 0.5)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DegenerateTransformError, IngestError
from .numerics import make_rng

INTERPOLATIONS = ("nearest", "bilinear")


def _anchored(linear: np.ndarray, h: int, w: int) -> np.ndarray:
    """T(c) @ L @ T(-c) for the image center c."""
    if h < 1 or w < 1:
        raise DegenerateTransformError(f"image extent must be positive, got {h}x{w}")
    c = np.array([(h + 1) / 2.0, (w + 1) / 2.0])
    m = np.eye(3)
    m[:2, :2] = linear
    m[:2, 2] = c - linear @ c
    return m


def rotation_matrix(theta: float, h: int, w: int) -> np.ndarray:
    """Rotation by ``theta`` degrees about the image center."""
    t = math.radians(theta)
    cos_t, sin_t = math.cos(t), math.sin(t)
    return _anchored(np.array([[cos_t, -sin_t], [sin_t, cos_t]]), h, w)


def shift_matrix(tx: float, ty: float) -> np.ndarray:
    m = np.eye(3)
    m[0, 2] = tx
    m[1, 2] = ty
    return m


def shear_matrix(shear: float, h: int, w: int) -> np.ndarray:
    """Shear of ``shear`` degrees about the image center; |shear| < 90."""
    if not abs(shear) < 90:
        raise DegenerateTransformError(f"shear must satisfy |shear| < 90 degrees, got {shear}")
    s = math.radians(shear)
    return _anchored(np.array([[1.0, -math.sin(s)], [0.0, math.cos(s)]]), h, w)


def zoom_matrix(zx: float, zy: float, h: int, w: int) -> np.ndarray:
    """Scale rows by ``zx`` and columns by ``zy`` about the image center."""
    if not (zx > 0 and zy > 0):
        raise DegenerateTransformError(f"zoom factors must be positive, got ({zx}, {zy})")
    return _anchored(np.array([[zx, 0.0], [0.0, zy]]), h, w)


def invert_affine(m: np.ndarray) -> np.ndarray:
    """Closed-form inverse of an affine 3x3 matrix (bottom row 0, 0, 1)."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise DegenerateTransformError(f"expected a 3x3 matrix, got {m.shape}")
    if not np.array_equal(m[2], [0.0, 0.0, 1.0]):
        raise DegenerateTransformError("matrix is not affine: bottom row must be (0, 0, 1)")
    a, b, d, e = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    det = a * e - b * d
    if not abs(det) > 1e-12:
        raise DegenerateTransformError(f"matrix is singular (det={det:g})")
    inv = np.eye(3)
    inv[0, 0], inv[0, 1] = e / det, -b / det
    inv[1, 0], inv[1, 1] = -d / det, a / det
    inv[:2, 2] = -inv[:2, :2] @ m[:2, 2]
    return inv


def map_point(m: np.ndarray, row: float, col: float) -> tuple[float, float]:
    p = np.asarray(m, float) @ np.array([row, col, 1.0])
    return float(p[0]), float(p[1])


def apply_affine(img: np.ndarray, m: np.ndarray, interpolation: str = "nearest",
                 fill: float = 0.0) -> np.ndarray:
    """Warp ``img`` (H, W) or (H, W, C) by ``m``; output has the input's shape."""
    if interpolation not in INTERPOLATIONS:
        raise ValueError(f"interpolation must be one of {INTERPOLATIONS}, got {interpolation!r}")
    src = np.asarray(img, dtype=float)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[:, :, None]
    h, w = src.shape[:2]
    inv = invert_affine(m)

    rows, cols = np.meshgrid(np.arange(1, h + 1, dtype=float),
                             np.arange(1, w + 1, dtype=float), indexing="ij")
    # same operation order as map_point's row-by-row expansion
    sr = inv[0, 0] * rows + inv[0, 1] * cols + inv[0, 2]
    sc = inv[1, 0] * rows + inv[1, 1] * cols + inv[1, 2]

    padded = np.full((h + 2, w + 2, src.shape[2]), float(fill))
    padded[1:-1, 1:-1] = src

    def gather(ri: np.ndarray, ci: np.ndarray) -> np.ndarray:
        inside = (ri >= 1) & (ri <= h) & (ci >= 1) & (ci <= w)
        ri = np.where(inside, ri, 0).astype(np.intp)
        ci = np.where(inside, ci, 0).astype(np.intp)
        return padded[ri, ci]

    if interpolation == "nearest":
        out = gather(np.floor(sr + 0.5), np.floor(sc + 0.5))
    else:
        r0, c0 = np.floor(sr), np.floor(sc)
        fr, fc = (sr - r0)[..., None], (sc - c0)[..., None]
        v00, v01 = gather(r0, c0), gather(r0, c0 + 1)
        v10, v11 = gather(r0 + 1, c0), gather(r0 + 1, c0 + 1)
        top = v00 + (v01 - v00) * fc
        bottom = v10 + (v11 - v10) * fc
        out = top + (bottom - top) * fr
    return out[:, :, 0] if squeeze else out


def horizontal_flip(img: np.ndarray) -> np.ndarray:
    """Mirror columns: column j goes to column w + 1 - j."""
    return np.asarray(img)[:, ::-1].copy()


def normalize(img: np.ndarray) -> np.ndarray:
    """Scale raw [0, 255] pixel values into [0, 1]."""
    raw = np.asarray(img, dtype=float)
    if raw.size and (not np.all(np.isfinite(raw)) or raw.min() < 0 or raw.max() > 255):
        raise IngestError("raw pixel values must lie in [0, 255]")
    return raw / 255.0


def _interval(value, name: str) -> tuple[float, float]:
    if np.isscalar(value):
        v = abs(float(value))
        return (-v, v)
    lo, hi = (float(x) for x in value)
    if lo > hi:
        raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
    return (lo, hi)


@dataclass
class AugmentConfig:
    """Sampling ranges for one random augmentation.

    Scalar ranges are symmetric (``10`` means ``[-10, 10]``); zoom is always
    a two-sided interval of positive factors.
    """

    theta_range: float | tuple[float, float] = 0.0
    tx_range: float | tuple[float, float] = 0.0
    ty_range: float | tuple[float, float] = 0.0
    shear_range: float | tuple[float, float] = 0.0
    zoom_range: tuple[float, float] = (1.0, 1.0)
    horizontal_flip: bool = False
    image_height: int = 50
    image_width: int = 50

    def __post_init__(self):
        self.theta_range = _interval(self.theta_range, "theta_range")
        self.tx_range = _interval(self.tx_range, "tx_range")
        self.ty_range = _interval(self.ty_range, "ty_range")
        self.shear_range = _interval(self.shear_range, "shear_range")
        if np.isscalar(self.zoom_range):
            z = float(self.zoom_range)
            self.zoom_range = (1.0 - z, 1.0 + z)
        self.zoom_range = _interval(self.zoom_range, "zoom_range")
        if self.zoom_range[0] <= 0:
            raise DegenerateTransformError("zoom_range bounds must be strictly positive")
        if max(abs(s) for s in self.shear_range) >= 90:
            raise DegenerateTransformError("shear_range must stay inside (-90, 90)")
        if self.image_height < 1 or self.image_width < 1:
            raise ValueError("image extent must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


class AugmentSample(NamedTuple):
    matrix: np.ndarray
    flip: bool
    params: dict


def sample_augmentation(cfg: AugmentConfig, rng: np.random.Generator) -> AugmentSample:
    """Draw one random transform.

    Each parameter is uniform on its range and every parameter is drawn on
    every call, so the stream position does not depend on which transforms
    are enabled. Rotation is applied first, then shear, zoom and shift:
    ``M = shift @ zoom @ shear @ rotation``. The flip, if drawn, follows the
    warp.
    """
    h, w = cfg.image_height, cfg.image_width
    params = {
        "theta": float(rng.uniform(*cfg.theta_range)),
        "shear": float(rng.uniform(*cfg.shear_range)),
        "zx": float(rng.uniform(*cfg.zoom_range)),
        "zy": float(rng.uniform(*cfg.zoom_range)),
        "tx": float(rng.uniform(*cfg.tx_range)),
        "ty": float(rng.uniform(*cfg.ty_range)),
    }
    flip = bool(rng.random() < 0.5) and cfg.horizontal_flip
    m = (shift_matrix(params["tx"], params["ty"])
         @ zoom_matrix(params["zx"], params["zy"], h, w)
         @ shear_matrix(params["shear"], h, w)
         @ rotation_matrix(params["theta"], h, w))
    return AugmentSample(m, flip, params)


def augment_image(img: np.ndarray, matrix: np.ndarray, flip: bool,
                  interpolation: str = "nearest", fill: float = 0.0) -> np.ndarray:
    out = apply_affine(img, matrix, interpolation, fill)
    return horizontal_flip(out) if flip else out


class RandomAffineAugmenter(TransformerMixin, BaseEstimator):
    """Expand a batch of images with ``n_copies`` random affine variants each.

    ``transform`` returns the originals followed by their copies, ordered
    copy-major. ``transform_xy`` does the same and repeats the labels.
    """

    def __init__(self, theta_range=0.0, tx_range=0.0, ty_range=0.0, shear_range=0.0,
                 zoom_range=(1.0, 1.0), horizontal_flip=False, n_copies=1,
                 interpolation="nearest", fill=0.0, seed=0):
        self.theta_range = theta_range
        self.tx_range = tx_range
        self.ty_range = ty_range
        self.shear_range = shear_range
        self.zoom_range = zoom_range
        self.horizontal_flip = horizontal_flip
        self.n_copies = n_copies
        self.interpolation = interpolation
        self.fill = fill
        self.seed = seed

    def fit(self, X, y=None):
        X = np.asarray(X)
        self.config_ = AugmentConfig(self.theta_range, self.tx_range, self.ty_range,
                                     self.shear_range, self.zoom_range, self.horizontal_flip,
                                     image_height=X.shape[1], image_width=X.shape[2])
        return self

    def transform(self, X):
        return self.transform_xy(X)[0]

    def transform_xy(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if not hasattr(self, "config_"):
            self.fit(X)
        rng = make_rng(self.seed)
        out = [X]
        log = []
        for _ in range(self.n_copies):
            batch = np.empty_like(X)
            for i, img in enumerate(X):
                s = sample_augmentation(self.config_, rng)
                batch[i] = augment_image(img, s.matrix, s.flip, self.interpolation, self.fill)
                log.append(s)
            out.append(batch)
        self.log_ = log
        Xa = np.concatenate(out)
        ya = None if y is None else np.tile(np.asarray(y), self.n_copies + 1)
        return Xa, ya
