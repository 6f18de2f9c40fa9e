"""Two-stage tile diagnosis: skin gate first, then the seven-class head.

Models are accepted in three forms: a :class:`~tilepath.network.Model`, any
estimator with ``predict_proba`` (heads) or ``transform`` (extractors), or a
scikit-learn ``Pipeline`` built from those. ``extractor=None`` feeds raw
tiles straight to the heads, which is how end-to-end ``tiny_cnn`` models run.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .datagen import SEVEN_CLASS_NAMES
from .errors import ConfigurationError, GeometryError
from .network.model import Model, extract_features
from .validation import check_image

SKIN = 0  # skin is class 0 of the binary classifier


@dataclass
class TileGrid:
    height: int
    width: int
    window: int
    stride: int
    origins: list[tuple[int, int]]

    def __len__(self):
        return len(self.origins)

    @property
    def shape(self) -> tuple[int, int]:
        rows = len({r for r, _ in self.origins})
        return rows, len(self.origins) // max(rows, 1)


def tile(img, window: int = 50, stride: int | None = None) -> TileGrid:
    """Row-major tile origins ``0, stride, 2 * stride, ...`` with no partial tiles."""
    arr = np.asarray(img)
    h, w = arr.shape[:2]
    stride = window if stride is None else stride
    if window < 1 or stride < 1:
        raise GeometryError("window and stride must be positive")
    if window > min(h, w):
        raise GeometryError(f"window {window} does not fit a {h}x{w} image")
    origins = [(r, c) for r in range(0, h - window + 1, stride) for c in range(0, w - window + 1, stride)]
    return TileGrid(h, w, window, stride, origins)


def crop_tiles(img, grid: TileGrid) -> np.ndarray:
    arr = np.asarray(img)
    k = grid.window
    return np.stack([arr[r:r + k, c:c + k] for r, c in grid.origins])


def _features(extractor, tiles: np.ndarray) -> np.ndarray:
    if extractor is None:
        return tiles
    if isinstance(extractor, Model):
        return extract_features(extractor, tiles)
    return extractor.transform(tiles)


def _proba(head, X: np.ndarray) -> np.ndarray:
    if head is None:
        raise ConfigurationError("a classifier head is required")
    if isinstance(head, Model):
        return head.predict_proba(X)
    return np.asarray(head.predict_proba(X))


def _resolve_threshold(head2, threshold: float | None) -> float:
    if threshold is None:
        threshold = getattr(head2, "best_threshold_", None)
        if threshold is None:
            threshold = 0.5
    threshold = float(threshold)
    if not 0.0 < threshold <= 1.0:
        raise ConfigurationError(f"skin threshold must lie in (0, 1], got {threshold}")
    return threshold


@dataclass
class SkinMask:
    grid: TileGrid
    skin: np.ndarray      # bool per tile, row-major
    p_skin: np.ndarray    # probability of the skin class per tile
    threshold: float

    @property
    def skin_count(self) -> int:
        return int(self.skin.sum())

    def tile_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row_origin", "col_origin", "p_skin", "skin"])
        for (r, c), p, s in zip(self.grid.origins, self.p_skin, self.skin):
            w.writerow([r, c, repr(float(p)), int(s)])
        return buf.getvalue()

    def as_image(self) -> np.ndarray:
        """Tile-level gray mask: 1.0 on skin tiles, 0.0 elsewhere."""
        out = np.zeros((self.grid.height, self.grid.width))
        k = self.grid.window
        for (r, c), s in zip(self.grid.origins, self.skin):
            if s:
                out[r:r + k, c:c + k] = 1.0
        # with overlapping tiles a non-skin verdict wins
        for (r, c), s in zip(self.grid.origins, self.skin):
            if not s:
                out[r:r + k, c:c + k] = 0.0
        return out


def _skin_probs(tiles, extractor, head2, positive_class):
    feats = _features(extractor, tiles)
    return feats, _proba(head2, feats)[:, positive_class]


def detect_skin(img, extractor, head2, threshold: float | None = None, window: int = 50,
                stride: int | None = None, positive_class: int = SKIN) -> SkinMask:
    """Mark each tile as skin iff P(skin) >= threshold.

    Without an explicit ``threshold`` the head's ``best_threshold_`` (the
    Youden threshold recorded when it was fitted) is used, else 0.5.
    """
    img = check_image(img)
    thr = _resolve_threshold(head2, threshold)
    grid = tile(img, window, stride)
    _, p = _skin_probs(crop_tiles(img, grid), extractor, head2, positive_class)
    return SkinMask(grid, p >= thr, p, thr)


def render_mask(img, mask: SkinMask) -> np.ndarray:
    """Paint every non-skin tile black in all channels."""
    img = np.asarray(img, dtype=float)
    g = mask.grid
    if img.shape[:2] != (g.height, g.width) or len(mask.skin) != len(g.origins):
        raise GeometryError(f"mask grid for {g.height}x{g.width} does not match image {img.shape[:2]}")
    out = img.copy()
    k = g.window
    for (r, c), s in zip(g.origins, mask.skin):
        if not s:
            out[r:r + k, c:c + k] = 0.0
    return out


@dataclass
class DiagnosisReport:
    class_names: tuple[str, ...]
    tile_classes: np.ndarray          # class per tile, -1 for non-skin tiles
    proportions: np.ndarray
    skin_tile_count: int
    total_tile_count: int
    mask: SkinMask = field(repr=False)

    @property
    def empty(self) -> bool:
        return self.skin_tile_count == 0

    def rounded(self, digits: int = 2) -> list[float]:
        """Proportions in the ``[0, 0, 0.01, 0.97, 0, 0.02, 0]`` display form."""
        return [round(float(p), digits) if p else 0 for p in self.proportions]

    def to_dict(self) -> dict:
        per_tile = []
        for (r, c), skin, p, k in zip(self.mask.grid.origins, self.mask.skin, self.mask.p_skin,
                                      self.tile_classes):
            per_tile.append({"row": int(r), "col": int(c), "skin": bool(skin), "p_skin": float(p),
                             "class": int(k), "class_name": self.class_names[k] if k >= 0 else None})
        return {
            "class_names": list(self.class_names),
            "proportions": [float(p) for p in self.proportions],
            "skin_tile_count": self.skin_tile_count,
            "total_tile_count": self.total_tile_count,
            "empty": self.empty,
            "threshold": self.mask.threshold,
            "per_tile": per_tile,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "name", "proportion", "tiles"])
        counts = np.bincount(self.tile_classes[self.tile_classes >= 0], minlength=len(self.class_names))
        for i, (name, p) in enumerate(zip(self.class_names, self.proportions)):
            w.writerow([f"c{i}", name, repr(float(p)), int(counts[i])])
        return buf.getvalue()


def diagnose(img, extractor, head2, head7, threshold: float | None = None, window: int = 50,
             stride: int | None = None, class_names=SEVEN_CLASS_NAMES,
             positive_class: int = SKIN) -> DiagnosisReport:
    """Skin-gate every tile, then take the seven-class argmax on skin tiles.

    Proportions are class counts over skin tiles; with no skin tiles the
    report comes back ``empty`` with all-zero proportions.
    """
    if head7 is None:
        raise ConfigurationError("a seven-class head is required")
    img = check_image(img)
    thr = _resolve_threshold(head2, threshold)
    grid = tile(img, window, stride)
    feats, p = _skin_probs(crop_tiles(img, grid), extractor, head2, positive_class)
    skin = p >= thr
    mask = SkinMask(grid, skin, p, thr)
    classes = np.full(len(grid), -1, dtype=np.int64)
    k = len(class_names)
    if skin.any():
        probs = _proba(head7, feats[skin])
        classes[skin] = np.argmax(probs, axis=1)
        proportions = np.bincount(classes[skin], minlength=k) / skin.sum()
    else:
        proportions = np.zeros(k)
    return DiagnosisReport(tuple(class_names), classes, proportions, int(skin.sum()), len(grid), mask)


class TileDiagnoser(BaseEstimator):
    """Estimator facade over :func:`diagnose` for batches of whole images.

    The component models are trained elsewhere; ``fit`` only validates them.
    ``transform`` returns one proportion vector per image.
    """

    def __init__(self, extractor=None, skin_head=None, lesion_head=None, threshold=None,
                 window=50, stride=None):
        self.extractor = extractor
        self.skin_head = skin_head
        self.lesion_head = lesion_head
        self.threshold = threshold
        self.window = window
        self.stride = stride

    def fit(self, X=None, y=None):
        if self.skin_head is None or self.lesion_head is None:
            raise ConfigurationError("TileDiagnoser needs both a skin head and a lesion head")
        return self

    def predict(self, images) -> list[DiagnosisReport]:
        return [diagnose(img, self.extractor, self.skin_head, self.lesion_head, self.threshold,
                         self.window, self.stride) for img in images]

    def transform(self, images) -> np.ndarray:
        return np.stack([r.proportions for r in self.predict(images)])
