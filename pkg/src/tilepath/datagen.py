"""Class-per-directory corpus ingestion and the synthetic texture generator.

The synthetic corpus stands in for clinical photographs. Every class is a
small set of procedural texture variants (base tone, pixel noise, soft
blobs, stripes); patches are quantised to 8-bit levels so a written corpus
reads back bit-identically.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, CorruptionError, DataError, GeometryError
from .imageio import read_image, write_image
from .numerics import DEFAULT_SEED, child_seeds, make_rng

log = logging.getLogger(__name__)

SEVEN_CLASS_NAMES = ("papule", "cyst", "blackhead", "normal skin", "pustule", "whitehead", "nodule")
BINARY_CLASS_NAMES = ("skin", "non-skin")
NON_SKIN = -1
PATCH = 50


def class_dirname(index: int, name: str) -> str:
    """Directory name that sorts in class-index order, e.g. ``c3_normal_skin``."""
    return f"c{index}_{name.replace(' ', '_').replace('-', '_')}"


def stratified_split(y, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class random split; each class keeps ``round(fraction * n)`` training members."""
    y = np.asarray(y)
    rng = make_rng(seed)
    train, val = [], []
    for c in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == c))
        n_train = int(np.floor(fraction * len(members) + 0.5))
        train.append(members[:n_train])
        val.append(members[n_train:])
    cat = lambda parts: np.sort(np.concatenate(parts)).astype(np.int64) if parts else np.zeros(0, np.int64)  # noqa: E731
    return cat(train), cat(val)


@dataclass(frozen=True)
class TextureParams:
    base_color: tuple[float, float, float]
    noise: float = 0.02
    tone_jitter: float = 0.03
    blob_count: tuple[int, int] = (0, 0)
    blob_radius: tuple[float, float] = (2.0, 2.0)
    blob_color: tuple[float, float, float] = (0.0, 0.0, 0.0)
    blob_contrast: float = 0.0
    stripe_amplitude: float = 0.0
    stripe_period: float = 6.0


def render_texture(p: TextureParams, rng: np.random.Generator, size: int = PATCH) -> np.ndarray:
    base = np.clip(np.asarray(p.base_color) + rng.normal(0.0, p.tone_jitter, 3), 0, 1)
    rows, cols = np.mgrid[0:size, 0:size].astype(float)
    # gentle illumination gradient
    g = rng.normal(0.0, 0.02, 2)
    shade = 1.0 + g[0] * (rows / size - 0.5) + g[1] * (cols / size - 0.5)
    img = base[None, None, :] * shade[..., None]
    if p.stripe_amplitude:
        angle = rng.uniform(0, np.pi)
        phase = rng.uniform(0, 2 * np.pi)
        wave = np.sin(2 * np.pi * (rows * np.cos(angle) + cols * np.sin(angle)) / p.stripe_period + phase)
        img = img + p.stripe_amplitude * wave[..., None]
    lo, hi = p.blob_count
    for _ in range(int(rng.integers(lo, hi + 1))):
        cr, cc = rng.uniform(4, size - 4, 2)
        radius = rng.uniform(*p.blob_radius)
        weight = p.blob_contrast * np.exp(-((rows - cr) ** 2 + (cols - cc) ** 2) / (2 * radius ** 2))
        img = img * (1 - weight[..., None]) + np.asarray(p.blob_color) * weight[..., None]
    img = img + rng.normal(0.0, p.noise, img.shape)
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5) / 255.0


SKIN_TONE = (0.86, 0.66, 0.56)

SKIN_TEXTURES = {
    "papule": TextureParams(SKIN_TONE, blob_count=(3, 5), blob_radius=(3.0, 4.5),
                            blob_color=(0.78, 0.22, 0.22), blob_contrast=0.9),
    "cyst": TextureParams(SKIN_TONE, blob_count=(1, 1), blob_radius=(10.0, 13.0),
                          blob_color=(0.55, 0.25, 0.45), blob_contrast=0.9),
    "blackhead": TextureParams(SKIN_TONE, blob_count=(7, 11), blob_radius=(1.2, 1.8),
                               blob_color=(0.12, 0.08, 0.05), blob_contrast=1.0),
    "normal skin": TextureParams(SKIN_TONE),
    "pustule": TextureParams(SKIN_TONE, blob_count=(3, 5), blob_radius=(3.0, 4.5),
                             blob_color=(0.95, 0.90, 0.45), blob_contrast=0.9),
    "whitehead": TextureParams(SKIN_TONE, blob_count=(7, 11), blob_radius=(1.2, 1.8),
                               blob_color=(1.0, 1.0, 1.0), blob_contrast=1.0),
    "nodule": TextureParams(SKIN_TONE, blob_count=(1, 1), blob_radius=(8.0, 11.0),
                            blob_color=(0.85, 0.35, 0.15), blob_contrast=0.9),
}

BACKGROUND_TEXTURES = (
    TextureParams((0.12, 0.09, 0.07), noise=0.03, stripe_amplitude=0.06, stripe_period=4.0),  # hair
    TextureParams((0.30, 0.40, 0.62), noise=0.02, tone_jitter=0.05),  # backdrop
    TextureParams((0.22, 0.20, 0.20), noise=0.03, blob_count=(1, 1), blob_radius=(6.0, 8.0),
                  blob_color=(0.92, 0.92, 0.92), blob_contrast=0.8),  # eye
)


@dataclass
class SynthSpec:
    """Procedural corpus description: per-class texture variants plus counts."""

    class_names: tuple[str, ...]
    textures: tuple[tuple[TextureParams, ...], ...]
    per_class: int = 200
    seed: int = DEFAULT_SEED
    skin_classes: tuple[int, ...] = ()
    background: tuple[TextureParams, ...] = BACKGROUND_TEXTURES
    size: int = PATCH

    def __post_init__(self):
        if len(self.class_names) != len(self.textures):
            raise ConfigurationError("one texture-variant list is needed per class")
        if any(len(v) == 0 for v in self.textures):
            raise ConfigurationError("every class needs at least one texture variant")
        for i in range(len(self.textures)):
            for j in range(i + 1, len(self.textures)):
                if set(self.textures[i]) == set(self.textures[j]):
                    raise ConfigurationError(
                        f"classes {self.class_names[i]!r} and {self.class_names[j]!r} share identical texture parameters")
        if self.per_class < 0:
            raise ConfigurationError("per_class must be non-negative")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def to_dict(self) -> dict:
        return asdict(self)


def default_spec(n_classes: int = 2, per_class: int = 200, seed: int = DEFAULT_SEED) -> SynthSpec:
    """Two-class skin/non-skin or seven-class lesion spec.

    Skin (class 0 of the binary spec) mixes all seven lesion textures, so a
    detector trained on it accepts any lesion tile in a composed scene.
    """
    if n_classes == 2:
        return SynthSpec(BINARY_CLASS_NAMES, (tuple(SKIN_TEXTURES.values()), BACKGROUND_TEXTURES),
                         per_class, seed, skin_classes=(0,))
    if n_classes == 7:
        return SynthSpec(SEVEN_CLASS_NAMES, tuple((SKIN_TEXTURES[n],) for n in SEVEN_CLASS_NAMES),
                         per_class, seed, skin_classes=tuple(range(7)))
    raise ConfigurationError(f"default specs exist for 2 or 7 classes, not {n_classes}")


class PatchSet(NamedTuple):
    X: np.ndarray            # (N, size, size, 3), values k / 255
    y: np.ndarray            # (N,) class indices
    class_names: tuple[str, ...]
    source_ids: list[str]


def _draw(variants: Sequence[TextureParams], rng, size) -> np.ndarray:
    k = int(rng.integers(len(variants))) if len(variants) > 1 else 0
    return render_texture(variants[k], rng, size)


def synthesize(spec: SynthSpec) -> PatchSet:
    """Generate ``spec.per_class`` patches per class, class-major, fully seeded."""
    seeds = child_seeds(spec.seed, spec.n_classes)
    X = np.empty((spec.n_classes * spec.per_class, spec.size, spec.size, 3))
    y = np.repeat(np.arange(spec.n_classes), spec.per_class)
    ids = []
    for c, (variants, s) in enumerate(zip(spec.textures, seeds)):
        rng = make_rng(s)
        for i in range(spec.per_class):
            X[c * spec.per_class + i] = _draw(variants, rng, spec.size)
            ids.append(f"synth:{c}:{i}")
    return PatchSet(X, y, tuple(spec.class_names), ids)


class Scene(NamedTuple):
    image: np.ndarray        # (rows * size, cols * size, 3)
    layout: np.ndarray       # per-tile class index, NON_SKIN for background
    skin: np.ndarray         # per-tile ground-truth skin flag


def compose_scene(spec: SynthSpec, layout, seed: int | None = None,
                  grid: tuple[int, int] = (10, 10)) -> Scene:
    """Tile a ``grid`` of fresh patches; ``layout`` gives each tile's class.

    ``NON_SKIN`` (-1) entries draw from ``spec.background``. A tile is skin in
    the ground truth when its class is in ``spec.skin_classes``.
    """
    layout = np.asarray(layout, dtype=np.int64)
    if layout.shape != tuple(grid):
        raise GeometryError(f"layout shape {layout.shape} does not match tile grid {tuple(grid)}")
    if np.any((layout < NON_SKIN) | (layout >= spec.n_classes)):
        raise DataError(f"layout entries must lie in [-1, {spec.n_classes - 1}]")
    rng = make_rng(spec.seed if seed is None else seed)
    s = spec.size
    img = np.empty((grid[0] * s, grid[1] * s, 3))
    for r in range(grid[0]):
        for c in range(grid[1]):
            k = layout[r, c]
            variants = spec.background if k == NON_SKIN else spec.textures[k]
            img[r * s:(r + 1) * s, c * s:(c + 1) * s] = _draw(variants, rng, s)
    skin = np.isin(layout, spec.skin_classes)
    return Scene(img, layout, skin)


def layout_proportions(layout, n_classes: int = 7) -> np.ndarray:
    """Class shares among skin tiles (entries >= 0) of a layout."""
    flat = np.asarray(layout).ravel()
    flat = flat[flat >= 0]
    if flat.size == 0:
        return np.zeros(n_classes)
    return np.bincount(flat, minlength=n_classes) / flat.size


def write_corpus(root: str | os.PathLike, patches: PatchSet) -> list[Path]:
    root = Path(root)
    paths = []
    counters: dict[int, int] = {}
    for img, label in zip(patches.X, patches.y):
        d = root / class_dirname(int(label), patches.class_names[label])
        d.mkdir(parents=True, exist_ok=True)
        k = counters.get(int(label), 0)
        counters[int(label)] = k + 1
        path = d / f"{k:05d}.ppm"
        write_image(path, img)
        paths.append(path)
    return paths


@dataclass
class CorpusManifest:
    classes: list[str]
    counts: list[int]
    seed: int
    train: list[str] = field(default_factory=list)
    val: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        body = {"classes": self.classes, "counts": self.counts, "seed": self.seed,
                "train": self.train, "val": self.val}
        return json.dumps(body, indent=2) + "\n"


class Corpus(NamedTuple):
    manifest: CorpusManifest
    X: np.ndarray
    y: np.ndarray
    paths: list[str]
    train_index: np.ndarray
    val_index: np.ndarray


def ingest(root: str | os.PathLike, train_fraction: float = 0.7, seed: int = DEFAULT_SEED,
           class_dirs: Sequence[str] | None = None, size: int = PATCH) -> Corpus:
    """Load a class-per-directory PPM corpus and split it per class.

    Class indices follow lexicographic directory order unless ``class_dirs``
    (or a ``classes.json`` list in ``root``) fixes the order. Files that fail
    to decode or are not ``size`` x ``size`` RGB are skipped with a warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root} is not a directory")
    if class_dirs is None and (root / "classes.json").is_file():
        class_dirs = json.loads((root / "classes.json").read_text())
    if class_dirs is None:
        class_dirs = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise DataError(f"{root} has no class directories")

    images, labels, paths, warnings = [], [], [], []
    for idx, name in enumerate(class_dirs):
        files = sorted(p for p in (root / name).iterdir() if p.suffix.lower() in (".ppm", ".pnm"))
        kept = 0
        for f in files:
            rel = f.relative_to(root).as_posix()
            try:
                img = read_image(f)
            except (OSError, CorruptionError) as exc:
                warnings.append(f"{rel}: unreadable ({exc})")
                continue
            if img.shape != (size, size, 3):
                warnings.append(f"{rel}: expected {size}x{size}x3, got {'x'.join(map(str, img.shape))}")
                continue
            images.append(img)
            labels.append(idx)
            paths.append(rel)
            kept += 1
        if kept == 0:
            raise DataError(f"class directory {name!r} holds no usable images")
    for w in warnings:
        log.warning(w)

    X = np.stack(images)
    y = np.asarray(labels, dtype=np.int64)
    train_idx, val_idx = stratified_split(y, train_fraction, seed)
    manifest = CorpusManifest(list(class_dirs), np.bincount(y, minlength=len(class_dirs)).tolist(), int(seed),
                              [paths[i] for i in train_idx], [paths[i] for i in val_idx], warnings)
    return Corpus(manifest, X, y, paths, train_idx, val_idx)
