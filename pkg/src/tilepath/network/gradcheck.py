"""Finite-difference verification of every layer's backward pass."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import DEFAULT_SEED, child_seeds, grad_check, make_rng, relative_error, sample_indices
from .layers import Layer, ReLU
from .model import Model, backward, forward
from .training import batch_loss


@dataclass
class GradCheckRow:
    layer: str
    kind: str
    tensor: str
    max_rel_error: float
    passed: bool
    skipped: int = 0  # coordinates rejected for straddling a kink


def _away_from_kinks(x: np.ndarray, margin: float = 1e-2) -> np.ndarray:
    return np.where(np.abs(x) < margin, np.copysign(margin, x) + x, x)


def check_layer(layer: Layer, input_shape, seed: int, samples: int = 20, epsilon: float = 1e-5,
                batch: int = 2, corrupt: float = 1.0) -> list[tuple[str, float]]:
    """Check one layer in isolation with the scalar ``sum(forward(x) * R)``.

    Returns ``(tensor, max_rel_error)`` for the layer input and each parameter.
    ``corrupt`` scales the analytic gradients (a test hook for the checker).
    """
    rng = make_rng(seed)
    x = rng.uniform(-1.0, 1.0, (batch,) + tuple(input_shape))
    if isinstance(layer, ReLU):
        x = _away_from_kinks(x)
    mask_seed = int(rng.integers(2 ** 63))
    out, cache = layer.forward(x, train=True, rng=make_rng(mask_seed))
    weights = rng.normal(size=out.shape)
    dx, pgrads = layer.backward(weights, cache)

    def f(_):
        return float(np.sum(layer.forward(x, train=True, rng=make_rng(mask_seed))[0] * weights))

    rows = [("input", grad_check(f, x, dx * corrupt, epsilon, sample_indices(x.shape, samples, rng)))]
    for key, p in layer.params.items():
        idx = sample_indices(p.shape, samples, rng)
        rows.append((key, grad_check(f, p, pgrads[key] * corrupt, epsilon, idx)))
    return rows


def _pattern(model: Model, cache) -> bytes:
    """Fingerprint of every piecewise branch taken: ReLU masks and pool argmaxes."""
    parts = []
    for layer, entry in zip(model.layers, cache.entries):
        if layer.kind == "relu":
            parts.append(np.packbits(entry).tobytes())
        elif layer.kind == "maxpool2d":
            parts.append(entry[0].astype(np.uint8).tobytes())
    return b"".join(parts)


def check_model(model: Model, seed: int = DEFAULT_SEED, samples: int = 12, epsilon: float = 1e-5,
                corrupt_layer: str | None = None) -> list[GradCheckRow]:
    """Cross-entropy of the whole model on one seeded input, every parameter tensor checked.

    ``samples`` coordinates are checked per tensor. A coordinate whose +-epsilon
    probes change any ReLU mask or pooling argmax straddles a kink, where
    central differences are meaningless; it is skipped and another drawn.
    Dropout masks are held fixed across evaluations by reseeding.
    """
    data_seed, mask_seed, pick_seed = child_seeds(seed, 3)
    rng = make_rng(data_seed)
    x = rng.uniform(0.0, 1.0, (1,) + model.input_shape)
    y = np.array([int(rng.integers(model.n_outputs))])

    def probe():
        probs, cache = forward(model, x, train=True, rng=make_rng(mask_seed))
        return batch_loss(probs, y), _pattern(model, cache), probs, cache

    _, base, probs, cache = probe()
    dprobs = np.zeros_like(probs)
    dprobs[0, y[0]] = -1.0 / probs[0, y[0]]
    _, grads = backward(model, dprobs, cache)
    pick = make_rng(pick_seed)
    rows = []
    for layer in model.layers:
        for key, p in layer.params.items():
            g = grads[f"{layer.name}/{key}"] * (1.01 if layer.name == corrupt_layer else 1.0)
            errors, skipped = [], 0
            for flat in pick.permutation(p.size):
                idx = np.unravel_index(flat, p.shape)
                orig = p[idx]
                p[idx] = orig + epsilon
                fp, pat_p, _, _ = probe()
                p[idx] = orig - epsilon
                fm, pat_m, _, _ = probe()
                p[idx] = orig
                if pat_p != base or pat_m != base:
                    skipped += 1
                    continue
                errors.append(relative_error(g[idx], (fp - fm) / (2 * epsilon)))
                if len(errors) == samples:
                    break
            err = float(np.max(errors)) if errors else float("nan")
            rows.append(GradCheckRow(layer.name, layer.kind, key, err, bool(errors) and err < 1e-4, skipped))
    return rows


def check_all_layers(model: Model, seed: int = DEFAULT_SEED, samples: int = 12, epsilon: float = 1e-5,
                     tol: float = 1e-4, corrupt_layer: str | None = None) -> list[GradCheckRow]:
    """Layer-local checks for every layer plus the whole-model loss check."""
    rows = []
    seeds = child_seeds(seed, len(model.layers) + 1)
    for layer, shape, s in zip(model.layers, model.shapes, seeds):
        corrupt = 1.01 if layer.name == corrupt_layer else 1.0
        # big conv inputs are checked on a single sample to keep runtime down
        batch = 1 if np.prod(shape) > 20000 else 2
        for tensor, err in check_layer(layer, shape, s, samples, epsilon, batch, corrupt):
            rows.append(GradCheckRow(layer.name, layer.kind, tensor, err, err < tol))
    for row in check_model(model, seeds[-1], samples, epsilon, corrupt_layer):
        row.layer = f"model:{row.layer}"
        row.passed = row.max_rel_error < tol
        rows.append(row)
    return rows
