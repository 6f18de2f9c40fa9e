"""Tensor helpers, the seeded random source and the gradient checker.

Tensors are plain row-major ``numpy.ndarray`` objects. The helpers here add
the shape checks the rest of the package relies on; they never broadcast.

Random numbers come from numpy's PCG64 generator (permuted congruential
generator, 128-bit state, 64-bit output). Child seeds for independent
streams are derived with ``numpy.random.SeedSequence`` so a single integer
seed fans out deterministically.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, EvaluationError

DEFAULT_SEED = 20190917

Tensor = np.ndarray


def make_rng(seed: int | None = DEFAULT_SEED) -> np.random.Generator:
    """Return a PCG64-backed generator; ``None`` selects the package default seed."""
    if seed is None:
        seed = DEFAULT_SEED
    return np.random.Generator(np.random.PCG64(int(seed)))


def child_seeds(seed: int, n: int) -> list[int]:
    """Derive ``n`` independent 64-bit seeds from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape {a.shape} does not match {b.shape}")


def _checked(out: Tensor) -> Tensor:
    if not np.all(np.isfinite(out)):
        raise EvaluationError("operation produced a non-finite value")
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _same_shape(a, b, "add")
    with np.errstate(over="ignore", invalid="ignore"):
        return _checked(a + b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _same_shape(a, b, "sub")
    with np.errstate(over="ignore", invalid="ignore"):
        return _checked(a - b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _same_shape(a, b, "mul")
    with np.errstate(over="ignore", invalid="ignore"):
        return _checked(a * b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: shape {a.shape} does not conform with {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        return _checked(a @ b)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    a = np.asarray(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size:
        raise DimensionError(f"reshape: cannot view shape {a.shape} as {shape}")
    return a.reshape(shape).copy()


def slice_(a: Tensor, start: Sequence[int], stop: Sequence[int]) -> Tensor:
    """Copy the box ``start <= idx < stop`` out of ``a``."""
    a = np.asarray(a)
    if len(start) != a.ndim or len(stop) != a.ndim:
        raise DimensionError(f"slice: bounds of rank {len(start)} for shape {a.shape}")
    for lo, hi, n in zip(start, stop, a.shape):
        if not 0 <= lo <= hi <= n:
            raise DimensionError(f"slice: [{lo}, {hi}) outside extent {n} of shape {a.shape}")
    return a[tuple(slice(lo, hi) for lo, hi in zip(start, stop))].copy()


def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor | float:
    return np.sum(np.asarray(a, dtype=float), axis=axis)


def reduce_max(a: Tensor, axis: int | None = None) -> Tensor | float:
    return np.max(np.asarray(a, dtype=float), axis=axis)


def argmax(a: Tensor, axis: int | None = None) -> Tensor | int:
    return np.argmax(np.asarray(a), axis=axis)


def relative_error(analytic: Tensor, numeric: Tensor) -> Tensor:
    analytic, numeric = np.asarray(analytic, float), np.asarray(numeric, float)
    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return np.abs(analytic - numeric) / denom


def numeric_gradient(f: Callable[[Tensor], float], x: Tensor, epsilon: float = 1e-5,
                     indices: Sequence[tuple] | None = None) -> Tensor:
    """Central differences of ``f`` at ``x`` over ``indices`` (default: all).

    ``x`` is perturbed in place and restored; the result has one entry per
    index, in order.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if indices is None:
        indices = list(np.ndindex(x.shape))
    out = np.empty(len(indices))
    for k, idx in enumerate(indices):
        orig = x[idx]
        x[idx] = orig + epsilon
        fp = float(f(x))
        x[idx] = orig - epsilon
        fm = float(f(x))
        x[idx] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(f"f is not finite near coordinate {idx}")
        out[k] = (fp - fm) / (2 * epsilon)
    return out


def grad_check(f: Callable[[Tensor], float], x: Tensor, analytic: Tensor,
               epsilon: float = 1e-5, indices: Sequence[tuple] | None = None) -> float:
    """Max relative error between ``analytic`` and central differences of ``f``.

    Parameters
    ----------
    f : callable
        Scalar function of ``x``. It is called with ``x`` itself (perturbed in
        place), so closures over the same array see the perturbation.
    x : ndarray
        Point of evaluation, float64.
    analytic : ndarray
        Gradient claimed for ``f`` at ``x``; same shape as ``x``.
    epsilon : float
        Central-difference step.
    indices : sequence of index tuples, optional
        Coordinates to check. All coordinates when omitted.
    """
    analytic = np.asarray(analytic, dtype=float)
    if analytic.shape != x.shape:
        raise DimensionError(f"grad_check: gradient shape {analytic.shape} vs input {x.shape}")
    if indices is None:
        indices = list(np.ndindex(x.shape))
    if not indices:
        return 0.0
    numeric = numeric_gradient(f, x, epsilon, indices)
    claimed = np.array([analytic[idx] for idx in indices])
    return float(np.max(relative_error(claimed, numeric)))


def sample_indices(shape: Sequence[int], n: int, rng: np.random.Generator) -> list[tuple]:
    """Pick up to ``n`` distinct coordinates of a tensor of ``shape``."""
    size = int(np.prod(shape))
    flat = rng.choice(size, size=min(n, size), replace=False)
    return [tuple(int(i) for i in np.unravel_index(k, shape)) for k in np.sort(flat)]
