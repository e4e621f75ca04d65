"""Float32 tensor primitives with reproducible, fixed-order arithmetic.

Activations are float32 throughout. Reductions that feed exactness tests
use a fixed accumulation order, so repeated runs and naive-loop
reimplementations agree bitwise.
"""

from __future__ import annotations

import math
import zlib

import numpy as np

from .errors import MaskError, ShapeError

DTYPE = np.float32


def as_f32(values) -> np.ndarray:
    """Return ``values`` as a float32 ndarray (no copy when already one)."""
    return np.asarray(values, dtype=DTYPE)


def require_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"{name} produced non-finite values")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product accumulated in float32, k-major.

    The k-th rank-1 term is added before the (k+1)-th for every output
    element, so the result is bit-identical to a naive i,j,k triple loop
    in float32 (IEEE multiply and add are exactly rounded, leaving the
    accumulation order as the only source of variation).
    """
    a = as_f32(a)
    b = as_f32(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner extents differ: {a.shape} x {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=DTYPE)
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k : k + 1, :]
    return require_finite("matmul", out)


def row_softmax(x, mask=None) -> np.ndarray:
    """Row-wise softmax with max-subtraction and a float64 normalizer.

    With a boolean ``mask``, disallowed positions come out exactly zero
    and each row renormalizes over its allowed set. A row with nothing
    allowed raises MaskError.
    """
    x = as_f32(x)
    if x.ndim != 2:
        raise ShapeError(f"row_softmax expects a 2-D input, got {x.shape}")
    if mask is None:
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted.astype(np.float64))
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ShapeError(f"mask shape {mask.shape} != input shape {x.shape}")
        if not mask.any(axis=1).all():
            raise MaskError("softmax row with every position masked")
        rowmax = np.max(np.where(mask, x, -np.inf), axis=1, keepdims=True)
        shifted = np.where(mask, x, rowmax) - rowmax
        e = np.where(mask, np.exp(shifted.astype(np.float64)), 0.0)
    out = (e / e.sum(axis=1, keepdims=True)).astype(DTYPE)
    return require_finite("row_softmax", out)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> np.ndarray:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    x64 = as_f32(x).astype(np.float64)
    mu = x64.mean(axis=-1, keepdims=True)
    var = np.square(x64 - mu).mean(axis=-1, keepdims=True)
    normed = ((x64 - mu) / np.sqrt(var + eps)).astype(DTYPE)
    return require_finite("layer_norm", normed * as_f32(gain) + as_f32(bias))


_GELU_C = DTYPE(math.sqrt(2.0 / math.pi))


def gelu(x) -> np.ndarray:
    """Tanh-approximate GELU, evaluated in float32."""
    x = as_f32(x)
    inner = _GELU_C * (x + DTYPE(0.044715) * x * x * x)
    return require_finite("gelu", DTYPE(0.5) * x * (DTYPE(1.0) + np.tanh(inner)))


class Rng:
    """Seeded Philox generator with independent named substreams.

    The same (seed, stream name) pair yields the same value stream on
    every platform. Distinct names give independent streams, so e.g.
    weights and latents can be drawn reproducibly regardless of order.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = seed

    def stream(self, name: str) -> np.random.Generator:
        key = zlib.crc32(name.encode("utf-8"))
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(key,))
        return np.random.Generator(np.random.Philox(seq))
