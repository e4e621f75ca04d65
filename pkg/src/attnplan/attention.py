"""Full and banded multi-head attention over [heads, seq, head_dim] tensors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .numerics import DTYPE, matmul, row_softmax


def default_window(seq_len: int) -> int:
    """Default band width: an eighth of the sequence, at least one token."""
    return max(1, seq_len // 8)


@dataclass(frozen=True)
class AttentionConfig:
    num_heads: int
    head_dim: int
    seq_len: int
    window_width: int

    def __post_init__(self):
        for name in ("num_heads", "head_dim", "seq_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.window_width < 1:
            raise ConfigError("window_width must be >= 1")

    @property
    def half_width(self) -> int:
        # Width w allows |i - j| <= (w - 1) // 2; an even w rounds down.
        # At w >= seq_len the window degenerates to full coverage.
        if self.window_width >= self.seq_len:
            return self.seq_len - 1
        return (self.window_width - 1) // 2

    @property
    def scale(self) -> np.float32:
        return DTYPE(1.0 / math.sqrt(self.head_dim))


@dataclass(frozen=True)
class QKV:
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray

    def validate(self, cfg: AttentionConfig) -> "QKV":
        want = (cfg.num_heads, cfg.seq_len, cfg.head_dim)
        for name, tensor in (("q", self.q), ("k", self.k), ("v", self.v)):
            if tensor.shape != want:
                raise ShapeError(f"{name} has shape {tensor.shape}, expected {want}")
        return self


def band_bounds(i: int, seq_len: int, half_width: int) -> tuple[int, int]:
    """Inclusive key-index range that query ``i`` attends to."""
    return max(0, i - half_width), min(seq_len - 1, i + half_width)


def band_sizes(seq_len: int, window_width: int) -> list[int]:
    """Realized band size per query after clipping at the sequence edges.

    A width of seq_len or more covers every key for every query.
    """
    hw = seq_len - 1 if window_width >= seq_len else (window_width - 1) // 2
    return [min(seq_len - 1, i + hw) - max(0, i - hw) + 1 for i in range(seq_len)]


def full_attention(qkv: QKV, cfg: AttentionConfig) -> np.ndarray:
    """softmax(Q K^T / sqrt(head_dim)) V, independently per head."""
    qkv.validate(cfg)
    out = np.empty_like(qkv.v)
    for h in range(cfg.num_heads):
        scores = matmul(qkv.q[h], qkv.k[h].T) * cfg.scale
        out[h] = matmul(row_softmax(scores), qkv.v[h])
    return out


def window_attention(qkv: QKV, cfg: AttentionConfig) -> np.ndarray:
    """Band-restricted attention: query i sees keys within half_width of i.

    Scores are computed only inside the band, so the arithmetic performed
    is exactly what the cost model charges. With window_width >= seq_len
    the band covers every key and the result equals full_attention
    bitwise (same primitives, same accumulation order).
    """
    qkv.validate(cfg)
    hw = cfg.half_width
    out = np.empty_like(qkv.v)
    for h in range(cfg.num_heads):
        q, k, v = qkv.q[h], qkv.k[h], qkv.v[h]
        for i in range(cfg.seq_len):
            lo, hi = band_bounds(i, cfg.seq_len, hw)
            scores = matmul(q[i : i + 1], k[lo : hi + 1].T) * cfg.scale
            out[h, i] = matmul(row_softmax(scores), v[lo : hi + 1])[0]
    return out
