"""Independent naive oracles used to cross-check the library paths."""

import numpy as np

from attnplan import QKV


def naive_matmul_f32(a, b):
    """Triple-loop float32 product; the accumulation-order reference."""
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    m, kk = a.shape
    _, n = b.shape
    out = np.zeros((m, n), dtype=np.float32)
    for i in range(m):
        for j in range(n):
            acc = np.float32(0.0)
            for k in range(kk):
                acc = np.float32(acc + np.float32(a[i, k] * b[k, j]))
            out[i, j] = acc
    return out


def softmax_rows_f64(x, mask=None):
    """Row softmax computed entirely in float64."""
    x = np.asarray(x, dtype=np.float64)
    if mask is None:
        mask = np.ones_like(x, dtype=bool)
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        idx = np.nonzero(mask[i])[0]
        e = np.exp(x[i, idx] - x[i, idx].max())
        out[i, idx] = e / e.sum()
    return out


def naive_attention_f64(qkv: QKV, scale, mask=None):
    """Per-element full attention in float64; optional boolean score mask."""
    q = np.asarray(qkv.q, dtype=np.float64)
    k = np.asarray(qkv.k, dtype=np.float64)
    v = np.asarray(qkv.v, dtype=np.float64)
    heads, seq, _ = q.shape
    out = np.zeros_like(v)
    for h in range(heads):
        scores = q[h] @ k[h].T * float(scale)
        probs = softmax_rows_f64(scores, mask)
        out[h] = probs @ v[h]
    return out


def band_mask(seq_len, window_width):
    """Boolean mask allowing |i - j| <= (window_width - 1) // 2.

    A width of seq_len or more allows every position.
    """
    hw = seq_len - 1 if window_width >= seq_len else (window_width - 1) // 2
    idx = np.arange(seq_len)
    return np.abs(idx[:, None] - idx[None, :]) <= hw


def random_qkv(rng, heads, seq, dim):
    shape = (heads, seq, dim)
    return QKV(
        rng.standard_normal(shape).astype(np.float32),
        rng.standard_normal(shape).astype(np.float32),
        rng.standard_normal(shape).astype(np.float32),
    )
