"""Calibration loss and attention-output similarity analyses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, SimilarityError
from .sharing import COND, UNCOND

EPSILON = 1e-6
CLIP_MAX = 10.0

STEP_WISE = "step_wise"
CFG_WISE = "cfg_wise"


def mrae(o, o_prime) -> float:
    """Mean relative absolute error between two equal-shape tensors.

    Per element: |a - b| / (max(|a|, |b|) + 1e-6), clipped to [0, 10],
    then averaged. For finite inputs each ratio stays below 2 (since
    |a - b| <= 2 max(|a|, |b|)), so the clip never binds and results
    land in [0, 2].
    """
    a = np.asarray(o, dtype=np.float64)
    b = np.asarray(o_prime, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"mrae operands differ in shape: {a.shape} vs {b.shape}")
    ratio = np.abs(a - b) / (np.maximum(np.abs(a), np.abs(b)) + EPSILON)
    return float(np.clip(ratio, 0.0, CLIP_MAX).mean())


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two tensors, flattened."""
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ShapeError(f"cosine operands differ in shape: {np.shape(a)} vs {np.shape(b)}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise SimilarityError("cosine similarity undefined for zero-norm input")
    return float(np.dot(x, y) / (nx * ny))


@dataclass
class SimilarityMatrix:
    """Similarity values for one layer, labelled by step index."""

    mode: str
    steps: list
    values: np.ndarray  # [T, T] for step_wise, [T] for cfg_wise


def similarity_report(traces, mode: str) -> dict:
    """Per-layer similarity of attention outputs across steps or branches.

    ``step_wise`` compares the conditional branch's outputs between every
    pair of steps (symmetric, unit diagonal). ``cfg_wise`` compares the
    conditional and unconditional outputs at each step.
    """
    if not traces:
        raise ValueError("similarity_report needs at least one recorded step")
    if mode not in (STEP_WISE, CFG_WISE):
        raise ValueError(f"unknown mode {mode!r}")
    steps = [t.step for t in traces]
    layers = sorted({layer for (layer, _branch) in traces[0].attention})
    report = {}
    for layer in layers:
        if mode == STEP_WISE:
            values = np.ones((len(steps), len(steps)), dtype=np.float32)
            for i in range(len(steps)):
                for j in range(i + 1, len(steps)):
                    sim = np.float32(cosine_similarity(
                        traces[i].attention[(layer, COND)],
                        traces[j].attention[(layer, COND)],
                    ))
                    values[i, j] = sim
                    values[j, i] = sim
        else:
            values = np.array([
                cosine_similarity(t.attention[(layer, COND)], t.attention[(layer, UNCOND)])
                for t in traces
            ], dtype=np.float32)
        report[layer] = SimilarityMatrix(mode, steps, values)
    return report


def write_similarity_csv(matrix: SimilarityMatrix, path) -> None:
    """One CSV per layer; the header row carries the step indices."""
    header = ",".join(str(s) for s in matrix.steps)
    rows = matrix.values if matrix.values.ndim == 2 else matrix.values[None, :]
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
