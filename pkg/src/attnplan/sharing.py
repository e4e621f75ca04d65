"""Attention-output caching and reuse.

Three mechanisms share work across the sampling loop:

* banded attention plus a cached full-minus-window residual (``wars``),
* reuse of an earlier step's attention output (``ast``),
* reuse of the conditional branch's output by the unconditional branch
  within the same step (``asc``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .attention import AttentionConfig, QKV, full_attention, window_attention
from .errors import CacheMissError, OrderingError, PlanError

COND = "cond"
UNCOND = "uncond"
BRANCHES = (COND, UNCOND)


class Strategy(Enum):
    FULL = "full"
    AST = "ast"          # reuse a prior step's attention output
    WARS = "wars"        # window attention plus cached residual
    ASC = "asc"          # unconditional branch copies the conditional output
    WARS_ASC = "wars_asc"

    @classmethod
    def from_token(cls, token: str) -> "Strategy":
        try:
            return cls(token)
        except ValueError:
            raise PlanError(f"unknown strategy token {token!r}") from None


# Candidate order for the greedy search: ascending retained attention FLOPs.
SEARCH_ORDER = (Strategy.AST, Strategy.WARS_ASC, Strategy.WARS, Strategy.ASC)


@dataclass
class CacheState:
    """Single-writer cache; one slot per key, a new store overwrites the old.

    Stored tensors are treated as frozen: every producer allocates fresh
    arrays, so clones may share them safely.
    """

    wars_residual: dict = field(default_factory=dict)       # (layer, branch) -> tensor
    wars_residual_step: dict = field(default_factory=dict)  # (layer, branch) -> step
    ast_output: dict = field(default_factory=dict)          # (layer, branch) -> tensor
    ast_output_step: dict = field(default_factory=dict)     # (layer, branch) -> step
    cond_output: dict = field(default_factory=dict)         # (layer, step) -> tensor

    def clone(self) -> "CacheState":
        return CacheState(
            dict(self.wars_residual),
            dict(self.wars_residual_step),
            dict(self.ast_output),
            dict(self.ast_output_step),
            dict(self.cond_output),
        )

    def has_wars(self, layer: int, branch: str) -> bool:
        return (layer, branch) in self.wars_residual

    def has_ast(self, layer: int, branch: str) -> bool:
        return (layer, branch) in self.ast_output

    def clear_wars(self, layer: int, branch: str) -> None:
        self.wars_residual.pop((layer, branch), None)
        self.wars_residual_step.pop((layer, branch), None)

    def end_step(self, step: int) -> None:
        """Drop the within-step conditional outputs once a step completes."""
        for key in [k for k in self.cond_output if k[1] == step]:
            del self.cond_output[key]


def wars_refresh(qkv: QKV, cfg: AttentionConfig, cache: CacheState,
                 layer: int, branch: str, step: int) -> np.ndarray:
    """Compute full attention and cache (full - window) for later reuse."""
    full = full_attention(qkv, cfg)
    window = window_attention(qkv, cfg)
    cache.wars_residual[(layer, branch)] = full - window
    cache.wars_residual_step[(layer, branch)] = step
    return full


def wars_reuse(qkv: QKV, cfg: AttentionConfig, cache: CacheState,
               layer: int, branch: str, step: int) -> np.ndarray:
    """Window attention plus the residual cached at an earlier step."""
    key = (layer, branch)
    if key not in cache.wars_residual:
        raise CacheMissError(f"no cached residual for layer {layer} ({branch})")
    if cache.wars_residual_step[key] >= step:
        raise CacheMissError(
            f"residual for layer {layer} ({branch}) is not from an earlier step"
        )
    return window_attention(qkv, cfg) + cache.wars_residual[key]


def ast_store(cache: CacheState, layer: int, branch: str, step: int,
              output: np.ndarray) -> None:
    cache.ast_output[(layer, branch)] = output
    cache.ast_output_step[(layer, branch)] = step


def ast_reuse(cache: CacheState, layer: int, branch: str, step: int) -> np.ndarray:
    key = (layer, branch)
    if key not in cache.ast_output:
        raise CacheMissError(f"no cached attention output for layer {layer} ({branch})")
    return cache.ast_output[key]


def asc_store(cache: CacheState, layer: int, step: int, output: np.ndarray) -> None:
    cache.cond_output[(layer, step)] = output


def asc_reuse(cache: CacheState, layer: int, step: int) -> np.ndarray:
    key = (layer, step)
    if key not in cache.cond_output:
        raise OrderingError(
            f"conditional output for layer {layer} at step {step} not stored yet"
        )
    return cache.cond_output[key]
