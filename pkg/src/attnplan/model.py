"""A small diffusion transformer and a deterministic two-branch guided sampler.

Every attention call goes through a per-(step, layer) strategy dispatcher,
so compression plans can swap full attention for cached or banded variants
without touching the block code.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .attention import AttentionConfig, QKV, default_window, full_attention
from .cost_model import CostEntry, CostReport, baseline_flops, full_attn_flops, window_attn_flops
from .errors import ConfigError, PlanError
from .numerics import DTYPE, Rng, gelu, layer_norm, matmul
from .sharing import (
    BRANCHES,
    COND,
    UNCOND,
    CacheState,
    Strategy,
    asc_reuse,
    asc_store,
    ast_reuse,
    ast_store,
    wars_refresh,
    wars_reuse,
)


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 8
    num_steps: int = 16
    seq_len: int = 256
    num_heads: int = 4
    head_dim: int = 16
    mlp_ratio: int = 4
    guidance_scale: float = 4.0
    seed: int = 0
    window_width: int | None = None  # None -> seq_len // 8, at least 1
    num_classes: int = 10

    def __post_init__(self):
        for name in ("num_layers", "num_steps", "seq_len", "num_heads",
                     "head_dim", "mlp_ratio", "num_classes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.guidance_scale < 0:
            raise ConfigError("guidance_scale must be >= 0")
        if self.window_width is None:
            object.__setattr__(self, "window_width", default_window(self.seq_len))
        elif self.window_width < 1:
            raise ConfigError("window_width must be >= 1")

    @property
    def model_dim(self) -> int:
        return self.num_heads * self.head_dim

    def attention_config(self) -> AttentionConfig:
        return AttentionConfig(self.num_heads, self.head_dim, self.seq_len, self.window_width)

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_json_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class StepTrace:
    """Attention outputs and per-branch noise predictions for one step."""

    step: int
    attention: dict = field(default_factory=dict)  # (layer, branch) -> [H, L, d]
    eps: dict = field(default_factory=dict)        # branch -> [L, model_dim]


class RunRecorder:
    """Collects cost entries and, optionally, per-step traces during a run."""

    def __init__(self, trace: bool = False):
        self.cost_entries: list[CostEntry] = []
        self._traces: dict[int, StepTrace] | None = {} if trace else None

    def _trace_for(self, step: int) -> StepTrace:
        assert self._traces is not None
        if step not in self._traces:
            self._traces[step] = StepTrace(step)
        return self._traces[step]

    def record_block(self, step, layer, branch, strategy, flops, attn_out) -> None:
        self.cost_entries.append(CostEntry(step, layer, branch, strategy.value, flops))
        if self._traces is not None:
            self._trace_for(step).attention[(layer, branch)] = attn_out

    def record_eps(self, step, eps_cond, eps_uncond) -> None:
        if self._traces is not None:
            self._trace_for(step).eps = {COND: eps_cond, UNCOND: eps_uncond}

    def traces(self) -> list[StepTrace] | None:
        if self._traces is None:
            return None
        return [self._traces[t] for t in sorted(self._traces)]


class ToyDiT:
    """Pre-norm attention+MLP blocks with additive timestep/class conditioning.

    Weights come from the "weights" stream of the seeded generator in a
    fixed order (per layer: Wq, Wk, Wv, Wo, W1, W2; then the timestep and
    class embedding tables), all N(0, 0.02^2) float32. The class table's
    last row is the null class used by the unconditional branch.
    """

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.attn_cfg = cfg.attention_config()
        gen = Rng(cfg.seed).stream("weights")
        d = cfg.model_dim
        hidden = cfg.mlp_ratio * d
        std = DTYPE(0.02)

        def draw(*shape):
            return gen.standard_normal(shape, dtype=DTYPE) * std

        self.layers = []
        for _ in range(cfg.num_layers):
            self.layers.append({
                "wq": draw(d, d), "wk": draw(d, d), "wv": draw(d, d), "wo": draw(d, d),
                "w1": draw(d, hidden), "w2": draw(hidden, d),
                "ln1_gain": np.ones(d, DTYPE), "ln1_bias": np.zeros(d, DTYPE),
                "ln2_gain": np.ones(d, DTYPE), "ln2_bias": np.zeros(d, DTYPE),
            })
        self.time_embed = draw(cfg.num_steps, d)
        self.class_embed = draw(cfg.num_classes + 1, d)

    @property
    def null_class(self) -> int:
        return self.cfg.num_classes

    def _split_heads(self, x: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        return x.reshape(cfg.seq_len, cfg.num_heads, cfg.head_dim).transpose(1, 0, 2)

    def _merge_heads(self, x: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        return x.transpose(1, 0, 2).reshape(cfg.seq_len, cfg.model_dim)

    def _attention(self, layer, step, branch, strategy, make_qkv, cache):
        """Dispatch one attention evaluation; returns (output, flops)."""
        acfg = self.attn_cfg
        if strategy is Strategy.FULL:
            # A full step starts a new residual-sharing set for this slot.
            cache.clear_wars(layer, branch)
            out = full_attention(make_qkv(), acfg)
            flops = full_attn_flops(acfg)
        elif strategy is Strategy.AST:
            out = ast_reuse(cache, layer, branch, step)
            flops = 0
        elif strategy is Strategy.ASC and branch == COND:
            out = full_attention(make_qkv(), acfg)
            flops = full_attn_flops(acfg)
        elif strategy is Strategy.WARS or (strategy is Strategy.WARS_ASC and branch == COND):
            if cache.has_wars(layer, branch):
                out = wars_reuse(make_qkv(), acfg, cache, layer, branch, step)
                flops = window_attn_flops(acfg)
            else:
                out = wars_refresh(make_qkv(), acfg, cache, layer, branch, step)
                flops = full_attn_flops(acfg) + window_attn_flops(acfg)
        elif strategy in (Strategy.ASC, Strategy.WARS_ASC):  # unconditional side
            out = asc_reuse(cache, layer, step)
            flops = 0
        else:
            raise PlanError(f"cannot dispatch strategy {strategy!r}")
        if branch == COND and strategy in (Strategy.ASC, Strategy.WARS_ASC):
            asc_store(cache, layer, step, out)
        if strategy is not Strategy.AST:
            # Whatever this evaluation produced (or copied) is the layer's
            # latest output and becomes its cross-step sharing source.
            ast_store(cache, layer, branch, step, out)
        return out, flops

    def block_forward(self, x, layer, step, branch, strategy, cache, recorder=None):
        p = self.layers[layer]

        def make_qkv() -> QKV:
            h = layer_norm(x, p["ln1_gain"], p["ln1_bias"])
            return QKV(
                self._split_heads(matmul(h, p["wq"])),
                self._split_heads(matmul(h, p["wk"])),
                self._split_heads(matmul(h, p["wv"])),
            )

        attn, flops = self._attention(layer, step, branch, strategy, make_qkv, cache)
        x = x + matmul(self._merge_heads(attn), p["wo"])
        h = layer_norm(x, p["ln2_gain"], p["ln2_bias"])
        x = x + matmul(gelu(matmul(h, p["w1"])), p["w2"])
        if recorder is not None:
            recorder.record_block(step, layer, branch, strategy, flops, attn)
        return x

    def step_outputs(self, x, step, class_id, strategies, cache, recorder=None):
        """Noise predictions for both branches; conditional runs first."""
        outputs = {}
        for branch, cls in ((COND, class_id), (UNCOND, self.null_class)):
            h = x + self.time_embed[step] + self.class_embed[cls]
            for layer, strategy in enumerate(strategies):
                h = self.block_forward(h, layer, step, branch, strategy, cache, recorder)
            outputs[branch] = h
        return outputs[COND], outputs[UNCOND]


def guided_eps(eps_cond, eps_uncond, guidance_scale) -> np.ndarray:
    s = DTYPE(guidance_scale)
    return eps_uncond + s * (eps_cond - eps_uncond)


def step_eps(model: ToyDiT, x, step, class_id, strategies, cache, recorder=None):
    """One two-branch evaluation combined with the guidance scale."""
    eps_c, eps_u = model.step_outputs(x, step, class_id, strategies, cache, recorder)
    if recorder is not None:
        recorder.record_eps(step, eps_c, eps_u)
    return guided_eps(eps_c, eps_u, model.cfg.guidance_scale)


def initial_latent(cfg: ModelConfig) -> np.ndarray:
    return Rng(cfg.seed).stream("latent").standard_normal(
        (cfg.seq_len, cfg.model_dim), dtype=DTYPE
    )


def sample(model: ToyDiT, plan=None, class_id: int = 0, trace: bool = False):
    """Run the deterministic sampling loop under a compression plan.

    Missing plan entries (or ``plan=None``) mean full attention. The plan
    is validated before any compute. Returns (final latent, traces or
    None, CostReport); each step applies ``x <- x - eps_guided / T``.
    """
    cfg = model.cfg
    if not 0 <= class_id < cfg.num_classes:
        raise ConfigError(f"class_id {class_id} out of range [0, {cfg.num_classes})")
    if plan is not None:
        violations = plan.validate(cfg)
        if violations:
            raise PlanError("infeasible plan: " + "; ".join(violations))
    recorder = RunRecorder(trace=trace)
    cache = CacheState()
    x = initial_latent(cfg)
    eta = DTYPE(1.0 / cfg.num_steps)
    for t in range(cfg.num_steps):
        strategies = [
            plan.strategy(t, i) if plan is not None else Strategy.FULL
            for i in range(cfg.num_layers)
        ]
        eps = step_eps(model, x, t, class_id, strategies, cache, recorder)
        x = x - eta * eps
        cache.end_step(t)
    report = CostReport(recorder.cost_entries, baseline_flops(cfg))
    return x, recorder.traces(), report
