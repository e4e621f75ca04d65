"""Analytic attention-FLOPs accounting per (step, layer, branch) and per plan.

Only the quadratic score/value arithmetic is counted (2 FLOPs per
multiply-add); QKV/output projections and softmax exponentials are the
same under every strategy and are excluded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .attention import AttentionConfig, band_sizes
from .errors import PlanError
from .sharing import BRANCHES, COND, Strategy


def full_attn_flops(cfg: AttentionConfig) -> int:
    """Score and value arithmetic for one full-attention evaluation."""
    return 4 * cfg.num_heads * cfg.seq_len * cfg.seq_len * cfg.head_dim


def window_attn_flops(cfg: AttentionConfig) -> int:
    """Same accounting restricted to the realized (edge-clipped) bands."""
    return 4 * cfg.num_heads * sum(band_sizes(cfg.seq_len, cfg.window_width)) * cfg.head_dim


def attn_flops(strategy: Strategy, cfg: AttentionConfig, refresh: bool = False) -> int:
    """FLOPs for a single attention evaluation under one strategy.

    ``strategy`` is evaluation-level: a plan-level ``wars_asc`` entry
    resolves to a ``wars`` evaluation on the conditional branch and an
    ``asc`` copy on the unconditional one before being costed.
    """
    if strategy is Strategy.FULL:
        return full_attn_flops(cfg)
    if strategy is Strategy.AST or strategy is Strategy.ASC:
        return 0
    if strategy is Strategy.WARS:
        cost = window_attn_flops(cfg)
        return cost + full_attn_flops(cfg) if refresh else cost
    raise ValueError(f"{strategy} is not an evaluation-level strategy")


@dataclass(frozen=True)
class CostEntry:
    step: int
    layer: int
    branch: str
    strategy: str
    flops: int


@dataclass
class CostReport:
    """Per-evaluation FLOPs tally plus aggregates against the uncompressed model."""

    entries: list = field(default_factory=list)
    baseline_flops: int = 0

    @property
    def total_flops(self) -> int:
        return sum(e.flops for e in self.entries)

    @property
    def fraction(self) -> float:
        return self.total_flops / self.baseline_flops if self.baseline_flops else 0.0

    def per_strategy(self) -> dict:
        totals: dict = {}
        for e in self.entries:
            totals[e.strategy] = totals.get(e.strategy, 0) + e.flops
        return totals

    def step_totals(self) -> dict:
        totals: dict = {}
        for e in self.entries:
            totals[e.step] = totals.get(e.step, 0) + e.flops
        return totals

    def to_json_dict(self) -> dict:
        return {
            "baseline_flops": self.baseline_flops,
            "total_flops": self.total_flops,
            "fraction": self.fraction,
            "per_strategy": dict(sorted(self.per_strategy().items())),
            "entries": [
                {"step": e.step, "layer": e.layer, "branch": e.branch,
                 "strategy": e.strategy, "flops": e.flops}
                for e in self.entries
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        per_eval = self.baseline_flops // len(self.entries) if self.entries else 0
        lines = [f"{'step':>5} {'layer':>5} {'branch':>7} {'strategy':>9} "
                 f"{'flops':>14} {'fraction':>9}"]
        for e in self.entries:
            frac = e.flops / per_eval if per_eval else 0.0
            lines.append(f"{e.step:>5} {e.layer:>5} {e.branch:>7} {e.strategy:>9} "
                         f"{e.flops:>14} {frac:>9.4f}")
        lines.append("")
        for name, flops in sorted(self.per_strategy().items()):
            lines.append(f"{name:>9}: {flops} flops")
        lines.append(f"baseline: {self.baseline_flops} flops")
        lines.append(f"fraction: {self.fraction:.4f}")
        return "\n".join(lines)


def baseline_flops(cfg) -> int:
    """Full attention at every (step, layer, branch) of a model config."""
    return 2 * cfg.num_steps * cfg.num_layers * full_attn_flops(cfg.attention_config())


def aggregate(plan, cfg) -> CostReport:
    """Cost a whole plan, including the refresh schedule it implies.

    A ``wars`` evaluation is charged the refresh price (full + window)
    whenever its branch holds no residual, which happens at the first
    occurrence and after any intervening full-attention step for that
    layer, mirroring the sampler's cache behaviour.
    """
    violations = plan.validate(cfg)
    if violations:
        raise PlanError("infeasible plan: " + "; ".join(violations))
    attn_cfg = cfg.attention_config()
    full = full_attn_flops(attn_cfg)
    band = window_attn_flops(attn_cfg)
    entries = []
    residual_cached = {(i, br): False for i in range(cfg.num_layers) for br in BRANCHES}
    for t in range(cfg.num_steps):
        for i in range(cfg.num_layers):
            strategy = plan.strategy(t, i)
            for br in BRANCHES:
                if strategy is Strategy.FULL:
                    flops = full
                    residual_cached[(i, br)] = False
                elif strategy is Strategy.AST:
                    flops = 0
                elif strategy is Strategy.ASC:
                    flops = full if br == COND else 0
                elif strategy is Strategy.WARS or (strategy is Strategy.WARS_ASC and br == COND):
                    flops = band if residual_cached[(i, br)] else band + full
                    residual_cached[(i, br)] = True
                else:  # wars_asc on the unconditional branch: copy
                    flops = 0
                entries.append(CostEntry(t, i, br, strategy.value, flops))
    return CostReport(entries, baseline_flops(cfg))
