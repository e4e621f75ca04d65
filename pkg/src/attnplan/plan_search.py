"""Greedy per-(step, layer) strategy selection and plan (de)serialization."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

from .errors import ConfigError, PlanError
from .metrics import mrae
from .model import ModelConfig, ToyDiT, initial_latent, step_eps
from .numerics import DTYPE
from .sharing import BRANCHES, SEARCH_ORDER, CacheState, Strategy


@dataclass
class CompressionPlan:
    """Map of (step, layer) to strategy; missing entries mean full attention."""

    entries: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def strategy(self, step: int, layer: int) -> Strategy:
        return self.entries.get((step, layer), Strategy.FULL)

    def validate(self, cfg: ModelConfig):
        return validate_plan(self, cfg)

    def to_json_dict(self) -> dict:
        meta = {
            "delta": float(self.meta.get("delta", 0.0)),
            "seed": int(self.meta.get("seed", 0)),
            "steps": int(self.meta.get("steps", 0)),
            "layers": int(self.meta.get("layers", 0)),
        }
        entries = [
            {"step": t, "layer": i, "strategy": s.value}
            for (t, i), s in sorted(self.entries.items())
        ]
        return {"meta": meta, "entries": entries}

    @classmethod
    def from_json_dict(cls, data: dict) -> "CompressionPlan":
        if not isinstance(data, dict) or "entries" not in data:
            raise PlanError("plan JSON must be an object with an 'entries' list")
        entries = {}
        for item in data["entries"]:
            try:
                key = (int(item["step"]), int(item["layer"]))
                strategy = Strategy.from_token(item["strategy"])
            except (KeyError, TypeError) as exc:
                raise PlanError(f"malformed plan entry {item!r}") from exc
            entries[key] = strategy
        return cls(entries, dict(data.get("meta", {})))

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "CompressionPlan":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))

    def sha256(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    def heatmap_rows(self, cfg: ModelConfig):
        """Strategy tokens as rows = layers, columns = steps."""
        return [
            [self.strategy(t, i).value for t in range(cfg.num_steps)]
            for i in range(cfg.num_layers)
        ]


def save_heatmap_csv(plan: CompressionPlan, cfg: ModelConfig, path) -> None:
    lines = ["layer," + ",".join(str(t) for t in range(cfg.num_steps))]
    for i, row in enumerate(plan.heatmap_rows(cfg)):
        lines.append(f"{i}," + ",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def validate_plan(plan: CompressionPlan, cfg: ModelConfig):
    """Every infeasible entry with its reason; an empty list means ok."""
    violations = []
    for (t, i), strategy in sorted(plan.entries.items()):
        if not 0 <= t < cfg.num_steps:
            violations.append(f"({t},{i}): step out of range [0, {cfg.num_steps})")
            continue
        if not 0 <= i < cfg.num_layers:
            violations.append(f"({t},{i}): layer out of range [0, {cfg.num_layers})")
            continue
        if strategy is Strategy.AST:
            # Reuse needs a stored output, i.e. some earlier step at this
            # layer ran anything other than a reuse itself.
            if all(plan.strategy(r, i) is Strategy.AST for r in range(t)):
                violations.append(f"({t},{i}): ast has no cached output to reuse")
    return violations


@dataclass(frozen=True)
class SearchConfig:
    delta: float = 0.05
    strategies: tuple = SEARCH_ORDER  # ascending retained-FLOPs order

    def __post_init__(self):
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")


def _feasible(strategy: Strategy, cache: CacheState, layer: int) -> bool:
    if strategy is Strategy.AST:
        return all(cache.has_ast(layer, br) for br in BRANCHES)
    return True


def search(model: ToyDiT, scfg: SearchConfig, class_id: int = 0) -> CompressionPlan:
    """Greedy plan selection against the running compressed trajectory.

    Per step: take the uncompressed model's output at the current latent
    as the reference, then for each layer in order try the candidate
    strategies and keep the first one whose output error stays strictly
    under the layer-scaled threshold (layer i of M admits (i+1)/M * delta,
    1-based). Candidate evaluations run on cache clones; only the
    committed step mutates real cache state and advances the latent.
    """
    cfg = model.cfg
    started = time.perf_counter()
    cache = CacheState()
    x = initial_latent(cfg)
    eta = DTYPE(1.0 / cfg.num_steps)
    all_full = [Strategy.FULL] * cfg.num_layers
    entries = {}
    for t in range(cfg.num_steps):
        reference = step_eps(model, x, t, class_id, all_full, cache.clone())
        chosen = list(all_full)
        for i in range(cfg.num_layers):
            threshold = (i + 1) / cfg.num_layers * scfg.delta
            for strategy in scfg.strategies:
                if not _feasible(strategy, cache, i):
                    continue
                chosen[i] = strategy
                candidate = step_eps(model, x, t, class_id, chosen, cache.clone())
                if mrae(reference, candidate) < threshold:
                    break
                chosen[i] = Strategy.FULL
        eps = step_eps(model, x, t, class_id, chosen, cache)
        x = x - eta * eps
        cache.end_step(t)
        for i, strategy in enumerate(chosen):
            if strategy is not Strategy.FULL:
                entries[(t, i)] = strategy
    meta = {
        "delta": scfg.delta,
        "seed": cfg.seed,
        "steps": cfg.num_steps,
        "layers": cfg.num_layers,
        "config_digest": cfg.digest(),
        "wall_time_s": time.perf_counter() - started,
    }
    return CompressionPlan(entries, meta)
