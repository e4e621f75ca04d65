"""Command line: plan search, compressed generation, cost and similarity reports.

Subcommands write their artifacts into ``--out``: ``search`` produces
plan.json, cost.json, heatmap.csv/png and manifest.json; ``generate``
produces latent.bin, cost.json and manifest.json; ``analyze`` produces
per-layer similarity CSVs with figures; ``cost`` prints a table and
optionally writes cost.json. Exit codes: 0 ok, 1 runtime/validation
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .cost_model import aggregate
from .errors import PlanError
from .metrics import CFG_WISE, STEP_WISE, similarity_report, write_similarity_csv
from .model import ModelConfig, ToyDiT, sample
from .plan_search import CompressionPlan, SearchConfig, save_heatmap_csv, search


def _atomic_write(path: Path, data) -> None:
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--layers", type=int, default=8)
    parser.add_argument("--steps", type=int, default=16)
    parser.add_argument("--seqlen", type=int, default=256)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--head-dim", type=int, default=16)
    parser.add_argument("--window-frac", type=float, default=0.125,
                        help="band width as a fraction of seqlen")
    parser.add_argument("--guidance", type=float, default=4.0)
    parser.add_argument("--mlp-ratio", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--class-id", type=int, default=0)


def _model_config(args) -> ModelConfig:
    window = max(1, int(args.seqlen * args.window_frac))
    return ModelConfig(
        num_layers=args.layers,
        num_steps=args.steps,
        seq_len=args.seqlen,
        num_heads=args.heads,
        head_dim=args.head_dim,
        mlp_ratio=args.mlp_ratio,
        guidance_scale=args.guidance,
        seed=args.seed,
        window_width=window,
    )


def _write_manifest(out: Path, command: str, cfg: ModelConfig, artifacts: dict,
                    wall_times: dict, extra: dict) -> None:
    manifest = {
        "tool_version": __version__,
        "command": command,
        "config": cfg.to_json_dict(),
        "config_digest": cfg.digest(),
        "artifacts": {name: str(path) for name, path in artifacts.items()},
        "wall_times_s": wall_times,
    }
    manifest.update(extra)
    _atomic_write(out / "manifest.json",
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_plan(path: str) -> CompressionPlan:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PlanError(
                f"malformed plan JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from exc
    return CompressionPlan.from_json_dict(data)


def _write_latent(path: Path, latent, seed: int, plan_hash: str) -> None:
    header = json.dumps(
        {
            "shape": list(latent.shape),
            "dtype": "float32",
            "byte_order": "little",
            "seed": seed,
            "plan_sha256": plan_hash,
        },
        sort_keys=True,
    )
    _atomic_write(path, header.encode("utf-8") + b"\n" + latent.astype("<f4").tobytes())


def read_latent(path):
    """Parse a latent dump back into (header dict, float32 array)."""
    import numpy as np

    raw = Path(path).read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline].decode("utf-8"))
    data = np.frombuffer(raw[newline + 1 :], dtype="<f4").reshape(header["shape"])
    return header, data


def cmd_search(args) -> int:
    cfg = _model_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    started = time.perf_counter()
    model = ToyDiT(cfg)
    plan = search(model, SearchConfig(delta=args.delta), class_id=args.class_id)
    timings["search"] = time.perf_counter() - started

    started = time.perf_counter()
    report = aggregate(plan, cfg)
    _atomic_write(out / "plan.json", plan.dumps())
    _atomic_write(out / "cost.json", report.dumps())
    save_heatmap_csv(plan, cfg, out / "heatmap.csv")
    from . import reports

    reports.render_plan_heatmap(plan, cfg, out / "heatmap.png")
    timings["report"] = time.perf_counter() - started
    _write_manifest(
        out, "search", cfg,
        {"plan": out / "plan.json", "cost": out / "cost.json",
         "heatmap_csv": out / "heatmap.csv", "heatmap_png": out / "heatmap.png"},
        timings,
        {"delta": args.delta, "cost_fraction": report.fraction,
         "plan_sha256": plan.sha256()},
    )
    print(f"plan: {len(plan.entries)} compressed entries, "
          f"attention FLOPs fraction {report.fraction:.4f}")
    return 0


def cmd_generate(args) -> int:
    cfg = _model_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.plan is not None:
        plan = _load_plan(args.plan)
        mismatches = []
        meta = plan.meta
        if meta:
            for name, want in (("steps", cfg.num_steps), ("layers", cfg.num_layers)):
                if name in meta and int(meta[name]) != want:
                    mismatches.append(f"plan meta {name}={meta[name]} but config has {want}")
        mismatches.extend(plan.validate(cfg))
        if mismatches:
            for line in mismatches:
                print(f"plan/config mismatch: {line}", file=sys.stderr)
            return 1
    else:
        plan = CompressionPlan(meta={"delta": 0.0, "seed": cfg.seed,
                                     "steps": cfg.num_steps, "layers": cfg.num_layers})
    model = ToyDiT(cfg)
    started = time.perf_counter()
    latent, _traces, report = sample(model, plan, class_id=args.class_id)
    timings = {"generate": time.perf_counter() - started}
    _write_latent(out / "latent.bin", latent, cfg.seed, plan.sha256())
    _atomic_write(out / "cost.json", report.dumps())
    _write_manifest(
        out, "generate", cfg,
        {"latent": out / "latent.bin", "cost": out / "cost.json"},
        timings,
        {"plan_sha256": plan.sha256(), "cost_fraction": report.fraction},
    )
    print(f"latent: {out / 'latent.bin'} (fraction {report.fraction:.4f})")
    return 0


def cmd_analyze(args) -> int:
    cfg = _model_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = ToyDiT(cfg)
    started = time.perf_counter()
    _latent, traces, _report = sample(model, None, class_id=args.class_id, trace=True)
    step_report = similarity_report(traces, STEP_WISE)
    cfg_report = similarity_report(traces, CFG_WISE)
    timings = {"analyze": time.perf_counter() - started}
    from . import reports

    artifacts = {}
    for layer, matrix in step_report.items():
        csv_path = out / f"sim_step_layer{layer}.csv"
        write_similarity_csv(matrix, csv_path)
        reports.render_step_similarity(matrix, layer, out / f"sim_step_layer{layer}.png")
        artifacts[f"sim_step_layer{layer}"] = csv_path
    for layer, matrix in cfg_report.items():
        csv_path = out / f"sim_cfg_layer{layer}.csv"
        write_similarity_csv(matrix, csv_path)
        artifacts[f"sim_cfg_layer{layer}"] = csv_path
    reports.render_cfg_similarity(cfg_report, out / "sim_cfg.png")
    artifacts["sim_cfg_png"] = out / "sim_cfg.png"
    _write_manifest(out, "analyze", cfg, artifacts, timings, {})
    print(f"similarity reports for {len(step_report)} layers written to {out}")
    return 0


def cmd_cost(args) -> int:
    cfg = _model_config(args)
    plan = _load_plan(args.plan)
    report = aggregate(plan, cfg)
    print(report.table())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _atomic_write(out / "cost.json", report.dumps())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attnplan",
        description="Search, run and report attention-compression plans "
                    "for a toy diffusion transformer.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_search = sub.add_parser("search", help="search a compression plan")
    _add_model_flags(p_search)
    p_search.add_argument("--delta", type=float, default=0.05)
    p_search.add_argument("--out", required=True)
    p_search.set_defaults(func=cmd_search)

    p_gen = sub.add_parser("generate", help="run the sampler under a plan")
    _add_model_flags(p_gen)
    group = p_gen.add_mutually_exclusive_group(required=True)
    group.add_argument("--plan", help="plan JSON to apply")
    group.add_argument("--full", action="store_true", help="run uncompressed")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_generate)

    p_an = sub.add_parser("analyze", help="similarity reports from a traced full run")
    _add_model_flags(p_an)
    p_an.add_argument("--out", required=True)
    p_an.set_defaults(func=cmd_analyze)

    p_cost = sub.add_parser("cost", help="cost a plan analytically")
    _add_model_flags(p_cost)
    p_cost.add_argument("--plan", required=True)
    p_cost.add_argument("--out")
    p_cost.set_defaults(func=cmd_cost)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "delta", 0.0) < 0:
        parser.error("--delta must be >= 0")
    if getattr(args, "window_frac", 0.125) <= 0:
        parser.error("--window-frac must be > 0")
    try:
        return args.func(args)
    except PlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
