# pipelines 2- optimize

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Dict

from core.n3_3_optimizer import (
    STAGE_STEPS,
    HierarchyResult,
    OptimizerConfig,
    hierarchical_optimize,
    load_optimizer_config,
    schedule_for_steps,
    verify_frozen,
)
from core.n4_1_artifacts import save_schedule, write_json, write_manifest
from core.n2_2_toy_models import describe_model
from pipelines.common import banner, int_list, load_model, manifest_for, non_negative_int

DEFAULT_OUT_DIR = Path("artifacts/optimize")


def schedule_file(out_dir: Path, steps: int) -> Path:
    return out_dir / f"schedule_{steps}.json"


def run_optimize(args: argparse.Namespace) -> HierarchyResult:
    """
    End-to-end hierarchical optimization.

    Flow:
    model config + optimizer config
    -> stage 1 (10 steps, early stopping)
    -> stage 2/3 (subdivide, refine new points)
    -> schedules + report + manifest
    """
    banner("🚀 SCHEDULE OPTIMIZATION START")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = manifest_for("optimize", args)

    # ---------------------------------------------
    # 1. Load configs
    # ---------------------------------------------
    print("[1/4] Loading model + optimizer config...")
    model = load_model(args.model, manifest)
    cfg = load_optimizer_config(args.config)
    if args.config is not None:
        manifest.add_input(args.config)

    overrides: Dict[str, object] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.init_kind is not None:
        overrides["init_kind"] = args.init_kind
    if overrides:
        cfg = OptimizerConfig.model_validate({**cfg.model_dump(), **overrides})

    manifest.config["optimizer"] = cfg.model_dump()
    manifest.seed = cfg.seed

    # ---------------------------------------------
    # 2. Optimize
    # ---------------------------------------------
    print(f"[2/4] Optimizing {STAGE_STEPS[0]} -> {STAGE_STEPS[-1]} steps ({cfg.objective})...")
    result = hierarchical_optimize(model, cfg, verbose=args.verbose)

    # ---------------------------------------------
    # 3. Consistency checks
    # ---------------------------------------------
    print("[3/4] Verifying frozen points...")
    for coarse, fine in zip(STAGE_STEPS[:-1], STAGE_STEPS[1:]):
        verify_frozen(result.schedules[coarse], result.schedules[fine])
    for msg in result.report.warnings:
        print(f"⚠️ {msg}")

    # ---------------------------------------------
    # 4. Save artifacts
    # ---------------------------------------------
    print("[4/4] Writing schedules + report...")
    for steps in sorted(set(STAGE_STEPS) | set(args.steps or [])):
        path = schedule_file(out_dir, steps)
        save_schedule(schedule_for_steps(result, steps), path)
        manifest.add_output(path)

    report = result.report.to_dict()
    report["model"] = describe_model(model)
    report["config"] = cfg.model_dump()
    report_path = out_dir / "report.json"
    write_json(report_path, report)
    manifest.add_output(report_path)
    write_manifest(manifest, out_dir)

    print("\n==============================")
    print("✅ OPTIMIZATION COMPLETE")
    print("==============================")
    print(f"📦 Outputs    -> {out_dir.resolve()}")
    print(f"🧮 Sweeps     -> {len(result.report.sweeps)}")
    print(f"⏱  Wall clock -> {result.report.wall_clock_s:.1f}s")
    return result


def cmd_optimize(args: argparse.Namespace) -> int:
    run_optimize(args)
    return 0


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("optimize", help="Hierarchical 10/20/40-step schedule optimization")
    p.add_argument("--model", type=Path, required=True, help="Model config JSON")
    p.add_argument("--config", type=Path, default=None, help="Optimizer config JSON (defaults if omitted)")
    p.add_argument("--out", type=Path, default=DEFAULT_OUT_DIR)
    p.add_argument("--seed", type=non_negative_int, default=None, help="Overrides the config seed")
    p.add_argument("--init-kind", default=None, help="Overrides the config init_kind")
    p.add_argument("--steps", type=int_list, default=None, help="Extra step counts to emit, e.g. 6,8,15")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(handler=cmd_optimize)
