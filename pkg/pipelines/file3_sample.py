# pipelines 3- sample

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Dict

import numpy as np

from core.n1_1_schedules import Schedule
from core.n1_2_gaussian_oracles import IsoGaussian, gaussian_euler_output_variance
from core.n3_1_solvers import PRIOR_KINDS, SamplerRun, parse_solver_kind, run_sampler
from core.n4_1_artifacts import load_schedule, save_samples, write_json, write_manifest, write_table
from pipelines.common import banner, load_model, manifest_for, non_negative_int, positive_int


def variance_check(run: SamplerRun, model: IsoGaussian, schedule: Schedule) -> Dict[str, float]:
    """Empirical per-dimension output variance against the Euler closed form."""
    predicted = gaussian_euler_output_variance(schedule, model.c)
    empirical = float(np.mean(np.var(run.samples, axis=0, ddof=1)))
    return {
        "predicted_variance": predicted,
        "empirical_variance": empirical,
        "relative_error": abs(empirical - predicted) / predicted,
    }


def run_sample(args: argparse.Namespace) -> SamplerRun:
    banner("🎲 SAMPLING")
    manifest = manifest_for("sample", args)

    print("[1/3] Loading model, solver, schedule...")
    model = load_model(args.model, manifest)
    solver = parse_solver_kind(args.solver)
    schedule = load_schedule(args.schedule)
    manifest.add_input(args.schedule)

    if args.check_variance and (not isinstance(model, IsoGaussian) or solver.tag != "ddim"):
        raise ValueError("❌ --check-variance needs a Gaussian model and the ddim solver")

    print(f"[2/3] Running {solver.label} for {schedule.n_steps} steps on {args.n} samples...")
    run = run_sampler(
        model, solver, schedule, args.n, args.seed,
        batch_size=args.batch_size, prior=args.prior, trace=args.trace is not None, show_progress=True,
    )

    print("[3/3] Writing samples...")
    save_samples(run.samples, args.out)
    manifest.add_output(args.out)
    if args.trace is not None:
        write_table(run.trace, args.trace)
        manifest.add_output(args.trace)

    if args.check_variance:
        check = variance_check(run, model, schedule)
        print(f"📊 predicted variance -> {check['predicted_variance']:.6g}")
        print(f"📊 empirical variance -> {check['empirical_variance']:.6g}")
        print(f"📊 relative error     -> {check['relative_error']:.3%}")
        check_path = Path(args.out).with_name(Path(args.out).name + ".variance.json")
        write_json(check_path, check)
        manifest.add_output(check_path)

    write_manifest(manifest, args.out)
    print(f"✅ {len(run.samples)} samples (NFE={run.nfe}) -> {Path(args.out).resolve()}")
    return run


def cmd_sample(args: argparse.Namespace) -> int:
    run_sample(args)
    return 0


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("sample", help="Run a solver on a schedule and dump samples")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--solver", required=True, help="ddim | stochastic_ddim | er_sde:<λ> | dpmpp_2m | sde_dpmpp_2m")
    p.add_argument("--schedule", type=Path, required=True)
    p.add_argument("--n", type=positive_int, default=10_000)
    p.add_argument("--seed", type=non_negative_int, required=True)
    p.add_argument("--out", type=Path, default=Path("artifacts/samples.csv"), help=".csv or .f64")
    p.add_argument("--prior", choices=sorted(PRIOR_KINDS), default="gaussian")
    p.add_argument("--trace", type=Path, default=None, help="Per-step trace CSV")
    p.add_argument("--batch-size", type=positive_int, default=None)
    p.add_argument("--check-variance", action="store_true", help="Gaussian + ddim only")
    p.set_defaults(handler=cmd_sample)
