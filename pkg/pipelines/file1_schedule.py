# pipelines 1- schedule

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Optional

from core.n1_1_schedules import NoiseSpec, Schedule, heuristic_schedule, released_schedule, RELEASED_SCHEDULES
from core.n1_2_gaussian_oracles import gaussian_klub_optimal_schedule, gaussian_optimal_schedule
from core.n4_1_artifacts import save_schedule, write_manifest
from pipelines.common import add_noise_args, banner, manifest_for, noise_spec_from, positive_float, positive_int

# ========================================================
# CONFIG
# ========================================================
HEURISTIC_FLAGS = {
    "edm": "edm",
    "logsnr": "logsnr",
    "time-uniform": "time_uniform",
    "time-quadratic": "time_quadratic",
    "log-uniform": "log_uniform",
}
SCHEDULE_FLAGS = sorted([*HEURISTIC_FLAGS, "gaussian-optimal", "gaussian-klub-optimal", "released"])


def build_schedule(
        kind: str,
        steps: int,
        spec: NoiseSpec,
        *,
        rho: float = 7.0,
        c: float = 1.0,
        quadratic_in: str = "index",
        released: Optional[str] = None,
) -> Schedule:
    """
    One schedule from a CLI kind flag.

    Rules:
    - heuristic kinds and the two Gaussian-optimal kinds use steps + spec
    - released ignores steps/spec and returns the embedded fixture
    """
    if kind in HEURISTIC_FLAGS:
        return heuristic_schedule(HEURISTIC_FLAGS[kind], steps, spec, rho=rho, quadratic_in=quadratic_in)
    if kind == "gaussian-optimal":
        return gaussian_optimal_schedule(steps, spec, c)
    if kind == "gaussian-klub-optimal":
        return gaussian_klub_optimal_schedule(steps, spec, c)
    if kind == "released":
        if released is None:
            raise ValueError(f"❌ --released is required with --kind released ({sorted(RELEASED_SCHEDULES)})")
        return released_schedule(released)
    raise ValueError(f"❌ Unknown schedule kind: {kind}. Use one of {SCHEDULE_FLAGS}")


# ========================================================
# MAIN
# ========================================================
def run_schedule(args: argparse.Namespace) -> Path:
    banner("📐 SCHEDULE")
    manifest = manifest_for("schedule", args)

    print(f"[1/2] Building {args.kind} schedule ({args.steps} steps)...")
    sched = build_schedule(
        args.kind,
        args.steps,
        noise_spec_from(args),
        rho=args.rho,
        c=args.c,
        quadratic_in=args.quadratic_in,
        released=args.released,
    )

    print("[2/2] Writing schedule...")
    save_schedule(sched, args.out)
    manifest.add_output(args.out)
    write_manifest(manifest, args.out)

    print(f"✅ {sched.name}: {sched.n_steps} steps -> {Path(args.out).resolve()}")
    return Path(args.out)


def cmd_schedule(args: argparse.Namespace) -> int:
    run_schedule(args)
    return 0


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("schedule", help="Write a heuristic / Gaussian-optimal / released schedule")
    p.add_argument("--kind", choices=SCHEDULE_FLAGS, required=True)
    p.add_argument("--steps", type=positive_int, default=10)
    p.add_argument("--rho", type=positive_float, default=7.0)
    p.add_argument("--c", type=positive_float, default=1.0, help="Gaussian data std for gaussian-* kinds")
    p.add_argument("--quadratic-in", choices=["index", "sigma"], default="index")
    p.add_argument("--released", choices=sorted(RELEASED_SCHEDULES), default=None)
    p.add_argument("--out", type=Path, default=Path("artifacts/schedule.json"))
    add_noise_args(p)
    p.set_defaults(handler=cmd_schedule)
