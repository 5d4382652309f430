# pipelines 5- compare

from __future__ import annotations

import argparse
import re
from itertools import product
from pathlib import Path
from typing import Dict, List

import pandas as pd
from tqdm import tqdm

from core.n1_1_schedules import NoiseSpec, Schedule, interpolate
from core.n1_2_gaussian_oracles import IsoGaussian, gaussian_euler_kl
from core.n2_2_toy_models import DataModel, model_dim, nll_summary
from core.n3_1_solvers import parse_solver_kind, run_sampler
from core.n3_3_optimizer import schedule_for_steps
from core.n4_1_artifacts import (
    histogram_2d,
    histogram_frame,
    load_schedule,
    write_table,
    write_manifest,
)
from pipelines.common import (
    add_noise_args,
    banner,
    int_list,
    load_model,
    manifest_for,
    noise_spec_from,
    non_negative_int,
    positive_int,
    split_list,
)
from pipelines.file1_schedule import HEURISTIC_FLAGS, build_schedule
from pipelines.file2_optimize import schedule_file

COMPARE_METRICS = ["nll", "gaussian-euler-kl"]


# ========================================================
# SCHEDULE SOURCES
# ========================================================
def resolve_schedule(source: str, steps: int, spec: NoiseSpec) -> Schedule:
    """
    Rules:
    - heuristic flag (edm, logsnr, …)  -> rebuilt at `steps`
    - optimize output directory        -> stage output or 40-step interpolation
    - schedule JSON file               -> used as is, interpolated if steps differ
    """
    if source in HEURISTIC_FLAGS:
        return build_schedule(source, steps, spec)

    path = Path(source)
    if path.is_dir():
        stages = {}
        for m in (10, 20, 40):
            if schedule_file(path, m).exists():
                stages[m] = load_schedule(schedule_file(path, m))
        if 40 not in stages:
            raise FileNotFoundError(f"❌ {path} has no schedule_40.json (not an optimize output dir?)")
        return schedule_for_steps(stages, steps)

    if not path.exists():
        raise FileNotFoundError(f"❌ Schedule source not found: {source}")
    s = load_schedule(path)
    return s if s.n_steps == steps else interpolate(s, steps)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_")


# ========================================================
# MAIN
# ========================================================
def run_compare(args: argparse.Namespace) -> pd.DataFrame:
    """
    Grid of schedules x solvers x NFE.

    One row per cell; optional 50x50 histogram per cell for 2-D models.
    """
    banner("🏁 COMPARE START")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = manifest_for("compare", args)

    print("[1/3] Loading model...")
    model: DataModel = load_model(args.model, manifest)
    spec = noise_spec_from(args)
    solvers = [parse_solver_kind(s) for s in args.solvers]
    if args.metric == "gaussian-euler-kl" and not isinstance(model, IsoGaussian):
        raise ValueError("❌ gaussian-euler-kl needs a Gaussian model")
    if args.histograms and model_dim(model) < 2:
        raise ValueError("❌ --histograms needs a model with d >= 2")

    cells = list(product(args.schedules, solvers, args.nfe))
    print(f"[2/3] Running {len(cells)} cells...")

    rows: List[Dict[str, object]] = []
    for source, solver, nfe in tqdm(cells, desc="Compare", unit="cell"):
        s = resolve_schedule(source, nfe, spec)
        row: Dict[str, object] = {"schedule": s.name, "source": source, "solver": solver.label, "nfe": nfe}

        if args.metric == "gaussian-euler-kl":
            row["value"] = gaussian_euler_kl(s, model.c, model.d)[1]
            row["std_error"] = 0.0
        else:
            run = run_sampler(model, solver, s, args.n, args.seed)
            row["value"], row["std_error"] = nll_summary(model, run.samples)
            if args.histograms:
                hist_path = out_dir / f"hist_{_slug(source)}_{_slug(solver.label)}_{nfe}.csv"
                write_table(histogram_frame(histogram_2d(run.samples, model)), hist_path)
                manifest.add_output(hist_path)
                row["histogram"] = hist_path.name

        row["metric"] = args.metric
        rows.append(row)

    print("[3/3] Writing results...")
    df = pd.DataFrame(rows)
    for suffix in (".csv", ".parquet"):
        path = out_dir / f"results{suffix}"
        write_table(df, path)
        manifest.add_output(path)
    write_manifest(manifest, out_dir)

    print("\n==============================")
    print("✅ COMPARE COMPLETE")
    print("==============================")
    print(df.to_string(index=False))
    return df


def cmd_compare(args: argparse.Namespace) -> int:
    run_compare(args)
    return 0


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("compare", help="Schedules x solvers x NFE table (+ histograms)")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--schedules", type=split_list, required=True,
                   help="Comma list of heuristic flags, schedule files or optimize dirs")
    p.add_argument("--solvers", type=split_list, default=["sde_dpmpp_2m"])
    p.add_argument("--nfe", type=int_list, default=[6, 8, 10])
    p.add_argument("--metric", choices=COMPARE_METRICS, default="nll")
    p.add_argument("--n", type=positive_int, default=100_000)
    p.add_argument("--seed", type=non_negative_int, required=True)
    p.add_argument("--histograms", action="store_true")
    p.add_argument("--out", type=Path, default=Path("artifacts/compare"))
    add_noise_args(p)
    p.set_defaults(handler=cmd_compare)
