# pipelines 4- eval

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any, Dict, List

from core.n1_2_gaussian_oracles import (
    IsoGaussian,
    gaussian_entropy,
    gaussian_euler_kl,
    kl_stationarity_residual,
    klub_stationarity_residual,
)
from core.n2_2_toy_models import DataModel, describe_model, make_denoiser, nll_summary
from core.n3_2_klub import C_IMP, SAMPLING_KINDS, klub_schedule_total
from core.n4_1_artifacts import RunManifest, load_samples, load_schedule, write_json, write_manifest
from pipelines.common import banner, load_model, manifest_for, non_negative_int, positive_float, positive_int

METRICS = ["nll", "gaussian-euler-kl", "klub"]


def _require_gaussian(model: DataModel, metric: str) -> IsoGaussian:
    if not isinstance(model, IsoGaussian):
        raise ValueError(f"❌ Metric {metric} needs a Gaussian model")
    return model


def eval_nll(model: DataModel, args: argparse.Namespace, manifest: RunManifest) -> Dict[str, Any]:
    if args.samples is None:
        raise ValueError("❌ nll needs --samples")
    samples = load_samples(args.samples)
    manifest.add_input(args.samples)
    value, stderr = nll_summary(model, samples)

    out: Dict[str, Any] = {"nll": value, "std_error": stderr, "n": int(len(samples))}
    if isinstance(model, IsoGaussian):
        out["entropy"] = gaussian_entropy(model.c, model.d)
    return out


def eval_schedules(model: DataModel, args: argparse.Namespace, manifest: RunManifest) -> List[Dict[str, Any]]:
    if not args.schedule:
        raise ValueError(f"❌ {args.metric} needs at least one --schedule")

    rows: List[Dict[str, Any]] = []
    for path in args.schedule:
        s = load_schedule(path)
        manifest.add_input(path)
        row: Dict[str, Any] = {"schedule": s.name, "path": str(path), "steps": s.n_steps}

        if args.metric == "gaussian-euler-kl":
            g = _require_gaussian(model, args.metric)
            f, kl = gaussian_euler_kl(s, g.c, g.d)
            row.update({"f": f, "kl": kl})
            if s.n_steps >= 2:
                row["kl_residual_max"] = float(kl_stationarity_residual(s, g.c).max())
                row["klub_residual_max"] = float(klub_stationarity_residual(s, g.c).max())
        else:
            est = klub_schedule_total(
                make_denoiser(model), model, s, args.n_mc, args.seed, c_imp=args.c_imp, sampling=args.sampling,
            )
            row.update(est.to_dict())
            row["intervals"] = est.intervals.to_dict(orient="records")

        print(f"   {s.name:<28} {args.metric}: {row.get('kl', row.get('value')):.6g}")
        rows.append(row)
    return rows


def run_eval(args: argparse.Namespace) -> Dict[str, Any]:
    banner("📊 EVALUATION")
    manifest = manifest_for("eval", args)

    print("[1/2] Loading model...")
    model = load_model(args.model, manifest)

    print(f"[2/2] Computing {args.metric}...")
    report: Dict[str, Any] = {"metric": args.metric, "model": describe_model(model), "seed": args.seed}
    if args.metric == "nll":
        report.update(eval_nll(model, args, manifest))
        print(f"   nll = {report['nll']:.6g} ± {report['std_error']:.2g}")
    else:
        report["schedules"] = eval_schedules(model, args, manifest)

    write_json(args.out, report)
    manifest.add_output(args.out)
    write_manifest(manifest, args.out)
    print(f"✅ Report -> {Path(args.out).resolve()}")
    return report


def cmd_eval(args: argparse.Namespace) -> int:
    run_eval(args)
    return 0


def add_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("eval", help="NLL of samples, Gaussian Euler KL or KLUB of schedules")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--metric", choices=METRICS, required=True)
    p.add_argument("--samples", type=Path, default=None)
    p.add_argument("--schedule", type=Path, action="append", default=[], help="Repeatable")
    p.add_argument("--seed", type=non_negative_int, required=True)
    p.add_argument("--n-mc", type=positive_int, default=8192, help="Monte-Carlo samples per interval (klub)")
    p.add_argument("--sampling", choices=sorted(SAMPLING_KINDS), default="importance")
    p.add_argument("--c-imp", type=positive_float, default=C_IMP)
    p.add_argument("--out", type=Path, default=Path("artifacts/eval.json"))
    p.set_defaults(handler=cmd_eval)
