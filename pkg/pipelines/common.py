# pipelines common helpers

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any, List

from core.n1_1_schedules import NoiseSpec
from core.n2_2_toy_models import DataModel, build_data_model, load_model_config
from core.n4_1_artifacts import RunManifest


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got '{text}'") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got '{text}'") from exc
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a positive number, got '{text}'") from exc
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


def split_list(text: str) -> List[str]:
    items = [part.strip() for part in text.split(",") if part.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def int_list(text: str) -> List[int]:
    return [positive_int(part) for part in split_list(text)]


def add_noise_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sigma-min", type=positive_float, default=0.002)
    parser.add_argument("--sigma-max", type=positive_float, default=80.0)


def noise_spec_from(args: argparse.Namespace) -> NoiseSpec:
    return NoiseSpec(args.sigma_min, args.sigma_max)


def load_model(path: Path, manifest: RunManifest) -> DataModel:
    cfg = load_model_config(path)
    manifest.add_input(path)
    manifest.config["model_config"] = cfg.model_dump()
    return build_data_model(cfg)


def banner(title: str) -> None:
    print("\n==============================")
    print(title)
    print("==============================")


def _json_safe(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def manifest_for(command: str, args: argparse.Namespace) -> RunManifest:
    """Manifest seeded with the resolved CLI arguments (paths as strings)."""
    config = {key: _json_safe(value) for key, value in vars(args).items() if key not in {"handler", "argv"}}
    return RunManifest(
        command=command,
        argv=list(getattr(args, "argv", [])),
        config=config,
        seed=getattr(args, "seed", None),
    )
