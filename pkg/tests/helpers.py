from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from core.n1_1_schedules import NoiseSpec, Schedule


def random_schedule(rng: np.random.Generator, n: int, spec: NoiseSpec) -> Schedule:
    """Log-uniform random interior points between the noise-range endpoints."""
    inner = np.sort(np.exp(rng.uniform(np.log(spec.sigma_min), np.log(spec.sigma_max), n - 1)))
    t = np.concatenate([[spec.sigma_min], inner, [spec.sigma_max]])
    return Schedule.from_ascending(t, name="random")


def write_model(tmp_path: Path, payload: dict, name: str = "model.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path
