# notebook 4- 1- artifacts

# ========================================================
# MARK: STEP 8 — ARTIFACT I/O (schedules, samples, tables, manifests)
# ========================================================

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from core.n1_1_schedules import Schedule
from core.n2_2_toy_models import DataModel, mixture_moments

TOOL_VERSION = "0.1.0"
HIST_BINS = 50
HIST_HALF_WIDTH = 4.0

PathLike = Union[str, Path]


# ========================================================
# 1. Atomic writes
# ========================================================
def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Temp file in the target directory, then os.replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def write_json(path: PathLike, payload: Any) -> Path:
    text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    return atomic_write_bytes(path, text.encode("utf-8"))


def read_json(path: PathLike) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"❌ File not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"❌ Not valid JSON: {path} ({exc})") from exc


def write_table(df: pd.DataFrame, path: PathLike) -> Path:
    """CSV or parquet by suffix."""
    path = Path(path)
    if path.suffix == ".parquet":
        # pyarrow needs a real path; write next to the target and swap in
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.tmp")
        df.to_parquet(tmp, index=False)
        os.replace(tmp, path)
        return path
    if path.suffix != ".csv":
        raise ValueError(f"❌ Table path must end in .csv or .parquet, got {path}")
    return atomic_write_bytes(path, df.to_csv(index=False).encode("utf-8"))


def file_sha256(path: PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ========================================================
# 2. Schedules
# ========================================================
def save_schedule(s: Schedule, path: PathLike) -> Path:
    return write_json(path, s.to_dict())


def load_schedule(path: PathLike) -> Schedule:
    payload = read_json(path)
    if not isinstance(payload, dict):
        raise ValueError(f"❌ Schedule file must hold a JSON object: {path}")
    return Schedule.from_dict(payload)


# ========================================================
# 3. Samples (CSV or raw little-endian float64 + sidecar)
# ========================================================
def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_samples(samples: np.ndarray, path: PathLike) -> Path:
    """
    Formats:
    - .csv : columns x0 … x{d-1}, one row per point
    - .f64 : raw little-endian float64, row-major, with <path>.json = {"n", "d"}
    """
    path = Path(path)
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    n, d = x.shape

    if path.suffix == ".f64":
        atomic_write_bytes(path, x.astype("<f8").tobytes(order="C"))
        write_json(_sidecar(path), {"n": n, "d": d, "dtype": "<f8"})
        return path
    if path.suffix == ".csv":
        df = pd.DataFrame(x, columns=[f"x{j}" for j in range(d)])
        return atomic_write_bytes(path, df.to_csv(index=False, float_format="%.17g").encode("utf-8"))
    raise ValueError(f"❌ Sample path must end in .csv or .f64, got {path}")


def load_samples(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"❌ Samples not found: {path}")

    if path.suffix == ".f64":
        meta = read_json(_sidecar(path))
        raw = np.frombuffer(path.read_bytes(), dtype="<f8")
        if raw.size != meta["n"] * meta["d"]:
            raise ValueError(f"❌ {path} holds {raw.size} values, sidecar says {meta['n']}x{meta['d']}")
        return raw.reshape(meta["n"], meta["d"]).astype(np.float64)

    df = pd.read_csv(path)
    if df.empty:
        raise ValueError(f"❌ Sample file is empty: {path}")
    return df.to_numpy(dtype=np.float64)


# ========================================================
# 4. 2-D histograms
# ========================================================
def histogram_2d(samples: np.ndarray, model: DataModel, bins: int = HIST_BINS) -> np.ndarray:
    """
    bins×bins counts over model mean ± 4 per-axis std (first two axes).

    Points outside the box are clipped onto the edge bins so counts sum to n.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if x.shape[1] < 2:
        raise ValueError(f"❌ Histogram needs at least 2 dimensions, got {x.shape[1]}")

    mean, var = mixture_moments(model)
    std = np.sqrt(var[:2])
    lo = mean[:2] - HIST_HALF_WIDTH * std
    hi = mean[:2] + HIST_HALF_WIDTH * std
    clipped = np.clip(x[:, :2], lo, hi)

    counts, _, _ = np.histogram2d(
        clipped[:, 0], clipped[:, 1], bins=bins, range=[[lo[0], hi[0]], [lo[1], hi[1]]]
    )
    return counts.astype(np.int64)


def histogram_frame(counts: np.ndarray) -> pd.DataFrame:
    """Row-major grid: row = first-axis bin, column = second-axis bin."""
    return pd.DataFrame(counts, columns=[f"b{j}" for j in range(counts.shape[1])])


# ========================================================
# 5. Run manifest
# ========================================================
def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: str
    argv: List[str] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    tool_version: str = TOOL_VERSION
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    started_at: str = Field(default_factory=utc_now)
    finished_at: Optional[str] = None

    def add_input(self, path: PathLike) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path: PathLike) -> None:
        self.outputs[str(path)] = file_sha256(path)


def manifest_path(out: PathLike) -> Path:
    out = Path(out)
    if out.suffix:
        return out.with_name(out.name + ".manifest.json")
    return out / "manifest.json"


def write_manifest(manifest: RunManifest, out: PathLike) -> Path:
    manifest.finished_at = utc_now()
    return write_json(manifest_path(out), manifest.model_dump())


def read_manifest(path: PathLike) -> RunManifest:
    return RunManifest.model_validate(read_json(path))
