# notebook 2- 2- toy models

# ========================================================
# MARK: STEP 4 — ANALYTIC DATA MODELS (Gaussian + Gaussian mixtures)
# ========================================================

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, PositiveInt, TypeAdapter
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from core.n1_2_gaussian_oracles import IsoGaussian
from core.n2_1_streams import batch_slices, blocked, default_batch_size

LOG_2PI = math.log(2.0 * math.pi)

Sigma = Union[float, np.ndarray]
Denoiser = Callable[[np.ndarray, Sigma], np.ndarray]


# ========================================================
# GAUSSIAN MIXTURE
# ========================================================
@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """
    Σ_k w_k N(μ_k, γ_k² I_d).

    γ_k = 0 is allowed (point mass); such components have a denoiser but no
    density at σ = 0.
    """

    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    label: str = field(default="gmm")

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        stds = np.asarray(self.stds, dtype=np.float64).reshape(-1)

        if not (len(weights) == len(means) == len(stds)) or len(weights) == 0:
            raise ValueError(
                f"❌ Mixture needs equal-length weights/means/stds, got "
                f"{len(weights)}/{len(means)}/{len(stds)}"
            )
        if np.any(weights <= 0) or abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"❌ Mixture weights must be positive and sum to 1, got sum={weights.sum()!r}")
        if np.any(stds < 0) or not np.all(np.isfinite(stds)):
            raise ValueError("❌ Component stds must be finite and non-negative")
        if not np.all(np.isfinite(means)):
            raise ValueError("❌ Component means must be finite")

        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def d(self) -> int:
        return int(self.means.shape[1])

    @property
    def k(self) -> int:
        return int(self.means.shape[0])


DataModel = Union[IsoGaussian, GaussianMixture]


def as_mixture(m: DataModel) -> GaussianMixture:
    if isinstance(m, GaussianMixture):
        return m
    return GaussianMixture(
        weights=np.ones(1),
        means=np.zeros((1, m.d)),
        stds=np.array([m.c]),
        label=f"gaussian-c{m.c:g}",
    )


def model_dim(m: DataModel) -> int:
    return int(m.d)


# ========================================================
# INTERNAL HELPERS
# ========================================================
def _as_points(x: np.ndarray, d: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if pts.shape[1] != d:
        raise ValueError(f"❌ Points must have dimension {d}, got shape {np.shape(x)}")
    return pts


def _as_sigma_column(sigma: Sigma, n: int) -> np.ndarray:
    """Scalar or per-point noise levels as an (n, 1) column."""
    sig = np.asarray(sigma, dtype=np.float64)
    if sig.ndim == 0:
        return np.full((n, 1), float(sig))
    sig = sig.reshape(-1)
    if len(sig) != n:
        raise ValueError(f"❌ Per-point sigma must have length {n}, got {len(sig)}")
    return sig[:, None]


def _component_log_probs(mix: GaussianMixture, pts: np.ndarray, sig: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """log w_k + log N(x; μ_k, (γ_k²+σ²) I) as (n, K), plus the variances (n, K)."""
    var = mix.stds[None, :] ** 2 + sig ** 2
    if np.any(var <= 0):
        raise ValueError("❌ Density undefined: a component has zero variance at this noise level")

    sq = cdist(pts, mix.means, "sqeuclidean")
    log_norm = -0.5 * mix.d * (LOG_2PI + np.log(var))
    return np.log(mix.weights)[None, :] + log_norm - 0.5 * sq / var, var


def _squeeze(out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return out[0] if np.ndim(x) == 1 else out


# ========================================================
# 1. Noised log density
# ========================================================
def noised_log_density(m: DataModel, x: np.ndarray, sigma: Sigma) -> Union[float, np.ndarray]:
    """
    log p(x; σ) where p(·; σ) = p_data * N(0, σ² I).

    x is a point (d,) or a batch (n, d). Returns a float or an (n,) array.
    """
    if np.any(np.asarray(sigma) < 0):
        raise ValueError(f"❌ Noise level must be non-negative, got {sigma}")

    d = model_dim(m)
    pts = _as_points(x, d)
    sig = _as_sigma_column(sigma, len(pts))

    if isinstance(m, IsoGaussian):
        var = m.c ** 2 + sig[:, 0] ** 2
        out = -0.5 * d * (LOG_2PI + np.log(var)) - 0.5 * np.sum(pts ** 2, axis=1) / var
    else:
        log_probs, _ = _component_log_probs(m, pts, sig)
        out = logsumexp(log_probs, axis=1)

    return float(out[0]) if np.ndim(x) == 1 else out


def posterior_responsibilities(m: DataModel, x: np.ndarray, sigma: Sigma) -> np.ndarray:
    """w̃_k(x, σ) ∝ w_k N(x; μ_k, (γ_k²+σ²) I), shape (n, K)."""
    mix = as_mixture(m)
    pts = _as_points(x, mix.d)
    log_probs, _ = _component_log_probs(mix, pts, _as_sigma_column(sigma, len(pts)))
    return np.exp(log_probs - logsumexp(log_probs, axis=1, keepdims=True))


# ========================================================
# 2. Ideal denoiser + score
# ========================================================
def ideal_denoiser(m: DataModel, x: np.ndarray, sigma: Sigma) -> np.ndarray:
    """
    D(x, σ) = E[x_0 | x_σ = x].

    Rules:
    - σ must be > 0 (scalar or one per point)
    - mixture: Σ_k w̃_k (γ_k² x + σ² μ_k) / (γ_k² + σ²)
    """
    if np.any(np.asarray(sigma) <= 0):
        raise ValueError(f"❌ Denoiser needs sigma > 0, got {sigma}")

    d = model_dim(m)
    pts = _as_points(x, d)
    sig = _as_sigma_column(sigma, len(pts))

    if isinstance(m, IsoGaussian):
        out = (m.c ** 2 / (m.c ** 2 + sig ** 2)) * pts
        return _squeeze(out, x)

    log_probs, var = _component_log_probs(m, pts, sig)
    resp = np.exp(log_probs - logsumexp(log_probs, axis=1, keepdims=True))

    keep_x = np.sum(resp * (m.stds[None, :] ** 2 / var), axis=1, keepdims=True)
    pull = (resp * (sig ** 2 / var)) @ m.means
    return _squeeze(keep_x * pts + pull, x)


def score(m: DataModel, x: np.ndarray, sigma: Sigma) -> np.ndarray:
    """∇_x log p(x; σ). Valid at σ = 0 when every component has γ_k > 0."""
    if np.any(np.asarray(sigma) < 0):
        raise ValueError(f"❌ Noise level must be non-negative, got {sigma}")

    mix = as_mixture(m)
    pts = _as_points(x, mix.d)
    log_probs, var = _component_log_probs(mix, pts, _as_sigma_column(sigma, len(pts)))
    resp = np.exp(log_probs - logsumexp(log_probs, axis=1, keepdims=True))

    inv = resp / var
    out = inv @ mix.means - np.sum(inv, axis=1, keepdims=True) * pts
    return _squeeze(out, x)


def make_denoiser(m: DataModel) -> Denoiser:
    return partial(ideal_denoiser, m)


# ========================================================
# 3. Sampling
# ========================================================
def sample_data_with_labels(m: DataModel, n: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """i.i.d. draws and their component labels; block b uses stream (seed, data, b)."""
    if int(n) != n or n < 1:
        raise ValueError(f"❌ Sample count must be a positive integer, got {n}")

    mix = as_mixture(m)
    return blocked(seed, "data", 0, int(n), lambda rng, size: draw_points(mix, size, rng))


def draw_points(m: DataModel, size: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """One batch from p_data using the caller's generator."""
    mix = as_mixture(m)
    comp = rng.choice(mix.k, size=size, p=mix.weights) if mix.k > 1 else np.zeros(size, dtype=np.int64)
    eps = rng.standard_normal((size, mix.d))
    return mix.means[comp] + mix.stds[comp, None] * eps, comp


def sample_data(m: DataModel, n: int, seed: int) -> np.ndarray:
    return sample_data_with_labels(m, n, seed)[0]


# ========================================================
# 4. Grid mixtures
# ========================================================
def mixture_moments(m: DataModel) -> Tuple[np.ndarray, np.ndarray]:
    """Mean (d,) and per-axis variance (d,)."""
    mix = as_mixture(m)
    mean = mix.weights @ mix.means
    centered = mix.means - mean
    var = mix.weights @ (centered ** 2) + float(mix.weights @ mix.stds ** 2)
    return mean, var


def grid_mixture(rows: int, cols: int, spacing: float = 2.0, gamma: float = 0.1) -> GaussianMixture:
    """
    Equal-weight rows×cols grid in 2-D (x along cols, y along rows), shared γ.

    Output has zero mean and unit variance on each axis. The configuration is
    first scaled so its widest axis has unit variance (fixing the shared std
    γ'), then each axis's centred means are stretched by
    sqrt((1 − γ'²) / var_means_axis). A single row or column with γ' < 1 has
    no spread to stretch and is rejected.
    """
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise ValueError(f"❌ Grid needs rows, cols >= 1, got ({rows}, {cols})")
    if not spacing > 0:
        raise ValueError(f"❌ Grid spacing must be positive, got {spacing}")
    if gamma < 0:
        raise ValueError(f"❌ Component std must be non-negative, got {gamma}")

    xs = (np.arange(cols) - (cols - 1) / 2.0) * spacing
    ys = (np.arange(rows) - (rows - 1) / 2.0) * spacing
    gx, gy = np.meshgrid(xs, ys)
    means = np.column_stack([gx.ravel(), gy.ravel()])
    means = means - means.mean(axis=0)

    # equal weights: per-axis spread of the means is a plain variance
    var_means = np.mean(means ** 2, axis=0)
    top = float(np.max(var_means + gamma ** 2))
    if top <= 0:
        raise ValueError("❌ Cannot standardize a single point mass (rows=cols=1, gamma=0)")
    std = gamma / math.sqrt(top)

    scales = np.ones(2)
    for axis in range(2):
        if var_means[axis] > 0:
            scales[axis] = math.sqrt((1.0 - std ** 2) / var_means[axis])
        elif not math.isclose(std, 1.0):
            raise ValueError(
                f"❌ A {rows}x{cols} grid has no spread along axis {axis}; "
                "unit variance there needs rows, cols >= 2 (or a 1x1 grid with gamma > 0)"
            )

    k = int(rows) * int(cols)
    return GaussianMixture(
        weights=np.full(k, 1.0 / k),
        means=means * scales,
        stds=np.full(k, std),
        label=f"grid-{rows}x{cols}",
    )


# ========================================================
# 5. Negative log likelihood
# ========================================================
def nll_summary(m: DataModel, samples: np.ndarray, *, batch_size: int | None = None) -> Tuple[float, float]:
    """(−mean log p_data(x), its standard error)."""
    pts = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if pts.size == 0:
        raise ValueError("❌ NLL needs at least one sample")

    bs = batch_size or default_batch_size()
    logp = np.concatenate(
        [np.atleast_1d(noised_log_density(m, pts[a:b], 0.0)) for a, b in batch_slices(len(pts), bs)]
    )
    if not np.all(np.isfinite(logp)):
        raise RuntimeError("❌ Non-finite log density encountered in NLL")

    n = len(logp)
    stderr = float(np.std(logp, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(-np.mean(logp)), stderr


def nll(m: DataModel, samples: np.ndarray) -> float:
    return nll_summary(m, samples)[0]


# ========================================================
# MODEL CONFIG (file-facing)
# ========================================================
class GaussianModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["gaussian"] = "gaussian"
    c: PositiveFloat = 1.0
    d: PositiveInt = 1


class GmmModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["gmm"] = "gmm"
    weights: List[PositiveFloat]
    means: List[List[float]]
    stds: List[NonNegativeFloat]


class GridModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["grid"] = "grid"
    rows: PositiveInt = 8
    cols: PositiveInt = 8
    spacing: PositiveFloat = 2.0
    gamma: NonNegativeFloat = 0.1


ModelConfig = Annotated[
    Union[GaussianModelConfig, GmmModelConfig, GridModelConfig],
    Field(discriminator="kind"),
]
_MODEL_CONFIG = TypeAdapter(ModelConfig)


def parse_model_config(payload: Dict[str, Any]) -> ModelConfig:
    return _MODEL_CONFIG.validate_python(payload)


def load_model_config(path: Union[str, Path]) -> ModelConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"❌ Model config not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"❌ Model config is not valid JSON: {path} ({exc})") from exc
    return parse_model_config(payload)


def build_data_model(cfg: ModelConfig) -> DataModel:
    if isinstance(cfg, GaussianModelConfig):
        return IsoGaussian(c=cfg.c, d=cfg.d)
    if isinstance(cfg, GridModelConfig):
        return grid_mixture(cfg.rows, cfg.cols, cfg.spacing, cfg.gamma)

    # raw weights are renormalized here; the dataclass itself is strict
    weights = np.asarray(cfg.weights, dtype=np.float64)
    return GaussianMixture(
        weights=weights / weights.sum(),
        means=np.asarray(cfg.means, dtype=np.float64),
        stds=np.asarray(cfg.stds, dtype=np.float64),
    )


def describe_model(m: DataModel) -> Dict[str, Any]:
    """JSON-safe summary recorded in run metadata."""
    if isinstance(m, IsoGaussian):
        return {"kind": "gaussian", "c": m.c, "d": m.d}
    mean, var = mixture_moments(m)
    return {
        "kind": "gmm",
        "label": m.label,
        "components": m.k,
        "d": m.d,
        "mean": mean.tolist(),
        "per_axis_variance": var.tolist(),
    }
