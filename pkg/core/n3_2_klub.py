# notebook 3- 2- klub

# ========================================================
# MARK: STEP 6 — KLUB MONTE-CARLO ESTIMATION (importance sampled)
# ========================================================

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from core.n1_1_schedules import Schedule, require_valid
from core.n1_2_gaussian_oracles import gaussian_klub_interval_integral
from core.n2_1_streams import batch_slices, blocked, default_batch_size, default_workers, stream
from core.n2_2_toy_models import DataModel, Denoiser, draw_points, model_dim

C_IMP = 0.5
TABLE_NODES = 4096
POOL_SIZE = 8192
SAMPLING_KINDS = {"importance", "log_uniform"}


# ========================================================
# TYPES
# ========================================================
@dataclass(frozen=True)
class IntervalTriple:
    t_lo: float
    t_mid: float
    t_hi: float

    def __post_init__(self) -> None:
        if not (0.0 < self.t_lo < self.t_mid < self.t_hi):
            raise ValueError(
                f"❌ Need 0 < t_lo < t_mid < t_hi, got ({self.t_lo}, {self.t_mid}, {self.t_hi})"
            )

    @property
    def knots(self) -> Tuple[float, float, float]:
        return (self.t_lo, self.t_mid, self.t_hi)


@dataclass
class KlubEstimate:
    """
    value is proportional to the KLUB with one global constant shared by
    every estimate (dropped everywhere).
    """

    value: float
    std_error: float
    n_samples: int
    sampling: str = "importance"
    normalizer: Optional[float] = None
    raw_mean: Optional[float] = None
    samples: Optional[pd.DataFrame] = field(default=None, repr=False)
    intervals: Optional[pd.DataFrame] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "sampling": self.sampling,
            "normalizer": self.normalizer,
            "raw_mean": self.raw_mean,
        }


# ========================================================
# 1. Importance density π̃ over a chain of knots
# ========================================================
def _knots_array(knots: Sequence[float]) -> np.ndarray:
    k = np.asarray(knots, dtype=np.float64)
    if len(k) < 2 or not np.all(k > 0) or not np.all(np.diff(k) > 0):
        raise ValueError(f"❌ Knots must be positive and strictly increasing, got {list(knots)}")
    return k


def upper_knot(t: np.ndarray, knots: Sequence[float]) -> np.ndarray:
    """t_up(t): the knot closing the branch that holds t; branches are (k_{j-1}, k_j]."""
    k = _knots_array(knots)
    j = np.clip(np.searchsorted(k, t, side="left"), 1, len(k) - 1)
    return k[j]


def importance_density(
        t: Union[float, np.ndarray],
        triple: Union[IntervalTriple, Sequence[float]],
        c_imp: float = C_IMP,
) -> Union[float, np.ndarray]:
    """
    π̃(t) = (1/t³)(1/(t²+c²) − 1/(t_up(t)²+c²)), unnormalized.

    Rules:
    - defined on [t_lo, t_hi]; zero at t = t_up(t)
    - left branch (t_lo, t_mid] closes at t_mid, right branch at t_hi
    """
    knots = triple.knots if isinstance(triple, IntervalTriple) else tuple(triple)
    k = _knots_array(knots)
    tt = np.asarray(t, dtype=np.float64)
    if np.any(tt < k[0]) or np.any(tt > k[-1]):
        raise ValueError(f"❌ t must lie in [{k[0]}, {k[-1]}], got {t}")

    up = upper_knot(tt, k)
    c2 = c_imp ** 2
    out = (1.0 / tt ** 3) * (1.0 / (tt ** 2 + c2) - 1.0 / (up ** 2 + c2))
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def _antiderivative(t: np.ndarray, u: float, c: float) -> np.ndarray:
    """G(t; u) with G' = π̃ on a branch closing at u, written without 1/t² cancellation."""
    c2 = c ** 2
    return -(u ** 2) / (2.0 * c2 * (u ** 2 + c2) * t ** 2) + np.log1p(c2 / t ** 2) / (2.0 * c2 ** 2)


@dataclass(frozen=True, eq=False)
class ImportanceTable:
    knots: Tuple[float, ...]
    c_imp: float
    nodes: np.ndarray
    cdf: np.ndarray
    branch_mass: np.ndarray
    normalizer: float


@lru_cache(maxsize=128)
def importance_table(knots: Tuple[float, ...], c_imp: float = C_IMP, n_nodes: int = TABLE_NODES) -> ImportanceTable:
    """
    Tabulated CDF of π̃/Z: n_nodes log-uniform nodes per branch.

    Branch masses are exact (closed-form integral), so Z carries no
    quadrature error.
    """
    k = _knots_array(knots)
    mass = np.array([gaussian_klub_interval_integral(k[j], k[j + 1], c_imp) for j in range(len(k) - 1)])
    z = float(mass.sum())

    nodes: List[np.ndarray] = []
    cdf: List[np.ndarray] = []
    offset = 0.0
    for j in range(len(k) - 1):
        lo, hi = k[j], k[j + 1]
        grid = np.geomspace(lo, hi, n_nodes)
        g = _antiderivative(grid, hi, c_imp)
        part = offset + (g - g[0])
        part[-1] = offset + mass[j]
        # drop the shared knot so nodes stay strictly increasing
        start = 0 if j == 0 else 1
        nodes.append(grid[start:])
        cdf.append(part[start:])
        offset += mass[j]

    cdf_all = np.maximum.accumulate(np.concatenate(cdf)) / z
    cdf_all[-1] = 1.0
    return ImportanceTable(
        knots=tuple(float(v) for v in k),
        c_imp=c_imp,
        nodes=np.concatenate(nodes),
        cdf=cdf_all,
        branch_mass=mass,
        normalizer=z,
    )


def _table_for(triple: Union[IntervalTriple, Sequence[float]], c_imp: float) -> ImportanceTable:
    knots = triple.knots if isinstance(triple, IntervalTriple) else tuple(float(v) for v in triple)
    return importance_table(knots, c_imp)


def importance_cdf(t: np.ndarray, triple: Union[IntervalTriple, Sequence[float]], c_imp: float = C_IMP) -> np.ndarray:
    table = _table_for(triple, c_imp)
    return np.interp(t, table.nodes, table.cdf)


def importance_sample(
        triple: Union[IntervalTriple, Sequence[float]],
        rng: np.random.Generator,
        size: Optional[int] = None,
        c_imp: float = C_IMP,
) -> Union[float, np.ndarray]:
    """Inverse-CDF draw(s) from π̃/Z (binary search + linear interpolation on the table)."""
    table = _table_for(triple, c_imp)
    u = rng.random(size)
    t = np.interp(u, table.cdf, table.nodes)
    return float(t) if size is None else t


# ========================================================
# 2. Random inputs (shared across candidates for CRN)
# ========================================================
@dataclass(frozen=True, eq=False)
class KlubDraws:
    """x_0, ε, ε' and the uniform that picks t; reused verbatim across candidates."""

    x0: np.ndarray
    eps: np.ndarray
    eps_up: np.ndarray
    u: np.ndarray

    @property
    def n(self) -> int:
        return int(len(self.u))


def data_pool(model: DataModel, seed: int, size: int = POOL_SIZE) -> np.ndarray:
    """Fixed per-run subset of data samples; estimates resample it with replacement."""
    return draw_points(model, size, stream(seed, "pool"))[0]


def make_draws(
        model: DataModel,
        n_mc: int,
        seed: int,
        *counters: int,
        pool: Optional[np.ndarray] = None,
) -> KlubDraws:
    """Block b comes from stream (seed, klub, *counters, b); growing n_mc keeps the first draws."""
    if int(n_mc) != n_mc or n_mc < 1:
        raise ValueError(f"❌ n_mc must be a positive integer, got {n_mc}")

    d = model_dim(model)

    def draw(rng: np.random.Generator, size: int) -> Tuple[np.ndarray, ...]:
        if pool is not None:
            x0 = pool[rng.integers(0, len(pool), size=size)]
        else:
            x0 = draw_points(model, size, rng)[0]
        return x0, rng.standard_normal((size, d)), rng.standard_normal((size, d)), rng.random(size)

    x0, eps, eps_up, u = blocked(seed, "klub", 0, int(n_mc), draw, *counters)
    return KlubDraws(x0=x0, eps=eps, eps_up=eps_up, u=u)


# ========================================================
# 3. Estimators
# ========================================================
def _gap_sq(
        denoiser: Denoiser,
        x0: np.ndarray,
        eps: np.ndarray,
        eps_up: np.ndarray,
        t: np.ndarray,
        t_up: np.ndarray,
) -> np.ndarray:
    """‖D(x_t, t) − D(x_{t_up}, t_up)‖² along one forward path."""
    x_t = x0 + t[:, None] * eps
    x_up = x_t + np.sqrt(np.maximum(t_up ** 2 - t ** 2, 0.0))[:, None] * eps_up
    gap = denoiser(x_t, t) - denoiser(x_up, t_up)
    return np.sum(gap ** 2, axis=1)


def _estimate_over_knots(
        denoiser: Denoiser,
        knots: Tuple[float, ...],
        draws: KlubDraws,
        *,
        c_imp: float,
        sampling: str,
        keep_samples: bool,
        n_jobs: Optional[int],
        batch_size: Optional[int],
) -> KlubEstimate:
    if sampling not in SAMPLING_KINDS:
        raise ValueError(f"❌ Unknown sampling: {sampling}. Use one of {sorted(SAMPLING_KINDS)}")

    k = _knots_array(knots)

    # ---- 1. pick t per sample
    if sampling == "importance":
        table = importance_table(tuple(float(v) for v in k), c_imp)
        t = np.interp(draws.u, table.cdf, table.nodes)
        normalizer = table.normalizer
    else:
        log_span = math.log(k[-1] / k[0])
        t = k[0] * np.exp(draws.u * log_span)
        normalizer = log_span
    t_up = upper_knot(t, k)

    # ---- 2. denoiser gaps, batched
    slices = batch_slices(draws.n, batch_size or default_batch_size())
    gaps = Parallel(n_jobs=n_jobs or default_workers())(
        delayed(_gap_sq)(denoiser, draws.x0[a:b], draws.eps[a:b], draws.eps_up[a:b], t[a:b], t_up[a:b])
        for a, b in slices
    )
    sq = np.concatenate(gaps)

    # ---- 3. weights
    if sampling == "importance":
        c2 = c_imp ** 2
        denom = 1.0 / (t ** 2 + c2) - 1.0 / (t_up ** 2 + c2)
        w = np.where(denom > 0, sq / np.where(denom > 0, denom, 1.0), 0.0)
    else:
        w = sq / t ** 2
    contrib = normalizer * w

    n = len(contrib)
    std_error = float(np.std(contrib, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    samples = pd.DataFrame({"t": t, "t_up": t_up, "w": w}) if keep_samples else None

    return KlubEstimate(
        value=float(np.mean(contrib)),
        std_error=std_error,
        n_samples=n,
        sampling=sampling,
        normalizer=float(normalizer),
        raw_mean=float(np.mean(w)),
        samples=samples,
    )


def klub_pair_estimate(
        denoiser: Denoiser,
        model: DataModel,
        triple: IntervalTriple,
        n_mc: int,
        seed: int,
        *,
        counters: Sequence[int] = (),
        draws: Optional[KlubDraws] = None,
        pool: Optional[np.ndarray] = None,
        c_imp: float = C_IMP,
        sampling: str = "importance",
        keep_samples: bool = False,
        n_jobs: Optional[int] = None,
        batch_size: Optional[int] = None,
) -> KlubEstimate:
    """
    KLUB(t_lo, t_mid) + KLUB(t_mid, t_hi) as Z · mean(w).

    Flow:
    - x_0 from the pool (or fresh), t from π̃/Z, t_up from the branch
    - x_t = x_0 + t ε,  x_{t_up} = x_t + √(t_up² − t²) ε'
    - w = ‖ΔD‖² / (1/(t²+c²) − 1/(t_up²+c²))

    Passing the same `draws` for different triples gives common random numbers.
    """
    if draws is None:
        draws = make_draws(model, n_mc, seed, *counters, pool=pool)
    return _estimate_over_knots(
        denoiser, triple.knots, draws,
        c_imp=c_imp, sampling=sampling, keep_samples=keep_samples, n_jobs=n_jobs, batch_size=batch_size,
    )


def klub_interval_estimate(
        denoiser: Denoiser,
        model: DataModel,
        t_lo: float,
        t_hi: float,
        n_mc: int,
        seed: int,
        *,
        counters: Sequence[int] = (),
        draws: Optional[KlubDraws] = None,
        pool: Optional[np.ndarray] = None,
        c_imp: float = C_IMP,
        sampling: str = "importance",
        keep_samples: bool = False,
        n_jobs: Optional[int] = None,
        batch_size: Optional[int] = None,
) -> KlubEstimate:
    """Single-interval KLUB(t_lo, t_hi); the density has one branch closing at t_hi."""
    if draws is None:
        draws = make_draws(model, n_mc, seed, *counters, pool=pool)
    return _estimate_over_knots(
        denoiser, (float(t_lo), float(t_hi)), draws,
        c_imp=c_imp, sampling=sampling, keep_samples=keep_samples, n_jobs=n_jobs, batch_size=batch_size,
    )


def klub_schedule_total(
        denoiser: Denoiser,
        model: DataModel,
        s: Schedule,
        n_mc_per_interval: int,
        seed: int,
        *,
        pool: Optional[np.ndarray] = None,
        c_imp: float = C_IMP,
        sampling: str = "importance",
        n_jobs: Optional[int] = None,
        batch_size: Optional[int] = None,
) -> KlubEstimate:
    """
    Σ_i KLUB(t_{i−1}, t_i), interval i on stream counters (i,).

    Std errors combine in quadrature; per-interval rows land in `intervals`.
    """
    require_valid(s)
    t = s.ascending()

    rows = []
    for i in range(1, len(t)):
        est = klub_interval_estimate(
            denoiser, model, t[i - 1], t[i], n_mc_per_interval, seed,
            counters=(i,), pool=pool, c_imp=c_imp, sampling=sampling, n_jobs=n_jobs, batch_size=batch_size,
        )
        rows.append({"t_lo": t[i - 1], "t_hi": t[i], "value": est.value, "std_error": est.std_error})

    intervals = pd.DataFrame(rows)
    return KlubEstimate(
        value=float(intervals["value"].sum()),
        std_error=float(np.sqrt(np.sum(intervals["std_error"] ** 2))),
        n_samples=int(n_mc_per_interval) * len(rows),
        sampling=sampling,
        intervals=intervals,
    )
