# notebook 3- 3- optimizer

# ========================================================
# MARK: STEP 7 — SCHEDULE OPTIMIZATION (coordinate descent on KLUB)
# ========================================================

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, NonNegativeInt, PositiveFloat, PositiveInt, field_validator, model_validator

from core.n1_1_schedules import (
    HEURISTIC_KINDS,
    NoiseSpec,
    Schedule,
    heuristic_schedule,
    interpolate,
    require_valid,
    subdivide,
)
from core.n1_2_gaussian_oracles import IsoGaussian, gaussian_euler_kl, gaussian_klub_interval_integral
from core.n2_1_streams import default_workers
from core.n2_2_toy_models import DataModel, make_denoiser, nll_summary
from core.n3_1_solvers import parse_solver_kind, run_sampler
from core.n3_2_klub import (
    C_IMP,
    POOL_SIZE,
    IntervalTriple,
    KlubDraws,
    data_pool,
    klub_pair_estimate,
    klub_schedule_total,
    make_draws,
)

STAGE_STEPS = (10, 20, 40)
OPTIMIZED_NAME = "ays-optimized"

Monitor = Callable[[Schedule], float]


# ========================================================
# CONFIG
# ========================================================
class OptimizerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_candidates: PositiveInt = 11
    span: float = 0.9
    n_mc: PositiveInt = 8192
    max_sweeps: PositiveInt = 30
    refine_sweeps: PositiveInt = 5
    early_stop_every: PositiveInt = 1
    monitor_samples: PositiveInt = 20_000
    monitor_solver: str = "sde_dpmpp_2m"
    seed: NonNegativeInt = 0
    parallel_sweep: bool = False
    pool_size: Optional[PositiveInt] = POOL_SIZE
    c_imp: PositiveFloat = C_IMP
    objective: Literal["monte_carlo", "closed_form"] = "monte_carlo"
    init_kind: str = "edm"
    init_rho: PositiveFloat = 7.0
    sigma_min: PositiveFloat = 0.002
    sigma_max: PositiveFloat = 80.0
    n_jobs: Optional[int] = None

    @field_validator("n_candidates")
    @classmethod
    def _odd_candidates(cls, v: int) -> int:
        if v < 3 or v % 2 == 0:
            raise ValueError(f"n_candidates must be odd and >= 3, got {v}")
        return v

    @field_validator("span")
    @classmethod
    def _span_range(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"span must lie in (0, 1), got {v}")
        return v

    @field_validator("init_kind")
    @classmethod
    def _known_init(cls, v: str) -> str:
        if v not in HEURISTIC_KINDS:
            raise ValueError(f"init_kind must be one of {sorted(HEURISTIC_KINDS)}, got {v}")
        return v

    @field_validator("monitor_solver")
    @classmethod
    def _known_solver(cls, v: str) -> str:
        parse_solver_kind(v)
        return v

    @model_validator(mode="after")
    def _noise_range(self) -> "OptimizerConfig":
        NoiseSpec(self.sigma_min, self.sigma_max)
        return self

    @property
    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(self.sigma_min, self.sigma_max)


def load_optimizer_config(path: Union[str, Path, None]) -> OptimizerConfig:
    if path is None:
        return OptimizerConfig()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"❌ Optimizer config not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"❌ Optimizer config is not valid JSON: {path} ({exc})") from exc
    return OptimizerConfig.model_validate(payload)


# ========================================================
# REPORT
# ========================================================
@dataclass
class OptimizationReport:
    sweeps: List[Dict[str, Any]] = field(default_factory=list)
    stopping: Dict[str, str] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    wall_clock_s: float = 0.0
    klub_denoiser_evals: int = 0
    monitor_denoiser_evals: int = 0
    final_schedule: Optional[Schedule] = None

    def log_sweep(self, stage: int, sweep: int, klub_total: float, monitor: Optional[float], moved: int) -> None:
        self.sweeps.append(
            {"stage": stage, "sweep": sweep, "klub_total": klub_total, "monitor": monitor, "moved": moved}
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sweeps": self.sweeps,
            "stopping": self.stopping,
            "warnings": self.warnings,
            "wall_clock_s": self.wall_clock_s,
            "nfe": {
                "klub": self.klub_denoiser_evals,
                "monitor": self.monitor_denoiser_evals,
                "total": self.klub_denoiser_evals + self.monitor_denoiser_evals,
            },
            "final_schedule": None if self.final_schedule is None else self.final_schedule.to_dict(),
        }


# ========================================================
# KLUB CONTEXTS (what the optimizer minimizes)
# ========================================================
class ClosedFormKlub:
    """
    Exact KLUB for N(0, c² I_d) data: d c⁴ Σ ∫ (1/t³)(1/(t²+c²) − 1/(t_i²+c²)) dt.

    Same scale as the Monte-Carlo estimate; no randomness.
    """

    def __init__(self, c: float, d: int = 1) -> None:
        self.c = c
        self.d = d
        self.denoiser_evals = 0

    def _interval(self, lo: float, hi: float) -> float:
        return self.d * self.c ** 4 * gaussian_klub_interval_integral(lo, hi, self.c)

    def pair_values(self, t: np.ndarray, i: int, candidates: np.ndarray) -> np.ndarray:
        return np.array([self._interval(t[i - 1], x) + self._interval(x, t[i + 1]) for x in candidates])

    def total(self, s: Schedule) -> float:
        t = s.ascending()
        return float(sum(self._interval(t[j - 1], t[j]) for j in range(1, len(t))))


class MonteCarloKlub:
    """
    Importance-sampled KLUB with common random numbers.

    Rules:
    - one pool of data samples per run (pool_size, resampled with replacement)
    - draws for index i are keyed on (stage, i) and reused by every
      candidate and every sweep of that stage
    """

    def __init__(
            self,
            model: DataModel,
            *,
            n_mc: int,
            seed: int,
            stage: int = 1,
            pool: Optional[np.ndarray] = None,
            c_imp: float = C_IMP,
            n_jobs: Optional[int] = None,
    ) -> None:
        self.model = model
        self.denoiser = make_denoiser(model)
        self.n_mc = n_mc
        self.seed = seed
        self.stage = stage
        self.pool = pool
        self.c_imp = c_imp
        self.n_jobs = n_jobs
        self.denoiser_evals = 0
        self._draws: Dict[int, KlubDraws] = {}
        # parallel sweeps share one context across threads
        self._lock = threading.Lock()

    def draws_for(self, i: int) -> KlubDraws:
        with self._lock:
            if i not in self._draws:
                self._draws[i] = make_draws(self.model, self.n_mc, self.seed, self.stage, i, pool=self.pool)
            return self._draws[i]

    def pair_values(self, t: np.ndarray, i: int, candidates: np.ndarray) -> np.ndarray:
        draws = self.draws_for(i)
        out = np.array([
            klub_pair_estimate(
                self.denoiser, self.model, IntervalTriple(t[i - 1], float(x), t[i + 1]), self.n_mc, self.seed,
                draws=draws, c_imp=self.c_imp, n_jobs=self.n_jobs,
            ).value
            for x in candidates
        ])
        with self._lock:
            self.denoiser_evals += 2 * self.n_mc * len(candidates)
        return out

    def total(self, s: Schedule) -> float:
        est = klub_schedule_total(
            self.denoiser, self.model, s, self.n_mc, self.seed,
            pool=self.pool, c_imp=self.c_imp, n_jobs=self.n_jobs,
        )
        with self._lock:
            self.denoiser_evals += 2 * self.n_mc * s.n_steps
        return est.value


KlubContext = Union[ClosedFormKlub, MonteCarloKlub]


def build_context(model: DataModel, cfg: OptimizerConfig, *, stage: int = 1, pool: Optional[np.ndarray] = None) -> KlubContext:
    if cfg.objective == "closed_form":
        if not isinstance(model, IsoGaussian):
            raise ValueError("❌ closed_form objective is only available for the Gaussian model")
        return ClosedFormKlub(model.c, model.d)
    return MonteCarloKlub(model, n_mc=cfg.n_mc, seed=cfg.seed, stage=stage, pool=pool, c_imp=cfg.c_imp, n_jobs=cfg.n_jobs)


# ========================================================
# 1. Single index update
# ========================================================
def candidate_grid(t_prev: float, t_cur: float, t_next: float, n_candidates: int, span: float) -> np.ndarray:
    """
    n_candidates − 1 log-uniform points over the span-restricted open interval,
    then the current value (last).
    """
    lo = t_prev * (t_cur / t_prev) ** (1.0 - span)
    hi = t_next * (t_cur / t_next) ** (1.0 - span)
    return np.append(np.geomspace(lo, hi, n_candidates - 1), t_cur)


def _check_interior(t: np.ndarray, i: int) -> None:
    if not 1 <= i <= len(t) - 2:
        raise ValueError(f"❌ Interior index must be in [1, {len(t) - 2}], got {i}")


def _best_candidate(t: np.ndarray, i: int, cfg: OptimizerConfig, ctx: KlubContext) -> Tuple[float, bool]:
    candidates = candidate_grid(t[i - 1], t[i], t[i + 1], cfg.n_candidates, cfg.span)
    values = ctx.pair_values(t, i, candidates)
    best = int(np.argmin(values))
    # current value (last) wins ties
    if values[best] < values[-1]:
        return float(candidates[best]), True
    return float(t[i]), False


def optimize_index(s: Schedule, i: int, cfg: OptimizerConfig, ctx: KlubContext) -> Tuple[Schedule, bool]:
    """Move ascending index i to its best candidate; returns (schedule, moved)."""
    t = s.ascending()
    _check_interior(t, i)

    value, moved = _best_candidate(t, i, cfg, ctx)
    if not moved:
        return s, False
    t[i] = value
    return require_valid(Schedule.from_ascending(t, name=s.name)), True


# ========================================================
# 2. Sweeps
# ========================================================
def sweep(
        s: Schedule,
        cfg: OptimizerConfig,
        ctx: KlubContext,
        *,
        indices: Optional[Sequence[int]] = None,
) -> Tuple[Schedule, bool]:
    """
    One pass over the interior indices (ascending order).

    Modes:
    - serial   : Gauss-Seidel, each index sees the previous updates
    - parallel : odd indices against one snapshot, then even indices against
                 the next; indices in one class never share an interval, so
                 each class is dispatched to joblib threads at once
    """
    t = s.ascending()
    todo = list(range(1, len(t) - 1)) if indices is None else list(indices)
    for i in todo:
        _check_interior(t, i)

    changed = False
    if cfg.parallel_sweep:
        for parity in (1, 0):
            color = [i for i in todo if i % 2 == parity]
            snapshot = t.copy()
            updates = Parallel(n_jobs=cfg.n_jobs or default_workers(), prefer="threads")(
                delayed(_best_candidate)(snapshot, i, cfg, ctx) for i in color
            )
            for i, (value, moved) in zip(color, updates):
                t[i] = value
                changed = changed or moved
    else:
        for i in todo:
            value, moved = _best_candidate(t, i, cfg, ctx)
            t[i] = value
            changed = changed or moved

    if not changed:
        return s, False
    return require_valid(Schedule.from_ascending(t, name=s.name)), True


# ========================================================
# 3. Monitors + early stopping
# ========================================================
def make_monitor(model: DataModel, cfg: OptimizerConfig, report: Optional[OptimizationReport] = None) -> Monitor:
    """
    Output-quality monitor with a fixed seed.

    - Gaussian: closed-form KL of n-step Euler
    - mixture : NLL of monitor_samples sampler outputs
    """
    if isinstance(model, IsoGaussian):
        return lambda s: gaussian_euler_kl(s, model.c, model.d)[1]

    solver = parse_solver_kind(cfg.monitor_solver)

    def monitor(s: Schedule) -> float:
        run = run_sampler(model, solver, s, cfg.monitor_samples, cfg.seed, n_jobs=cfg.n_jobs)
        if report is not None:
            report.monitor_denoiser_evals += cfg.monitor_samples * run.nfe
        return nll_summary(model, run.samples)[0]

    return monitor


def run_sweeps(
        s0: Schedule,
        cfg: OptimizerConfig,
        ctx: KlubContext,
        *,
        max_sweeps: int,
        stage: int,
        report: OptimizationReport,
        monitor: Optional[Monitor] = None,
        every: int = 1,
        indices: Optional[Sequence[int]] = None,
        verbose: bool = False,
) -> Schedule:
    """
    Repeat sweeps until nothing moves or max_sweeps is hit.

    With a monitor: evaluated at the start, every `every` sweeps and at the
    last sweep; the best-scoring schedule is returned.
    """
    s = s0
    best_s, best_m = s0, None
    if monitor is not None:
        best_m = monitor(s0)
    report.log_sweep(stage, 0, ctx.total(s0), best_m, 0)

    reason = "max_sweeps"
    for k in range(1, max_sweeps + 1):
        before = s.ascending()
        s, changed = sweep(s, cfg, ctx, indices=indices)
        moved = int(np.sum(s.ascending() != before))
        last = (not changed) or k == max_sweeps

        m = None
        if monitor is not None and (k % every == 0 or last):
            m = monitor(s)
            if m < best_m:
                best_s, best_m = s, m

        total = ctx.total(s)
        report.log_sweep(stage, k, total, m, moved)
        if verbose:
            shown = "-" if m is None else f"{m:.6g}"
            print(f"   stage {stage} sweep {k:>2}: klub={total:.6g} monitor={shown} moved={moved}")

        if not changed:
            reason = "converged"
            break

    if reason == "max_sweeps":
        msg = f"stage {stage} hit max_sweeps={max_sweeps} before converging"
        report.warnings.append(msg)
        if verbose:
            print(f"⚠️ {msg}")

    report.stopping[f"stage{stage}"] = reason if monitor is None else f"{reason}; best monitor {best_m:.6g}"
    return s if monitor is None else best_s


def optimize_with_early_stop(
        s0: Schedule,
        cfg: OptimizerConfig,
        model: DataModel,
        *,
        ctx: Optional[KlubContext] = None,
        monitor: Optional[Monitor] = None,
        report: Optional[OptimizationReport] = None,
        verbose: bool = False,
) -> Tuple[Schedule, OptimizationReport]:
    """Stage-1 optimization of every interior point, keeping the best monitored schedule."""
    require_valid(s0)
    report = report or OptimizationReport()
    started = time.perf_counter()

    ctx = ctx or build_context(model, cfg, stage=1, pool=_pool_for(model, cfg))
    monitor = monitor or make_monitor(model, cfg, report)

    out = run_sweeps(
        s0, cfg, ctx,
        max_sweeps=cfg.max_sweeps, stage=1, report=report,
        monitor=monitor, every=cfg.early_stop_every, verbose=verbose,
    )
    report.klub_denoiser_evals += ctx.denoiser_evals
    report.wall_clock_s += time.perf_counter() - started
    report.final_schedule = out.with_name(OPTIMIZED_NAME)
    return report.final_schedule, report


def _pool_for(model: DataModel, cfg: OptimizerConfig) -> Optional[np.ndarray]:
    if cfg.objective != "monte_carlo" or cfg.pool_size is None:
        return None
    return data_pool(model, cfg.seed, cfg.pool_size)


# ========================================================
# 4. Hierarchy 10 -> 20 -> 40
# ========================================================
@dataclass
class HierarchyResult:
    schedules: Dict[int, Schedule]
    report: OptimizationReport


def verify_frozen(coarse: Schedule, fine: Schedule) -> None:
    """Even indices of the refined schedule must equal the coarse one bit for bit."""
    if fine.n_steps != 2 * coarse.n_steps or fine.sigmas[0::2] != coarse.sigmas:
        raise RuntimeError(
            f"❌ Frozen-point check failed between {coarse.n_steps}- and {fine.n_steps}-step schedules"
        )


def hierarchical_optimize(
        model: DataModel,
        cfg: OptimizerConfig,
        init_kind: Optional[str] = None,
        *,
        verbose: bool = False,
) -> HierarchyResult:
    """
    Flow:
    - stage 1: 10-step init (init_kind), all interior points, early stopping
    - stage 2: subdivide, optimize new (odd) points only, no early stopping
    - stage 3: same again to 40 steps
    """
    kind = init_kind or cfg.init_kind
    if kind not in HEURISTIC_KINDS:
        raise ValueError(f"❌ Unknown init kind: {kind}. Use one of {sorted(HEURISTIC_KINDS)}")

    report = OptimizationReport()
    started = time.perf_counter()
    pool = _pool_for(model, cfg)

    # ---- stage 1
    s0 = heuristic_schedule(kind, STAGE_STEPS[0], cfg.noise_spec, rho=cfg.init_rho)
    stage1, _ = optimize_with_early_stop(
        s0, cfg, model, ctx=build_context(model, cfg, stage=1, pool=pool), report=report, verbose=verbose,
    )
    schedules = {STAGE_STEPS[0]: stage1}

    # ---- stages 2, 3
    prev = stage1
    for stage, steps in enumerate(STAGE_STEPS[1:], start=2):
        fine = subdivide(prev)
        ctx = build_context(model, cfg, stage=stage, pool=pool)
        odd = list(range(1, steps, 2))
        fine = run_sweeps(
            fine, cfg, ctx,
            max_sweeps=cfg.refine_sweeps, stage=stage, report=report, indices=odd, verbose=verbose,
        ).with_name(OPTIMIZED_NAME)
        report.klub_denoiser_evals += ctx.denoiser_evals
        verify_frozen(prev, fine)
        schedules[steps] = fine
        prev = fine

    report.wall_clock_s = time.perf_counter() - started
    report.final_schedule = prev
    return HierarchyResult(schedules=schedules, report=report)


def schedule_for_steps(results: Union[HierarchyResult, Dict[int, Schedule]], m: int) -> Schedule:
    """Stage output for m in {10, 20, 40}; otherwise log-linear interpolation of the 40-step one."""
    if int(m) != m or m < 1:
        raise ValueError(f"❌ Step count must be a positive integer, got {m}")
    schedules = results.schedules if isinstance(results, HierarchyResult) else results
    if m in schedules:
        return schedules[m]
    return interpolate(schedules[STAGE_STEPS[-1]], int(m))
