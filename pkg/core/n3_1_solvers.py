# notebook 3- 1- solvers

# ========================================================
# MARK: STEP 5 — VE SAMPLERS (s(t) = 1, σ(t) = t)
# ========================================================

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from core.n1_1_schedules import Schedule, require_valid
from core.n2_1_streams import batch_slices, blocked, default_batch_size, default_workers
from core.n2_2_toy_models import DataModel, draw_points, ideal_denoiser, model_dim

# (σ_prev, D_prev) of the previous step, None on the first step
History = Optional[Tuple[float, np.ndarray]]

SOLVER_TAGS = {"ddim", "stochastic_ddim", "er_sde_lambda", "dpmpp_2m", "sde_dpmpp_2m"}
STOCHASTIC_TAGS = {"stochastic_ddim", "er_sde_lambda", "sde_dpmpp_2m"}
PRIOR_KINDS = {"gaussian", "marginal"}


# ========================================================
# SOLVER KIND
# ========================================================
@dataclass(frozen=True)
class SolverKind:
    tag: str
    lam: Optional[float] = None

    def __post_init__(self) -> None:
        if self.tag not in SOLVER_TAGS:
            raise ValueError(f"❌ Unknown solver: {self.tag}. Use one of {sorted(SOLVER_TAGS)}")
        if self.tag == "er_sde_lambda":
            if self.lam is None or not self.lam > 0 or not math.isfinite(self.lam):
                raise ValueError(f"❌ er_sde_lambda needs a finite lambda > 0, got {self.lam}")
        elif self.lam is not None:
            raise ValueError(f"❌ Solver {self.tag} takes no lambda")

    @property
    def stochastic(self) -> bool:
        return self.tag in STOCHASTIC_TAGS

    @property
    def multistep(self) -> bool:
        return self.tag in {"dpmpp_2m", "sde_dpmpp_2m"}

    @property
    def label(self) -> str:
        return f"er_sde:{self.lam:g}" if self.tag == "er_sde_lambda" else self.tag


def parse_solver_kind(text: str) -> SolverKind:
    """
    Accepts: ddim, stochastic_ddim, er_sde:<λ> (or er_sde_lambda:<λ>),
    dpmpp_2m, sde_dpmpp_2m. Hyphens and underscores are interchangeable.
    """
    raw = text.strip().lower().replace("-", "_")
    if ":" in raw:
        head, _, value = raw.partition(":")
        if head not in {"er_sde", "er_sde_lambda"}:
            raise ValueError(f"❌ Only er_sde takes a parameter, got '{text}'")
        try:
            lam = float(value)
        except ValueError as exc:
            raise ValueError(f"❌ Bad lambda in solver '{text}'") from exc
        return SolverKind("er_sde_lambda", lam)

    if raw in {"er_sde", "er_sde_lambda"}:
        raise ValueError(f"❌ er_sde needs a lambda, e.g. 'er_sde:0.5', got '{text}'")
    return SolverKind(raw)


@dataclass
class SolverState:
    x: np.ndarray
    history: History = None
    step: int = 0


# ========================================================
# 1. Single-step updates
# ========================================================
def _check_levels(b: float, a: float) -> None:
    if not (0 < a < b):
        raise ValueError(f"❌ Step must go down in noise: need 0 < a < b, got a={a}, b={b}")


def _exponential_step(
        x: np.ndarray,
        b: float,
        a: float,
        d_b: np.ndarray,
        lam: float,
        z: Optional[np.ndarray],
) -> np.ndarray:
    """Exact step of the linearized λ-SDE with the denoiser frozen at d_b."""
    ratio = a / b
    decay = ratio ** (lam ** 2 + 1.0)
    out = decay * x + (1.0 - decay) * d_b
    if lam > 0:
        if z is None:
            raise ValueError("❌ Stochastic step needs a noise vector z")
        out = out + a * math.sqrt(1.0 - ratio ** (2.0 * lam ** 2)) * z
    return out


def step_ddim(x: np.ndarray, b: float, a: float, d_b: np.ndarray) -> np.ndarray:
    _check_levels(b, a)
    return _exponential_step(x, b, a, d_b, 0.0, None)


def step_er_sde_lambda(
        x: np.ndarray,
        b: float,
        a: float,
        d_b: np.ndarray,
        lam: float,
        z: np.ndarray,
) -> np.ndarray:
    """x' = r^{λ²+1} x + (1 − r^{λ²+1}) D_b + a √(1 − r^{2λ²}) z,  r = a/b."""
    _check_levels(b, a)
    if not lam > 0:
        raise ValueError(f"❌ lambda must be positive, got {lam}")
    return _exponential_step(x, b, a, d_b, lam, z)


def extrapolated_denoised(b: float, a: float, d_b: np.ndarray, history: History) -> np.ndarray:
    """
    Second-order data prediction of the 2M solvers.

    D̂ = (1 + 1/(2r)) D_b − (1/(2r)) D_prev with
    r = (log σ_prev − log b) / (log b − log a); D̂ = D_b without history.
    """
    if history is None:
        return d_b

    sigma_prev, d_prev = history
    if not sigma_prev > b:
        raise ValueError(f"❌ History level must exceed current level: σ_prev={sigma_prev}, b={b}")

    r = (math.log(sigma_prev) - math.log(b)) / (math.log(b) - math.log(a))
    return (1.0 + 1.0 / (2.0 * r)) * d_b - (1.0 / (2.0 * r)) * d_prev


def step_dpmpp_2m(x: np.ndarray, b: float, a: float, d_b: np.ndarray, history: History) -> np.ndarray:
    _check_levels(b, a)
    return _exponential_step(x, b, a, extrapolated_denoised(b, a, d_b, history), 0.0, None)


def step_sde_dpmpp_2m(
        x: np.ndarray,
        b: float,
        a: float,
        d_b: np.ndarray,
        history: History,
        z: np.ndarray,
) -> np.ndarray:
    _check_levels(b, a)
    return _exponential_step(x, b, a, extrapolated_denoised(b, a, d_b, history), 1.0, z)


def solver_step(
        kind: SolverKind,
        x: np.ndarray,
        b: float,
        a: float,
        d_b: np.ndarray,
        history: History = None,
        z: Optional[np.ndarray] = None,
) -> np.ndarray:
    if kind.tag == "ddim":
        return step_ddim(x, b, a, d_b)
    if kind.tag == "stochastic_ddim":
        return step_er_sde_lambda(x, b, a, d_b, 1.0, z)
    if kind.tag == "er_sde_lambda":
        return step_er_sde_lambda(x, b, a, d_b, kind.lam, z)
    if kind.tag == "dpmpp_2m":
        return step_dpmpp_2m(x, b, a, d_b, history)
    return step_sde_dpmpp_2m(x, b, a, d_b, history, z)


# ========================================================
# 2. Sampling loop
# ========================================================
@dataclass
class SamplerRun:
    samples: np.ndarray
    nfe: int
    solver: str
    schedule: str
    trace: Optional[pd.DataFrame] = field(default=None)


def draw_prior(
        model: DataModel,
        size: int,
        sigma_max: float,
        rng: np.random.Generator,
        prior: str = "gaussian",
) -> np.ndarray:
    """N(0, σ_max² I), or the exact marginal p(x; σ_max) when prior='marginal'."""
    d = model_dim(model)
    if prior == "gaussian":
        return sigma_max * rng.standard_normal((size, d))
    if prior == "marginal":
        x0, _ = draw_points(model, size, rng)
        return x0 + sigma_max * rng.standard_normal((size, d))
    raise ValueError(f"❌ Unknown prior: {prior}. Use one of {sorted(PRIOR_KINDS)}")


def _run_batch(
        model: DataModel,
        kind: SolverKind,
        sigmas: np.ndarray,
        start: int,
        stop: int,
        seed: int,
        prior: str,
) -> Tuple[np.ndarray, np.ndarray]:
    """Samples [start, stop) and per-step [sum |x|, sum |D|]."""
    d = model_dim(model)
    x_max = blocked(seed, "prior", start, stop, lambda rng, size: draw_prior(model, size, float(sigmas[0]), rng, prior))
    state = SolverState(x=x_max)
    sums = np.zeros((len(sigmas) - 1, 2))

    for i in range(len(sigmas) - 1):
        b, a = float(sigmas[i]), float(sigmas[i + 1])
        d_b = ideal_denoiser(model, state.x, b)
        z = None
        if kind.stochastic:
            z = blocked(seed, "solver", start, stop, lambda rng, size: rng.standard_normal((size, d)), i)

        state.x = solver_step(kind, state.x, b, a, d_b, state.history if kind.multistep else None, z)
        state.history = (b, d_b)
        state.step = i + 1

        sums[i, 0] = np.abs(state.x).sum()
        sums[i, 1] = np.abs(d_b).sum()

    return state.x, sums


def run_sampler(
        model: DataModel,
        kind: SolverKind,
        s: Schedule,
        n: int,
        seed: int,
        *,
        batch_size: Optional[int] = None,
        n_jobs: Optional[int] = None,
        prior: str = "gaussian",
        trace: bool = False,
        show_progress: bool = False,
) -> SamplerRun:
    """
    Integrate from σ_max down to σ_min with one denoiser call per step.

    Flow:
    - x ~ prior, block b from stream (seed, prior, b)
    - steps σ_n -> ... -> σ_0, noise from stream (seed, solver, step, b)
    - no extra denoising at σ_min

    Output depends on neither n_jobs nor batch_size.
    """
    require_valid(s)
    if int(n) != n or n < 1:
        raise ValueError(f"❌ Sample count must be a positive integer, got {n}")
    if prior not in PRIOR_KINDS:
        raise ValueError(f"❌ Unknown prior: {prior}. Use one of {sorted(PRIOR_KINDS)}")

    sigmas = s.as_array()
    slices = batch_slices(int(n), batch_size or default_batch_size())
    jobs = (
        delayed(_run_batch)(model, kind, sigmas, start, stop, seed, prior)
        for start, stop in slices
    )
    if show_progress:
        jobs = tqdm(jobs, total=len(slices), desc=f"Sampling {kind.label}", unit="batch")

    results: List[Tuple[np.ndarray, np.ndarray]] = Parallel(n_jobs=n_jobs or default_workers())(jobs)

    samples = np.concatenate([r[0] for r in results], axis=0)
    trace_df = None
    if trace:
        totals = np.sum([r[1] for r in results], axis=0) / samples.size
        trace_df = pd.DataFrame(
            {
                "step": np.arange(1, len(sigmas)),
                "sigma_from": sigmas[:-1],
                "sigma_to": sigmas[1:],
                "mean_abs_x": totals[:, 0],
                "mean_abs_d": totals[:, 1],
            }
        )

    return SamplerRun(samples=samples, nfe=s.n_steps, solver=kind.label, schedule=s.name, trace=trace_df)

