# notebook 1- 1- schedules

# ========================================================
# MARK: STEP 1 — SAMPLING SCHEDULES (representation + heuristics)
# ========================================================

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np


# ========================================================
# NOISE RANGE
# ========================================================
@dataclass(frozen=True)
class NoiseSpec:
    sigma_min: float = 0.002
    sigma_max: float = 80.0

    def __post_init__(self) -> None:
        if not (0.0 < self.sigma_min < self.sigma_max):
            raise ValueError(
                f"❌ Invalid noise range: need 0 < sigma_min < sigma_max, "
                f"got ({self.sigma_min}, {self.sigma_max})"
            )


# ========================================================
# SCHEDULE
# ========================================================
@dataclass(frozen=True)
class Schedule:
    """
    Sampling schedule stored in generation order: sigma_n > ... > sigma_0.

    Index i used by the optimizer refers to ascending order (t_0 = sigma_min),
    see `ascending()`.
    """

    sigmas: tuple
    name: str = "custom"

    @property
    def n_steps(self) -> int:
        return len(self.sigmas) - 1

    @property
    def sigma_max(self) -> float:
        return self.sigmas[0]

    @property
    def sigma_min(self) -> float:
        return self.sigmas[-1]

    @property
    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(sigma_min=self.sigma_min, sigma_max=self.sigma_max)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.sigmas, dtype=np.float64)

    def ascending(self) -> np.ndarray:
        return self.as_array()[::-1].copy()

    def with_name(self, name: str) -> "Schedule":
        return Schedule(sigmas=self.sigmas, name=name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "sigmas": list(self.sigmas),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "Schedule":
        missing = {"name", "sigma_min", "sigma_max", "sigmas"} - set(payload)
        if missing:
            raise ValueError(f"❌ Schedule payload missing keys: {sorted(missing)}")

        sched = cls(
            sigmas=tuple(float(v) for v in payload["sigmas"]),
            name=str(payload["name"]),
        )
        problems = validate(
            sched,
            spec=NoiseSpec(float(payload["sigma_min"]), float(payload["sigma_max"])),
        )
        if problems:
            raise ValueError(f"❌ Invalid schedule '{sched.name}': {problems}")
        return sched

    @classmethod
    def from_ascending(cls, t: Sequence[float], name: str = "custom") -> "Schedule":
        return cls(sigmas=tuple(float(v) for v in reversed(list(t))), name=name)


ScheduleLike = Union[Schedule, Sequence[float], np.ndarray]


# ========================================================
# RELEASED SCHEDULES (large-model fixtures, generation order)
# ========================================================
RELEASED_SCHEDULES: Dict[str, List[float]] = {
    "sd15": [14.615, 6.475, 3.861, 2.697, 1.886, 1.396, 0.963, 0.652, 0.399, 0.152, 0.029],
    "sdxl": [14.615, 6.315, 3.771, 2.181, 1.342, 0.862, 0.555, 0.380, 0.234, 0.113, 0.029],
    "deepfloyd_if_stage1": [160.41, 8.081, 3.315, 1.885, 1.207, 0.785, 0.553, 0.293, 0.186, 0.030, 0.006],
    "svd": [700.00, 54.5, 15.886, 7.977, 4.248, 1.789, 0.981, 0.403, 0.173, 0.034, 0.002],
}


def released_schedule(name: str) -> Schedule:
    if name not in RELEASED_SCHEDULES:
        raise ValueError(f"❌ Unknown released schedule: {name}")
    return Schedule(sigmas=tuple(RELEASED_SCHEDULES[name]), name=f"released-{name}")


# ========================================================
# VALIDATION (diagnostic, never raises)
# ========================================================
def validate(s: ScheduleLike, spec: Optional[NoiseSpec] = None) -> List[str]:
    """
    Report every violation of the schedule invariants.

    Checks:
    - at least two values
    - finite and strictly positive
    - strictly decreasing (generation order)
    - endpoints bit-equal to the NoiseSpec (only when one is given)

    Returns an empty list when the schedule is valid.
    """
    values = list(s.sigmas) if isinstance(s, Schedule) else [float(v) for v in s]
    problems: List[str] = []

    if len(values) < 2:
        problems.append(f"needs at least 2 values, got {len(values)}")
        return problems

    for i, v in enumerate(values):
        if not math.isfinite(v):
            problems.append(f"value at index {i} is not finite: {v}")
        elif v <= 0:
            problems.append(f"value at index {i} is not positive: {v}")

    for i in range(len(values) - 1):
        if not values[i] > values[i + 1]:
            problems.append(
                f"not strictly decreasing at index {i}: {values[i]} -> {values[i + 1]}"
            )

    if spec is not None:
        if values[0] != spec.sigma_max:
            problems.append(f"first value {values[0]} != sigma_max {spec.sigma_max}")
        if values[-1] != spec.sigma_min:
            problems.append(f"last value {values[-1]} != sigma_min {spec.sigma_min}")

    return problems


def require_valid(s: Schedule, spec: Optional[NoiseSpec] = None) -> Schedule:
    problems = validate(s, spec)
    if problems:
        raise ValueError(f"❌ Invalid schedule '{s.name}': {problems}")
    return s


def finalize_ascending(ascending: np.ndarray, spec: NoiseSpec, name: str) -> Schedule:
    """Overwrite endpoints with the configured values and check invariants."""
    t = np.asarray(ascending, dtype=np.float64).copy()
    t[0] = spec.sigma_min
    t[-1] = spec.sigma_max
    return require_valid(Schedule.from_ascending(t, name=name), spec)


# ========================================================
# HEURISTIC SCHEDULES
# ========================================================
HEURISTIC_KINDS = {"edm", "logsnr", "time_uniform", "time_quadratic", "log_uniform"}


def edm_sigmas(n: int, spec: NoiseSpec, rho: float) -> np.ndarray:
    """Ascending EDM noise levels (sigma_min^(1/rho) ... sigma_max^(1/rho)) ** rho."""
    ramp = np.arange(n + 1, dtype=np.float64) / n
    lo = spec.sigma_min ** (1.0 / rho)
    hi = spec.sigma_max ** (1.0 / rho)
    return (lo + ramp * (hi - lo)) ** rho


def heuristic_schedule(
        kind: str,
        n: int,
        spec: NoiseSpec,
        *,
        rho: float = 7.0,
        quadratic_in: str = "index",
) -> Schedule:
    """
    Build a hand-crafted schedule with n steps between spec.sigma_min and spec.sigma_max.

    Kinds:
    - edm            : (σ_min^{1/ρ} + (i/n)(σ_max^{1/ρ} − σ_min^{1/ρ}))^ρ
    - logsnr         : edm with ρ = 1
    - time_uniform   : t_i = ε + (i/n)(T − ε) with σ(t) = t, ε = σ_min, T = σ_max
    - time_quadratic : quadratic in the index (ε + (i/n)²(T − ε)) or in sigma
                       (σ_i² linear in i), chosen by `quadratic_in`
    - log_uniform    : geometric spacing (ρ → ∞ limit of edm)
    """
    if kind not in HEURISTIC_KINDS:
        raise ValueError(f"❌ Unknown schedule kind: {kind}. Use one of {sorted(HEURISTIC_KINDS)}")
    if int(n) != n or n < 1:
        raise ValueError(f"❌ Step count must be a positive integer, got {n}")

    n = int(n)
    ramp = np.arange(n + 1, dtype=np.float64) / n
    eps, big_t = spec.sigma_min, spec.sigma_max

    if kind == "edm":
        if not rho > 0:
            raise ValueError(f"❌ rho must be positive, got {rho}")
        t = edm_sigmas(n, spec, rho)
        name = f"edm-rho{rho:g}"
    elif kind == "logsnr":
        t = edm_sigmas(n, spec, 1.0)
        name = "logsnr"
    elif kind == "time_uniform":
        t = eps + ramp * (big_t - eps)
        name = "time-uniform"
    elif kind == "time_quadratic":
        if quadratic_in == "index":
            t = eps + ramp ** 2 * (big_t - eps)
        elif quadratic_in == "sigma":
            t = np.sqrt(eps ** 2 + ramp * (big_t ** 2 - eps ** 2))
        else:
            raise ValueError(f"❌ quadratic_in must be 'index' or 'sigma', got {quadratic_in}")
        name = f"time-quadratic-{quadratic_in}"
    else:
        t = np.exp(math.log(eps) + ramp * (math.log(big_t) - math.log(eps)))
        name = "log-uniform"

    return finalize_ascending(t, spec, name)


# ========================================================
# SUBDIVISION + INTERPOLATION
# ========================================================
def subdivide(s: Schedule) -> Schedule:
    """
    Double the step count by inserting geometric means between neighbours.

    Even indices keep the input values bit-exactly.
    """
    require_valid(s)
    values = s.as_array()

    out = np.empty(2 * len(values) - 1, dtype=np.float64)
    out[0::2] = values
    out[1::2] = np.sqrt(values[:-1] * values[1:])

    return require_valid(Schedule(sigmas=tuple(float(v) for v in out), name=s.name))


def interpolate(s: Schedule, m: int) -> Schedule:
    """
    Resample a schedule to m steps treating (i/n, log σ_i) as piecewise linear.

    Abscissae j/m that land on a knot reuse the stored value exactly, so
    interpolate(s, s.n_steps) returns s and endpoints never drift.
    """
    if int(m) != m or m < 1:
        raise ValueError(f"❌ Target step count must be a positive integer, got {m}")
    require_valid(s)

    m = int(m)
    n = s.n_steps
    if m == n:
        return s

    values = s.as_array()
    logs = np.log(values)

    j = np.arange(m + 1)
    k = (j * n) // m
    rem = (j * n) % m

    out = values[np.minimum(k, n)].copy()
    inner = rem > 0
    frac = rem[inner] / m
    out[inner] = np.exp((1.0 - frac) * logs[k[inner]] + frac * logs[k[inner] + 1])

    out[0] = values[0]
    out[-1] = values[-1]
    return require_valid(Schedule(sigmas=tuple(float(v) for v in out), name=s.name))
