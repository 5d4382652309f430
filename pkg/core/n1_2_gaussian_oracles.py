# notebook 1- 2- gaussian oracles

# ========================================================
# MARK: STEP 2 — CLOSED FORMS FOR ISOTROPIC GAUSSIAN DATA
# ========================================================

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.n1_1_schedules import NoiseSpec, Schedule, finalize_ascending, edm_sigmas, require_valid


@dataclass(frozen=True)
class IsoGaussian:
    """p_data = N(0, c² I_d)."""

    c: float = 1.0
    d: int = 1

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"❌ Gaussian std c must be positive, got {self.c}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"❌ Dimension d must be a positive integer, got {self.d}")


# ========================================================
# 1. Score
# ========================================================
def gaussian_score(x: np.ndarray, t: float, c: float) -> np.ndarray:
    if t < 0:
        raise ValueError(f"❌ Noise level must be non-negative, got {t}")
    return -np.asarray(x, dtype=np.float64) / (c ** 2 + t ** 2)


def gaussian_entropy(c: float, d: int) -> float:
    """Differential entropy of N(0, c² I_d) in nats."""
    return 0.5 * d * (1.0 + math.log(2.0 * math.pi * c ** 2))


# ========================================================
# 2. KL-optimal schedule for n-step Euler
# ========================================================
def gaussian_optimal_schedule(n: int, spec: NoiseSpec, c: float) -> Schedule:
    """
    Schedule minimizing the KL between exact and n-step Euler outputs.

    arctan(t_i / c) is linear in i between arctan(t_min / c) and arctan(t_max / c).
    """
    if int(n) != n or n < 1:
        raise ValueError(f"❌ Step count must be a positive integer, got {n}")

    ramp = np.arange(int(n) + 1, dtype=np.float64) / n
    a_lo = math.atan(spec.sigma_min / c)
    a_hi = math.atan(spec.sigma_max / c)
    t = c * np.tan((1.0 - ramp) * a_lo + ramp * a_hi)

    return finalize_ascending(t, spec, f"gaussian-optimal-c{c:g}")


def kl_stationarity_residual(s: Schedule, c: float) -> np.ndarray:
    """
    |t_i − t_i*| / t_i for each interior point, where t_i* solves the
    KL-optimal recursion given the neighbours t_{i−1}, t_{i+1}.
    """
    t = s.ascending()
    lo, hi, mid = t[:-2], t[2:], t[1:-1]
    target = ((lo * hi - c ** 2) + np.sqrt((lo ** 2 + c ** 2) * (hi ** 2 + c ** 2))) / (lo + hi)
    return np.abs(mid - target) / mid


# ========================================================
# 3. Exact KL of n-step Euler
# ========================================================
def gaussian_euler_log_f(s: Schedule, c: float) -> float:
    """log f(t_0, ..., t_n), summed in log-space to stay finite at sigma_max = 80."""
    t = s.ascending()
    c2 = c ** 2
    log_num = (
        math.log(t[0] ** 2 + c2)
        + math.log(t[-1] ** 2 + c2)
        + 2.0 * float(np.sum(np.log(t[1:-1] ** 2 + c2)))
    )
    log_den = 2.0 * float(np.sum(np.log(t[:-1] * t[1:] + c2)))
    return log_num - log_den


def gaussian_euler_kl(s: Schedule, c: float, d: int) -> Tuple[float, float]:
    """
    KL( N(0,(t_0²+c²)I) || n-step Euler output ) for N(0, c² I_d) data.

    Returns (f, kl) with kl = (d/2)(−log f + f − 1).
    """
    require_valid(s)
    log_f = gaussian_euler_log_f(s, c)
    f = math.exp(log_f)
    # f − 1 − log f without cancellation when f is close to 1
    kl = 0.5 * d * (math.expm1(log_f) - log_f)
    return f, max(kl, 0.0)


def gaussian_euler_output_variance(s: Schedule, c: float) -> float:
    """Per-dimension variance of n-step Euler outputs started from N(0, (t_max²+c²) I)."""
    t = s.ascending()
    c2 = c ** 2
    log_gain = float(np.sum(np.log((t[:-1] * t[1:] + c2) / (t[1:] ** 2 + c2))))
    return math.exp(2.0 * log_gain) * (t[-1] ** 2 + c2)


def euler_step_gain(a: float, b: float, c: float) -> float:
    """One Euler/DDIM step b -> a on Gaussian data multiplies x by this factor."""
    return (a * b + c ** 2) / (b ** 2 + c ** 2)


# ========================================================
# 4. KLUB in closed form
# ========================================================
def gaussian_klub_closed_form(s: Schedule, c: float) -> float:
    """
    Total KLUB of a schedule for Gaussian data, up to the global constant:

        log((b²+c²)/(a²+c²)) − log(b²/a²) + c² Σ (t_i² − t_{i−1}²) / ((c² + t_i²) t_{i−1}²)
    """
    require_valid(s)
    t = s.ascending()
    a, b = t[0], t[-1]
    c2 = c ** 2

    head = math.log((b ** 2 + c2) / (a ** 2 + c2)) - 2.0 * math.log(b / a)
    terms = c2 * (t[1:] ** 2 - t[:-1] ** 2) / ((c2 + t[1:] ** 2) * t[:-1] ** 2)
    return head + float(np.sum(terms))


def klub_sum_term(s: Schedule, c: float) -> float:
    t = s.ascending()
    c2 = c ** 2
    return float(np.sum(c2 * (t[1:] ** 2 - t[:-1] ** 2) / ((c2 + t[1:] ** 2) * t[:-1] ** 2)))


def gaussian_klub_interval_integral(t_lo: float, t_hi: float, c: float) -> float:
    """
    ∫_{t_lo}^{t_hi} (1/t³) (1/(t²+c²) − 1/(t_hi²+c²)) dt, exactly.

    Times c⁴·d this is the interval KLUB integrand integrated under Gaussian data.
    """
    if not (0 < t_lo < t_hi):
        raise ValueError(f"❌ Need 0 < t_lo < t_hi, got ({t_lo}, {t_hi})")
    c2 = c ** 2
    bracket = (
        c2 * (t_hi ** 2 - t_lo ** 2) / (t_lo ** 2 * (t_hi ** 2 + c2))
        + math.log((t_hi ** 2 + c2) / (t_lo ** 2 + c2))
        - 2.0 * math.log(t_hi / t_lo)
    )
    return bracket / (2.0 * c2 ** 2)


def klub_stationarity_target(t_prev: float, t_next: float, c: float) -> float:
    """Interior point zeroing the closed-form KLUB derivative given its neighbours."""
    prod = t_prev * t_next
    return c * math.sqrt(prod / (math.sqrt((t_prev ** 2 + c ** 2) * (t_next ** 2 + c ** 2)) - prod))


def klub_stationarity_residual(s: Schedule, c: float) -> np.ndarray:
    t = s.ascending()
    return np.array(
        [abs(t[i] - klub_stationarity_target(t[i - 1], t[i + 1], c)) / t[i] for i in range(1, len(t) - 1)]
    )


def gaussian_klub_optimal_schedule(
        n: int,
        spec: NoiseSpec,
        c: float,
        *,
        max_iter: int = 10_000,
        tol: float = 1e-12,
) -> Schedule:
    """
    Schedule minimizing the closed-form KLUB, solved by Gauss-Seidel fixed-point
    sweeps over interior indices (in order), started from EDM rho=7.

    Converged when the largest relative coordinate change in a sweep is < tol.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"❌ KLUB-optimal schedule needs n >= 2, got {n}")

    t = edm_sigmas(int(n), spec, 7.0)
    t[0], t[-1] = spec.sigma_min, spec.sigma_max

    for _ in range(max_iter):
        biggest = 0.0
        for i in range(1, len(t) - 1):
            new = klub_stationarity_target(t[i - 1], t[i + 1], c)
            biggest = max(biggest, abs(new - t[i]) / t[i])
            t[i] = new
        if biggest < tol:
            return finalize_ascending(t, spec, f"gaussian-klub-optimal-c{c:g}")

    raise RuntimeError(
        f"❌ KLUB-optimal fixed point did not converge in {max_iter} sweeps (n={n}, c={c})"
    )


# ========================================================
# 5. Expected squared denoiser gap (per dimension)
# ========================================================
def gaussian_denoiser_gap(t: float, t_i: float, c: float) -> float:
    """
    E||D(x_t, t) − D(x_{t_i}, t_i)||² per dimension for N(0, c²) data:

        c⁴ (1/(t²+c²) − 1/(t_i²+c²))

    Multiply by d for the full expectation.
    """
    if t < 0:
        raise ValueError(f"❌ t must be non-negative, got {t}")
    if t > t_i:
        raise ValueError(f"❌ Need t <= t_i, got t={t} > t_i={t_i}")
    c2 = c ** 2
    return c2 ** 2 * (1.0 / (t ** 2 + c2) - 1.0 / (t_i ** 2 + c2))


gaussian_lemma_expectation = gaussian_denoiser_gap
