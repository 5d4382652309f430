from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from core.n1_1_schedules import NoiseSpec, Schedule, heuristic_schedule
from core.n1_2_gaussian_oracles import (
    IsoGaussian,
    euler_step_gain,
    gaussian_entropy,
    gaussian_euler_kl,
    gaussian_euler_output_variance,
    gaussian_klub_closed_form,
    gaussian_klub_interval_integral,
    gaussian_klub_optimal_schedule,
    gaussian_denoiser_gap,
    gaussian_lemma_expectation,
    gaussian_optimal_schedule,
    gaussian_score,
    kl_stationarity_residual,
    klub_stationarity_residual,
    klub_stationarity_target,
    klub_sum_term,
)
from core.n2_2_toy_models import ideal_denoiser
from tests.helpers import random_schedule

GRID_STEP = 1e-3


def _kl_at(t_inner, spec: NoiseSpec, c: float) -> float:
    t = np.concatenate([[spec.sigma_min], t_inner, [spec.sigma_max]])
    return gaussian_euler_kl(Schedule.from_ascending(t), c, 1)[1]


# ---- KL-optimal schedule

def test_optimal_two_step_interior(spec):
    s = gaussian_optimal_schedule(2, spec, 1.0)
    assert s.sigmas[1] == pytest.approx(0.9896, abs=1e-4)


def test_optimal_schedule_is_arctan_linear(spec):
    t = gaussian_optimal_schedule(10, spec, 0.5).ascending()
    angles = np.arctan(t / 0.5)
    assert np.allclose(np.diff(angles), np.diff(angles)[0], rtol=1e-10)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("c", [0.1, 0.5, 1.0])
def test_optimal_schedule_matches_brute_force_grid(n, c, spec):
    s = gaussian_optimal_schedule(n, spec, c)
    log_opt = np.log(s.ascending()[1:-1])
    closed = gaussian_euler_kl(s, c, 1)[1]

    # absolute log-σ grid, searched in a window around the closed form
    grid = np.arange(math.log(spec.sigma_min), math.log(spec.sigma_max), GRID_STEP)
    windows = [grid[np.abs(grid - v) <= 0.05] for v in log_opt]
    mesh = np.meshgrid(*windows, indexing="ij")
    points = np.column_stack([m.ravel() for m in mesh])
    points = points[np.all(np.diff(points, axis=1) > 0, axis=1)] if n > 2 else points
    assert closed <= min(_kl_at(np.exp(p), spec, c) for p in points) + 1e-12

    # along each coordinate the lattice minimum brackets the closed form
    for j, window in enumerate(windows):
        values = []
        for v in window:
            p = log_opt.copy()
            p[j] = v
            values.append(_kl_at(np.exp(p), spec, c))
        best = window[int(np.argmin(values))]
        assert abs(best - log_opt[j]) <= GRID_STEP + 1e-12


def test_optimal_two_step_beats_full_grid(spec):
    s = gaussian_optimal_schedule(2, spec, 1.0)
    best = gaussian_euler_kl(s, 1.0, 1)[1]
    grid = np.exp(np.arange(math.log(spec.sigma_min) + 0.01, math.log(spec.sigma_max) - 0.01, 0.01))
    assert all(_kl_at([t], spec, 1.0) >= best for t in grid)


def test_optimal_schedule_satisfies_kl_stationarity(spec):
    s = gaussian_optimal_schedule(12, spec, 0.7)
    assert kl_stationarity_residual(s, 0.7).max() < 1e-9


# ---- Euler KL

def test_euler_kl_ordering_two_steps(spec):
    kl_opt = gaussian_euler_kl(gaussian_optimal_schedule(2, spec, 1.0), 1.0, 1)[1]
    kl_edm = gaussian_euler_kl(heuristic_schedule("edm", 2, spec), 1.0, 1)[1]
    kl_klub = gaussian_euler_kl(gaussian_klub_optimal_schedule(2, spec, 1.0), 1.0, 1)[1]
    assert kl_opt < kl_edm < kl_klub


@pytest.mark.parametrize("n", [5, 10, 40])
def test_optimal_beats_edm_at_equal_steps(n, spec):
    kl_opt = gaussian_euler_kl(gaussian_optimal_schedule(n, spec, 1.0), 1.0, 3)[1]
    kl_edm = gaussian_euler_kl(heuristic_schedule("edm", n, spec), 1.0, 3)[1]
    assert kl_opt <= kl_edm


def test_euler_kl_scales_with_dimension_and_shrinks_with_steps(spec):
    s = heuristic_schedule("edm", 10, spec)
    f1, kl1 = gaussian_euler_kl(s, 1.0, 1)
    f4, kl4 = gaussian_euler_kl(s, 1.0, 4)
    assert f1 == f4 >= 1.0
    assert kl4 == pytest.approx(4 * kl1)

    coarse = gaussian_euler_kl(gaussian_optimal_schedule(20, spec, 1.0), 1.0, 1)[1]
    fine = gaussian_euler_kl(gaussian_optimal_schedule(200, spec, 1.0), 1.0, 1)[1]
    assert 0.0 <= fine < coarse


def test_step_gain_and_output_variance():
    assert euler_step_gain(1.0, 2.0, 1.0) == pytest.approx(0.6)

    s = Schedule(sigmas=(4.0, 2.0, 1.0))
    expected = (euler_step_gain(2.0, 4.0, 1.0) * euler_step_gain(1.0, 2.0, 1.0)) ** 2 * (16.0 + 1.0)
    assert gaussian_euler_output_variance(s, 1.0) == pytest.approx(expected, rel=1e-12)


def test_entropy_and_score():
    assert gaussian_entropy(1.0, 1) == pytest.approx(0.5 * (1 + math.log(2 * math.pi)))
    assert gaussian_entropy(0.5, 3) == pytest.approx(3 * gaussian_entropy(0.5, 1))
    x = np.array([0.5, -2.0])
    assert np.allclose(gaussian_score(x, 2.0, 1.0), -x / 5.0)
    with pytest.raises(ValueError):
        gaussian_score(x, -1.0, 1.0)
    with pytest.raises(ValueError):
        IsoGaussian(c=0.0)


def test_score_matches_finite_difference_of_log_density():
    rng = np.random.default_rng(17)
    h = 1e-5
    for _ in range(100):
        c = float(rng.uniform(0.1, 3.0))
        t = float(np.exp(rng.uniform(math.log(0.002), math.log(80.0))))
        x = rng.normal(scale=math.hypot(c, t), size=3)
        scale = math.sqrt(c ** 2 + t ** 2)
        fd = np.array([
            (norm.logpdf(x[k] + h, scale=scale) - norm.logpdf(x[k] - h, scale=scale)) / (2 * h)
            for k in range(3)
        ])
        assert np.allclose(gaussian_score(x, t, c), fd, rtol=1e-6, atol=1e-6 / scale)


# ---- KLUB closed forms

@pytest.mark.parametrize("lo, hi, c", [(0.1, 0.5, 1.0), (0.002, 0.05, 1.0), (1.0, 80.0, 0.5), (0.3, 0.31, 2.0)])
def test_interval_integral_matches_quadrature(lo, hi, c):
    def integrand(t):
        return (1.0 / t ** 3) * (1.0 / (t ** 2 + c ** 2) - 1.0 / (hi ** 2 + c ** 2))

    expected, _ = quad(integrand, lo, hi, epsrel=1e-11, limit=200)
    assert gaussian_klub_interval_integral(lo, hi, c) == pytest.approx(expected, rel=1e-7)


def test_closed_form_total_is_sum_of_interval_integrals(spec):
    s = heuristic_schedule("edm", 10, spec)
    t = s.ascending()
    c = 0.8
    parts = [gaussian_klub_interval_integral(t[i - 1], t[i], c) for i in range(1, len(t))]
    assert gaussian_klub_closed_form(s, c) == pytest.approx(2 * c ** 4 * sum(parts), rel=1e-10)


def test_klub_sum_term_decreases_under_refinement(spec):
    sums = [klub_sum_term(heuristic_schedule("log_uniform", n, spec), 1.0) for n in (8, 64, 1024)]
    assert sums[0] > sums[1] > sums[2] > 0


def test_closed_form_per_log_step_reaches_continuum_limit(spec):
    # KLUB / h -> 2c⁴ ∫ du / (e^{2u} + c²)² on a log-uniform grid of step h
    def antiderivative(t):
        w = t ** 2
        return 0.5 * (math.log(w / (w + 1.0)) + 1.0 / (w + 1.0))

    limit = 2.0 * (antiderivative(spec.sigma_max) - antiderivative(spec.sigma_min))
    span = math.log(spec.sigma_max / spec.sigma_min)
    scaled = {n: gaussian_klub_closed_form(heuristic_schedule("log_uniform", n, spec), 1.0) * n / span
              for n in (64, 1024)}
    assert scaled[1024] == pytest.approx(limit, rel=0.01)
    assert abs(scaled[64] - limit) > abs(scaled[1024] - limit)


def test_klub_optimal_two_step_interior(spec):
    s = gaussian_klub_optimal_schedule(2, spec, 1.0)
    assert s.sigmas[1] == pytest.approx(0.044764, rel=1e-4)
    assert s.sigmas[1] == pytest.approx(klub_stationarity_target(spec.sigma_min, spec.sigma_max, 1.0), rel=1e-12)


@pytest.mark.parametrize("n, c", [(3, 1.0), (5, 0.5), (10, 1.0)])
def test_klub_optimal_schedule_is_stationary(n, c, spec):
    s = gaussian_klub_optimal_schedule(n, spec, c)
    assert klub_stationarity_residual(s, c).max() < 1e-9
    assert s.sigmas[0] == spec.sigma_max and s.sigmas[-1] == spec.sigma_min


def test_klub_optimal_minimizes_closed_form(spec):
    s = gaussian_klub_optimal_schedule(5, spec, 1.0)
    best = gaussian_klub_closed_form(s, 1.0)
    t = s.ascending()
    for i in range(1, len(t) - 1):
        for factor in (0.99, 1.01):
            moved = t.copy()
            moved[i] *= factor
            assert gaussian_klub_closed_form(Schedule.from_ascending(moved), 1.0) > best


def test_klub_optimal_rejects_single_step(spec):
    with pytest.raises(ValueError):
        gaussian_klub_optimal_schedule(1, spec, 1.0)


# ---- expected denoiser gap

def test_denoiser_gap_edges():
    assert gaussian_denoiser_gap(0.7, 0.7, 1.0) == 0.0
    assert gaussian_denoiser_gap(0.0, 1.0, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        gaussian_denoiser_gap(2.0, 1.0, 1.0)


def test_lemma_expectation_is_the_denoiser_gap():
    assert gaussian_lemma_expectation is gaussian_denoiser_gap
    assert gaussian_lemma_expectation(0.3, 1.2, 0.8) == gaussian_denoiser_gap(0.3, 1.2, 0.8)


def test_denoiser_gap_matches_monte_carlo():
    rng = np.random.default_rng(2024)
    n = 100_000
    for _ in range(10):
        c = float(rng.uniform(0.1, 2.0))
        d = int(rng.integers(1, 5))
        t_i = float(np.exp(rng.uniform(math.log(0.01), math.log(10.0))))
        t = t_i * float(rng.uniform(0.1, 0.9))

        model = IsoGaussian(c=c, d=d)
        x0 = c * rng.standard_normal((n, d))
        x_t = x0 + t * rng.standard_normal((n, d))
        x_i = x_t + math.sqrt(t_i ** 2 - t ** 2) * rng.standard_normal((n, d))
        gap = ideal_denoiser(model, x_t, t) - ideal_denoiser(model, x_i, t_i)

        estimate = float(np.mean(np.sum(gap ** 2, axis=1)))
        assert estimate == pytest.approx(d * gaussian_denoiser_gap(t, t_i, c), rel=0.02)


def test_random_schedules_have_finite_klub(spec):
    rng = np.random.default_rng(0)
    for _ in range(5):
        s = random_schedule(rng, 6, spec)
        assert math.isfinite(gaussian_klub_closed_form(s, 1.0))
