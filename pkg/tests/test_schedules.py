from __future__ import annotations

import math

import numpy as np
import pytest

from core.n1_1_schedules import (
    HEURISTIC_KINDS,
    RELEASED_SCHEDULES,
    NoiseSpec,
    Schedule,
    heuristic_schedule,
    interpolate,
    released_schedule,
    require_valid,
    subdivide,
    validate,
)
from tests.helpers import random_schedule


# ---- construction

@pytest.mark.parametrize("kind", sorted(HEURISTIC_KINDS))
@pytest.mark.parametrize("n", [1, 2, 7, 10, 40])
def test_heuristics_hit_endpoints_exactly(kind, n, spec):
    s = heuristic_schedule(kind, n, spec)
    assert s.n_steps == n
    assert s.sigmas[0] == spec.sigma_max
    assert s.sigmas[-1] == spec.sigma_min
    assert validate(s, spec) == []


def test_edm_two_steps_middle_value(spec):
    s = heuristic_schedule("edm", 2, spec, rho=7.0)
    lo, hi = spec.sigma_min ** (1 / 7), spec.sigma_max ** (1 / 7)
    assert s.sigmas[1] == pytest.approx(((lo + hi) / 2) ** 7, rel=1e-12)
    assert s.sigmas[1] == pytest.approx(2.515, rel=1e-3)


def test_logsnr_is_edm_with_rho_one(spec):
    a = heuristic_schedule("logsnr", 10, spec)
    b = heuristic_schedule("edm", 10, spec, rho=1.0)
    assert a.sigmas == b.sigmas


def test_time_uniform_is_linear(spec):
    t = heuristic_schedule("time_uniform", 8, spec).ascending()
    assert np.allclose(np.diff(t), (spec.sigma_max - spec.sigma_min) / 8)


def test_time_quadratic_variants(spec):
    t_idx = heuristic_schedule("time_quadratic", 10, spec, quadratic_in="index").ascending()
    ramp = np.arange(11) / 10
    assert np.allclose(t_idx, spec.sigma_min + ramp ** 2 * (spec.sigma_max - spec.sigma_min))

    t_sig = heuristic_schedule("time_quadratic", 10, spec, quadratic_in="sigma").ascending()
    assert np.allclose(np.diff(t_sig ** 2), (spec.sigma_max ** 2 - spec.sigma_min ** 2) / 10)

    with pytest.raises(ValueError):
        heuristic_schedule("time_quadratic", 10, spec, quadratic_in="cubic")


def test_log_uniform_has_constant_ratio(spec):
    t = heuristic_schedule("log_uniform", 10, spec).ascending()
    ratios = t[1:] / t[:-1]
    assert np.allclose(ratios, ratios[0])


def test_large_rho_approaches_log_uniform(spec):
    edm = heuristic_schedule("edm", 10, spec, rho=1e4).as_array()
    geo = heuristic_schedule("log_uniform", 10, spec).as_array()
    assert np.allclose(edm, geo, rtol=1e-2)


def test_edm_interior_falls_as_rho_grows(spec):
    # ((1 − f)·a^{1/ρ} + f·b^{1/ρ})^ρ is a power mean of order 1/ρ
    rhos = [0.5, 1.0, 3.0, 7.0, 20.0, 100.0]
    interiors = np.array([heuristic_schedule("edm", 8, spec, rho=r).ascending()[1:-1] for r in rhos])
    assert np.all(np.diff(interiors, axis=0) < 0)
    geo = heuristic_schedule("log_uniform", 8, spec).ascending()[1:-1]
    assert np.all(interiors[-1] > geo)


@pytest.mark.parametrize("n", [0, -3, 2.5])
def test_bad_step_count_rejected(n, spec):
    with pytest.raises(ValueError):
        heuristic_schedule("edm", n, spec)


def test_unknown_kind_and_bad_range():
    with pytest.raises(ValueError):
        heuristic_schedule("cosine", 10, NoiseSpec())
    with pytest.raises(ValueError):
        NoiseSpec(1.0, 0.5)
    with pytest.raises(ValueError):
        NoiseSpec(0.0, 80.0)


# ---- validation

def test_validate_reports_each_problem(spec):
    assert validate([1.0]) != []
    assert any("not strictly decreasing" in p for p in validate([2.0, 2.0, 1.0]))
    assert any("not positive" in p for p in validate([2.0, 1.0, 0.0]))
    assert any("not finite" in p for p in validate([math.inf, 1.0]))
    assert any("sigma_max" in p for p in validate([79.0, 0.002], spec))
    assert validate([80.0, 0.002], spec) == []


def test_require_valid_raises_with_message():
    with pytest.raises(ValueError, match="not strictly decreasing"):
        require_valid(Schedule(sigmas=(1.0, 2.0)))


def test_from_dict_rejects_bad_payloads():
    with pytest.raises(ValueError, match="missing keys"):
        Schedule.from_dict({"name": "x", "sigmas": [2.0, 1.0]})
    with pytest.raises(ValueError):
        Schedule.from_dict({"name": "x", "sigma_min": 1.0, "sigma_max": 3.0, "sigmas": [2.0, 1.0]})


def test_dict_roundtrip_keeps_values_and_name(spec):
    s = heuristic_schedule("edm", 10, spec)
    back = Schedule.from_dict(s.to_dict())
    assert back.sigmas == s.sigmas
    assert back.name == s.name


@pytest.mark.parametrize("name", sorted(RELEASED_SCHEDULES))
def test_released_schedules_are_valid(name):
    s = released_schedule(name)
    assert s.n_steps == 10
    assert validate(s) == []


# ---- subdivide / interpolate

def test_subdivide_keeps_even_points_and_inserts_geometric_means(spec):
    s = heuristic_schedule("edm", 10, spec)
    fine = subdivide(s)
    assert fine.n_steps == 20
    assert fine.sigmas[0::2] == s.sigmas
    v = s.as_array()
    assert np.allclose(fine.as_array()[1::2], np.sqrt(v[:-1] * v[1:]))


@pytest.mark.parametrize("n", [1, 2, 5, 10, 20])
def test_interpolate_undoes_subdivide(n, spec):
    rng = np.random.default_rng(n)
    for s in (heuristic_schedule("edm", n, spec), random_schedule(rng, n, spec)):
        back = interpolate(subdivide(s), n)
        assert back.n_steps == n
        assert np.allclose(back.as_array(), s.as_array(), rtol=1e-12, atol=0.0)


def test_interpolate_same_length_is_identity(spec):
    s = heuristic_schedule("edm", 10, spec)
    assert interpolate(s, 10) is s


def test_interpolate_reuses_knots_exactly(spec):
    s = heuristic_schedule("edm", 10, spec)
    dense = interpolate(s, 40)
    assert dense.sigmas[0::4] == s.sigmas


def test_interpolate_is_log_linear():
    s = Schedule(sigmas=(80.0, 0.002))
    mid = interpolate(s, 2).sigmas[1]
    assert mid == pytest.approx(math.sqrt(80.0 * 0.002), rel=1e-12)


@pytest.mark.parametrize("m", [3, 6, 8, 15])
def test_interpolate_to_other_lengths_stays_valid(m, spec):
    s = heuristic_schedule("edm", 10, spec)
    out = interpolate(s, m)
    assert out.n_steps == m
    assert validate(out, spec) == []
