import json
import math

import pytest

from conftest import seeded
from znthomae.abel import abel_data
from znthomae.partitions import interleaved, rotate, standard_sample
from znthomae.periods import compute_periods
from znthomae.theta import theta_tolerance
from znthomae.thomae import (build_report, check_c_invariance, check_derivative_vanishing, check_exchange_ratio,
                             check_lambda_derivative, check_variation, control_characteristic,
                             hyperelliptic_constant, thomae_records, thomae_residual, thomae_sides, vanishing_ratio)


def records(N, m, parts=None):
    s = seeded(N, m)
    parts = standard_sample(N, m) if parts is None else parts
    return s, thomae_records(s.curve, s.periods, s.abel, parts)


@pytest.mark.parametrize("N,m,minimum", [(2, 2, 4), (2, 3, 4), (3, 2, 6), (4, 1, 6), (5, 1, 6)])
def test_c_2n_is_partition_independent(N, m, minimum):
    s, recs = records(N, m)
    assert len(recs) >= minimum
    assert check_c_invariance(recs) < 1e-6
    assert thomae_residual(recs) < 1e-6


def test_rotations_only():
    s = seeded(3, 2)
    base = standard_sample(3, 2)[4]
    _, recs = records(3, 2, [rotate(base, j) for j in range(3)])
    assert check_c_invariance(recs) < 1e-7


def test_n3_exponent_pattern():
    s, recs = records(3, 2, [interleaved(3, 2)])
    exps = {(i, j): e for i, j, e in recs[0].exponents}
    assert exps[(0, 3)] == 3 and exps[(1, 4)] == 3
    assert exps[(0, 1)] == 1 and exps[(2, 3)] == 1


def test_c_lambda_self_convergence():
    s = seeded(3, 2)
    part = standard_sample(3, 2)[0]
    r1 = thomae_sides(s.curve, s.periods, s.abel, part)
    P2 = compute_periods(s.curve, s.basis, density=2)
    with theta_tolerance(5e-16):
        r2 = thomae_sides(s.curve, P2, abel_data(s.curve, P2), part)
    assert abs(r2.C / r1.C - 1) < 1e-7


@pytest.mark.parametrize("N,m", [(2, 3), (3, 2)])
def test_derivative_vanishing_and_control(N, m):
    s = seeded(N, m)
    parts = standard_sample(N, m)
    for p in parts:
        assert check_derivative_vanishing(s.curve, s.periods, s.abel, p) < 1e-5
    _, recs = records(N, m)
    ctrl = control_characteristic(N, s.periods.g, 1, [r.characteristic.char for r in recs])
    assert vanishing_ratio(s.periods.tau, ctrl) > 1e-2


@pytest.mark.parametrize("N,m", [(2, 2), (3, 2)])
@pytest.mark.parametrize("i", [0, 1])
def test_period_variation(N, m, i):
    s = seeded(N, m)
    r = check_variation(s.curve, s.basis, i, h=1e-4, periods=s.periods)
    assert r["error"] < 1e-4
    assert r["symmetry_defect"] < 1e-12
    # order check at a step where truncation dominates roundoff
    r3 = check_variation(s.curve, s.basis, i, h=1e-3, periods=s.periods)
    assert 3.0 < r3["improvement"] < 5.0


@pytest.mark.parametrize("N,m", [(2, 2), (3, 2)])
@pytest.mark.parametrize("i", [0, 1])
def test_lambda_derivative(N, m, i):
    s = seeded(N, m)
    part = standard_sample(N, m)[1]
    r = check_lambda_derivative(s.curve, s.basis, s.abel, part, i, h=1e-4, periods=s.periods)
    assert r["error"] < 1e-4
    r3 = check_lambda_derivative(s.curve, s.basis, s.abel, part, i, h=1e-3, periods=s.periods)
    assert 3.0 < r3["improvement"] < 5.0


@pytest.mark.parametrize("N,m,tol", [(2, 3, 1e-6), (3, 2, 1e-5), (4, 1, 1e-5)])
def test_exchange_ratio(N, m, tol):
    s = seeded(N, m)
    for part in standard_sample(N, m)[:4]:
        r = check_exchange_ratio(s.curve, s.periods, s.abel, part)
        assert r["deviation"] < tol
        assert r["closed_form_vs_exponents"] < 1e-10
        assert r["records_consistency"] < 1e-6


@pytest.mark.parametrize("m", [2, 3])
def test_hyperelliptic_constant(m):
    s, recs = records(2, m)
    h = hyperelliptic_constant(recs, m)
    assert h["satisfied"], h
    assert abs(h["target"] - (2 * math.pi) ** (-4 * (m - 1))) < 1e-15


def test_report_serialization_and_parallel_order():
    s = seeded(3, 2)
    parts = standard_sample(3, 2)
    rep = build_report(s.curve, s.periods, s.abel, parts)
    rep_par = build_report(s.curve, s.periods, s.abel, parts, parallel=3)
    assert rep.to_json() == rep_par.to_json()
    doc = json.loads(rep.to_json())
    assert doc["passed"] and "runtime_s" not in doc
    assert "runtime_s" in rep.to_dict(include_runtime=True)
    assert len(doc["records"]) == len(parts)
    lines = rep.to_csv().splitlines()
    assert lines[0].startswith("partition,") and len(lines) == len(parts) + 1


def test_invariance_needs_two_records():
    _, recs = records(2, 2, [interleaved(2, 2)])
    with pytest.raises(ValueError):
        check_c_invariance(recs)


def test_control_characteristic_avoids_given_ones():
    s, recs = records(3, 2)
    avoid = [r.characteristic.char for r in recs]
    for seed in range(10):
        c = control_characteristic(3, 4, seed, avoid)
        assert c.denominator == 6
        assert all(c != a for a in avoid)
        a, b = c.integers()
        assert not all(x % 3 == 0 for x in a + b)
