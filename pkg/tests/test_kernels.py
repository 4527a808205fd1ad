from functools import lru_cache

import numpy as np
import pytest

from conftest import seeded
from znthomae.abel import e_lambda, find_odd_half_char
from znthomae.kernels import (AlgebraicKernel, b_loop_check, canonical_diff, canonical_diff_analytic, compare_szego,
                              fay_check, fay_residual, local_scale, make_context, omega_a_period, prime_form,
                              sample_pairs, step_from, szego_algebraic, szego_analytic)
from znthomae.partitions import OrderedPartition, all_partitions, standard_sample


@lru_cache(maxsize=None)
def context(N, m):
    s = seeded(N, m)
    return s, make_context(s.curve, s.periods, s.abel, find_odd_half_char(s.periods.tau))


@lru_cache(maxsize=None)
def pairs(N, m, count=20, seed=11):
    return tuple(sample_pairs(context(N, m)[1], count, seed))


def test_algebraic_exponents_are_integral():
    for N, m in [(2, 3), (3, 2), (4, 1), (5, 1)]:
        for p in list(all_partitions(N, m))[:50]:
            K = AlgebraicKernel.build(p)
            assert K.r.dtype.kind == "i"
            assert np.all(K.r[:, 0] == 0)


@pytest.mark.parametrize("N,m", [(2, 2), (3, 2)])
def test_prime_form_is_antisymmetric_with_unit_diagonal_slope(N, m):
    s, ctx = context(N, m)
    for x, y in pairs(N, m)[:4]:
        assert abs(prime_form(ctx, x, y) + prime_form(ctx, y, x)) < 1e-12 * abs(prime_form(ctx, x, y))
        d = 1e-5 * local_scale(ctx, x, y) * np.exp(0.7j)
        xd = step_from(ctx, x, d)
        assert abs(prime_form(ctx, x, xd) / d - 1) < 1e-4


@pytest.mark.parametrize("N,m", [(2, 3), (3, 2)])
def test_prime_form_b_loop(N, m):
    s, ctx = context(N, m)
    x, y = pairs(N, m)[0]
    for i in range(s.periods.g):
        mod_gap, sign_gap = b_loop_check(ctx, x, y, i)
        assert mod_gap < 1e-10 and sign_gap < 1e-10


@pytest.mark.parametrize("N,m", [(2, 2), (2, 3), (3, 2)])
def test_szego_kernels_agree(N, m):
    s, ctx = context(N, m)
    prs = pairs(N, m)
    assert len(prs) >= 20
    for part in standard_sample(N, m)[:3]:
        L = e_lambda(s.curve, s.periods, s.abel, part)
        r = compare_szego(ctx, prs, part, L.char)
        assert r["phase_is_sign"]
        assert r["max_deviation"] < 1e-6
        assert r["max_modulus_deviation"] < 1e-8


def test_szego_kernel_pole_on_the_diagonal():
    s, ctx = context(3, 2)
    part = OrderedPartition.parse("1,4|2,5|3,6")
    L = e_lambda(s.curve, s.periods, s.abel, part)
    x, _ = pairs(3, 2)[1]
    d = 1e-6 * np.exp(0.4j)
    y = step_from(ctx, x, d)
    assert abs(szego_analytic(ctx, x, y, L.char) * d - 1) < 1e-5
    assert abs(szego_algebraic(x.p, y.p, part) * d - 1) < 1e-5


@pytest.mark.parametrize("N,m", [(2, 3), (3, 2)])
def test_fay_identity(N, m):
    s, ctx = context(N, m)
    L = e_lambda(s.curve, s.periods, s.abel, standard_sample(N, m)[0])
    for x, y in pairs(N, m)[:3]:
        w = canonical_diff_analytic(ctx, x.p.abel, x.v, y.p.abel, y.v)
        assert fay_residual(ctx, x, y, L.char, omega=w) < 1e-10
        f = fay_check(ctx, x, y, L.char)
        assert f["residual"] < 1e-4
        assert 3.0 < f["improvement"] < 5.0


def test_canonical_differential_symmetry_and_pole():
    s, ctx = context(3, 2)
    x, y = pairs(3, 2)[2]
    w_xy = canonical_diff(ctx, x, y)
    w_yx = canonical_diff(ctx, y, x)
    assert abs(w_xy - w_yx) < 1e-4 * abs(w_xy)
    wa = canonical_diff_analytic(ctx, x.p.abel, x.v, y.p.abel, y.v)
    assert abs(w_xy - wa) < 1e-4 * abs(wa)
    d = 1e-3 * local_scale(ctx, x, y)
    xd = step_from(ctx, x, d)
    near = canonical_diff_analytic(ctx, x.p.abel, x.v, xd.p.abel, xd.v)
    assert abs(near * d * d - 1) < 1e-4


@pytest.mark.parametrize("N,m", [(2, 2), (3, 2)])
def test_canonical_differential_has_zero_a_periods(N, m):
    s, ctx = context(N, m)
    _, y = pairs(N, m)[0]
    for j in range(s.periods.g):
        assert abs(omega_a_period(ctx, y, j)) < 1e-9
