import itertools

import numpy as np
import pytest

from conftest import random_tau
from znthomae.errors import ThetaDomainError
from znthomae.theta import (Characteristic, heat_check, quasi_periodicity_residual, theta, theta_half_family,
                            theta_tolerance, theta_value)


def triple_product(z, tau, terms=200):
    """Jacobi triple product for sum_n exp(n^2 tau / 2 + n z)."""
    q = np.exp(tau / 2)
    k = np.arange(1, terms + 1)
    return np.prod((1 - q ** (2 * k)) * (1 + q ** (2 * k - 1) * np.exp(z)) * (1 + q ** (2 * k - 1) * np.exp(-z)))


def brute_force(z, char, tau, R=12):
    g = tau.shape[0]
    d, e = char.delta_vec, char.eps_vec
    total = 0j
    for m in itertools.product(range(-R, R + 1), repeat=g):
        n = np.array(m) + d
        total += np.exp(0.5 * n @ tau @ n + n @ (z + 2j * np.pi * e))
    return total


@pytest.mark.parametrize("tau", [-1.3 + 0.4j, -3.0 - 2.0j, -0.7 + 0.1j])
@pytest.mark.parametrize("z", [0.0, 0.3 - 0.2j, 1.1 + 2.0j])
def test_genus_one_triple_product(tau, z):
    val = theta_value([z], None, np.array([[tau]]))
    ref = triple_product(z, tau)
    assert abs(val - ref) < 1e-13 * max(1.0, abs(ref))


@pytest.mark.parametrize("g", [2, 3])
def test_brute_force_with_characteristic(g):
    rng = np.random.default_rng(g)
    tau = random_tau(g, rng)
    char = Characteristic.from_integers(rng.integers(0, 6, g), rng.integers(0, 6, g), 6)
    z = 0.3 * (rng.normal(size=g) + 1j * rng.normal(size=g))
    ref = brute_force(z, char, tau, R=9 if g == 2 else 6)
    assert abs(theta_value(z, char, tau) - ref) < 1e-12 * abs(ref)


@pytest.mark.parametrize("g", [1, 2, 3, 4])
def test_quasi_periodicity(g):
    rng = np.random.default_rng(10 + g)
    tau = random_tau(g, rng)
    char = Characteristic.from_integers(rng.integers(0, 4, g), rng.integers(0, 4, g), 4)
    z = 0.2 * (rng.normal(size=g) + 1j * rng.normal(size=g))
    for _ in range(3):
        lam = rng.integers(-2, 3, g)
        kap = rng.integers(-1, 2, g)
        assert quasi_periodicity_residual(z, char, tau, lam, kap) < 1e-10


@pytest.mark.parametrize("g", [1, 2, 3, 4])
def test_gradient_and_hessian_against_finite_differences(g):
    rng = np.random.default_rng(20 + g)
    tau = random_tau(g, rng)
    char = Characteristic.from_integers(rng.integers(0, 6, g), rng.integers(0, 6, g), 6)
    z = 0.2 * (rng.normal(size=g) + 1j * rng.normal(size=g))
    r = theta(z, char, tau)
    h = 1e-5
    for k in range(g):
        e = np.zeros(g)
        e[k] = h
        fd = (theta_value(z + e, char, tau) - theta_value(z - e, char, tau)) / (2 * h)
        assert abs(fd - r.gradient[k]) < 1e-6 * max(1.0, abs(r.gradient[k]))
        fd2 = (theta(z + e, char, tau).gradient - theta(z - e, char, tau).gradient) / (2 * h)
        assert np.abs(fd2 - r.hessian[k]).max() < 1e-6 * max(1.0, np.abs(r.hessian).max())


@pytest.mark.parametrize("g", [1, 2, 3, 4])
def test_heat_equation(g):
    rng = np.random.default_rng(30 + g)
    tau = random_tau(g, rng)
    char = Characteristic.from_integers(rng.integers(0, 4, g), rng.integers(0, 4, g), 4)
    z = 0.2 * rng.normal(size=g)
    for k in range(g):
        for r in range(k, g):
            assert heat_check(char, tau, k, r, z=z) < 1e-5


def test_odd_half_characteristics_vanish_at_zero():
    rng = np.random.default_rng(4)
    tau = random_tau(3, rng)
    for bits in itertools.product((0, 1), repeat=6):
        char = Characteristic.from_integers(bits[:3], bits[3:], 2)
        r = theta(np.zeros(3), char, tau, order=0)
        if char.half_parity():
            assert abs(r.value) < 1e-13 * r.scale
        else:
            assert abs(theta(np.zeros(3), char, tau, order=1).gradient).max() < 1e-12 * r.scale


def test_half_family_matches_individual_values():
    rng = np.random.default_rng(5)
    tau = random_tau(3, rng)
    z = 0.1 * rng.normal(size=3) + 0.2j
    delta = np.array([0.5, 0.0, 0.5])
    vals, _ = theta_half_family(z, delta, tau)
    for idx, b in enumerate(itertools.product((0, 1), repeat=3)):
        ref = theta_value(z, Characteristic(delta, np.array(b) / 2), tau)
        assert abs(vals[idx] - ref) < 1e-12 * max(1.0, abs(ref))


def test_characteristic_shift_changes_only_a_phase():
    rng = np.random.default_rng(6)
    tau = random_tau(2, rng)
    c = Characteristic.from_integers([1, 3], [2, 5], 6)
    m, n = np.array([1, -1]), np.array([2, 0])
    ref = theta_value(np.zeros(2), c, tau)
    shifted = theta_value(np.zeros(2), c.shifted(m, n), tau)
    assert abs(shifted - np.exp(2j * np.pi * c.delta_vec @ n) * ref) < 1e-13 * abs(ref)


def test_tolerance_context_and_domain_errors():
    tau = np.array([[-2.0 + 0.3j]])
    with theta_tolerance(1e-6):
        coarse = theta(0.1, None, tau, order=0)
    fine = theta(0.1, None, tau, order=0)
    assert coarse.n_terms <= fine.n_terms
    assert abs(coarse.value - fine.value) < 1e-6 * coarse.scale
    with pytest.raises(ThetaDomainError):
        theta([0.0], None, np.array([[1.0 + 0j]]))
    with pytest.raises(ValueError):
        with theta_tolerance(0.0):
            pass
