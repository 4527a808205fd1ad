"""Shared seeded curves.  Each (N, m) setup is built once per session."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pytest

from znthomae.abel import AbelData, abel_data
from znthomae.cli import seeded_lambdas
from znthomae.curve import ZNCurve
from znthomae.homology import SymplecticBasis, build_basis
from znthomae.periods import PeriodData, compute_periods

SEEDS = {(2, 2): 1, (2, 3): 1, (3, 2): 7, (4, 1): 3, (5, 1): 2}


@dataclass(frozen=True)
class Setup:
    curve: ZNCurve
    basis: SymplecticBasis
    periods: PeriodData
    abel: AbelData


@lru_cache(maxsize=None)
def seeded(N: int, m: int, seed: int | None = None) -> Setup:
    seed = SEEDS[(N, m)] if seed is None else seed
    curve = ZNCurve(N, tuple(seeded_lambdas(N, m, seed)))
    basis = build_basis(curve)
    P = compute_periods(curve, basis)
    return Setup(curve, basis, P, abel_data(curve, P))


@pytest.fixture(scope="session")
def c22() -> Setup:
    return seeded(2, 2)


@pytest.fixture(scope="session")
def c23() -> Setup:
    return seeded(2, 3)


@pytest.fixture(scope="session")
def c32() -> Setup:
    return seeded(3, 2)


@pytest.fixture(params=[(2, 2), (2, 3), (3, 2)], ids=lambda p: f"N{p[0]}m{p[1]}", scope="session")
def any_curve(request) -> Setup:
    return seeded(*request.param)


def random_tau(g: int, rng: np.random.Generator) -> np.ndarray:
    """Symmetric tau with Re tau negative definite."""
    X = rng.normal(size=(g, g))
    Y = X @ X.T + g * np.eye(g)
    S = rng.normal(size=(g, g))
    return -Y + 1j * (S + S.T)
