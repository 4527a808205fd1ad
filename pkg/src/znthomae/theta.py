"""Riemann theta functions with characteristics, in the convention

    theta[delta; eps](z) = sum_m exp(1/2 (m+delta) tau (m+delta)^t + (z + 2 pi i eps)(m+delta)^t)

with Re(tau) negative definite and e = 2 pi i eps + delta tau.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import gammaincc, gamma

from .errors import ThetaDomainError, ThetaPrecisionError

TWO_PI_I = 2j * math.pi
MAX_RADIUS = 60.0
_DEFAULT_TOL = [1e-15]


def default_tol() -> float:
    return _DEFAULT_TOL[0]


@contextmanager
def theta_tolerance(tol: float):
    """Temporarily change the truncation tolerance used when ``tol`` is not given."""
    if not tol > 0:
        raise ValueError("theta tolerance must be positive")
    old = _DEFAULT_TOL[0]
    _DEFAULT_TOL[0] = float(tol)
    try:
        yield
    finally:
        _DEFAULT_TOL[0] = old


@dataclass(frozen=True)
class Characteristic:
    """Real characteristic pair (delta, eps); ``denominator`` set when both are exact rationals."""

    delta: tuple
    eps: tuple
    denominator: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "delta", tuple(float(x) for x in self.delta))
        object.__setattr__(self, "eps", tuple(float(x) for x in self.eps))
        if len(self.delta) != len(self.eps):
            raise ValueError("delta and eps must have the same length")
        if self.denominator is not None:
            for x in self.delta + self.eps:
                y = x * self.denominator
                if abs(y - round(y)) > 1e-12:
                    raise ValueError(f"{x} is not a multiple of 1/{self.denominator}")

    @classmethod
    def zero(cls, g: int) -> "Characteristic":
        return cls((0.0,) * g, (0.0,) * g, 1)

    @classmethod
    def from_integers(cls, num_delta, num_eps, denominator: int) -> "Characteristic":
        d = int(denominator)
        return cls(tuple(int(a) / d for a in num_delta), tuple(int(b) / d for b in num_eps), d)

    @property
    def g(self) -> int:
        return len(self.delta)

    @property
    def delta_vec(self) -> np.ndarray:
        return np.array(self.delta)

    @property
    def eps_vec(self) -> np.ndarray:
        return np.array(self.eps)

    def integers(self) -> tuple[list[int], list[int]]:
        if self.denominator is None:
            raise ValueError("characteristic is not flagged rational")
        d = self.denominator
        return [round(x * d) for x in self.delta], [round(x * d) for x in self.eps]

    def fractions(self) -> tuple[list[Fraction], list[Fraction]]:
        a, b = self.integers()
        return [Fraction(x, self.denominator) for x in a], [Fraction(x, self.denominator) for x in b]

    def point(self, tau) -> np.ndarray:
        """e = 2 pi i eps + delta tau."""
        return TWO_PI_I * self.eps_vec + self.delta_vec @ np.asarray(tau)

    def shifted(self, m, n) -> "Characteristic":
        return Characteristic(self.delta_vec + np.asarray(m), self.eps_vec + np.asarray(n), self.denominator)

    def __neg__(self) -> "Characteristic":
        return Characteristic(-self.delta_vec, -self.eps_vec, self.denominator)

    def half_parity(self) -> int:
        """0 for even, 1 for odd; only meaningful for half-integer characteristics."""
        return int(round(4 * float(self.delta_vec @ self.eps_vec))) % 2


@dataclass(frozen=True)
class ThetaResult:
    value: complex
    gradient: np.ndarray
    hessian: np.ndarray
    radius: float
    tail_bound: float
    scale: float
    n_terms: int

    @property
    def log_gradient(self) -> np.ndarray:
        return self.gradient / self.value

    @property
    def log_hessian(self) -> np.ndarray:
        gl = self.gradient / self.value
        return self.hessian / self.value - np.outer(gl, gl)


class _Lattice:
    """Cholesky data of Y = -Re(tau) reused across calls with the same tau."""

    def __init__(self, tau: np.ndarray):
        Y = -tau.real
        Y = 0.5 * (Y + Y.T)
        try:
            L = np.linalg.cholesky(Y)
        except np.linalg.LinAlgError as exc:
            raise ThetaDomainError("Re(tau) is not negative definite") from exc
        self.tau = tau
        self.Y = Y
        self.U = L.T.copy()
        self.lam_min = float(np.linalg.eigvalsh(Y).min())
        if self.lam_min <= 0:
            raise ThetaDomainError("Re(tau) is not negative definite")
        self.g = Y.shape[0]
        self.Yinv = np.linalg.inv(Y)
        diag = np.diag(Y)
        pts = ellipsoid_points(self.U, np.zeros(self.g), math.sqrt(float(diag.min())) * (1 + 1e-12))
        nz = np.any(pts != 0, axis=1)
        q = np.einsum("ki,ij,kj->k", pts[nz], Y, pts[nz])
        self.shortest = math.sqrt(float(q.min()))


@lru_cache(maxsize=64)
def _lattice_cached(key: bytes, g: int) -> _Lattice:
    tau = np.frombuffer(key, dtype=complex).reshape(g, g).copy()
    return _Lattice(tau)


def _lattice(tau: np.ndarray) -> _Lattice:
    tau = np.ascontiguousarray(tau, dtype=complex)
    return _lattice_cached(tau.tobytes(), tau.shape[0])


def ellipsoid_points(U: np.ndarray, center: np.ndarray, R: float) -> np.ndarray:
    """Integer vectors m with (m - center) U^t U (m - center)^t <= R^2, lexicographic order.

    Breadth-first Fincke-Pohst over coordinates g-1, ..., 0 with U upper triangular.
    """
    g = U.shape[0]
    cols = np.zeros((1, 0), dtype=np.int64)  # coordinates i+1..g-1 of partial vectors
    acc = np.zeros(1)
    R2 = R * R
    for i in range(g - 1, -1, -1):
        if cols.shape[1]:
            y = cols - center[i + 1:]
            shift = y @ (U[i, i + 1:] / U[i, i])
        else:
            shift = np.zeros(len(acc))
        rem = np.maximum(R2 - acc, 0.0)
        hw = np.sqrt(rem) / U[i, i]
        mid = center[i] - shift
        lo = np.ceil(mid - hw).astype(np.int64)
        hi = np.floor(mid + hw).astype(np.int64)
        cnt = np.maximum(hi - lo + 1, 0)
        total = int(cnt.sum())
        if total == 0:
            return np.zeros((0, g), dtype=np.int64)
        rep = np.repeat(np.arange(len(acc)), cnt)
        offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        newc = lo[rep] + offs
        t = U[i, i] * (newc - center[i] + shift[rep])
        acc = acc[rep] + t * t
        cols = np.column_stack([newc, cols[rep]]) if cols.shape[1] else newc[:, None]
        keep = acc <= R2 * (1 + 1e-12)
        cols, acc = cols[keep], acc[keep]
    order = np.lexsort(cols.T[::-1])
    return cols[order]


def _tail(lat: _Lattice, R: float, cnorm: float, order: int) -> float:
    """Bound on the neglected relative mass (largest term = 1) outside radius R.

    Uses the uniform estimate for sums of exp(-|x|^2) over a shifted lattice
    with minimal distance rho (x = r / sqrt 2); derivative weights |m + delta| <= R/sqrt(lam_min) + |c| + 1
    are applied as a polynomial factor.
    """
    g = lat.g
    s = 1.0 / math.sqrt(2.0)
    Rp, rho = R * s, lat.shortest * s
    if Rp <= (math.sqrt(g) + rho) / 2:
        return math.inf
    base = 0.5 * g * (2.0 / rho) ** g * gammaincc(0.5 * g, (Rp - rho / 2) ** 2) * gamma(0.5 * g)
    w = R / math.sqrt(lat.lam_min) + cnorm + 1.0
    return float(base * (1.0 + w) ** order)


def choose_radius(lat: _Lattice, tol: float, cnorm: float = 0.0, order: int = 2) -> tuple[float, float]:
    R = max(2.0, lat.shortest)
    while True:
        b = _tail(lat, R, cnorm, order)
        if b < tol:
            return R, b
        R += 0.25
        if R > MAX_RADIUS:
            raise ThetaPrecisionError(f"truncation radius exceeds {MAX_RADIUS} for tol={tol}")


def theta(z, char: Characteristic | None = None, tau=None, tol: float | None = None, order: int = 2,
          radius: float | None = None) -> ThetaResult:
    """theta[char](z; tau) with gradient and Hessian from the same lattice pass.

    ``tol`` bounds the truncation error relative to the largest term; the
    returned ``scale`` is that largest term's modulus.
    """
    tol = _DEFAULT_TOL[0] if tol is None else tol
    tau = np.asarray(tau, dtype=complex)
    if tau.ndim != 2 or tau.shape[0] != tau.shape[1]:
        raise ThetaDomainError("tau must be a square matrix")
    g = tau.shape[0]
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if char is None:
        char = Characteristic.zero(g)
    delta, eps = char.delta_vec, char.eps_vec
    lat = _lattice(tau)
    c = lat.Yinv @ z.real
    if radius is None:
        R, bound = choose_radius(lat, tol, float(np.linalg.norm(c)), order)
    else:
        R, bound = radius, _tail(lat, radius, float(np.linalg.norm(c)), order)
    m = ellipsoid_points(lat.U, c - delta, R)
    n = m + delta
    E = 0.5 * np.einsum("ki,ij,kj->k", n, tau, n) + n @ (z + TWO_PI_I * eps)
    emax = float(E.real.max())
    if emax > 700:
        raise ThetaPrecisionError("theta magnitude overflows double precision; reduce z first")
    w = np.exp(E - emax)
    scale = math.exp(emax)
    value = complex(w.sum()) * scale
    grad = (n.T @ w) * scale if order >= 1 else np.zeros(g, complex)
    hess = np.einsum("ki,kj,k->ij", n, n, w) * scale if order >= 2 else np.zeros((g, g), complex)
    return ThetaResult(value, grad, hess, R, bound, scale, len(m))


def theta_value(z, char, tau, tol: float | None = None) -> complex:
    return theta(z, char, tau, tol, order=0).value


def quasi_periodicity_factor(z, char: Characteristic, tau, lam, kappa) -> complex:
    """Factor relating theta[char](z + 2 pi i lam + kappa tau) to theta[char](z)."""
    tau = np.asarray(tau)
    z = np.asarray(z, dtype=complex)
    lam, kappa = np.asarray(lam, float), np.asarray(kappa, float)
    expo = (-0.5 * kappa @ tau @ kappa - z @ kappa
            + TWO_PI_I * (char.delta_vec @ lam - char.eps_vec @ kappa))
    return complex(np.exp(expo))


def quasi_periodicity_residual(z, char: Characteristic, tau, lam, kappa, tol: float | None = None) -> float:
    tau = np.asarray(tau, dtype=complex)
    z = np.asarray(z, dtype=complex)
    lam, kappa = np.asarray(lam, float), np.asarray(kappa, float)
    base = theta(z, char, tau, tol, order=0)
    if abs(base.value) < 1e-13 * base.scale:
        return float("nan")
    shifted = theta(z + TWO_PI_I * lam + kappa @ tau, char, tau, tol, order=0).value
    fac = quasi_periodicity_factor(z, char, tau, lam, kappa)
    return abs(shifted - fac * base.value) / abs(fac * base.value)


def heat_check(char: Characteristic, tau, k: int, r: int, h: float | None = None, z=None) -> float:
    """Relative gap between d^2 theta/dz_k dz_r and the tau-derivative it should equal."""
    tau = np.asarray(tau, dtype=complex)
    g = tau.shape[0]
    z = np.zeros(g, complex) if z is None else np.asarray(z, dtype=complex)
    if h is None:
        h = 1e-4 * float(np.abs(tau).max())
    E = np.zeros((g, g))
    E[k, r] = E[r, k] = 1.0
    plus = theta(z, char, tau + h * E, order=0).value
    minus = theta(z, char, tau - h * E, order=0).value
    dtheta = (plus - minus) / (2 * h)
    hess = theta(z, char, tau).hessian[k, r]
    target = hess if k != r else 0.5 * hess
    return abs(dtheta - target) / abs(target)


def theta_half_family(z, delta, tau, tol: float = 1e-13) -> tuple[np.ndarray, float]:
    """theta[delta; b/2](z) for every b in {0,1}^g from one lattice pass.

    Terms are grouped by m mod 2; exp(pi i b.(m+delta)) only depends on the
    class, so the 2^g values are a signed (Hadamard) transform of the class
    sums.  Returned in lexicographic order of b, with the largest-term scale.
    """
    tau = np.asarray(tau, dtype=complex)
    g = tau.shape[0]
    z = np.asarray(z, dtype=complex)
    delta = np.asarray(delta, dtype=float)
    lat = _lattice(tau)
    c = lat.Yinv @ z.real
    R, _ = choose_radius(lat, tol, float(np.linalg.norm(c)), 0)
    m = ellipsoid_points(lat.U, c - delta, R)
    n = m + delta
    E = 0.5 * np.einsum("ki,ij,kj->k", n, tau, n) + n @ z
    emax = float(E.real.max())
    w = np.exp(E - emax)
    cls = (m % 2) @ (1 << np.arange(g - 1, -1, -1))
    S = np.bincount(cls, weights=w.real, minlength=2 ** g) + 1j * np.bincount(cls, weights=w.imag, minlength=2 ** g)
    bits = ((np.arange(2 ** g)[:, None] >> np.arange(g - 1, -1, -1)[None, :]) & 1)
    sign = (-1.0) ** (bits @ bits.T)          # (-1)^{b.c}
    phase = np.exp(1j * math.pi * (bits @ delta))
    return phase * (sign @ S) * math.exp(emax), math.exp(emax)
