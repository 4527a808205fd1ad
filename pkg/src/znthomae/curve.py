"""Z_N curves s^N = prod (z - lambda_i), their sheets and holomorphic differentials."""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContinuationError, CurveValidationError, DomainError

EPS_ROOT = 1e-10


@dataclass(frozen=True)
class ZNCurve:
    """The branched cover s^N = f(z) with ``N*m`` simple branch points.

    ``lambdas`` keeps the user's order; branch point ``Q_{i+1}`` of the
    1-based notation is ``lambdas[i]``.
    """

    N: int
    lambdas: tuple
    eps_sep: float | None = None
    eps_root: float = EPS_ROOT

    def __post_init__(self):
        lam = tuple(complex(x) for x in self.lambdas)
        object.__setattr__(self, "lambdas", lam)
        if not isinstance(self.N, (int, np.integer)) or self.N < 2:
            raise CurveValidationError(f"N must be an integer >= 2, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        n = len(lam)
        if n == 0 or n % self.N:
            raise CurveValidationError(
                f"number of branch points ({n}) must be a positive multiple of N={self.N}"
            )
        for i, x in enumerate(lam):
            if not (math.isfinite(x.real) and math.isfinite(x.imag)):
                raise CurveValidationError(f"branch point {i} is not finite", index=i)
        arr = np.array(lam)
        dist = np.abs(arr[:, None] - arr[None, :])
        diam = float(dist.max()) if n > 1 else 1.0
        eps = self.eps_sep if self.eps_sep is not None else 1e-6 * max(diam, 1e-300)
        object.__setattr__(self, "eps_sep", float(eps))
        np.fill_diagonal(dist, np.inf)
        if n > 1 and dist.min() <= eps:
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            i, j = sorted((int(i), int(j)))
            raise CurveValidationError(
                f"branch points {i + 1} and {j + 1} coincide (distance {dist[i, j]:.3g} <= {eps:.3g})",
                index=j,
            )

    # basic invariants -------------------------------------------------
    @property
    def m(self) -> int:
        return len(self.lambdas) // self.N

    @property
    def n_branch(self) -> int:
        return len(self.lambdas)

    @property
    def omega(self) -> complex:
        return cmath.exp(2j * math.pi / self.N)

    @property
    def genus(self) -> int:
        return genus(self)

    @property
    def lambda_array(self) -> np.ndarray:
        return np.array(self.lambdas, dtype=complex)

    @property
    def min_separation(self) -> float:
        arr = self.lambda_array
        d = np.abs(arr[:, None] - arr[None, :])
        np.fill_diagonal(d, np.inf)
        return float(d.min())

    @property
    def eps_clear(self) -> float:
        return 0.1 * self.min_separation

    def f(self, z):
        z = np.asarray(z, dtype=complex)
        return np.prod(z[..., None] - self.lambda_array, axis=-1)

    def fprime_at(self, i: int) -> complex:
        """f'(lambda_i) = prod_{j != i} (lambda_i - lambda_j)."""
        lam = self.lambda_array
        return complex(np.prod(lam[i] - np.delete(lam, i)))

    def with_lambda(self, i: int, value: complex) -> "ZNCurve":
        lam = list(self.lambdas)
        lam[i] = complex(value)
        return ZNCurve(self.N, tuple(lam), eps_root=self.eps_root)

    # serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {"N": self.N, "lambdas": [[x.real, x.imag] for x in self.lambdas]}

    @classmethod
    def from_dict(cls, doc: dict) -> "ZNCurve":
        if "N" not in doc or "lambdas" not in doc:
            raise CurveValidationError("curve document needs keys 'N' and 'lambdas'")
        lam = []
        for i, pair in enumerate(doc["lambdas"]):
            try:
                if isinstance(pair, (int, float)):
                    lam.append(complex(pair))
                else:
                    re, im = pair
                    lam.append(complex(float(re), float(im)))
            except (TypeError, ValueError) as exc:
                raise CurveValidationError(f"branch point {i} is not a [re, im] pair", index=i) from exc
        return cls(int(doc["N"]), tuple(lam))

    @classmethod
    def from_json(cls, text: str) -> "ZNCurve":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SheetPoint:
    z: complex
    s: complex
    sheet: int | None = None


@dataclass(frozen=True)
class BranchPoint:
    """Branch point Q_i with local coordinate t = (z - lambda_i)^(1/N).

    The declared branch is ``s = t * h(z)`` with ``h(lambda_i)`` the principal
    N-th root of f'(lambda_i).
    """

    index: int
    value: complex
    h0: complex

    def t_of(self, z: complex, s: complex) -> complex:
        return s / self.h0


def branch_point(curve: ZNCurve, i: int) -> BranchPoint:
    return BranchPoint(i, curve.lambdas[i], curve.fprime_at(i) ** (1.0 / curve.N))


def genus(curve: ZNCurve) -> int:
    N, m = curve.N, curve.m
    return (N - 1) * (N * m - 2) // 2


def differential_basis(curve: ZNCurve) -> list[tuple[int, int]]:
    """Index pairs (alpha, beta) of w = z^(beta-1) dz / s^alpha, lexicographic."""
    return [(a, b) for a in range(1, curve.N) for b in range(1, a * curve.m)]


def eval_differential(curve: ZNCurve, ab: tuple[int, int], p: SheetPoint) -> complex:
    """Coefficient of dz of w^(alpha)_beta at ``p``."""
    alpha, beta = ab
    if not cmath.isfinite(p.z):
        raise DomainError("differentials are not evaluated at infinity")
    fz = complex(curve.f(p.z))
    scale = max(1.0, max(abs(p.z - x) for x in curve.lambdas))
    if abs(fz) <= 1e-12 * scale ** curve.n_branch or p.s == 0:
        raise DomainError(f"z={p.z} is a branch point")
    return p.z ** (beta - 1) / p.s ** alpha


# sheets -------------------------------------------------------------------

def reference_point(curve: ZNCurve) -> complex:
    """Default base z*: on the positive real ray from the centroid, beyond all branch points."""
    lam = curve.lambda_array
    c = lam.mean()
    return complex(c + 1.0 + np.abs(lam - c).max())


def sheet_roots(curve: ZNCurve, z: complex) -> np.ndarray:
    """The N roots of s^N = f(z), ordered by principal argument.

    Sheet k of the reference labeling at z* is ``roots[0] * omega**k``.
    """
    fz = complex(curve.f(z))
    r0 = fz ** (1.0 / curve.N)
    roots = r0 * np.exp(2j * np.pi * np.arange(curve.N) / curve.N)
    order = np.argsort(np.angle(roots), kind="stable")
    return roots[order]


def point_on_sheet(curve: ZNCurve, z: complex, sheet: int) -> SheetPoint:
    """Point over ``z`` whose s equals s_0(z) * omega**sheet, s_0 the lowest-argument root."""
    base = sheet_roots(curve, z)[0]
    return SheetPoint(complex(z), complex(base * curve.omega ** sheet), sheet % curve.N)


# paths and continuation -----------------------------------------------------

@dataclass(frozen=True)
class Line:
    z0: complex
    z1: complex

    def point(self, t: float) -> complex:
        return self.z0 + (self.z1 - self.z0) * t

    def derivative(self, t: float) -> complex:
        return self.z1 - self.z0

    def sub(self, t0: float, t1: float) -> "Line":
        return Line(self.point(t0), self.point(t1))

    @property
    def length(self) -> float:
        return abs(self.z1 - self.z0)


@dataclass(frozen=True)
class Arc:
    center: complex
    radius: float
    theta0: float
    theta1: float

    def point(self, t: float) -> complex:
        th = self.theta0 + (self.theta1 - self.theta0) * t
        return self.center + self.radius * cmath.exp(1j * th)

    def derivative(self, t: float) -> complex:
        th = self.theta0 + (self.theta1 - self.theta0) * t
        return 1j * self.radius * (self.theta1 - self.theta0) * cmath.exp(1j * th)

    def sub(self, t0: float, t1: float) -> "Arc":
        d = self.theta1 - self.theta0
        return Arc(self.center, self.radius, self.theta0 + d * t0, self.theta0 + d * t1)

    @property
    def length(self) -> float:
        return abs(self.theta1 - self.theta0) * self.radius


@dataclass(frozen=True)
class PathSpec:
    """Piecewise path in the z-plane with a starting point on the curve.

    ``end_branch`` names a branch point index the path runs into; the last
    stretch inside its clearance disc is not tracked, the result is Q_i.
    """

    start: SheetPoint
    segments: tuple = field(default_factory=tuple)
    end_branch: int | None = None

    @property
    def end_z(self) -> complex:
        return self.segments[-1].point(1.0) if self.segments else self.start.z


def _check_on_curve(curve: ZNCurve, z: complex, s: complex) -> None:
    fz = complex(curve.f(z))
    if abs(s ** curve.N - fz) > 1e3 * curve.eps_root * max(1.0, abs(fz)):
        raise ContinuationError(f"start point (z={z}, s={s}) is not on the curve", position=z)


def continue_s(curve: ZNCurve, path: PathSpec, min_step: float = 1e-13) -> SheetPoint:
    """Analytically continue s along ``path`` without jumping between sheets.

    A step to z' is accepted only when the tracked root is the unique nearest
    root of s^N = f(z') and at least twice closer than the runner-up; otherwise
    the step is halved.
    """
    N = curve.N
    z, s = complex(path.start.z), complex(path.start.s)
    _check_on_curve(curve, z, s)
    units = np.exp(2j * np.pi * np.arange(N) / N)
    stop_r = None
    if path.end_branch is not None:
        stop_r = 0.1 * curve.eps_clear
        lam_end = curve.lambdas[path.end_branch]
    for seg in path.segments:
        t, dt = 0.0, 1.0 / 32
        while t < 1.0:
            dt = min(dt, 1.0 - t)
            z_new = seg.point(t + dt)
            if stop_r is not None and abs(z_new - lam_end) < stop_r:
                if seg is path.segments[-1]:
                    return SheetPoint(lam_end, 0j)
            fz = complex(curve.f(z_new))
            roots = fz ** (1.0 / N) * units
            d = np.abs(roots - s)
            order = np.argsort(d)
            near, second = d[order[0]], d[order[1]]
            fz_old = complex(curve.f(z))
            ok = 2.0 * near <= second and abs(fz / fz_old - 1.0) < 0.5 if fz_old != 0 else False
            if ok:
                z, s = z_new, complex(roots[order[0]])
                t += dt
                dt *= 1.5
            else:
                dt *= 0.5
                if dt < min_step:
                    raise ContinuationError(
                        f"step size underflow near z={z} (branch point too close to the path)",
                        position=z,
                    )
    if path.end_branch is not None:
        return SheetPoint(curve.lambdas[path.end_branch], 0j)
    return SheetPoint(z, s)


def loop_around(curve: ZNCurve, i: int, start: SheetPoint, radius: float | None = None) -> PathSpec:
    """Keyhole loop from ``start`` once counterclockwise around lambda_i."""
    lam = curve.lambdas[i]
    r = radius if radius is not None else 0.5 * curve.min_separation
    direction = (start.z - lam) / abs(start.z - lam)
    near = lam + r * direction
    th0 = cmath.phase(direction)
    return PathSpec(
        start,
        (Line(start.z, near), Arc(lam, r, th0, th0 + 2 * math.pi), Line(near, start.z)),
    )


def lambda_distance_to_segment(lambdas: Sequence[complex], z0: complex, z1: complex) -> np.ndarray:
    """Euclidean distance of every lambda to the closed segment [z0, z1]."""
    lam = np.asarray(lambdas, dtype=complex)
    d = z1 - z0
    if d == 0:
        return np.abs(lam - z0)
    t = np.clip(((lam - z0) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
    return np.abs(lam - (z0 + t * d))
