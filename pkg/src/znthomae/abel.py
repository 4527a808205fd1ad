"""Abel maps, the Riemann vector for a branch-point base, and the characteristics e_Lambda.

Abel integrals are taken from the base branch point Q_ref.  Branch points are
reached along the homology tree on the reference lift of each edge.  Generic
points are reached from a fixed regular point P* over polygonal routes, on
which s and the logarithms log(z - lambda_i) continue in closed form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .curve import ZNCurve, lambda_distance_to_segment, reference_point, sheet_roots
from .errors import CharacteristicError, DomainError, ThetaPrecisionError
from .partitions import OrderedPartition
from .periods import PeriodData, branch_segment, branch_start_values, segment_integrals
from .theta import Characteristic, theta, theta_half_family

TWO_PI_I = 2j * math.pi


# lattice bookkeeping ------------------------------------------------------------

def lattice_coordinates(tau: np.ndarray, v) -> tuple[np.ndarray, np.ndarray]:
    """Real (eps, delta) with v = 2 pi i eps + delta tau."""
    v = np.asarray(v, dtype=complex)
    delta = np.linalg.solve(tau.real, v.real)
    eps = (v.imag - tau.imag @ delta) / (2 * math.pi)
    return eps, delta


def lattice_defect(tau: np.ndarray, v) -> float:
    """Distance of v's lattice coordinates from integers (0 iff v is a period)."""
    eps, delta = lattice_coordinates(tau, v)
    return float(max(np.abs(eps - np.round(eps)).max(), np.abs(delta - np.round(delta)).max()))


# points on the surface ------------------------------------------------------------

@dataclass(frozen=True)
class SurfacePoint:
    """A regular point reached by an explicit route, with continued data.

    ``abel`` is int_{Q_ref}^{point} v along the route; ``logs[i]`` is the
    continued log(z - lambda_i).
    """

    z: complex
    s: complex
    abel: np.ndarray
    logs: np.ndarray
    route: tuple = field(default=())

    def vertices(self) -> list:
        return list(self.route) + [self.z]


def _piece_ok(lam: np.ndarray, z0: complex, z1: complex) -> bool:
    d = lambda_distance_to_segment(lam, z0, z1).min()
    return abs(z1 - z0) <= 2.0 * d


def _subdivide(lam: np.ndarray, z0: complex, z1: complex, depth: int = 0) -> list:
    """Split [z0, z1] so that each piece is at most twice its distance to the branch points."""
    if _piece_ok(lam, z0, z1) or depth > 30:
        return [(z0, z1)]
    zm = 0.5 * (z0 + z1)
    return _subdivide(lam, z0, zm, depth + 1) + _subdivide(lam, zm, z1, depth + 1)


def walk(curve: ZNCurve, periods: PeriodData, p: SurfacePoint, z1: complex, clearance: float | None = None) -> SurfacePoint:
    """Continue ``p`` along the straight segment to z1."""
    z1 = complex(z1)
    if z1 == p.z:
        return p
    lam = curve.lambda_array
    clr = curve.eps_clear if clearance is None else clearance
    if lambda_distance_to_segment(lam, p.z, z1).min() < clr:
        raise DomainError(f"segment {p.z} -> {z1} passes within {clr:.3g} of a branch point")
    z, s, ab, logs = p.z, p.s, p.abel.copy(), p.logs.copy()
    for a, b in _subdivide(lam, p.z, z1):
        w = segment_integrals(curve, a, s, b)
        ab = ab + periods.sigma @ w
        ui = (lam - a) / (b - a)
        step = np.log(1.0 - 1.0 / ui)
        logs = logs + step
        s = complex(s * np.exp(np.sum(step) / curve.N))
        z = b
    return SurfacePoint(z1, s, ab, logs, p.route + (p.z,))


def walk_route(curve: ZNCurve, periods: PeriodData, p: SurfacePoint, vertices) -> SurfacePoint:
    for v in vertices:
        p = walk(curve, periods, p, v)
    return p


def _outer_radius(curve: ZNCurve) -> tuple[complex, float]:
    lam = curve.lambda_array
    c = lam.mean()
    return complex(c), float(1.0 + np.abs(lam - c).max())


def route(curve: ZNCurve, z0: complex, z1: complex, clearance: float | None = None) -> list:
    """Intermediate vertices for a polygonal path z0 -> z1 avoiding the branch points.

    Direct when clear, otherwise out to the circle through the reference point,
    along chords of at most 45 degrees, and back in.
    """
    lam = curve.lambda_array
    clr = 2.0 * curve.eps_clear if clearance is None else clearance
    if lambda_distance_to_segment(lam, z0, z1).min() >= clr:
        return []
    c, R = _outer_radius(curve)
    angles = np.linspace(0.0, 2 * np.pi, 72, endpoint=False)

    def best_exit(z):
        score = [lambda_distance_to_segment(lam, z, c + R * np.exp(1j * a)).min() for a in angles]
        k = int(np.argmax(score))
        if score[k] < clr:
            raise DomainError(f"no clear route from {z}")
        return float(angles[k])

    a0, a1 = best_exit(z0), best_exit(z1)
    d = (a1 - a0 + np.pi) % (2 * np.pi) - np.pi
    nstep = max(1, int(math.ceil(abs(d) / (np.pi / 4))))
    pts = [c + R * np.exp(1j * (a0 + d * t / nstep)) for t in range(nstep + 1)]
    return [complex(p) for p in pts]


def loop_polygon(curve: ZNCurve, i: int, theta0: float, turns: int = 1, sides: int = 8) -> list:
    """Vertices of a counterclockwise polygon around lambda_i, starting and ending at angle theta0."""
    r = 0.4 * curve.min_separation
    lam = curve.lambdas[i]
    pts = []
    for t in range(1, sides * turns + 1):
        pts.append(complex(lam + r * np.exp(1j * (theta0 + 2 * np.pi * t / sides))))
    return pts


# base data ----------------------------------------------------------------------

@dataclass(frozen=True)
class AbelData:
    """Abel images of the branch points from Q_ref and the Riemann vector k."""

    ref: int
    branch: np.ndarray        # (n, g), A(Q_i) with A(Q_ref) = 0
    k: np.ndarray             # Riemann vector for base Q_ref
    k_char: Characteristic    # k = 2 pi i eps + delta tau, half-integer entries
    base: SurfacePoint        # P* on its reference sheet
    k_margin: float           # vanishing ratio of the runner-up half period

    @property
    def g(self) -> int:
        return self.branch.shape[1]


def abel_branch_points(curve: ZNCurve, periods: PeriodData, ref: int = 0) -> np.ndarray:
    """A(Q_i) - A(Q_ref) along tree paths on the reference edge lifts."""
    basis = periods.basis
    n = curve.n_branch
    adj: dict = {i: [] for i in range(n)}
    for e, (a, b) in enumerate(basis.edges):
        adj[a].append((b, e, +1))
        adj[b].append((a, e, -1))
    out = np.full((n, periods.g), np.nan, dtype=complex)
    out[ref] = 0.0
    stack = [ref]
    while stack:
        i = stack.pop()
        for j, e, sgn in adj[i]:
            if np.isnan(out[j, 0].real):
                out[j] = out[i] + sgn * (periods.sigma @ periods.edge_values[e])
                stack.append(j)
    return out


def base_point(curve: ZNCurve, periods: PeriodData, ref: int = 0, sheet: int = 0) -> SurfacePoint:
    """P* = reference_point on the given sheet, with its Abel image from Q_ref."""
    lam = curve.lambda_array
    zstar = reference_point(curve)
    rho = 0.3 * curve.min_separation
    angles = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    best = None
    for a in angles:
        w = lam[ref] + rho * np.exp(1j * a)
        others = np.delete(lam, ref)
        clr1 = lambda_distance_to_segment(others, lam[ref], w).min()
        via = route(curve, w, zstar)
        pts = [w] + via + [zstar]
        clr2 = min(lambda_distance_to_segment(lam, p, q).min() for p, q in zip(pts[:-1], pts[1:]))
        score = min(clr1, clr2)
        if best is None or score > best[0] + 1e-12:
            best = (score, w, via)
    score, w, via = best
    if score < curve.eps_clear:
        raise DomainError("no clear path from the base branch point to the reference point")
    target = sheet_roots(curve, zstar)[0] * curve.omega ** sheet
    logs0 = np.log(zstar - lam)
    cands = []
    for c in branch_start_values(curve, ref, w):
        vals, s_w = branch_segment(curve, ref, w, c)
        p = SurfacePoint(w, s_w, periods.sigma @ vals, np.zeros(curve.n_branch, complex))
        p = walk_route(curve, periods, p, via + [zstar])
        cands.append(p)
    k = int(np.argmin([abs(p.s - target) for p in cands]))
    p = cands[k]
    return SurfacePoint(zstar, complex(target), p.abel, logs0, (complex(lam[ref]),) + p.route)


def point_at(curve: ZNCurve, periods: PeriodData, base: SurfacePoint, z: complex,
             loops: tuple = ()) -> SurfacePoint:
    """Continue from ``base`` to z, first running the given (branch index, turns) loops."""
    p = base
    for i, turns in loops:
        lam_i = curve.lambdas[i]
        r = 0.4 * curve.min_separation
        angles = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
        starts = [lam_i + r * np.exp(1j * a) for a in angles]
        # enter the loop at the vertex with the clearest approach
        scores = []
        for v in starts:
            via = route(curve, p.z, v)
            pts = [p.z] + via + [v]
            scores.append(min(lambda_distance_to_segment(curve.lambda_array, a, b).min()
                              for a, b in zip(pts[:-1], pts[1:])))
        k = int(np.argmax(scores))
        v = starts[k]
        p = walk_route(curve, periods, p, route(curve, p.z, v) + [v])
        p = walk_route(curve, periods, p, loop_polygon(curve, i, float(angles[k]), turns))
    return walk_route(curve, periods, p, route(curve, p.z, z) + [complex(z)])


def random_points(curve: ZNCurve, count: int, rng: np.random.Generator, min_clear: float | None = None) -> list:
    """Generic z values in the disc spanned by the branch points, away from them."""
    lam = curve.lambda_array
    c = lam.mean()
    R = float(np.abs(lam - c).max())
    clr = 3.0 * curve.eps_clear if min_clear is None else min_clear
    out = []
    while len(out) < count:
        z = c + R * math.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        if np.abs(lam - z).min() > clr:
            out.append(complex(z))
    return out


# Riemann vector -------------------------------------------------------------------

def half_periods(g: int):
    """All characteristics with entries in {0, 1/2}, lexicographic in (delta, eps)."""
    for bits in itertools.product((0, 1), repeat=2 * g):
        yield Characteristic.from_integers(bits[:g], bits[g:], 2)


def riemann_vector(curve: ZNCurve, periods: PeriodData, base: SurfacePoint, ref: int = 0,
                   n_divisors: int = 2, seed: int = 12345) -> tuple[np.ndarray, Characteristic, float]:
    """k with base point Q_ref.

    Since K ~ (2g-2) Q_ref for a branch point on a Z_N curve, 2k is a period
    and k is one of the 2^(2g) half periods.  It is the one for which
    theta(A(D) + k) vanishes for effective divisors D of degree g-1.
    """
    g = periods.g
    tau = periods.tau
    rng = np.random.default_rng(seed)
    divisors = []
    for _ in range(n_divisors):
        zs = random_points(curve, g - 1, rng)
        pts = [point_at(curve, periods, base, z, ((int(rng.integers(curve.n_branch)), int(rng.integers(curve.N))),))
               for z in zs]
        divisors.append(sum((p.abel for p in pts), np.zeros(g, complex)))
    chars = list(half_periods(g))
    scores = np.zeros(len(chars))
    for ib, dbits in enumerate(itertools.product((0, 1), repeat=g)):
        delta = 0.5 * np.array(dbits, dtype=float)
        for AD in divisors:
            vals, scale = theta_half_family(AD, delta, tau)
            blk = slice(ib * 2 ** g, (ib + 1) * 2 ** g)
            scores[blk] = np.maximum(scores[blk], np.abs(vals) / scale)
    order = np.argsort(scores, kind="stable")
    best, runner = scores[order[0]], scores[order[1]] if len(order) > 1 else 1.0
    if best > 1e-8 or runner < 1e3 * max(best, 1e-16):
        raise CharacteristicError(
            f"Riemann vector not isolated: best vanishing ratio {best:.2e}, next {runner:.2e}", residual=best
        )
    ch = chars[order[0]]
    return ch.point(tau), ch, float(runner)


def abel_data(curve: ZNCurve, periods: PeriodData, ref: int = 0) -> AbelData:
    branch = abel_branch_points(curve, periods, ref)
    base = base_point(curve, periods, ref)
    k, kch, margin = riemann_vector(curve, periods, base, ref)
    return AbelData(ref, branch, k, kch, base, margin)


def torsion_defect(curve: ZNCurve, periods: PeriodData, data: AbelData) -> float:
    """max_{i,j} lattice distance of N (A(Q_i) - A(Q_j))."""
    N = curve.N
    return max(lattice_defect(periods.tau, N * (data.branch[i] - data.branch[0])) for i in range(curve.n_branch))


# characteristics of e_Lambda ---------------------------------------------------------

@dataclass(frozen=True)
class LambdaCharacteristic:
    partition: OrderedPartition
    e: np.ndarray
    delta: np.ndarray
    eps: np.ndarray
    char: Characteristic
    residual: float

    def to_dict(self) -> dict:
        a, b = self.char.integers()
        return {
            "partition": str(self.partition),
            "denominator": self.char.denominator,
            "delta_numerators": a,
            "eps_numerators": b,
            "residual": self.residual,
        }


def divisor_vector(curve: ZNCurve, data: AbelData, part: OrderedPartition) -> np.ndarray:
    """sum_j j sum_{q in Lambda_j} A(Q_q) - N A(Q_ref)."""
    v = np.zeros(data.g, complex)
    for j, idx in enumerate(part.parts):
        for q in idx:
            v = v + j * data.branch[q]
    return v - curve.N * data.branch[data.ref]


def e_lambda(curve: ZNCurve, periods: PeriodData, data: AbelData, part: OrderedPartition,
             tol_char: float = 1e-6) -> LambdaCharacteristic:
    if part.N != curve.N or part.m != curve.m:
        raise CharacteristicError(f"partition shape {part.N}x{part.m} does not fit the curve", residual=math.inf)
    e = divisor_vector(curve, data, part) - data.k
    eps, delta = lattice_coordinates(periods.tau, e)
    D = 2 * curve.N
    ie, idl = np.round(eps * D), np.round(delta * D)
    res = float(max(np.abs(eps * D - ie).max(), np.abs(delta * D - idl).max()) / D)
    if res > tol_char:
        raise CharacteristicError(f"e_Lambda for {part} is {res:.2e} off the 1/{D} grid", residual=res)
    ch = Characteristic.from_integers(idl.astype(int), ie.astype(int), D)
    return LambdaCharacteristic(part, e, delta, eps, ch, res)


def find_odd_half_char(tau: np.ndarray, threshold: float = 1e-8) -> Characteristic:
    """First odd half characteristic (lexicographic) with nonvanishing gradient at 0."""
    tau = np.asarray(tau, dtype=complex)
    g = tau.shape[0]
    report = []
    for ch in half_periods(g):
        if ch.half_parity() != 1:
            continue
        r = theta(np.zeros(g), ch, tau, order=1)
        ratio = float(np.linalg.norm(r.gradient) / r.scale)
        if ratio > threshold:
            return ch
        report.append((ch.delta, ch.eps, ratio))
    raise ThetaPrecisionError(f"no non-singular odd half characteristic: {report}")
