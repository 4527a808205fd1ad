"""Prime form, the analytic and algebraic Szego kernels, the canonical differential and Fay's identity.

Half-differentials are trivialized by sqrt(dz).  Every sample point is a
SurfacePoint continued from the reference point P*, so the Abel image,
s, the logarithms log(z - lambda_i) and h_alpha all follow one path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial import chebyshev as C

from .abel import (AbelData, SurfacePoint, _subdivide, lattice_coordinates, point_at, random_points, route,
                   walk, walk_route)
from .curve import ZNCurve, lambda_distance_to_segment
from .errors import SampleRejected, SingularThetaError
from .partitions import OrderedPartition, q_l, reverse, weights
from .periods import PeriodData, _converge, basis_arrays, edge_integrand, gauss_legendre
from .theta import Characteristic, theta

SING_THRESHOLD = 1e-10
OMEGA_STEP = 2.5e-3          # finite-difference step for omega, relative to local_scale


@dataclass(frozen=True)
class KernelPoint:
    """A SurfacePoint together with the continued square root h_alpha."""

    p: SurfacePoint
    h: complex
    v: np.ndarray            # v_j(x) as dz coefficients

    @property
    def z(self) -> complex:
        return self.p.z


@dataclass(frozen=True)
class KernelContext:
    curve: ZNCurve
    periods: PeriodData
    abel: AbelData
    alpha: Characteristic
    dtheta_alpha: np.ndarray     # gradient of theta[alpha] at 0
    start: KernelPoint           # P* with a fixed choice of h

    @property
    def tau(self) -> np.ndarray:
        return self.periods.tau


def h_alpha_sq(ctx_or_grad, periods: PeriodData, z, s) -> complex:
    """sum_j d theta[alpha]/dz_j (0) v_j(x), as a dz coefficient."""
    grad = ctx_or_grad.dtheta_alpha if isinstance(ctx_or_grad, KernelContext) else np.asarray(ctx_or_grad)
    return complex(periods.v_coefficients(z, s) @ grad)


def make_context(curve: ZNCurve, periods: PeriodData, abel: AbelData, alpha: Characteristic) -> KernelContext:
    r = theta(np.zeros(periods.g), alpha, periods.tau, order=1)
    grad = r.gradient
    b = abel.base
    base = SurfacePoint(b.z, b.s, b.abel, b.logs, ())
    h2 = h_alpha_sq(grad, periods, b.z, b.s)
    if abs(h2) == 0:
        raise SampleRejected("h_alpha vanishes at the reference point")
    start = KernelPoint(base, complex(np.sqrt(h2)), periods.v_coefficients(b.z, b.s))
    return KernelContext(curve, periods, abel, alpha, grad, start)


def _h_along(ctx: KernelContext, z0: complex, s0: complex, h0: complex, z1: complex) -> complex:
    """Continue h = sqrt(h^2) from z0 to z1 on the straight segment, by dense sampling."""
    curve, P = ctx.curve, ctx.periods
    lam = curve.lambda_array
    z, s, h = z0, s0, h0
    for a, b in _subdivide(lam, z0, z1):
        ui = (lam - a) / (b - a)
        t = np.linspace(0.0, 1.0, 33)[1:]
        ss = s * np.prod((1.0 - t[:, None] / ui[None, :]) ** (1.0 / curve.N), axis=1)
        zz = a + (b - a) * t
        h2 = P.v_coefficients(zz, ss) @ ctx.dtheta_alpha
        for val in h2:
            r = np.sqrt(val)
            nh = r if abs(r - h) <= abs(r + h) else -r
            if abs(nh - h) > 0.5 * max(abs(h), abs(nh)):
                raise SampleRejected("h_alpha varies too fast along the path (near a zero)")
            h = nh
        s = ss[-1]
        z = b
    return complex(h)


def kernel_point(ctx: KernelContext, z: complex, loops: tuple = (), start: KernelPoint | None = None) -> KernelPoint:
    """Continue from ``start`` (default P*) to z through the optional loops."""
    st = ctx.start if start is None else start
    p = point_at(ctx.curve, ctx.periods, st.p, z, loops)
    verts = list(p.route[len(st.p.route):]) + [p.z]
    zc, sc, h = st.p.z, st.p.s, st.h
    lam = ctx.curve.lambda_array
    for v in verts[1:]:
        h = _h_along(ctx, zc, sc, h, v)
        ui = (lam - zc) / (v - zc)
        sc = complex(sc * np.prod((1.0 - 1.0 / ui) ** (1.0 / ctx.curve.N)))
        zc = v
    if abs(sc - p.s) > 1e-8 * abs(p.s):
        raise SampleRejected("sheet bookkeeping mismatch while tracking h")
    return KernelPoint(p, h, ctx.periods.v_coefficients(p.z, p.s))


def step_from(ctx: KernelContext, x: KernelPoint, dz: complex) -> KernelPoint:
    """The point over z(x) + dz reached along the short straight segment."""
    p = walk(ctx.curve, ctx.periods, x.p, x.z + dz, clearance=0.0)
    h = _h_along(ctx, x.z, x.p.s, x.h, x.z + dz)
    return KernelPoint(p, h, ctx.periods.v_coefficients(p.z, p.s))


# prime form and analytic kernel ---------------------------------------------------

def prime_form(ctx: KernelContext, x: KernelPoint, y: KernelPoint) -> complex:
    u = y.p.abel - x.p.abel
    return theta(u, ctx.alpha, ctx.tau, order=0).value / (x.h * y.h)


def szego_analytic(ctx: KernelContext, x: KernelPoint, y: KernelPoint, e: Characteristic) -> complex:
    """R(x, y | e) = theta[e](y - x) / (theta[e](0) E(x, y))."""
    g = ctx.periods.g
    t0 = theta(np.zeros(g), e, ctx.tau, order=0)
    if abs(t0.value) < SING_THRESHOLD * t0.scale:
        raise SingularThetaError(f"theta[e](0) vanishes for e = {e}")
    u = y.p.abel - x.p.abel
    return theta(u, e, ctx.tau, order=0).value / (t0.value * prime_form(ctx, x, y))


def b_loop_check(ctx: KernelContext, x: KernelPoint, y: KernelPoint, i: int) -> tuple[float, float]:
    """E(x, y + B_i) vs exp(-tau_ii/2 - int_x^y v_i) E(x, y): (modulus gap, distance of phase from +-1)."""
    u = y.p.abel - x.p.abel
    shifted = theta(u + ctx.tau[i], ctx.alpha, ctx.tau, order=0).value / (x.h * y.h)
    base = prime_form(ctx, x, y)
    pred = np.exp(-0.5 * ctx.tau[i, i] - u[i]) * base
    ratio = shifted / pred
    return abs(abs(ratio) - 1.0), min(abs(ratio - 1.0), abs(ratio + 1.0))


# algebraic kernel -------------------------------------------------------------------

@dataclass(frozen=True)
class AlgebraicKernel:
    """Exponent data of F(x, y | Lambda) with the branch convention fixed.

    f_l(x) = B(x) prod_i (z - lambda_i)^(r_ij) s^j with l = -(N-1)/2 + j and
    B(x) = exp(sum_i q_{-(N-1)/2}(k_i) log(z - lambda_i)); the partner
    f_{-l}(y, Lambda^-) is taken as the reciprocal of the same expression at y.
    """

    N: int
    q0: np.ndarray        # q_{-(N-1)/2}(k_i) as floats
    r: np.ndarray         # integer r[i, j]

    @classmethod
    def build(cls, part: OrderedPartition) -> "AlgebraicKernel":
        N = part.N
        k = weights(part)
        l0 = Fraction(-(N - 1), 2)
        q0 = [q_l(N, l0, ki) for ki in k]
        r = np.zeros((len(k), N), dtype=np.int64)
        for i, ki in enumerate(k):
            for j in range(N):
                val = q_l(N, l0 + j, ki) - q0[i] - Fraction(j, N)
                if val.denominator != 1:
                    raise ArithmeticError("non-integral branch exponent")
                r[i, j] = int(val)
        return cls(N, np.array([float(x) for x in q0]), r)


def szego_algebraic(x: SurfacePoint, y: SurfacePoint, part: OrderedPartition | AlgebraicKernel) -> complex:
    """F(x, y | Lambda) in the sqrt(dz) trivialization."""
    K = part if isinstance(part, AlgebraicKernel) else AlgebraicKernel.build(part)
    dz = y.z - x.z
    if dz == 0:
        raise SampleRejected("F is evaluated off the fibre diagonal only")
    dL = x.logs - y.logs
    pref = np.exp(K.q0 @ dL)
    terms = np.exp(K.r.T @ dL) * (x.s / y.s) ** np.arange(K.N)
    return complex(pref * terms.sum() / (K.N * dz))


def compare_szego(ctx: KernelContext, pairs, part: OrderedPartition, e: Characteristic,
                  ref_pair=None) -> dict:
    """Sign-resolved and modulus comparison of R(x,y|e) with F(x,y|Lambda).

    The unimodular constant c is fixed at the reference pair (default the
    first pair) and snapped to +-1 when it is that close; deviations are
    |R - c F| / |F|.
    """
    K = AlgebraicKernel.build(part)
    R = np.array([szego_analytic(ctx, x, y, e) for x, y in pairs])
    F = np.array([szego_algebraic(x.p, y.p, K) for x, y in pairs])
    if ref_pair is None:
        c = R[0] / F[0]
    else:
        c = szego_analytic(ctx, *ref_pair, e) / szego_algebraic(ref_pair[0].p, ref_pair[1].p, K)
    c_unit = c / abs(c)
    is_sign = min(abs(c_unit - 1), abs(c_unit + 1)) < 1e-6
    if is_sign:
        c_unit = 1.0 if c_unit.real > 0 else -1.0
    dev = np.abs(R - c_unit * F) / np.abs(F)
    mod = np.abs(np.abs(R) - np.abs(F)) / np.abs(F)
    return {
        "phase": [float(np.real(c_unit)), float(np.imag(c_unit))],
        "phase_is_sign": bool(is_sign),
        "max_deviation": float(dev.max()),
        "max_modulus_deviation": float(mod.max()),
        "deviations": dev.tolist(),
        "R_abs": np.abs(R).tolist(),
        "F_abs": np.abs(F).tolist(),
    }


# canonical differential and Fay ------------------------------------------------------

def local_scale(ctx: KernelContext, x: KernelPoint, y: KernelPoint) -> float:
    lam = ctx.curve.lambda_array
    return float(min(np.abs(lam - x.z).min(), np.abs(lam - y.z).min(), abs(x.z - y.z)))


def canonical_diff(ctx: KernelContext, x: KernelPoint, y: KernelPoint, h: float | None = None) -> complex:
    """d_x d_y log E(x, y) by the four-point central difference in the z charts.

    The h_alpha factors drop out of the mixed difference, so only
    theta[alpha](A(y) - A(x)) is differenced.
    """
    if h is None:
        h = OMEGA_STEP * local_scale(ctx, x, y)
    xs = [step_from(ctx, x, +h), step_from(ctx, x, -h)]
    ys = [step_from(ctx, y, +h), step_from(ctx, y, -h)]
    val = {}
    for a, xp in zip((1, -1), xs):
        for b, yp in zip((1, -1), ys):
            val[a, b] = theta(yp.p.abel - xp.p.abel, ctx.alpha, ctx.tau, order=0).value
    ratio = (val[1, 1] * val[-1, -1]) / (val[1, -1] * val[-1, 1])
    return complex(np.log(ratio) / (4 * h * h))


def canonical_diff_analytic(ctx: KernelContext, ux: np.ndarray, vx: np.ndarray, uy: np.ndarray, vy: np.ndarray) -> complex:
    """-sum_ij d_i d_j log theta[alpha](A(y) - A(x)) v_i(x) v_j(y) from Abel images and v's."""
    r = theta(uy - ux, ctx.alpha, ctx.tau, order=2)
    return complex(-(vx @ r.log_hessian @ vy))


def fay_rhs(ctx: KernelContext, x: KernelPoint, y: KernelPoint, e: Characteristic, omega: complex) -> complex:
    r = theta(np.zeros(ctx.periods.g), e, ctx.tau, order=2)
    return complex(omega + x.v @ r.log_hessian @ y.v)


def fay_residual(ctx: KernelContext, x: KernelPoint, y: KernelPoint, e: Characteristic,
                 h: float | None = None, omega: complex | None = None) -> float:
    """Relative residual of R(x,y|e) R(x,y|-e) = omega(x,y) + sum d^2 log theta[e](0) v_i(x) v_j(y)."""
    lhs = szego_analytic(ctx, x, y, e) * szego_analytic(ctx, x, y, -e)
    w = canonical_diff(ctx, x, y, h) if omega is None else omega
    rhs = fay_rhs(ctx, x, y, e, w)
    return float(abs(lhs - rhs) / abs(lhs))


def fay_check(ctx: KernelContext, x: KernelPoint, y: KernelPoint, e: Characteristic) -> dict:
    """Fay residual at the default step, and its order measured at 4x and 2x that step.

    The order is read off at larger steps, where truncation dominates roundoff.
    """
    sc = local_scale(ctx, x, y)
    h = OMEGA_STEP * sc
    r = fay_residual(ctx, x, y, e, h)
    r1 = fay_residual(ctx, x, y, e, 4 * h)
    r2 = fay_residual(ctx, x, y, e, 2 * h)
    return {"h": h, "residual": r, "order_steps": [4 * h, 2 * h], "order_residuals": [r1, r2],
            "improvement": r1 / r2 if r2 > 0 else math.inf}


def omega_a_period(ctx: KernelContext, y: KernelPoint, j: int, rtol: float = 1e-10) -> complex:
    """int_{A_j} omega(x, y) dx with the closed-form omega, over the tree-edge lifts of A_j."""
    curve, P = ctx.curve, ctx.periods
    basis = P.basis
    alphas, betas = basis_arrays(curve)
    N = curve.N
    lam = curve.lambda_array
    for fr in basis.frames:
        if lambda_distance_to_segment([y.z], lam[fr.a], lam[fr.b])[0] < curve.eps_clear:
            raise SampleRejected("y lies too close to a homology edge")
    coeff: dict = {}
    for (e, k), c in zip(basis.generators, basis.A[j]):
        if c:
            coeff[(e, k)] = coeff.get((e, k), 0) + int(c)
            coeff[(e, k + 1)] = coeff.get((e, k + 1), 0) - int(c)
    total = 0j
    deg = 96
    for (e, k), c in sorted(coeff.items()):
        if c == 0:
            continue
        fr = basis.frames[e]
        phase = np.exp(-2j * np.pi * alphas * k / N)
        cheb = C.chebinterpolate(lambda u: (P.sigma @ (edge_integrand(fr, alphas, betas, u) * phase).T).T.real, deg)
        cheb_i = C.chebinterpolate(lambda u: (P.sigma @ (edge_integrand(fr, alphas, betas, u) * phase).T).T.imag, deg)
        anti_r, anti_i = C.chebint(cheb, lbnd=-1), C.chebint(cheb_i, lbnd=-1)
        base = ctx.abel.branch[fr.a]

        def fn(n):
            u, w = gauss_legendre(n)
            Ax = base + (C.chebval(u, anti_r) + 1j * C.chebval(u, anti_i)).T
            G = (P.sigma @ (edge_integrand(fr, alphas, betas, u) * phase).T).T
            vals = np.array([canonical_diff_analytic(ctx, Ax[m], G[m], y.p.abel, y.v) for m in range(len(u))])
            return np.array([w @ vals])

        val, _, _ = _converge(fn, 32, rtol, "omega A-period")
        total += c * val[0]
    return complex(total)


# sampling ----------------------------------------------------------------------------

def sample_pairs(ctx: KernelContext, count: int, seed: int, min_gap: float | None = None) -> list:
    """Reproducible generic pairs (x, y) on various sheets, away from branch points and each other."""
    curve = ctx.curve
    rng = np.random.default_rng(seed)
    gap = 0.1 * curve.min_separation if min_gap is None else min_gap
    pairs = []
    attempts = 0
    while len(pairs) < count:
        attempts += 1
        if attempts > 20 * count + 20:
            raise SampleRejected(f"could only place {len(pairs)} of {count} sample pairs")
        zx, zy = random_points(curve, 2, rng)
        if abs(zx - zy) < gap:
            continue
        lx = ((int(rng.integers(curve.n_branch)), int(rng.integers(curve.N))),)
        ly = ((int(rng.integers(curve.n_branch)), int(rng.integers(curve.N))),)
        try:
            x = kernel_point(ctx, zx, lx)
            y = kernel_point(ctx, zy, ly)
            for p in (x, y):
                if abs(p.h) ** 2 < 1e-6 * np.abs(p.v).max() * np.abs(ctx.dtheta_alpha).max():
                    raise SampleRejected("sample point close to a zero of h_alpha")
        except SampleRejected:
            continue
        pairs.append((x, y))
    return pairs
