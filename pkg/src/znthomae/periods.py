"""Periods of the differentials w^(alpha)_beta, the period matrix and branch-point Taylor data.

Edge integrals run from lambda_a to lambda_b over the chart x in [-1, 1].
The substitution x = 2 I_v(N, N) - 1, v = (1+u)/2, with I the regularized
incomplete beta function, has dx/du proportional to (v(1-v))^(N-1); it
absorbs the (1 -+ x)^(-alpha/N) endpoint singularities so the integrand is
analytic in u and Gauss-Legendre converges geometrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betainc, beta as beta_fn

from .curve import ZNCurve, continue_s, differential_basis, Line, PathSpec, SheetPoint, branch_point
from .errors import IntegrationError, DomainError
from .homology import EdgeFrame, SymplecticBasis

TWO_PI_I = 2j * math.pi
N_START = 16
N_MAX = 4096


@lru_cache(maxsize=32)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def basis_arrays(curve: ZNCurve) -> tuple[np.ndarray, np.ndarray]:
    ab = differential_basis(curve)
    return np.array([a for a, _ in ab]), np.array([b for _, b in ab])


def edge_map(u: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """x(u), 1+x, 1-x and dx/du for the double-ended beta map."""
    v = 0.5 * (1.0 + u)
    p = betainc(N, N, v)
    q = betainc(N, N, 1.0 - v)
    dxdu = (v * (1.0 - v)) ** (N - 1) / beta_fn(N, N)
    return p - q, 2.0 * p, 2.0 * q, dxdu


def edge_integrand(fr: EdgeFrame, alphas, betas, u) -> np.ndarray:
    """Integrand in u of every w^(alpha)_beta over the sheet-0 lift; shape (len(u), g)."""
    N = fr.N
    x, xp, xm, dxdu = edge_map(u, N)
    z = fr.z(x)
    reg = fr.regular_factor(x)
    sing = (xp * xm) ** (1.0 / N)          # real, positive
    s = reg * sing
    return (z[:, None] ** (betas - 1)[None, :] * (fr.half * dxdu)[:, None]
            / s[:, None] ** alphas[None, :])


def _converge(fn, n0: int = N_START, rtol: float = 1e-14, label: str = "") -> tuple[np.ndarray, float, int]:
    """Double the Gauss-Legendre order until successive results agree."""
    n = n0
    prev = fn(n)
    while True:
        n *= 2
        cur = fn(n)
        scale = max(float(np.abs(cur).max()), 1e-300)
        err = float(np.abs(cur - prev).max())
        if err <= rtol * scale:
            return cur, err, n
        if n >= N_MAX:
            raise IntegrationError(f"{label}: no convergence at {n} nodes (last change {err:.2e})")
        prev = cur


def edge_integrals(fr: EdgeFrame, curve: ZNCurve, rtol: float = 1e-14, n_min: int = N_START):
    """Integrals of all basis differentials over the sheet-0 lift of an edge, a -> b."""
    alphas, betas = basis_arrays(curve)

    def fn(n):
        u, w = gauss_legendre(n)
        return w @ edge_integrand(fr, alphas, betas, u)

    return _converge(fn, n_min, rtol, f"edge ({fr.a},{fr.b})")


@dataclass(frozen=True)
class PeriodData:
    """Period matrices in the normalization  int_{A_j} v_k = 2 pi i delta_jk."""

    curve: ZNCurve
    basis: SymplecticBasis
    A: np.ndarray          # A[i, (alpha,beta)] = int_{A_i} w
    Bmat: np.ndarray       # same for B-cycles
    sigma: np.ndarray      # v_j = sum sigma[j, (alpha,beta)] w
    tau: np.ndarray
    detA: complex
    edge_values: np.ndarray   # (edges, g) integrals over sheet-0 lifts
    quad_error: float
    null_period_max: float
    nodes: int

    @property
    def c(self) -> np.ndarray:
        """c[(alpha,beta), j] = int_{A_j} w^(alpha)_beta."""
        return self.A.T

    @property
    def g(self) -> int:
        return self.A.shape[0]

    @property
    def cond_A(self) -> float:
        return float(np.linalg.cond(self.A))

    def symmetry_defect(self) -> float:
        return float(np.abs(self.tau - self.tau.T).max() / np.abs(self.tau).max())

    def re_tau_eigenvalues(self) -> np.ndarray:
        Y = self.tau.real
        return np.linalg.eigvalsh(0.5 * (Y + Y.T))

    def v_coefficients(self, z, s) -> np.ndarray:
        """v_j(z, s) as coefficients of dz; shape (..., g)."""
        alphas, betas = basis_arrays(self.curve)
        z = np.asarray(z, dtype=complex)[..., None]
        s = np.asarray(s, dtype=complex)[..., None]
        w = z ** (betas - 1) / s ** alphas
        return w @ self.sigma.T

    def to_dict(self) -> dict:
        cz = lambda M: [[[complex(x).real, complex(x).imag] for x in row] for row in np.atleast_2d(M)]
        return {
            "g": self.g,
            "A": cz(self.A),
            "tau": cz(self.tau),
            "detA": [self.detA.real, self.detA.imag],
            "cond_A": self.cond_A,
            "quad_error": self.quad_error,
            "null_period_max": self.null_period_max,
            "tau_symmetry_defect": self.symmetry_defect(),
            "re_tau_eigenvalues": self.re_tau_eigenvalues().tolist(),
            "nodes": self.nodes,
            "basis_fingerprint": self.basis.fingerprint(),
        }


def generator_periods(basis: SymplecticBasis, edge_vals: np.ndarray) -> np.ndarray:
    """Periods of each generator c_{e,k}; shape (M, g)."""
    curve = basis.curve
    N = curve.N
    alphas, _ = basis_arrays(curve)
    om = np.exp(-2j * np.pi * alphas / N)
    rows = []
    for e, k in basis.generators:
        rows.append((om ** k - om ** (k + 1)) * edge_vals[e])
    return np.array(rows)


def compute_periods(curve: ZNCurve, basis: SymplecticBasis, rtol: float = 1e-14,
                    density: int = 1) -> PeriodData:
    """A, B periods, sigma, tau and det A on the given basis.

    ``density`` multiplies the starting node count (self-convergence checks).
    """
    if basis.curve is not curve and basis.curve != curve:
        basis = basis.rebind(curve)
    vals, errs, nodes = [], [], []
    for fr in basis.frames:
        v, err, n = edge_integrals(fr, curve, rtol, N_START * density)
        vals.append(v)
        errs.append(err)
        nodes.append(n)
    E = np.array(vals)
    G = generator_periods(basis, E)
    A = basis.A @ G
    Bm = basis.B @ G
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise IntegrationError("A-period matrix is singular") from exc
    if np.linalg.cond(A) > 1e12:
        raise IntegrationError(f"A-period matrix is ill conditioned (cond {np.linalg.cond(A):.2e})")
    sigma = TWO_PI_I * Ainv.T
    tau = Bm @ sigma.T
    null = basis.null @ G if basis.null.size else np.zeros((0, A.shape[1]))
    null_max = float(np.abs(null).max() / np.abs(G).max()) if null.size else 0.0
    return PeriodData(curve, basis, A, Bm, sigma, tau, complex(np.linalg.det(A)), E,
                      float(max(errs)), null_max, int(max(nodes)))


# integration along paths ---------------------------------------------------------

def _segment_data(curve: ZNCurve, z0: complex, z1: complex, u: np.ndarray):
    """Nodes z(x), x = (1+u)/2 on [z0, z1] and the factors prod (1 - x/u_i)^(1/N)."""
    lam = curve.lambda_array
    d = z1 - z0
    ui = (lam - z0) / d
    x = 0.5 * (1.0 + u)
    fac = (1.0 - x[:, None] / ui[None, :])
    return x, z0 + d * x, fac


def regular_segment(curve: ZNCurve, z0: complex, s0: complex, z1: complex) -> complex:
    """s continued from (z0, s0) to z1 along the straight segment (closed form)."""
    lam = curve.lambda_array
    ui = (lam - z0) / (z1 - z0)
    if np.any((np.abs(ui.imag) < 1e-14 * np.abs(ui)) & (ui.real > 0) & (ui.real <= 1)):
        raise DomainError("segment passes through a branch point")
    return complex(s0 * np.prod((1.0 - 1.0 / ui) ** (1.0 / curve.N)))


def segment_integrals(curve: ZNCurve, z0: complex, s0: complex, z1: complex, rtol: float = 1e-14):
    """Integrals of all basis differentials along [z0, z1] starting from sheet value s0."""
    alphas, betas = basis_arrays(curve)
    d = z1 - z0
    N = curve.N

    def fn(n):
        u, w = gauss_legendre(n)
        _, z, fac = _segment_data(curve, z0, z1, u)
        s = s0 * np.prod(fac ** (1.0 / N), axis=1)
        f = z[:, None] ** (betas - 1) / s[:, None] ** alphas
        return 0.5 * d * (w @ f)

    v, _, _ = _converge(fn, N_START, rtol, "segment")
    return v


def branch_start_values(curve: ZNCurve, a: int, w: complex) -> np.ndarray:
    """The N constants c with s = c tau^(1/N) prod (1 - tau/u_i)^(1/N) on z = lambda_a + (w - lambda_a) tau."""
    cN = (w - curve.lambdas[a]) * curve.fprime_at(a)
    return complex(cN) ** (1.0 / curve.N) * np.exp(2j * np.pi * np.arange(curve.N) / curve.N)


def branch_segment(curve: ZNCurve, a: int, w: complex, c: complex, rtol: float = 1e-14):
    """Integrals of all basis differentials from Q_a to w, and the end value of s.

    The path z = lambda_a + (w - lambda_a) v^N, v in [0, 1], makes the integrand
    a polynomial-times-analytic function of v.
    """
    N = curve.N
    lam = curve.lambda_array
    la = lam[a]
    others = np.array([i for i in range(curve.n_branch) if i != a])
    ui = (lam[others] - la) / (w - la)
    alphas, betas = basis_arrays(curve)

    def fn(n):
        u, wt = gauss_legendre(n)
        v = 0.5 * (1.0 + u)
        tt = v ** N
        z = la + (w - la) * tt
        reg = c * np.prod((1.0 - tt[:, None] / ui[None, :]) ** (1.0 / N), axis=1)
        # s = reg * v ; dz = (w - la) N v^(N-1) dv, dv = du/2
        f = (z[:, None] ** (betas - 1) * ((w - la) * N * 0.5 * v[:, None] ** (N - 1 - alphas))
             / reg[:, None] ** alphas)
        return wt @ f

    vals, _, _ = _converge(fn, N_START, rtol, "branch segment")
    s_end = complex(c * np.prod((1.0 - 1.0 / ui) ** (1.0 / N)))
    return vals, s_end


def integrate_form(curve: ZNCurve, ab: tuple[int, int], path, basis: SymplecticBasis | None = None,
                   n: int | None = None, rtol: float = 1e-12) -> complex:
    """Integral of w^(alpha)_beta over a cycle (coefficient row) or a regular PathSpec.

    For a PathSpec, s is tracked node to node with ``continue_s``; Gauss-Legendre
    order is doubled until the result settles (or fixed to ``n``).
    """
    alpha, beta = ab
    if isinstance(path, PathSpec):
        def fn(nn):
            total = 0j
            cur = path.start
            for seg in path.segments:
                u, w = gauss_legendre(nn)
                t = 0.5 * (1.0 + u)
                acc = 0j
                prev_t, p = 0.0, cur
                for tk, wk in zip(t, w):
                    p = continue_s(curve, PathSpec(p, (seg.sub(prev_t, tk),)))
                    prev_t = tk
                    acc += 0.5 * wk * p.z ** (beta - 1) / p.s ** alpha * seg.derivative(tk)
                total += acc
                cur = continue_s(curve, PathSpec(p, (seg.sub(prev_t, 1.0),)))
            return np.array([total])

        if n is not None:
            return complex(fn(n)[0])
        return complex(_converge(fn, 16, rtol, "path")[0][0])
    if basis is None:
        raise ValueError("cycle integration needs the basis")
    coeffs = np.asarray(path)
    E = np.array([edge_integrals(fr, curve)[0] for fr in basis.frames])
    G = generator_periods(basis, E)
    j = differential_basis(curve).index((alpha, beta))
    return complex(coeffs @ G[:, j])


# branch-point Taylor data -----------------------------------------------------------

@dataclass(frozen=True)
class BranchTaylor:
    """coeffs[j, k]: coefficient of t^k dt in v_j at Q_i, k = 0..N-2.

    t is the local coordinate with s = t h(z), h(lambda_i) = BranchPoint.h0.
    ``series[j, k]`` extends the expansion to t^k, k < len, for reconstruction.
    """

    index: int
    coeffs: np.ndarray
    h0: complex
    series: np.ndarray

    def derivative_convention(self) -> np.ndarray:
        """k! * coeffs, i.e. the k-th t-derivative of v_j/dt at Q_i."""
        fact = np.array([math.factorial(k) for k in range(self.coeffs.shape[1])])
        return self.coeffs * fact[None, :]

    def evaluate(self, t: complex, order: int | None = None) -> np.ndarray:
        """Truncated series sum_k series[:, k] t^k (all terms by default)."""
        K = self.series.shape[1] if order is None else order
        return self.series[:, :K] @ (t ** np.arange(K))


def _series_exp(c: np.ndarray) -> np.ndarray:
    """Power series of exp(f) given f's coefficients with f(0) = 0."""
    n = len(c)
    out = np.zeros(n, dtype=complex)
    out[0] = 1.0
    for k in range(1, n):
        out[k] = sum(j * c[j] * out[k - j] for j in range(1, k + 1)) / k
    return out


def branch_taylor(curve: ZNCurve, periods: PeriodData, i: int, terms: int = 8) -> BranchTaylor:
    """Taylor data of the normalized differentials at Q_i.

    With z = lambda_i + T, T = t^N, w^(alpha)_beta = N (lambda_i+T)^(beta-1) h(z)^(-alpha) t^(N-1-alpha) dt
    and h^N = prod_{j != i}(z - lambda_j).  The coefficients of t^k, k <= N-2,
    are N lambda_i^(beta-1) h0^(-alpha); ``terms`` powers of T are kept for the
    full series.
    """
    N = curve.N
    bp = branch_point(curve, i)
    lam = curve.lambda_array
    li = lam[i]
    d = li - np.delete(lam, i)
    n = np.arange(1, terms)
    # log(h/h0) = (1/N) sum_j log(1 + T/d_j)
    logh = np.zeros(terms, dtype=complex)
    logh[1:] = ((-1.0) ** (n + 1) / n) * np.sum(d[:, None] ** (-n[None, :]), axis=0) / N
    ab = differential_basis(curve)
    g = len(ab)
    K = N * terms
    W = np.zeros((g, K), dtype=complex)
    for col, (alpha, beta) in enumerate(ab):
        hser = bp.h0 ** (-alpha) * _series_exp(-alpha * logh)
        zser = np.zeros(terms, dtype=complex)
        for r in range(min(beta, terms)):
            zser[r] = math.comb(beta - 1, r) * li ** (beta - 1 - r)
        prod = np.convolve(zser, hser)[:terms] * N
        off = N - 1 - alpha
        for r in range(terms):
            W[col, off + N * r] = prod[r]
    series = periods.sigma @ W
    return BranchTaylor(i, series[:, :N - 1].copy(), bp.h0, series)


def v_in_t(curve: ZNCurve, periods: PeriodData, i: int, t: complex) -> np.ndarray:
    """Direct evaluation of v_j / dt at local coordinate t near Q_i."""
    N = curve.N
    bp = branch_point(curve, i)
    lam = curve.lambda_array
    z = lam[i] + t ** N
    others = np.delete(lam, i)
    # h(z)^N = prod_{j != i}(z - lambda_j), continued from h0 along the short ray
    h = bp.h0 * np.prod((1.0 + t ** N / (lam[i] - others)) ** (1.0 / N))
    s = t * h
    return periods.v_coefficients(z, s) * N * t ** (N - 1)
