"""Monodromy and a canonical homology basis built from lifted tree edges.

The branch points are joined by a Euclidean minimum spanning tree.  Over an
edge e = [lambda_a, lambda_b] the curve has N lifts gamma_e^(k) (sheet k),
which meet only at the two branch points.  The closed chains

    c_{e,k} = gamma_e^(k) - gamma_e^(k+1),    k = 0..N-2,

span H_1 of the surface.  Their intersection numbers are read off from the
directions in which the lifts leave each branch point in its local
coordinate t = (z - lambda)^(1/N); an integer congruence reduction then gives
a symplectic basis with intersection matrix J exactly.
"""

from __future__ import annotations

import cmath
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree

from .curve import (ZNCurve, branch_point, continue_s, lambda_distance_to_segment, loop_around,
                    point_on_sheet, reference_point)
from .errors import BasisConstructionError

TWO_PI = 2.0 * math.pi


# monodromy -------------------------------------------------------------------

@dataclass(frozen=True)
class MonodromyData:
    base: complex
    order: tuple          # branch indices in angular order around the base
    permutations: tuple   # permutations[i][k] = sheet reached from sheet k around lambda_i

    def product(self) -> tuple:
        """Composition sigma_1 ... sigma_n in loop order, applied left to right."""
        N = len(self.permutations[0])
        perm = list(range(N))
        for i in self.order:
            sig = self.permutations[i]
            perm = [sig[p] for p in perm]
        return tuple(perm)


def _is_ncycle(perm) -> bool:
    N = len(perm)
    seen, k = set(), 0
    for _ in range(N):
        seen.add(k)
        k = perm[k]
    return k == 0 and len(seen) == N


def monodromy(curve: ZNCurve, base: complex | None = None) -> MonodromyData:
    """Sheet permutations from keyhole loops at the reference point."""
    z0 = reference_point(curve) if base is None else complex(base)
    lam = curve.lambda_array
    ang = np.angle(lam - z0)
    order = tuple(int(i) for i in np.lexsort((np.abs(lam - z0), ang)))
    roots = [point_on_sheet(curve, z0, k) for k in range(curve.N)]
    r = 0.4 * curve.min_separation
    perms = []
    for i in range(curve.n_branch):
        perm = []
        for k in range(curve.N):
            end = continue_s(curve, loop_around(curve, i, roots[k], r))
            d = [abs(end.s - p.s) for p in roots]
            perm.append(int(np.argmin(d)))
        perms.append(tuple(perm))
    data = MonodromyData(z0, order, tuple(perms))
    for i, p in enumerate(perms):
        if not _is_ncycle(p):
            raise BasisConstructionError(f"monodromy around branch point {i} is not an N-cycle: {p}")
    if data.product() != tuple(range(curve.N)):
        raise BasisConstructionError("product of local monodromies is not the identity")
    return data


# edge geometry ---------------------------------------------------------------

@dataclass(frozen=True)
class EdgeFrame:
    """Affine chart z = mid + half*x, x in [-1, 1], of the edge [lambda_a, lambda_b].

    The reference lift is s(x) = c0 ((1-x)(1+x))^(1/N) prod_i (1 - x/u_i)^(1/N)
    over the other branch points, all powers principal.  Sheet k is s * omega^k.
    """

    a: int
    b: int
    mid: complex
    half: complex
    others: tuple
    u: np.ndarray
    c0: complex
    N: int

    def z(self, x):
        return self.mid + self.half * np.asarray(x)

    def regular_factor(self, x) -> np.ndarray:
        """c0 prod_i (1 - x/u_i)^(1/N), nonvanishing on [-1, 1]."""
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        return self.c0 * np.prod((1.0 - x[:, None] / self.u[None, :]) ** (1.0 / self.N), axis=1)

    def s(self, x, sheet: int = 0) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        w = np.exp(2j * math.pi * sheet / self.N)
        return self.regular_factor(x) * ((1 - x) * (1 + x)) ** (1.0 / self.N) * w


def _make_frame(curve: ZNCurve, a: int, b: int, c0_prev: complex | None = None) -> EdgeFrame:
    N = curve.N
    lam = curve.lambda_array
    mid = 0.5 * (lam[a] + lam[b])
    half = 0.5 * (lam[b] - lam[a])
    others = tuple(i for i in range(curve.n_branch) if i not in (a, b))
    u = (lam[list(others)] - mid) / half if others else np.zeros(0, complex)
    c0N = -half ** curve.n_branch * np.prod(-u)
    roots = complex(c0N) ** (1.0 / N) * np.exp(2j * np.pi * np.arange(N) / N)
    if c0_prev is None:
        c0 = complex(roots[0])
    else:
        c0 = complex(roots[int(np.argmin(np.abs(roots - c0_prev)))])
    return EdgeFrame(a, b, complex(mid), complex(half), others, np.asarray(u, dtype=complex), c0, N)


def tree_edges(curve: ZNCurve) -> tuple:
    """Edges (a, b), a < b, of the Euclidean minimum spanning tree, sorted."""
    lam = curve.lambda_array
    D = np.abs(lam[:, None] - lam[None, :])
    T = minimum_spanning_tree(D).tocoo()
    edges = sorted((int(min(i, j)), int(max(i, j))) for i, j in zip(T.row, T.col))
    if len(edges) != curve.n_branch - 1:
        raise BasisConstructionError("spanning tree of the branch points is incomplete")
    for a, b in edges:
        others = [i for i in range(curve.n_branch) if i not in (a, b)]
        if others:
            d = lambda_distance_to_segment(lam[others], lam[a], lam[b])
            if d.min() < curve.eps_clear:
                raise BasisConstructionError(f"tree edge ({a},{b}) passes too close to another branch point")
    return tuple(edges)


# intersection numbers ------------------------------------------------------------

def _ccw_inside(lo: float, x: float, hi: float) -> bool:
    """x strictly inside the counterclockwise arc from lo to hi."""
    dx = (x - lo) % TWO_PI
    dh = (hi - lo) % TWO_PI
    return 0.0 < dx < dh


def local_index(in1: float, out1: float, in2: float, out2: float) -> int:
    """Sign of the crossing of two chains through a common point.

    Each chain arrives along ray ``in`` and leaves along ray ``out`` (angles in
    the local coordinate).  +1 when chain 2 passes from the right of chain 1
    to its left.
    """
    left_in = _ccw_inside(out1, in2, in1)
    left_out = _ccw_inside(out1, out2, in1)
    if left_in == left_out:
        return 0
    return 1 if left_out else -1


def _ray_angles(curve: ZNCurve, fr: EdgeFrame) -> tuple[float, float]:
    """Angles in the t-planes at lambda_a and lambda_b of the sheet-0 lift."""
    N = curve.N
    ha = branch_point(curve, fr.a).h0
    hb = branch_point(curve, fr.b).h0
    pa = fr.regular_factor(-1.0)[0] * 2.0 ** (1.0 / N)
    pb = fr.regular_factor(1.0)[0] * 2.0 ** (1.0 / N)
    return cmath.phase(pa / ha), cmath.phase(pb / hb)


def generator_intersections(curve: ZNCurve, edges, frames) -> np.ndarray:
    """Integer intersection matrix of the generators c_{e,k}, ordered (e, k)."""
    N = curve.N
    gens = [(e, k) for e in range(len(edges)) for k in range(N - 1)]
    angles = [_ray_angles(curve, fr) for fr in frames]
    step = TWO_PI / N
    bend = 1e-3 * step

    def rays(e, k, shift=0.0):
        pa, pb = angles[e]
        a, b = edges[e]
        # at lambda_a: arrive on sheet k+1, leave on sheet k; at lambda_b the reverse
        return {
            a: (pa + (k + 1) * step + shift, pa + k * step + shift),
            b: (pb + k * step - shift, pb + (k + 1) * step - shift),
        }

    M = len(gens)
    K = np.zeros((M, M), dtype=np.int64)
    for p in range(M):
        e1, k1 = gens[p]
        r1 = rays(e1, k1)
        for q in range(p + 1, M):
            e2, k2 = gens[q]
            common = set(edges[e1]) & set(edges[e2])
            if not common:
                continue
            r2 = rays(e2, k2, bend if e1 == e2 else 0.0)
            tot = 0
            for v in common:
                tot += local_index(r1[v][0], r1[v][1], r2[v][0], r2[v][1])
            K[p, q] = tot
            K[q, p] = -tot
    return K


# symplectic reduction ----------------------------------------------------------

def symplectic_reduce(K: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integer change of basis bringing the alternating form K to J plus a null block.

    Returns (A, B, Z): rows are integer coefficient vectors with
    A K A^t = B K B^t = 0, A K B^t = I, and Z spanning the radical.
    """
    K = np.asarray(K, dtype=object)
    M = K.shape[0]
    vecs = [np.array([1 if i == j else 0 for j in range(M)], dtype=object) for i in range(M)]

    def P(u, v):
        return int(u @ K @ v)

    A, B = [], []
    rest = list(range(M))
    while True:
        pair = None
        best = None
        for i in rest:
            for j in rest:
                if i != j:
                    d = P(vecs[i], vecs[j])
                    if d != 0 and (best is None or abs(d) < best):
                        best, pair = abs(d), (i, j)
        if pair is None:
            break
        i, j = pair
        while True:
            e, f = vecs[i], vecs[j]
            d = P(e, f)
            changed = False
            for h in rest:
                if h in (i, j):
                    continue
                ph_e, ph_f = P(e, vecs[h]), P(f, vecs[h])
                if ph_e % d:
                    vecs[h] = vecs[h] - (ph_e // d) * f
                    i, j = i, h
                    changed = True
                    break
                if ph_f % d:
                    vecs[h] = vecs[h] + (ph_f // d) * e
                    j, i = h, j
                    changed = True
                    break
            if not changed:
                break
        e, f = vecs[i], vecs[j]
        d = P(e, f)
        if abs(d) != 1:
            raise BasisConstructionError(f"intersection form has elementary divisor {abs(d)}")
        if d == -1:
            f = -f
            vecs[j] = f
        for h in rest:
            if h in (i, j):
                continue
            a_coef = P(f, vecs[h])
            b_coef = -P(e, vecs[h])
            vecs[h] = vecs[h] + a_coef * e + b_coef * f
        A.append(e)
        B.append(f)
        rest = [h for h in rest if h not in (i, j)]
    Z = [vecs[h] for h in rest]
    to_int = lambda rows: np.array([[int(x) for x in r] for r in rows], dtype=np.int64).reshape(len(rows), M)
    return to_int(A), to_int(B), to_int(Z)


# the basis -------------------------------------------------------------------------

@dataclass(frozen=True)
class SymplecticBasis:
    """Canonical cycles as integer combinations of the generators c_{e,k}."""

    curve: ZNCurve
    edges: tuple
    frames: tuple
    A: np.ndarray            # g x M
    B: np.ndarray            # g x M
    null: np.ndarray         # (M - 2g) x M, spans the radical
    generator_form: np.ndarray

    @property
    def g(self) -> int:
        return self.A.shape[0]

    @property
    def generators(self) -> list:
        return [(e, k) for e in range(len(self.edges)) for k in range(self.curve.N - 1)]

    def intersection_matrix(self) -> np.ndarray:
        C = np.vstack([self.A, self.B])
        return C @ self.generator_form @ C.T

    def rebind(self, curve: ZNCurve) -> "SymplecticBasis":
        """Same combinatorics on a nearby curve, with each edge branch continued."""
        if curve.N != self.curve.N or curve.n_branch != self.curve.n_branch:
            raise BasisConstructionError("cannot rebind a basis to a curve of another shape")
        frames = []
        for (a, b), old in zip(self.edges, self.frames):
            fr = _make_frame(curve, a, b, old.c0)
            step = abs(fr.c0 - old.c0)
            gap = abs(old.c0) * 2 * math.sin(math.pi / curve.N)
            if step > 0.25 * gap:
                raise BasisConstructionError(f"edge ({a},{b}) branch jumped during rebinding")
            frames.append(fr)
        K = generator_intersections(curve, self.edges, frames)
        if not np.array_equal(K, self.generator_form):
            raise BasisConstructionError("intersection pattern changed during rebinding")
        return SymplecticBasis(curve, self.edges, tuple(frames), self.A, self.B, self.null, self.generator_form)

    def fingerprint(self) -> str:
        doc = {"edges": self.edges, "A": self.A.tolist(), "B": self.B.tolist()}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]

    def cycle_chain(self, coeffs) -> list[dict]:
        """Expand a coefficient row into oriented edge lifts with sheet labels."""
        out: dict = {}
        for (e, k), c in zip(self.generators, coeffs):
            if c == 0:
                continue
            out[(e, k)] = out.get((e, k), 0) + int(c)
            out[(e, k + 1)] = out.get((e, k + 1), 0) - int(c)
        pieces = []
        for (e, k), c in sorted(out.items()):
            if c == 0:
                continue
            a, b = self.edges[e]
            za, zb = self.curve.lambdas[a], self.curve.lambdas[b]
            pieces.append({
                "from": [za.real, za.imag], "to": [zb.real, zb.imag],
                "edge": [a + 1, b + 1], "sheet": k, "coefficient": c,
            })
        return pieces

    def to_dict(self) -> dict:
        return {
            "edges": [[a + 1, b + 1] for a, b in self.edges],
            "edge_branch_c0": [[f.c0.real, f.c0.imag] for f in self.frames],
            "A": [self.cycle_chain(r) for r in self.A],
            "B": [self.cycle_chain(r) for r in self.B],
            "fingerprint": self.fingerprint(),
        }


def build_basis(curve: ZNCurve, mono: MonodromyData | None = None) -> SymplecticBasis:
    """Canonical basis {A_i, B_i} with intersection matrix J.

    ``mono`` is accepted for interface symmetry; for a cyclic cover every local
    monodromy is s -> omega s and the tree construction does not need it.
    """
    edges = tree_edges(curve)
    frames = tuple(_make_frame(curve, a, b) for a, b in edges)
    K = generator_intersections(curve, edges, frames)
    A, B, Z = symplectic_reduce(K)
    g = curve.genus
    if A.shape[0] != g:
        raise BasisConstructionError(f"found {A.shape[0]} symplectic pairs, expected genus {g}")
    basis = SymplecticBasis(curve, edges, frames, A, B, Z, K)
    I = basis.intersection_matrix()
    J = np.block([[np.zeros((g, g), int), np.eye(g, dtype=int)], [-np.eye(g, dtype=int), np.zeros((g, g), int)]])
    if not np.array_equal(I, J):
        raise BasisConstructionError("reduced intersection matrix is not J")
    return basis


def intersection(basis: SymplecticBasis, c1, c2) -> int:
    """Intersection number of two integer combinations of the generators."""
    return int(np.asarray(c1) @ basis.generator_form @ np.asarray(c2))
