"""Ordered partitions of the branch points and the exact exponent arithmetic."""

from __future__ import annotations

import csv
import io
import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import DomainError, PartitionError


@dataclass(frozen=True)
class OrderedPartition:
    """(Lambda_0, ..., Lambda_{N-1}) with 0-based branch indices."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(tuple(sorted(int(i) for i in p)) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        if len(parts) < 2:
            raise PartitionError("an ordered partition needs at least two parts")
        sizes = {len(p) for p in parts}
        if len(sizes) != 1 or 0 in sizes:
            raise PartitionError(f"all parts must have the same positive size, got {[len(p) for p in parts]}")
        flat = [i for p in parts for i in p]
        if sorted(flat) != list(range(len(flat))):
            raise PartitionError("parts must be disjoint and cover 0..Nm-1")

    @property
    def N(self) -> int:
        return len(self.parts)

    @property
    def m(self) -> int:
        return len(self.parts[0])

    @classmethod
    def parse(cls, text: str) -> "OrderedPartition":
        """Parse ``"1,4|2,5|3,6"`` (1-based indices)."""
        try:
            parts = [[int(tok) - 1 for tok in chunk.split(",") if tok.strip()] for chunk in text.split("|")]
        except ValueError as exc:
            raise PartitionError(f"cannot parse partition {text!r}") from exc
        return cls(tuple(tuple(p) for p in parts))

    @classmethod
    def from_weights(cls, k: Sequence[int], N: int) -> "OrderedPartition":
        return cls(tuple(tuple(i for i, kk in enumerate(k) if kk == j) for j in range(N)))

    def __str__(self) -> str:
        return "|".join(",".join(str(i + 1) for i in p) for p in self.parts)


def weights(part: OrderedPartition) -> list[int]:
    """k_i = j iff i is in Lambda_j."""
    k = [0] * (part.N * part.m)
    for j, p in enumerate(part.parts):
        for i in p:
            k[i] = j
    return k


def rotate(part: OrderedPartition, j: int) -> OrderedPartition:
    N = part.N
    return OrderedPartition(tuple(part.parts[(j + r) % N] for r in range(N)))


def reverse(part: OrderedPartition) -> OrderedPartition:
    N = part.N
    return OrderedPartition(tuple(part.parts[(-r) % N] for r in range(N)))


def exchange(part: OrderedPartition, a: int = 0, b: int | None = None) -> OrderedPartition:
    """Swap the largest element of Lambda_a with the largest element of Lambda_b.

    With the defaults (a=0, b=N-1) this is the exchange used in the
    constant-invariance argument: i^0_m <-> i^{N-1}_m.
    """
    N = part.N
    b = N - 1 if b is None else b
    parts = [list(p) for p in part.parts]
    x, y = parts[a][-1], parts[b][-1]
    parts[a][-1], parts[b][-1] = y, x
    return OrderedPartition(tuple(tuple(p) for p in parts))


def interleaved(N: int, m: int) -> OrderedPartition:
    """Lambda_j = {j, j+N, j+2N, ...} (0-based)."""
    return OrderedPartition(tuple(tuple(j + N * r for r in range(m)) for j in range(N)))


def random_partitions(N: int, m: int, seed: int) -> Iterator[OrderedPartition]:
    """Endless reproducible stream of random ordered partitions (never enumerates all)."""
    rng = random.Random(seed)
    idx = list(range(N * m))
    while True:
        rng.shuffle(idx)
        yield OrderedPartition(tuple(tuple(idx[j * m:(j + 1) * m]) for j in range(N)))


def standard_sample(N: int, m: int, extra: Sequence[OrderedPartition] = (), minimum: int = 6,
                    seed: int = 0) -> list[OrderedPartition]:
    """All rotations, the reflection, adjacent exchanges, user partitions, then random fill."""
    base = interleaved(N, m)
    cand = [rotate(base, j) for j in range(N)]
    cand.append(reverse(base))
    cand.append(exchange(base))
    cand.append(exchange(base, 0, 1))
    cand.append(reverse(exchange(base)))
    cand.extend(extra)
    out: list[OrderedPartition] = []
    for p in cand:
        if p not in out:
            out.append(p)
    stream = random_partitions(N, m, seed)
    while len(out) < minimum:
        p = next(stream)
        if p not in out:
            out.append(p)
    return out


# exponents ------------------------------------------------------------------

def index_set(N: int) -> list[Fraction]:
    """L = {-(N-1)/2, ..., (N-1)/2}."""
    return [Fraction(-(N - 1), 2) + j for j in range(N)]


def _frac_part(x: Fraction) -> Fraction:
    return x - math.floor(x)


def q_l(N: int, l, i: int) -> Fraction:
    l = Fraction(l)
    if (2 * l).denominator != 1 or abs(l) > Fraction(N - 1, 2) or (2 * l + N - 1) % 2:
        raise DomainError(f"l={l} is not in L for N={N}")
    return Fraction(1 - N, 2 * N) + _frac_part((l + i + Fraction(N - 1, 2)) / N)


def q_pair_sum(N: int, i: int, j: int) -> Fraction:
    return sum((q_l(N, l, i) * q_l(N, l, j) for l in index_set(N)), Fraction(0))


def q_pair_closed(N: int, i: int, j: int) -> Fraction:
    d = (j - i) % N
    return (Fraction(N * N - 1, 12) - Fraction(d * (N - d), 2)) / N


def q_pair(N: int, i: int, j: int) -> Fraction:
    a, b = q_pair_sum(N, i, j), q_pair_closed(N, i, j)
    if a != b:
        raise ArithmeticError(f"q({i},{j}) mismatch for N={N}: sum {a} vs closed form {b}")
    return a


def mu(N: int) -> Fraction:
    return Fraction((N - 1) * (2 * N - 1), 6 * N)


def weighted_sum_check(N: int) -> bool:
    """sum_l l*q_l(r) == (N^2-1)/12 - r(N-r)/2 for every r in 0..N-1."""
    L = index_set(N)
    for r in range(N):
        lhs = sum((l * q_l(N, l, r) for l in L), Fraction(0))
        if lhs != Fraction(N * N - 1, 12) - Fraction(r * (N - r), 2):
            return False
    return True


def exponent_lemma_holds(N: int, i_max: int | None = None) -> bool:
    """Periodicity, shift invariance and zero sum of q_l(i), checked exactly."""
    L = index_set(N)
    i_max = 2 * N if i_max is None else i_max
    for l in L:
        if sum((q_l(N, l, i) for i in range(N)), Fraction(0)) != 0:
            return False
        for i in range(i_max + 1):
            if q_l(N, l, i + N) != q_l(N, l, i):
                return False
            for l2 in L:
                i2 = i + l - l2
                if i2.denominator == 1 and q_l(N, l2, int(i2)) != q_l(N, l, i):
                    return False
    return True


@dataclass(frozen=True)
class ExponentTable:
    N: int
    q: tuple            # q[i][j], i,j in 0..N-1
    mu: Fraction
    exponents: tuple    # e[i][j] = 2N q(k_i,k_j) + N mu for i<j, None elsewhere
    k: tuple

    def exponent(self, i: int, j: int) -> Fraction:
        if i > j:
            i, j = j, i
        return self.exponents[i][j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "k_i", "k_j", "exponent"])
        n = len(self.k)
        for i in range(n):
            for j in range(i + 1, n):
                w.writerow([i + 1, j + 1, self.k[i], self.k[j], frac_str(self.exponents[i][j])])
        return buf.getvalue()


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def q_table(N: int) -> tuple:
    return tuple(tuple(q_pair(N, i, j) for j in range(N)) for i in range(N))


def thomae_exponents(N: int, part: OrderedPartition) -> ExponentTable:
    if part.N != N:
        raise PartitionError(f"partition has {part.N} parts, curve has N={N}")
    qt = q_table(N)
    k = weights(part)
    muN = mu(N)
    n = len(k)
    e = tuple(
        tuple((2 * N * qt[k[i]][k[j]] + N * muN) if j > i else None for j in range(n))
        for i in range(n)
    )
    return ExponentTable(N, qt, muN, e, tuple(k))


def exponent_summary(N: int) -> dict:
    """mu, q(0,j) and the exponent by residue |k_i - k_j| mod N, as exact fraction strings."""
    qt = q_table(N)
    return {
        "N": N,
        "mu": frac_str(mu(N)),
        "q0": {str(j): frac_str(qt[0][j]) for j in range(N)},
        "exponent_by_difference": {
            str(d): frac_str(2 * N * qt[0][d] + N * mu(N)) for d in range(N)
        },
        "theta_power": 2 * N,
    }


def all_partitions(N: int, m: int) -> Iterator[OrderedPartition]:
    """Exhaustive iterator (lazy); only sensible for tiny N*m."""
    idx = range(N * m)

    def rec(remaining, acc):
        if not remaining:
            yield OrderedPartition(tuple(acc))
            return
        for comb in itertools.combinations(remaining, m):
            rest = tuple(x for x in remaining if x not in comb)
            yield from rec(rest, acc + [comb])

    yield from rec(tuple(idx), [])
