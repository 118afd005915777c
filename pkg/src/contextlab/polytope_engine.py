"""Exact vertex enumeration and linear programming over box-bounded polytopes.

Every polytope here has the form ``{w in [0,1]^d : Z w = u}`` with rational
``Z`` and ``u``.  Vertices are basic feasible solutions: pick ``r = rank(Z)``
basic columns, fix each remaining coordinate at 0 or 1, and solve for the
basic ones.  Candidates are screened in floating point by
:mod:`contextlab._kernels` and every survivor is recomputed with
:class:`fractions.Fraction`, so reported vertices are exact.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import DimensionLimit, EmptyPolytope, ShapeMismatch

MAX_DIM = 32
Vector = tuple[Fraction, ...]


def to_fraction(x) -> Fraction:
    """Exact conversion of int, Fraction, float or 'p/q' string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(float(x))


def rationalize(x: float, resolution: float = 1e-12) -> Fraction:
    """Round a float to the nearest multiple of ``resolution`` (a power of ten)."""
    scale = round(1 / resolution)
    return Fraction(round(float(x) * scale), scale)


def format_fraction(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class HPolytope:
    eq_matrix: tuple[tuple[Fraction, ...], ...]
    eq_rhs: tuple[Fraction, ...]
    dim: int

    @classmethod
    def from_rows(cls, eq_matrix: Sequence[Sequence], eq_rhs: Sequence, dim: int | None = None) -> "HPolytope":
        rows = tuple(tuple(to_fraction(v) for v in row) for row in eq_matrix)
        rhs = tuple(to_fraction(v) for v in eq_rhs)
        if len(rows) != len(rhs):
            raise ShapeMismatch("need one right-hand side per equality row")
        if dim is None:
            if not rows:
                raise ShapeMismatch("dimension is required when there are no equalities")
            dim = len(rows[0])
        if any(len(r) != dim for r in rows):
            raise ShapeMismatch("all equality rows must have length dim")
        return cls(rows, rhs, dim)


@dataclass(frozen=True)
class VertexSet:
    dim: int
    vertices: tuple[Vector, ...]

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def as_float(self) -> np.ndarray:
        return np.array([[float(x) for x in v] for v in self.vertices], dtype=float).reshape(-1, self.dim)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"w{i + 1}" for i in range(self.dim)])
        for v in self.vertices:
            w.writerow([format_fraction(x) for x in v])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "VertexSet":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        verts = tuple(tuple(Fraction(c) for c in r) for r in body if r)
        return cls(len(header), verts)

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "vertices": [[format_fraction(x) for x in v] for v in self.vertices],
                "approx": [[float(x) for x in v] for v in self.vertices],
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "VertexSet":
        obj = json.loads(text)
        return cls(int(obj["dim"]), tuple(tuple(Fraction(c) for c in v) for v in obj["vertices"]))


# ---------------------------------------------------------------------------
# exact linear algebra helpers


def _reduce_rows(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction], dim: int):
    """Row-reduce [Z | u]; return independent rows, or None when inconsistent."""
    mat = [list(r) + [b] for r, b in zip(rows, rhs)]
    pivot_row = 0
    for col in range(dim):
        sel = next((i for i in range(pivot_row, len(mat)) if mat[i][col] != 0), None)
        if sel is None:
            continue
        mat[pivot_row], mat[sel] = mat[sel], mat[pivot_row]
        p = mat[pivot_row][col]
        mat[pivot_row] = [x / p for x in mat[pivot_row]]
        for i in range(len(mat)):
            if i != pivot_row and mat[i][col] != 0:
                f = mat[i][col]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[pivot_row])]
        pivot_row += 1
    for row in mat[pivot_row:]:
        if row[-1] != 0:
            return None
    return [r[:-1] for r in mat[:pivot_row]], [r[-1] for r in mat[:pivot_row]]


def _integer_rows(rows, rhs):
    """Scale each row by the lcm of its denominators."""
    out_rows, out_rhs = [], []
    for r, b in zip(rows, rhs):
        l = 1
        for x in list(r) + [b]:
            l = l * x.denominator // math.gcd(l, x.denominator)
        out_rows.append([int(x * l) for x in r])
        out_rhs.append(int(b * l))
    return out_rows, out_rhs


def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    """Solve a square system exactly; None if singular."""
    n = len(a)
    m = [list(map(Fraction, row)) + [Fraction(v)] for row, v in zip(a, b)]
    for col in range(n):
        sel = next((i for i in range(col, n) if m[i][col] != 0), None)
        if sel is None:
            return None
        m[col], m[sel] = m[sel], m[col]
        p = m[col][col]
        m[col] = [x / p for x in m[col]]
        for i in range(n):
            if i != col and m[i][col] != 0:
                f = m[i][col]
                m[i] = [x - f * y for x, y in zip(m[i], m[col])]
    return [row[-1] for row in m]


def _exact_rank(a: list[list[int]]) -> int:
    m = [list(map(Fraction, r)) for r in a]
    rank = 0
    cols = len(m[0]) if m else 0
    for col in range(cols):
        sel = next((i for i in range(rank, len(m)) if m[i][col] != 0), None)
        if sel is None:
            continue
        m[rank], m[sel] = m[sel], m[rank]
        for i in range(rank + 1, len(m)):
            if m[i][col] != 0:
                f = m[i][col] / m[rank][col]
                m[i] = [x - f * y for x, y in zip(m[i], m[rank])]
        rank += 1
    return rank


# ---------------------------------------------------------------------------
# vertex enumeration


def enumerate_vertices(p: HPolytope, backend: str | None = None, max_dim: int = MAX_DIM) -> VertexSet:
    """All vertices of ``p``, exact, deduplicated and lexicographically sorted."""
    d = p.dim
    if d > max_dim:
        raise DimensionLimit(f"dimension {d} exceeds limit {max_dim}")
    reduced = _reduce_rows(p.eq_matrix, p.eq_rhs, d)
    if reduced is None:
        return VertexSet(d, ())
    rows, rhs = reduced
    r = len(rows)
    if r == 0:
        verts = tuple(tuple(Fraction(b) for b in bits) for bits in itertools.product((0, 1), repeat=d))
        return VertexSet(d, verts)

    zi, ui = _integer_rows(rows, rhs)
    Z = np.array(zi, dtype=float)
    u = np.array(ui, dtype=float)
    # For an integer matrix a nonsingular minor has |det| >= 1.  Below this
    # Hadamard bound the float determinant is accurate enough to round.
    hadamard = float(np.prod(np.maximum(np.linalg.norm(Z, axis=1), 1.0)))
    float_det_ok = hadamard < 1e9

    found: dict[Vector, None] = {}
    cache: dict[tuple, list] = {}
    k = d - r
    batch = max(1, 200_000 // max(1, 1 << k))
    combos = itertools.combinations(range(d), r)
    while True:
        chunk = list(itertools.islice(combos, batch))
        if not chunk:
            break
        bases = np.array(chunk, dtype=np.int64)
        B = Z[:, bases].transpose(1, 0, 2)  # (nb, r, r)
        if float_det_ok:
            good = np.abs(np.linalg.det(B)) > 0.5
        else:
            good = np.array([_exact_rank([[zi[i][j] for j in cols] for i in range(r)]) == r for cols in chunk])
        bases, B = bases[good], B[good]
        if len(bases) == 0:
            continue
        in_basis = np.zeros((len(bases), d), dtype=bool)
        in_basis[np.arange(len(bases))[:, None], bases] = True
        nonbases = np.nonzero(~in_basis)[1].reshape(len(bases), k)
        Binv = np.linalg.inv(B)
        c = Binv @ u
        N = Z[:, nonbases].transpose(1, 0, 2)  # (nb, r, k)
        M = Binv @ N
        mask = _kernels.screen(c, M, eps=1e-9, backend=backend)
        _verify_candidates(zi, ui, bases, nonbases, c, M, mask, found, cache)

    return VertexSet(d, tuple(sorted(found)))


def _verify_candidates(zi, ui, bases, nonbases, c, M, mask, found, cache) -> None:
    """Recompute screened candidates exactly.

    ``cache`` maps a rounded float vector to the (float, exact-or-None)
    results already computed, so degenerate vertices reached from many
    bases are solved exactly only once.
    """
    d = len(zi[0])
    k = nonbases.shape[1]
    for b_idx, pat in zip(*np.nonzero(mask)):
        x = ((int(pat) >> np.arange(k)) & 1).astype(float)
        w = np.empty(d)
        w[bases[b_idx]] = c[b_idx] - M[b_idx] @ x
        w[nonbases[b_idx]] = x
        key = tuple(np.round(w, 7))
        entries = cache.setdefault(key, [])
        if any(np.max(np.abs(fw - w)) < 1e-9 for fw, _ in entries):
            continue
        exact = _exact_vertex(zi, ui, bases[b_idx], nonbases[b_idx], x)
        entries.append((w, exact))
        if exact is not None:
            found[exact] = None


def _exact_vertex(zi, ui, basis, nonbasis, x) -> Vector | None:
    r = len(zi)
    xi = [int(v) for v in x]
    rhs = [Fraction(ui[i] - sum(zi[i][j] * xv for j, xv in zip(nonbasis, xi))) for i in range(r)]
    sol = _solve_exact([[zi[i][j] for j in basis] for i in range(r)], rhs)
    if sol is None or any(v < 0 or v > 1 for v in sol):
        return None
    w = [Fraction(0)] * len(zi[0])
    for j, v in zip(basis, sol):
        w[int(j)] = v
    for j, v in zip(nonbasis, xi):
        w[int(j)] = Fraction(v)
    return tuple(w)


# ---------------------------------------------------------------------------
# exact simplex


def _pivot(rows: list[list[Fraction]], obj: list[Fraction], r: int, c: int) -> None:
    piv = rows[r][c]
    pr = [x / piv for x in rows[r]]
    rows[r] = pr
    nz = [j for j, v in enumerate(pr) if v != 0]
    for i, row in enumerate(rows):
        if i != r:
            f = row[c]
            if f != 0:
                for j in nz:
                    row[j] -= f * pr[j]
    f = obj[c]
    if f != 0:
        for j in nz:
            obj[j] -= f * pr[j]


def _run_simplex(rows, obj, basis, allowed: int) -> bool:
    """Maximise with Bland's rule over columns < ``allowed``.  False if unbounded."""
    while True:
        enter = next((j for j in range(allowed) if obj[j] > 0), None)
        if enter is None:
            return True
        best = None
        for i, row in enumerate(rows):
            a = row[enter]
            if a > 0:
                ratio = row[-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return False
        _pivot(rows, obj, best[1], enter)
        basis[best[1]] = enter


def lp_maximize(objective: Sequence, p: HPolytope) -> tuple[Fraction, Vector]:
    """Exact maximum of ``objective . w`` over ``p`` and a maximising vertex.

    Two-phase tableau simplex in exact arithmetic.  Pivoting follows Bland's
    rule (lowest-index entering column, lowest-index basic variable among
    tied ratios), which terminates and makes the returned vertex a
    deterministic function of the input.
    """
    d = p.dim
    cvec = [to_fraction(v) for v in objective]
    if len(cvec) != d:
        raise ShapeMismatch("objective length must equal the polytope dimension")
    reduced = _reduce_rows(p.eq_matrix, p.eq_rhs, d)
    if reduced is None:
        raise EmptyPolytope("equality constraints are inconsistent")
    zrows, zrhs = reduced
    m = len(zrows)
    # columns: w (d) | s (d) | artificial (m) | rhs
    ncol = 2 * d + m
    rows: list[list[Fraction]] = []
    basis: list[int] = []
    for i, (zr, b) in enumerate(zip(zrows, zrhs)):
        sign = -1 if b < 0 else 1
        row = [sign * v for v in zr] + [Fraction(0)] * d + [Fraction(0)] * m + [sign * b]
        row[2 * d + i] = Fraction(1)
        rows.append(row)
        basis.append(2 * d + i)
    for j in range(d):
        row = [Fraction(0)] * (ncol + 1)
        row[j] = Fraction(1)
        row[d + j] = Fraction(1)
        row[-1] = Fraction(1)
        rows.append(row)
        basis.append(d + j)

    # phase 1: maximise -sum(artificials)
    obj = [Fraction(0)] * (ncol + 1)
    for i in range(m):
        obj = [a + b for a, b in zip(obj, rows[i])]
    for i in range(m):
        obj[2 * d + i] = Fraction(0)
    _run_simplex(rows, obj, basis, ncol)
    if obj[-1] != 0:
        raise EmptyPolytope("no point satisfies the constraints")
    # drive remaining artificials out of the basis
    i = 0
    while i < len(rows):
        if basis[i] >= 2 * d:
            j = next((j for j in range(2 * d) if rows[i][j] != 0), None)
            if j is None:
                del rows[i]
                del basis[i]
                continue
            _pivot(rows, [Fraction(0)] * (ncol + 1), i, j)
            basis[i] = j
        i += 1
    rows = [row[: 2 * d] + [row[-1]] for row in rows]

    # phase 2
    full_c = cvec + [Fraction(0)] * d
    obj = full_c + [Fraction(0)]
    for i, bv in enumerate(basis):
        cb = full_c[bv]
        if cb != 0:
            obj = [a - cb * b for a, b in zip(obj, rows[i])]
    _run_simplex(rows, obj, basis, 2 * d)
    x = [Fraction(0)] * (2 * d)
    for i, bv in enumerate(basis):
        x[bv] = rows[i][-1]
    w = tuple(x[:d])
    value = sum((a * b for a, b in zip(cvec, w)), Fraction(0))
    return value, w


def convex_max_over_vertices(f: Callable[[Vector], Fraction | float], vs: VertexSet | Iterable[Vector]):
    """Maximise a convex function by scanning vertices; ties keep the first vertex."""
    best_val, best_v = None, None
    for v in vs:
        val = f(v)
        if best_val is None or val > best_val:
            best_val, best_v = val, v
    if best_v is None:
        raise EmptyPolytope("no vertices to maximise over")
    return best_val, best_v
