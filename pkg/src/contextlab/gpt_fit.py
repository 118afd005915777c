"""From raw frequencies to a contextuality witness with exact equivalences.

Pipeline:

1. ``fit_gpt`` finds the hyperplanes that the columns of the frequency
   matrix should lie on if only ``m_t`` of the ``m`` measurement effects are
   linearly independent, using a weighted total least-squares objective.
   Each column is then projected onto the fitted subspace.
2. ``secondary_preparations`` and ``secondary_measurements`` mix the
   projected procedures so that the required operational equivalences hold
   exactly, maximising closeness to the originals.  Both are exact-rational
   linear programs.
3. ``fcf_witness`` evaluates the average predictability of the three
   measurements on their paired preparations against the bound 5/6.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateFit, EmptyPolytope, InfeasibleLP, ShapeMismatch
from .polytope_engine import HPolytope, _solve_exact, lp_maximize, rationalize
from .quantum_core import I2, PAULIS
from .specker_ncycle import ContextualityReport, trine_axes

FCF_BOUND = Fraction(5, 6)
FCF_GROUPS = ((0, 1), (2, 3), (4, 5))


@dataclass(frozen=True)
class RawDataMatrix:
    f: np.ndarray
    df: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        f = np.asarray(self.f, dtype=float)
        df = np.asarray(self.df, dtype=float)
        if f.ndim != 2 or f.shape != df.shape:
            raise ShapeMismatch("f and df must be matrices of the same shape")
        if np.any(f < 0) or np.any(f > 1):
            raise ValueError("frequencies must lie in [0, 1]")
        if np.any(df <= 0):
            raise ValueError("uncertainties must be positive")
        labels = tuple(self.labels) or tuple(f"P{j + 1}" for j in range(f.shape[1]))
        if len(labels) != f.shape[1]:
            raise ShapeMismatch("one label per preparation column is required")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "df", df)
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> tuple[int, int]:
        return self.f.shape

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.labels)
        for frow, drow in zip(self.f, self.df):
            w.writerow([f"{a:.12g};{b:.12g}" for a, b in zip(frow, drow)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RawDataMatrix":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        labels = tuple(rows[0])
        f, df = [], []
        for r in rows[1:]:
            pairs = [cell.split(";") for cell in r]
            if any(len(p) != 2 for p in pairs):
                raise ShapeMismatch("every cell must be 'f;df'")
            f.append([float(a) for a, _ in pairs])
            df.append([float(b) for _, b in pairs])
        return cls(np.array(f), np.array(df), labels)


@dataclass(frozen=True)
class GptModel:
    """Hyperplanes ``A p = 1``; row c-m_t uses the first m_t effects and effect c."""

    m: int
    m_t: int
    hyperplanes: np.ndarray  # (m - m_t, m)

    @property
    def generic(self) -> bool:
        """Whether every hyperplane has a non-zero weight on its own effect."""
        return bool(all(abs(self.hyperplanes[k, self.m_t + k]) > 1e-9 for k in range(self.m - self.m_t)))

    def residuals(self, p: np.ndarray) -> np.ndarray:
        return self.hyperplanes @ p - 1


@dataclass(frozen=True)
class PrimaryDataMatrix:
    p: np.ndarray


def _plane_matrix(params: np.ndarray, m: int, m_t: int) -> np.ndarray:
    k = m - m_t
    A = np.zeros((k, m))
    blocks = params.reshape(k, m_t + 1)
    A[:, :m_t] = blocks[:, :m_t]
    A[np.arange(k), m_t + np.arange(k)] = blocks[:, m_t]
    return A


def _chi2_terms(A: np.ndarray, f: np.ndarray, df: np.ndarray) -> np.ndarray:
    """Weighted distance of every column to {p : A p = 1}."""
    r = A @ f - 1  # (k, n)
    # S_j = A diag(df_j^2) A^T
    S = np.einsum("ai,in,bi->nab", A, df**2, A)
    try:
        sol = np.linalg.solve(S, r.T[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        return np.full(f.shape[1], np.inf)
    return np.einsum("kn,nk->n", r, sol)


def _project(A: np.ndarray, f: np.ndarray, df: np.ndarray) -> np.ndarray:
    r = A @ f - 1
    S = np.einsum("ai,in,bi->nab", A, df**2, A)
    lam = np.linalg.solve(S, r.T[:, :, None])[:, :, 0]  # (n, k)
    return f - df**2 * (A.T @ lam.T)


def fit_gpt(
    raw: RawDataMatrix, m_t: int, restarts: int = 16, seed: int = 0, workers: int = 1
) -> tuple[GptModel, PrimaryDataMatrix, float]:
    """Weighted total least-squares fit of ``m - m_t`` hyperplanes.

    Nelder-Mead runs from the ordinary least-squares planes and from
    ``restarts - 1`` random perturbations of them; the best result wins.
    """
    f, df = raw.f, raw.df
    m, n = f.shape
    if not 1 <= m_t < m:
        raise DegenerateFit(f"need 1 <= m_t < m, got m_t={m_t}, m={m}")
    if n < m_t + 1:
        raise DegenerateFit("need at least m_t + 1 preparations")
    sv = np.linalg.svd(f / df, compute_uv=False)
    if np.sum(sv > 1e-9 * sv[0]) < m_t:
        raise DegenerateFit("weighted data matrix has rank below m_t")

    k = m - m_t
    init = []
    for c in range(k):
        X = np.vstack([f[:m_t], f[m_t + c]]).T  # (n, m_t+1)
        coef, *_ = np.linalg.lstsq(X, np.ones(n), rcond=None)
        init.append(coef)
    x0 = np.concatenate(init)

    def objective(x: np.ndarray) -> float:
        return float(np.sum(_chi2_terms(_plane_matrix(x, m, m_t), f, df)))

    rng = np.random.default_rng(seed)
    starts = [x0] + [x0 + rng.normal(scale=0.05 * (np.abs(x0) + 0.1)) for _ in range(restarts - 1)]

    def run(start: np.ndarray):
        return minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-12, "maxiter": 20000, "maxfev": 40000, "adaptive": True},
        )

    # Start points are drawn up front, so the winner does not depend on
    # scheduling; ties go to the earliest restart.
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(x) for x in starts]
    best_x, best_val = x0, objective(x0)
    for res in results:
        if res.fun < best_val:
            best_x, best_val = res.x, float(res.fun)
    A = _plane_matrix(best_x, m, m_t)
    p = _project(A, f, df)
    return GptModel(m, m_t, A), PrimaryDataMatrix(p), best_val


def satisfies_gpt(p: np.ndarray, m_t: int, tol: float = 1e-10) -> bool:
    """Whether [1; p] has rank at most m_t + 1, judged by singular values."""
    p = np.asarray(p, dtype=float)
    d = np.vstack([np.ones(p.shape[1]), p])
    sv = np.linalg.svd(d, compute_uv=False)
    return bool(len(sv) <= m_t + 1 or sv[m_t + 1] <= tol)


# ---------------------------------------------------------------------------
# secondary procedures


def _rational_matrix(p) -> list[list[Fraction]]:
    """Exact copy of ``p``; floats are rounded at 1e-12 resolution."""
    return [[x if isinstance(x, Fraction) else rationalize(x) for x in row] for row in p]


def rational_primary(model: GptModel, p: np.ndarray) -> list[list[Fraction]]:
    """Rational primary matrix lying exactly on the (rationalised) fitted hyperplanes.

    Rounding every entry independently would break the rank condition that
    the measurement equivalences rely on.  Instead the hyperplane
    coefficients and m_t rows are rounded, and the remaining rows are solved
    from ``A p = 1`` exactly.  The solved rows are the ones whose
    coefficient block is best conditioned (column-pivoted elimination).
    """
    A = [[rationalize(x) for x in row] for row in model.hyperplanes]
    k, m = len(A), model.m
    absA = np.abs(model.hyperplanes).copy()
    solved: list[int] = []
    work = model.hyperplanes.astype(float).copy()
    for r in range(k):
        cols = [c for c in range(m) if c not in solved]
        c = max(cols, key=lambda c: (abs(work[r, c]), -c))
        if abs(work[r, c]) < 1e-12 * max(1.0, absA.max()):
            raise DegenerateFit("hyperplanes are linearly dependent")
        solved.append(c)
        for rr in range(r + 1, k):
            work[rr] -= work[rr, c] / work[r, c] * work[r]
    free = [c for c in range(m) if c not in solved]
    n = p.shape[1]
    out: list[list[Fraction]] = [[Fraction(0)] * n for _ in range(m)]
    for c in free:
        out[c] = [rationalize(x) for x in p[c]]
    block = [[A[r][c] for c in solved] for r in range(k)]
    for j in range(n):
        rhs = [1 - sum((A[r][c] * out[c][j] for c in free), Fraction(0)) for r in range(k)]
        sol = _solve_exact(block, rhs)
        if sol is None:
            raise DegenerateFit("hyperplane block is singular in exact arithmetic")
        for c, val in zip(solved, sol):
            out[c][j] = val
    return out


def _lp_or_raise(objective, polytope: HPolytope):
    try:
        return lp_maximize(objective, polytope)
    except EmptyPolytope as exc:
        raise InfeasibleLP(str(exc)) from exc


def secondary_preparations(
    p: np.ndarray, groups: Sequence[Sequence[int]] = FCF_GROUPS, n_secondary: int | None = None
) -> tuple[list[list[Fraction]], Fraction]:
    """Mixing weights u (n' x n) making the group averages equal, maximising mean u_jj.

    Secondary preparation j mixes all primary columns; it is meant to stay
    close to primary j, so the objective is the average diagonal weight.
    """
    P = _rational_matrix(p)
    m, n = len(P), len(P[0])
    n2 = n_secondary if n_secondary is not None else 1 + max(max(g) for g in groups)
    if n2 > n:
        raise ShapeMismatch("more secondary preparations than primary ones")
    nv = n2 * n

    def var(j: int, k: int) -> int:
        return j * n + k

    rows, rhs = [], []
    for j in range(n2):
        row = [Fraction(0)] * nv
        for k in range(n):
            row[var(j, k)] = Fraction(1)
        rows.append(row)
        rhs.append(Fraction(1))
    # every group average equals the first group's average, row by row
    g0 = groups[0]
    for g in groups[1:]:
        for i in range(m):
            row = [Fraction(0)] * nv
            for j in g:
                for k in range(n):
                    row[var(j, k)] += P[i][k] / len(g)
            for j in g0:
                for k in range(n):
                    row[var(j, k)] -= P[i][k] / len(g0)
            rows.append(row)
            rhs.append(Fraction(0))
    obj = [Fraction(0)] * nv
    for j in range(n2):
        obj[var(j, j)] = Fraction(1, n2)
    value, w = _lp_or_raise(obj, HPolytope.from_rows(rows, rhs, dim=nv))
    u = [list(w[j * n : (j + 1) * n]) for j in range(n2)]
    return u, value


def _extended_rows(P: list[list[Fraction]]) -> list[list[Fraction]]:
    """Responses of the 2m + 2 extremal post-processings: identity per effect, 0, 1, flips."""
    n = len(P[0])
    return [list(r) for r in P] + [[Fraction(0)] * n, [Fraction(1)] * n] + [[1 - x for x in r] for r in P]


def secondary_measurements(
    p: np.ndarray, m_secondary: int = 3, target: Fraction = Fraction(1, 2)
) -> tuple[list[list[Fraction]], Fraction]:
    """Mixing weights v (m' x (2m+2)) whose secondary rows average to ``target``.

    Columns of v weight, in order: the m primary effects, the constant 0
    event, the constant 1 event, and the m flipped effects.
    """
    P = _rational_matrix(p)
    m, n = len(P), len(P[0])
    ext = _extended_rows(P)
    ne = len(ext)
    nv = m_secondary * ne
    rows, rhs = [], []
    for t in range(m_secondary):
        row = [Fraction(0)] * nv
        for l in range(ne):
            row[t * ne + l] = Fraction(1)
        rows.append(row)
        rhs.append(Fraction(1))
    for k in range(n):
        row = [Fraction(0)] * nv
        for t in range(m_secondary):
            for l in range(ne):
                row[t * ne + l] = ext[l][k] / m_secondary
        rows.append(row)
        rhs.append(Fraction(target))
    obj = [Fraction(0)] * nv
    for t in range(m_secondary):
        obj[t * ne + t] = Fraction(1, m_secondary)
    value, w = _lp_or_raise(obj, HPolytope.from_rows(rows, rhs, dim=nv))
    v = [list(w[t * ne : (t + 1) * ne]) for t in range(m_secondary)]
    return v, value


def secondary_matrix(p: np.ndarray, u, v) -> list[list[Fraction]]:
    """s_tj = sum_k u_jk sum_l v_tl ext_l(k), exact."""
    ext = _extended_rows(_rational_matrix(p))
    n = len(ext[0])
    ms = [[sum((vt[l] * ext[l][k] for l in range(len(ext))), Fraction(0)) for k in range(n)] for vt in v]
    return [[sum((uj[k] * row[k] for k in range(n)), Fraction(0)) for uj in u] for row in ms]


def fcf_witness(s) -> ContextualityReport:
    """A' = (1/6) sum_t [s(t, P_t0) + 1 - s(t, P_t1)] for a 3 x 6 matrix of p(0 | M_t, P)."""
    arr = [[Fraction(x) if isinstance(x, (int, Fraction)) else x for x in row] for row in s]
    if len(arr) != 3 or any(len(r) != 6 for r in arr):
        raise ShapeMismatch("FCF witness needs a 3 x 6 secondary matrix")
    total = sum(arr[t][2 * t] + 1 - arr[t][2 * t + 1] for t in range(3))
    a_prime = total / 6
    return ContextualityReport.build(float(a_prime), float(FCF_BOUND), float("nan"))


def fcf_a_prime_exact(s) -> Fraction:
    return sum((Fraction(s[t][2 * t]) + 1 - Fraction(s[t][2 * t + 1]) for t in range(3)), Fraction(0)) / 6


def fcf_fixture_models() -> dict[str, list[list[Fraction]]]:
    """Two operational tables: rows P10, P11, P20, P21, P30, P31; columns M1, M2, M3, M*.

    The first saturates the bound 5/6 with a noncontextual model; the second
    reaches 9/10 with a model that is noncontextual only for preparations.
    """

    def table(hi: Fraction, mid_lo: Fraction, mid_hi: Fraction) -> list[list[Fraction]]:
        lo = 1 - hi
        half = Fraction(1, 2)
        return [
            [hi, mid_lo, mid_lo, half],
            [lo, mid_hi, mid_hi, half],
            [mid_lo, hi, mid_lo, half],
            [mid_hi, lo, mid_hi, half],
            [mid_lo, mid_lo, hi, half],
            [mid_hi, mid_hi, lo, half],
        ]

    return {
        "noncontextual": table(Fraction(5, 6), Fraction(1, 3), Fraction(2, 3)),
        "measurement_contextual": table(Fraction(9, 10), Fraction(3, 10), Fraction(7, 10)),
    }


def fixture_to_secondary(table: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    """3 x 6 matrix s[t][j] = p(0 | M_t, P_j) from a fixture table."""
    return [[table[j][t] for j in range(6)] for t in range(3)]


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class FcfQuantumConfig:
    """Trine measurements plus sigma_y, eigenstate preparations, depolarising noise.

    ``counts=None`` returns exact Born probabilities with a nominal
    uncertainty of 1e-6 per cell.
    """

    p1: float = 1.0
    p2: float = 1.0
    counts: int | None = 100_000


FCF_LABELS = ("P10", "P11", "P20", "P21", "P30", "P31", "P40", "P41")


def fcf_born_matrix(p1: float = 1.0, p2: float = 1.0) -> np.ndarray:
    axes = [np.array(a) for a in trine_axes()] + [np.array([0.0, 1.0, 0.0])]
    out = np.zeros((4, 8))
    for j, ax in enumerate(x for a in axes for x in (a, -a)):
        rho = p1 * (I2 + sum(c * s for c, s in zip(ax, PAULIS))) / 2 + (1 - p1) * I2 / 2
        for i, m in enumerate(axes):
            eff = p2 * (I2 + sum(c * s for c, s in zip(m, PAULIS))) / 2 + (1 - p2) * I2 / 2
            out[i, j] = float(np.real(np.trace(rho @ eff)))
    return np.clip(out, 0.0, 1.0)


def synthesize_raw_data(config: FcfQuantumConfig, seed: int = 0) -> RawDataMatrix:
    probs = fcf_born_matrix(config.p1, config.p2)
    if config.counts is None:
        return RawDataMatrix(probs, np.full_like(probs, 1e-6), FCF_LABELS)
    N = int(config.counts)
    rng = np.random.default_rng(seed)
    f = rng.binomial(N, probs) / N
    df = np.maximum(np.sqrt(f * (1 - f) / N), 1 / (2 * N))
    return RawDataMatrix(f, df, FCF_LABELS)


def run_fcf_pipeline(raw: RawDataMatrix, m_t: int = 3, seed: int = 0, restarts: int = 16) -> dict:
    """Fit, build secondary procedures and evaluate A'."""
    model, primary, chi2 = fit_gpt(raw, m_t, restarts=restarts, seed=seed)
    exact_p = rational_primary(model, primary.p)
    u, cp = secondary_preparations(exact_p, FCF_GROUPS, n_secondary=6)
    v, cm = secondary_measurements(exact_p, m_secondary=3)
    s = secondary_matrix(exact_p, u, v)
    a_exact = fcf_a_prime_exact(s)
    report = fcf_witness(s)
    return {
        "chi2": chi2,
        "hyperplanes": model.hyperplanes.tolist(),
        "C_P": cp,
        "C_M": cm,
        "A_prime": a_exact,
        "nc_bound": FCF_BOUND,
        "violated": report.violated,
        "secondary": s,
    }
