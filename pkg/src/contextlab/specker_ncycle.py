"""Specker's three-measurement scenario and its n-cycle generalisation.

Statistics of a cycle of binary measurements are summarised by the
single-measurement marginals ``p_i = p(X_i = 0)`` and the anticorrelation
probabilities ``w_ij = p(X_i != X_j)`` of neighbouring pairs.  The module
covers the no-disturbance polytopes, the four Kochen-Specker (KS)
inequalities for three measurements, the construction of a joint
distribution when they hold, noise-robust bounds, and explicit qubit
constructions that violate the n-cycle bounds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    DimensionLimit,
    EquivalenceCheckFailed,
    IncompatiblePair,
    NoDisturbanceViolated,
    NotNormalized,
)
from .joint_measurability import NoisySpinObservable, construct_pairwise_joint, optimal_pair_params
from .ks_polytope import EventHypergraph, assignment_polytope
from .polytope_engine import VertexSet, enumerate_vertices
from .quantum_core import I2, PAULIS, DensityOperator, Effect, Povm, born_probability

TOL = 1e-12
PAIRS3 = ((1, 2), (2, 3), (1, 3))


@dataclass(frozen=True)
class PairwiseStats:
    """Marginals ``p`` and neighbour anticorrelations ``w``.

    For three measurements ``w`` is ordered (w12, w23, w13).  For n-cycles
    ``w[i]`` belongs to the pair (i+1, i+2 mod n).
    """

    p: tuple[float, ...]
    w: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.p)

    def pairs(self) -> tuple[tuple[int, int], ...]:
        if self.n == 3:
            return PAIRS3
        return tuple((i + 1, (i + 1) % self.n + 1) for i in range(self.n))

    def validate(self) -> None:
        if len(self.w) != self.n or self.n < 3:
            raise NoDisturbanceViolated("need n >= 3 marginals and one w per cycle pair")
        for x in (*self.p, *self.w):
            if x < -TOL or x > 1 + TOL:
                raise NoDisturbanceViolated(f"entry {x} outside [0, 1]")
        for (i, j), w in zip(self.pairs(), self.w):
            pi, pj = self.p[i - 1], self.p[j - 1]
            if w < abs(pi - pj) - TOL or w > min(pi + pj, 2 - pi - pj) + TOL:
                raise NoDisturbanceViolated(f"w{i}{j}={w} incompatible with p{i}={pi}, p{j}={pj}")

    def pair_distribution(self, k: int) -> dict[tuple[int, int], float]:
        """p(X_i, X_j) for the k-th pair."""
        i, j = self.pairs()[k]
        pi, pj, w = self.p[i - 1], self.p[j - 1], self.w[k]
        p00 = (pi + pj - w) / 2
        return {(0, 0): p00, (0, 1): pi - p00, (1, 0): pj - p00, (1, 1): 1 - pi - pj + p00}


# ---------------------------------------------------------------------------
# Specker polytope


def specker_event_structure() -> EventHypergraph:
    """Pair outcomes as classes with normalisation and marginal consistency.

    Class 4*k + 2*a + b + 1 is outcome (a, b) of the k-th pair in
    (12), (23), (13).
    """

    def cls(k: int, a: int, b: int) -> int:
        return 4 * k + 2 * a + b

    h = EventHypergraph(12, tuple(tuple(cls(k, a, b) + 1 for a in (0, 1) for b in (0, 1)) for k in range(3)))
    # p(X1=0): pair 12 first slot == pair 13 first slot
    # p(X2=0): pair 12 second slot == pair 23 first slot
    # p(X3=0): pair 23 second slot == pair 13 second slot
    for (ka, slot_a), (kb, slot_b) in (((0, 0), (2, 0)), ((0, 1), (1, 0)), ((1, 1), (2, 1))):
        row = [0] * 12
        for a in (0, 1):
            for b in (0, 1):
                if (a, b)[slot_a] == 0:
                    row[cls(ka, a, b)] += 1
                if (a, b)[slot_b] == 0:
                    row[cls(kb, a, b)] -= 1
        h = h.with_constraint(row, 0)
    return h


def specker_vertices() -> VertexSet:
    """Vertices of the no-disturbance polytope, 12 pair probabilities each."""
    return enumerate_vertices(assignment_polytope(specker_event_structure()))


def specker_point_from_joint(joint: dict[tuple[int, int, int], Fraction | float]) -> tuple:
    """Pair marginals (12-vector) of a distribution over (X1, X2, X3)."""
    out = []
    for i, j in PAIRS3:
        for a in (0, 1):
            for b in (0, 1):
                out.append(sum(v for x, v in joint.items() if x[i - 1] == a and x[j - 1] == b))
    return tuple(out)


def specker_to_stats(v: Sequence) -> PairwiseStats:
    """Reduce a 12-vector of pair probabilities to (p, w)."""
    v = [float(x) for x in v]
    p1 = v[0] + v[1]
    p2 = v[0] + v[2]
    p3 = v[4] + v[6]
    w = tuple(v[4 * k + 1] + v[4 * k + 2] for k in range(3))
    return PairwiseStats((p1, p2, p3), w)


# ---------------------------------------------------------------------------
# KS inequalities and Fine's construction


def ks_inequalities(s: PairwiseStats) -> tuple[float, float, float, float]:
    """Residuals (R3 - 2, R0, R1, R2); each inequality holds when its residual is <= 0."""
    if s.n != 3:
        raise NoDisturbanceViolated("KS inequalities are defined for three measurements")
    s.validate()
    w12, w23, w13 = s.w
    return (w12 + w23 + w13 - 2, w12 - w23 - w13, w23 - w12 - w13, w13 - w12 - w23)


KS_NAMES = ("R3 <= 2", "R0 <= 0", "R1 <= 0", "R2 <= 0")


@dataclass(frozen=True)
class NoJoint:
    violated: str
    residual: float


def fine_joint_distribution(s: PairwiseStats) -> dict[tuple[int, int, int], float] | NoJoint:
    """Joint distribution of (X1, X2, X3) reproducing the pair statistics.

    Fixing the pair marginals leaves one free parameter t = p(000); every
    other entry is affine in t with slope +1 or -1.  The largest t keeping
    all entries non-negative is used.
    """
    res = ks_inequalities(s)
    worst = int(np.argmax(res))
    d12, d23, d13 = (s.pair_distribution(k) for k in range(3))
    # entries as (offset, slope in t)
    entries = {
        (0, 0, 0): (0.0, 1),
        (0, 0, 1): (d12[0, 0], -1),
        (0, 1, 0): (d13[0, 0], -1),
        (1, 0, 0): (d23[0, 0], -1),
        (0, 1, 1): (d12[0, 1] - d13[0, 0], 1),
        (1, 0, 1): (d12[1, 0] - d23[0, 0], 1),
        (1, 1, 0): (d13[1, 0] - d23[0, 0], 1),
        (1, 1, 1): (d12[1, 1] + d23[0, 0] - d13[1, 0], -1),
    }
    lo = max(-off for off, sl in entries.values() if sl == 1)
    hi = min(off for off, sl in entries.values() if sl == -1)
    feasible = lo <= hi + TOL
    if feasible != (res[worst] <= TOL):
        # feasibility and the KS inequalities must agree; disagreement only
        # happens within rounding of the boundary
        if abs(res[worst]) > 1e-9:
            raise AssertionError("feasibility interval disagrees with the KS inequalities")
    if not feasible:
        return NoJoint(KS_NAMES[worst], float(res[worst]))
    t = hi
    joint = {x: max(0.0, off + sl * t) for x, (off, sl) in entries.items()}
    marg = specker_point_from_joint(joint)
    want = [v for k in range(3) for v in (lambda d: (d[0, 0], d[0, 1], d[1, 0], d[1, 1]))((d12, d23, d13)[k])]
    if max(abs(a - b) for a, b in zip(marg, want)) > 1e-9:
        raise AssertionError("constructed joint does not reproduce the pair statistics")
    return joint


# ---------------------------------------------------------------------------
# noise-robust bounds


def lsw_bound(eta: float) -> dict[str, float]:
    """Non-contextual bound on the summed and averaged anticorrelation."""
    return {"summed": 3 - eta, "averaged": 1 - eta / 3}


def nc_bounds_R0R1R2(eta: float) -> dict[str, float]:
    return {"summed": 1 - eta, "averaged": (1 - eta) / 3}


def _pair_disc(eta: float, dot: float) -> float:
    return 1 + eta**4 * dot**2 - 2 * eta**2


def cmax_coplanar(eta: float, dots: Sequence[float]) -> float:
    """Largest state-dependent gap 2 eta - sum(alpha_ij - |a_ij|) for coplanar axes."""
    total = 2 * eta
    for c in dots:
        disc = _pair_disc(eta, c)
        if disc < -TOL:
            raise IncompatiblePair(f"eta={eta} exceeds the joint measurability bound for dot={c}")
        total += math.sqrt(max(disc, 0.0)) - (1 + eta**2 * c)
    return total


def trine_axes() -> list[tuple[float, float, float]]:
    """Three unit vectors 120 degrees apart in the ZX plane."""
    return [(math.sin(2 * math.pi * k / 3), 0.0, math.cos(2 * math.pi * k / 3)) for k in range(3)]


def trine_violation_born(eta: float) -> float:
    """C evaluated from explicit joint POVMs on the state |+y>."""
    axes = trine_axes()
    rho = DensityOperator.from_bloch((0, 1, 0))
    anti = 0.0
    for i, j in ((0, 1), (1, 2), (0, 2)):
        oi, oj = NoisySpinObservable(eta, axes[i]), NoisySpinObservable(eta, axes[j])
        g = construct_pairwise_joint(oi, oj, optimal_pair_params(eta, float(np.dot(axes[i], axes[j]))))
        anti += born_probability(rho, Effect.from_matrix(g.effect("+-").matrix + g.effect("-+").matrix))
    r3 = anti / 3
    return 6 * (r3 - (1 - eta / 3))


def r3_quantum_trine(eta: float) -> float:
    return 0.5 + eta**2 / 4 + 0.5 * math.sqrt(1 - 2 * eta**2 + eta**4 / 4)


def state_independent_condition_value(axes: Sequence[Sequence[float]]) -> float:
    """Sum of |cos(theta_ij / 2)| over the three pairs."""
    total = 0.0
    for a, b in itertools.combinations(axes, 2):
        total += math.sqrt(max(0.0, (1 + float(np.dot(a, b))) / 2))
    return total


def no_state_independent_violation_check(axes: Sequence[Sequence[float]]) -> bool:
    """Whether the necessary condition for a state-independent violation holds."""
    return state_independent_condition_value(axes) < 1


# ---------------------------------------------------------------------------
# n-cycle polytope


def ncycle_polytope(n: int) -> VertexSet:
    """Vertices in (<S_1..S_n>, <S_1S_2>, ..., <S_nS_1>) coordinates.

    Deterministic vertices take S in {+1,-1}^n.  The remaining vertices have
    zero marginals and correlations +/-1 with an odd number of -1 entries.
    Each point is confirmed to be a vertex of the no-disturbance polytope
    (feasible, with active constraints of full rank).
    """
    if n < 3 or n > 12:
        raise DimensionLimit("n-cycle polytopes are supported for 3 <= n <= 12")
    verts = []
    for s in itertools.product((1, -1), repeat=n):
        verts.append(tuple(Fraction(x) for x in s) + tuple(Fraction(s[i] * s[(i + 1) % n]) for i in range(n)))
    for c in itertools.product((1, -1), repeat=n):
        if c.count(-1) % 2 == 1:
            verts.append(tuple(Fraction(0) for _ in range(n)) + tuple(Fraction(x) for x in c))
    for v in verts:
        if not _is_ncycle_vertex(n, v):
            raise AssertionError(f"{v} is not a vertex")
    return VertexSet(2 * n, tuple(sorted(verts)))


def _ncycle_constraints(n: int) -> list[list[Fraction]]:
    """Rows (coefficients..., constant) of 1 + a S_i + b S_j + ab S_iS_j >= 0."""
    rows = []
    for i in range(n):
        j = (i + 1) % n
        for a, b in itertools.product((1, -1), repeat=2):
            row = [Fraction(0)] * (2 * n + 1)
            row[i] += a
            row[j] += b
            row[n + i] = Fraction(a * b)
            row[-1] = Fraction(1)
            rows.append(row)
    return rows


def _is_ncycle_vertex(n: int, v: Sequence[Fraction]) -> bool:
    active = []
    for row in _ncycle_constraints(n):
        val = row[-1] + sum(c * x for c, x in zip(row[:-1], v))
        if val < 0:
            return False
        if val == 0:
            active.append(row[:-1])
    from .polytope_engine import _exact_rank

    return _exact_rank(active) == 2 * n if active else False


def ncycle_to_specker(v: Sequence) -> tuple:
    """Map an n=3 cycle vertex to the 12 pair probabilities in (12), (23), (13) order."""
    s = [Fraction(x) for x in v[:3]]
    c = {(1, 2): Fraction(v[3]), (2, 3): Fraction(v[4]), (1, 3): Fraction(v[5])}
    out = []
    for i, j in PAIRS3:
        for a in (0, 1):
            for b in (0, 1):
                sa, sb = 1 - 2 * a, 1 - 2 * b
                out.append((1 + sa * s[i - 1] + sb * s[j - 1] + sa * sb * c[i, j]) / 4)
    return tuple(out)


def nc_bound_ncycle(n: int, eta_ave: float) -> dict[str, float]:
    return {"two_witness": 2 * (1 - eta_ave / n), "single": (n - 1) / n + 2 * (1 - eta_ave) / n}


def predictability(dist: Sequence[float]) -> float:
    dist = [float(x) for x in dist]
    if len(dist) != 2 or abs(sum(dist) - 1) > 1e-9 or min(dist) < -1e-12:
        raise NotNormalized("predictability needs a normalised binary distribution")
    return 2 * max(dist) - 1


def nc_model_bound_check(n: int, weights: Sequence[float], vertices: VertexSet | None = None) -> float:
    """Slack of xi(anti) <= 1 - (1/n^2) sum_i eta_i for a mixture over cycle vertices.

    For odd n ``xi`` averages p(X_i != X_j) over the cycle pairs; for even n
    it is the chained quantity with the last pair anticorrelated and the
    others correlated.  ``eta_i`` is |<S_i>| of the mixture.
    """
    vs = vertices if vertices is not None else ncycle_polytope(n)
    pts = vs.as_float()
    wts = np.asarray(weights, dtype=float)
    if len(wts) != len(pts) or np.any(wts < -1e-12) or abs(wts.sum() - 1) > 1e-9:
        raise NotNormalized("weights must be a distribution over the vertices")
    mean = wts @ pts
    s, c = mean[:n], mean[n:]
    if n % 2 == 1:
        xi = np.mean((1 - c) / 2)
    else:
        xi = (np.sum((1 + c[:-1]) / 2) + (1 - c[-1]) / 2) / n
    eta = np.abs(s)
    return float(1 - eta.sum() / n**2 - xi)


# ---------------------------------------------------------------------------
# quantum constructions


@dataclass(frozen=True)
class NCycleQuantumConfig:
    n: int
    eta0: float
    axes: tuple[tuple[float, float, float], ...] | None = None
    star_axis: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def resolved_axes(self) -> tuple[tuple[float, float, float], ...]:
        if self.axes is not None:
            return self.axes
        return default_ncycle_axes(self.n)


@dataclass(frozen=True)
class ContextualityReport:
    witness_value: float
    nc_bound: float
    eta_ave: float
    violated: bool

    @classmethod
    def build(cls, witness: float, bound: float, eta_ave: float) -> "ContextualityReport":
        return cls(float(witness), float(bound), float(eta_ave), bool(witness > bound + 1e-12))


def default_ncycle_axes(n: int) -> tuple[tuple[float, float, float], ...]:
    """ZX-plane axes: odd n neighbours at angle (n-1)pi/n, even n at pi/n."""
    step = (n - 1) * math.pi / n if n % 2 == 1 else math.pi / n
    return tuple((math.sin(k * step), 0.0, math.cos(k * step)) for k in range(n))


def _proj_effect(weight: float, vec: np.ndarray) -> np.ndarray:
    """weight * (I + sigma.vec/|...|)/2 written without dividing by the weight."""
    return (weight * I2 + sum(v * p for v, p in zip(vec, PAULIS))) / 2


def _cycle_joint(eta: float, ni: np.ndarray, nj: np.ndarray, a: np.ndarray, sign_a: int, sign_c: int) -> dict:
    """Joint effects 1/2 (1 + s k eta^2 c) Pi_n with n proportional to eta(+-ni +-nj) + sign_a s a.

    ``s`` is +1 for equal outcomes and -1 otherwise; ``sign_c`` selects the
    prefactor sign ``k``.  Both choices leave the single-observable
    marginals unchanged.
    """
    c = float(ni @ nj)
    out = {}
    for xi, xj in itertools.product((0, 1), repeat=2):
        s = (-1) ** (xi + xj)
        weight = (1 + sign_c * s * eta**2 * c) / 2
        vec = eta * ((-1) ** xi * ni + (-1) ** xj * nj) + sign_a * s * a
        out[xi, xj] = _proj_effect(weight, vec / 2)
    return out


def _check_marginals(g: dict, ni: np.ndarray, nj: np.ndarray, eta: float, tol: float = 1e-10) -> None:
    for x in (0, 1):
        want_i = (I2 + (-1) ** x * eta * sum(v * p for v, p in zip(ni, PAULIS))) / 2
        want_j = (I2 + (-1) ** x * eta * sum(v * p for v, p in zip(nj, PAULIS))) / 2
        if np.max(np.abs(g[x, 0] + g[x, 1] - want_i)) > tol or np.max(np.abs(g[0, x] + g[1, x] - want_j)) > tol:
            raise EquivalenceCheckFailed("joint effects do not marginalise to the cycle observables")


def ncycle_joint_povms(cfg: NCycleQuantumConfig) -> tuple[list[Povm], list[Povm]]:
    """Unprimed and primed joint POVMs for each cycle pair (i, i+1 mod n)."""
    n, eta = cfg.n, cfg.eta0
    axes = [np.asarray(a, dtype=float) for a in cfg.resolved_axes()]
    star = np.asarray(cfg.star_axis, dtype=float)
    unprimed, primed = [], []
    for i in range(n):
        ni, nj = axes[i], axes[(i + 1) % n]
        c = float(ni @ nj)
        disc = _pair_disc(eta, c)
        if disc < -TOL:
            raise IncompatiblePair(f"pair ({i + 1},{(i + 1) % n + 1}) is not jointly measurable at eta0={eta}")
        a = math.sqrt(max(disc, 0.0)) * star
        last = i == n - 1
        if n % 2 == 1 or last:
            g, gp = _cycle_joint(eta, ni, nj, a, -1, 1), _cycle_joint(eta, ni, nj, a, 1, 1)
        else:
            # correlated pairs of the even construction
            g, gp = _cycle_joint(eta, ni, nj, a, 1, 1), _cycle_joint(eta, ni, nj, a, -1, 1)
        for joint in (g, gp):
            _check_marginals(joint, ni, nj, eta)
        labels = ["00", "01", "10", "11"]
        unprimed.append(Povm.from_matrices([g[int(l[0]), int(l[1])] for l in labels], labels))
        primed.append(Povm.from_matrices([gp[int(l[0]), int(l[1])] for l in labels], labels))
    return unprimed, primed


def _witness_prob(povm: Povm, rho: DensityOperator, want_equal: bool) -> float:
    labels = ("00", "11") if want_equal else ("01", "10")
    return sum(born_probability(rho, povm.effect(l)) for l in labels)


def quantum_witness_ncycle(cfg: NCycleQuantumConfig) -> ContextualityReport:
    n = cfg.n
    unprimed, primed = ncycle_joint_povms(cfg)
    star = np.asarray(cfg.star_axis, dtype=float)
    rho = DensityOperator.from_bloch(star)
    rho_perp = DensityOperator.from_bloch(-star)
    mixed = (rho.matrix + rho_perp.matrix) / 2
    axes = cfg.resolved_axes()
    etas = []
    for ax in axes:
        p_plus, p_minus = DensityOperator.from_bloch(ax), DensityOperator.from_bloch(-np.asarray(ax))
        if np.max(np.abs((p_plus.matrix + p_minus.matrix) / 2 - mixed)) > 1e-10:
            raise EquivalenceCheckFailed("preparation mixtures differ")
        m = NoisySpinObservable(cfg.eta0, ax).povm()
        etas.append(predictability([born_probability(p_plus, e) for e in m.effects]))
        etas.append(predictability([born_probability(p_minus, e) for e in m.effects]))
    # primed and unprimed joints share marginals (checked against the same
    # observables), which is the required measurement equivalence
    witness = 0.0
    for k in range(n):
        equal = n % 2 == 0 and k < n - 1
        witness += _witness_prob(unprimed[k], rho, equal) + _witness_prob(primed[k], rho_perp, equal)
    witness /= n
    eta_ave = float(np.mean(etas))
    return ContextualityReport.build(witness, nc_bound_ncycle(n, eta_ave)["two_witness"], eta_ave)


def witness_closed_form(n: int, eta0: float) -> float:
    c = math.cos(math.pi / n)
    return 1 + eta0**2 * c + math.sqrt(max(0.0, 1 + eta0**4 * c**2 - 2 * eta0**2))


def qviol(n: int, eta0: float) -> float:
    return witness_closed_form(n, eta0) - (2 - 2 * eta0 / n)


def eta0_upper(n: int) -> float:
    return 1 / math.sqrt(1 + math.sin(math.pi / n))


def _golden_max(f, lo: float, hi: float, tol: float = 1e-7) -> float:
    inv = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (a + b) / 2


def _bisect_root(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    flo = f(lo)
    for _ in range(200):
        mid = (lo + hi) / 2
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return (lo + hi) / 2


def optimize_qviol(n: int) -> tuple[float, float, float, float]:
    """(optimal eta0, max Q_viol, critical eta0, upper bound on eta0).

    A 1e-3 grid locates the best cell, golden-section search refines it to
    1e-7, and the grid winner is kept if refinement does worse.  The
    critical value is the zero of Q_viol between the optimum and the upper
    bound, found by bisection.
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    up = eta0_upper(n)
    grid = np.append(np.arange(0.0, up, 1e-3), up)
    vals = np.array([qviol(n, x) for x in grid])
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    best = _golden_max(lambda x: qviol(n, x), lo, hi)
    if qviol(n, best) < vals[k]:
        best = float(grid[k])
    qmax = qviol(n, best)
    if qviol(n, up) >= 0:
        crit = up
    else:
        crit = _bisect_root(lambda x: qviol(n, x), best, up)
    return best, qmax, crit, up
