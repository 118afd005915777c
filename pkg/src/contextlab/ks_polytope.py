"""Kochen-Specker hypergraphs, their assignment polytopes and noise-robust witnesses.

A hypergraph has ``n_classes`` event classes (numbered from 1) and a list of
measurements, each a set of classes whose outcome probabilities must sum to
one.  Non-contextual assignments are points of
``{w in [0,1]^n : sum_{k in M} w_k = 1 for each M}``; their average
predictability is bounded by the best vertex, while quantum projectors on
the 18-ray set reach the maximum of 1.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Sequence

import numpy as np

from .errors import ClassificationFailure, NotNormalized, ResourceLimit, ShapeMismatch
from .polytope_engine import HPolytope, Vector, VertexSet, enumerate_vertices, to_fraction

MAX_COLOURING_CLASSES = 40


@dataclass(frozen=True)
class EventHypergraph:
    n_classes: int
    measurements: tuple[tuple[int, ...], ...]
    # extra linear constraints: (coefficients over classes, right-hand side)
    extra_constraints: tuple[tuple[tuple[Fraction, ...], Fraction], ...] = field(default=())

    def __post_init__(self) -> None:
        meas = tuple(tuple(sorted(int(k) for k in m)) for m in self.measurements)
        for m in meas:
            if len(m) < 2 or len(set(m)) != len(m):
                raise ShapeMismatch("each measurement needs at least two distinct classes")
            if m[0] < 1 or m[-1] > self.n_classes:
                raise ShapeMismatch("class index out of range")
        object.__setattr__(self, "measurements", meas)

    @classmethod
    def from_json(cls, obj: dict | str) -> "EventHypergraph":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(int(obj["n_classes"]), tuple(tuple(m) for m in obj["measurements"]))

    def to_json(self) -> dict:
        return {"n_classes": self.n_classes, "measurements": [list(m) for m in self.measurements]}

    def neighbours(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {k: set() for k in range(1, self.n_classes + 1)}
        for m in self.measurements:
            for a in m:
                adj[a].update(b for b in m if b != a)
        return adj

    def with_constraint(self, coeffs: Sequence, rhs) -> "EventHypergraph":
        row = tuple(to_fraction(c) for c in coeffs)
        if len(row) != self.n_classes:
            raise ShapeMismatch("constraint length must equal n_classes")
        return EventHypergraph(self.n_classes, self.measurements, self.extra_constraints + ((row, to_fraction(rhs)),))


def _load_cega18() -> dict:
    text = resources.files("contextlab").joinpath("data/cega18.json").read_text()
    data = json.loads(text)
    rays = np.array(data["rays"], dtype=float)
    meas = data["measurements"]
    if rays.shape != (data["n_classes"], 4):
        raise ShapeMismatch("ray table has the wrong shape")
    counts = np.zeros(len(rays), dtype=int)
    for m in meas:
        for a in m:
            counts[a - 1] += 1
            for b in m:
                if a != b and abs(rays[a - 1] @ rays[b - 1]) > 1e-12:
                    raise ValueError(f"rays {a} and {b} share a measurement but are not orthogonal")
    if not np.all(counts == 2):
        raise ValueError("every ray must belong to exactly two measurements")
    return data


CEGA18_DATA = _load_cega18()
CEGA18 = EventHypergraph(CEGA18_DATA["n_classes"], tuple(tuple(m) for m in CEGA18_DATA["measurements"]))


def cega18_rays() -> np.ndarray:
    """Unnormalised integer rays, row k-1 for class k."""
    return np.array(CEGA18_DATA["rays"], dtype=float)


def ks_colourable(h: EventHypergraph) -> tuple[bool, tuple[int, ...] | None]:
    """Search for a 0/1 assignment with exactly one 1 per measurement."""
    if h.n_classes > MAX_COLOURING_CLASSES:
        raise ResourceLimit(f"colouring search is capped at {MAX_COLOURING_CLASSES} classes")
    value = [-1] * (h.n_classes + 1)
    meas_of: dict[int, list[tuple[int, ...]]] = {k: [] for k in range(1, h.n_classes + 1)}
    for m in h.measurements:
        for k in m:
            meas_of[k].append(m)

    def consistent(k: int) -> bool:
        for m in meas_of[k]:
            ones = sum(1 for j in m if value[j] == 1)
            unknown = sum(1 for j in m if value[j] == -1)
            if ones > 1 or (ones == 0 and unknown == 0):
                return False
        return True

    def extra_ok() -> bool:
        return all(sum(c * value[i + 1] for i, c in enumerate(row)) == rhs for row, rhs in h.extra_constraints)

    def search(k: int) -> bool:
        if k > h.n_classes:
            return extra_ok()
        for v in (1, 0):
            value[k] = v
            if consistent(k) and search(k + 1):
                return True
        value[k] = -1
        return False

    if search(1):
        return True, tuple(value[1:])
    return False, None


def assignment_polytope(h: EventHypergraph) -> HPolytope:
    rows = [[1 if k in m else 0 for k in range(1, h.n_classes + 1)] for m in h.measurements]
    rhs: list = [1] * len(rows)
    for row, b in h.extra_constraints:
        rows.append(list(row))
        rhs.append(b)
    return HPolytope.from_rows(rows, rhs, dim=h.n_classes)


def average_predictability(h: EventHypergraph, w: Sequence) -> Fraction:
    """(1/|M|) sum over measurements of the largest class weight."""
    return sum((max(to_fraction(w[k - 1]) for k in m) for m in h.measurements), Fraction(0)) / len(h.measurements)


def max_avg_predictability(h: EventHypergraph, vertices: VertexSet | None = None) -> tuple[Fraction, Vector]:
    """Largest average predictability over non-contextual assignments.

    The objective is convex, so it suffices to scan vertices; ties keep the
    lexicographically smallest vertex.
    """
    vs = vertices if vertices is not None else enumerate_vertices(assignment_polytope(h))
    best, witness = None, None
    for v in vs:
        val = average_predictability(h, v)
        if best is None or val > best:
            best, witness = val, v
    if witness is None:
        raise ClassificationFailure("assignment polytope has no vertices")
    return best, witness


@dataclass(frozen=True)
class VertexType:
    type_id: int
    avg_predictability: Fraction
    vertex: Vector
    odd_cycle: tuple[int, ...]


def shortest_odd_cycle(adj: dict[int, set[int]], nodes: Sequence[int]) -> tuple[int, ...] | None:
    """Shortest odd cycle in the induced subgraph, canonically rotated."""
    node_set = set(nodes)
    best: tuple[int, ...] | None = None
    for s in sorted(node_set):
        dist = {s: 0}
        parent = {s: s}
        q = deque([s])
        while q:
            x = q.popleft()
            for y in sorted(adj[x] & node_set):
                if y not in dist:
                    dist[y] = dist[x] + 1
                    parent[y] = x
                    q.append(y)
        for x in sorted(dist):
            for y in sorted(adj[x] & node_set):
                if x < y and y in dist and dist[x] == dist[y]:
                    length = 2 * dist[x] + 1
                    if best is not None and length >= len(best):
                        continue
                    left, right = [x], [y]
                    while left[-1] != s:
                        left.append(parent[left[-1]])
                    while right[-1] != s:
                        right.append(parent[right[-1]])
                    cyc = left[::-1] + right[:-1]
                    if len(set(cyc)) == length:
                        best = _canonical_cycle(tuple(cyc))
    return best


def _canonical_cycle(c: tuple[int, ...]) -> tuple[int, ...]:
    i = c.index(min(c))
    rot = c[i:] + c[:i]
    rev = (rot[0],) + tuple(reversed(rot[1:]))
    return min(rot, rev)


def classify_vertices(h: EventHypergraph, vertices: VertexSet | None = None) -> list[VertexType]:
    """Group vertices by average predictability and attach an odd-cycle witness.

    Type ids number the distinct predictability values from the largest
    down.  The witness is a shortest odd cycle among the classes weighted
    1/2, adjacency meaning the two classes share a measurement.
    """
    vs = vertices if vertices is not None else enumerate_vertices(assignment_polytope(h))
    adj = h.neighbours()
    preds = [average_predictability(h, v) for v in vs]
    levels = sorted(set(preds), reverse=True)
    out = []
    for v, val in zip(vs, preds):
        halves = [k for k in range(1, h.n_classes + 1) if v[k - 1] == Fraction(1, 2)]
        if any(x not in (0, 1, Fraction(1, 2)) for x in v):
            raise ClassificationFailure(f"vertex {v} has a weight outside {{0, 1/2, 1}}")
        cyc = shortest_odd_cycle(adj, halves)
        if cyc is None:
            raise ClassificationFailure(f"no odd cycle among the 1/2-weighted classes of {v}")
        out.append(VertexType(levels.index(val) + 1, val, v, cyc))
    return out


def odd_cycle_projective_obstruction(cycle_length: int) -> bool:
    """Whether a cycle of rank-one projectors can give every event probability 1/2.

    Adjacent projectors are orthogonal, so p_i + p_{i+1} <= 1 along the
    cycle; with every p_i = 1/2 each adjacent pair must exhaust the state's
    support, forcing alternating projectors and hence an even length.  For
    even lengths the alternating qubit projectors Pi_z, Pi_z^perp with the
    maximally mixed state realise the assignment, which is checked here.
    """
    if cycle_length < 3:
        raise ValueError("cycle length must be at least 3")
    if cycle_length % 2 == 1:
        return True
    rho = np.eye(2) / 2
    projs = [np.diag([1.0, 0.0]) if i % 2 == 0 else np.diag([0.0, 1.0]) for i in range(cycle_length)]
    for i in range(cycle_length):
        a, b = projs[i], projs[(i + 1) % cycle_length]
        if np.max(np.abs(a @ b)) > 1e-15 or abs(np.trace(rho @ a) - 0.5) > 1e-15:
            raise AssertionError("alternating construction failed")
    return False


def evaluate_A(h: EventHypergraph, stats: np.ndarray) -> float:
    """Average of p(k | M_i, P_{i,k}) over all measurement-outcome pairs.

    ``stats[i, k, l]`` is the probability of outcome ``l`` of measurement
    ``i`` on the preparation associated with outcome ``k``.
    """
    stats = np.asarray(stats, dtype=float)
    sizes = {len(m) for m in h.measurements}
    if len(sizes) != 1:
        raise ShapeMismatch("evaluate_A needs measurements of equal size")
    k = sizes.pop()
    if stats.shape != (len(h.measurements), k, k):
        raise ShapeMismatch(f"stats must have shape {(len(h.measurements), k, k)}, got {stats.shape}")
    if np.max(np.abs(stats.sum(axis=2) - 1)) > 1e-9:
        raise NotNormalized("each stats[i, k, :] must sum to 1")
    return float(np.einsum("ikk->", stats) / (len(h.measurements) * k))


def depolarizing_A(p1, p2):
    """Quantum value of the witness under depolarising state and measurement noise."""
    return Fraction(1, 4) + Fraction(3, 4) * p1 * p2 if isinstance(p1 * p2, (int, Fraction)) else 0.25 + 0.75 * p1 * p2


def noise_threshold() -> Fraction:
    """Smallest p1*p2 at which the depolarised value exceeds the 5/6 bound."""
    # 1/4 + 3/4 x = 5/6  ->  x = 7/9
    return (Fraction(5, 6) - Fraction(1, 4)) / Fraction(3, 4)


def cega18_quantum_stats(p1: float = 1.0, p2: float = 1.0) -> np.ndarray:
    """Born-rule statistics for the 18-ray set with depolarised states and projectors."""
    rays = cega18_rays()
    dim = 4
    stats = np.zeros((len(CEGA18.measurements), 4, 4))
    for i, m in enumerate(CEGA18.measurements):
        projs = []
        for k in m:
            v = rays[k - 1] / np.linalg.norm(rays[k - 1])
            projs.append(np.outer(v, v))
        for a, pa in enumerate(projs):
            rho = p1 * pa + (1 - p1) * np.eye(dim) / dim
            for b, pb in enumerate(projs):
                eff = p2 * pb + (1 - p2) * np.eye(dim) / dim
                stats[i, a, b] = np.trace(rho @ eff)
    return stats


def cabello_alpha_prime(stats: np.ndarray) -> float:
    """Sum over measurements of the parity-one probability of the four indicator bits.

    Outcome k sets exactly the k-th of the four indicators, so each
    normalised distribution contributes one and the total is the number of
    measurements.
    """
    stats = np.asarray(stats, dtype=float)
    if stats.ndim != 2 or stats.shape[1] != 4:
        raise ShapeMismatch("expected one 4-outcome distribution per measurement")
    if np.max(np.abs(stats.sum(axis=1) - 1)) > 1e-9:
        raise NotNormalized("each distribution must sum to 1")
    total = 0.0
    for row in stats:
        for k in range(4):
            indicators = [1 if j == k else 0 for j in range(4)]
            if sum(indicators) % 2 == 1:
                total += row[k]
    return total


def max_deterministic_alpha_prime(h: EventHypergraph = CEGA18) -> int:
    """Best number of measurements with odd indicator parity over all 0/1 assignments."""
    n = h.n_classes
    bits = (np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1
    score = np.zeros(1 << n, dtype=np.int64)
    for m in h.measurements:
        score += bits[:, [k - 1 for k in m]].sum(axis=1) % 2
    return int(score.max())
