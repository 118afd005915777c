"""Joint measurability of noisy spin observables and hypergraph realisations.

A noisy spin observable along unit axis n with sharpness eta has effects
E_(+/-) = I/2 +/- (eta/2) sigma.n.  This module decides compatibility of
such observables (pairwise exactly, N-wise through a necessary and a
sufficient test), builds explicit joint POVMs, and realises any downward
closed compatibility pattern with one Clifford block per minimal
incompatible set.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EtaMismatch, InvalidJointParams, NotProjective, ResourceLimit, ShapeMismatch
from .quantum_core import (
    I2,
    PAULIS,
    Povm,
    clifford_generators,
    max_dim,
)

SLACK = 1e-12


@dataclass(frozen=True)
class NoisySpinObservable:
    eta: float
    axis: tuple[float, float, float]

    def __post_init__(self) -> None:
        axis = tuple(float(a) for a in self.axis)
        if len(axis) != 3:
            raise ShapeMismatch("axis must be a 3-vector")
        if abs(np.linalg.norm(axis) - 1) > 1e-12:
            raise ValueError("axis must be a unit vector")
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")
        object.__setattr__(self, "axis", axis)

    def sigma(self) -> np.ndarray:
        return sum(a * p for a, p in zip(self.axis, PAULIS))

    def povm(self) -> Povm:
        s = self.sigma()
        return Povm.from_matrices([(I2 + self.eta * s) / 2, (I2 - self.eta * s) / 2], ["+", "-"])


@dataclass(frozen=True)
class JointPovmParams:
    alpha: float
    a_vec: tuple[float, float, float]


def _common_eta(a: NoisySpinObservable, b: NoisySpinObservable) -> float:
    if abs(a.eta - b.eta) > 1e-12:
        raise EtaMismatch(f"sharpness {a.eta} != {b.eta}")
    return a.eta


def pairwise_compatible(obs_i: NoisySpinObservable, obs_j: NoisySpinObservable) -> bool:
    eta = _common_eta(obs_i, obs_j)
    c = float(np.dot(obs_i.axis, obs_j.axis))
    return 1 + eta**4 * c**2 - 2 * eta**2 >= -SLACK


def _sign_sums(axes: Sequence[Sequence[float]]) -> np.ndarray:
    """|sum_k X_k n_k| for every sign pattern X in {+1,-1}^N."""
    A = np.asarray(axes, dtype=float)
    n = len(A)
    signs = 1 - 2 * ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1)
    return np.linalg.norm(signs @ A, axis=1)


def n_wise_necessary(eta: float, axes: Sequence[Sequence[float]]) -> bool:
    """False means the N observables are certainly not jointly measurable."""
    return eta <= _sign_sums(axes).max() / len(axes) + SLACK


def n_wise_sufficient(eta: float, axes: Sequence[Sequence[float]]) -> bool:
    """True means the N observables are certainly jointly measurable."""
    total = _sign_sums(axes).sum()
    if total == 0:
        return True
    return eta <= 2 ** len(axes) / total + SLACK


def clifford_jm_threshold(n: int) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    return 1 / np.sqrt(n)


def optimal_pair_params(eta: float, dot: float) -> JointPovmParams:
    """Joint parameters maximising the anticorrelation weight along +y."""
    disc = 1 + eta**4 * dot**2 - 2 * eta**2
    if disc < -SLACK:
        raise InvalidJointParams("pair is not jointly measurable at this sharpness")
    return JointPovmParams(1 + eta**2 * dot, (0.0, float(np.sqrt(max(disc, 0.0))), 0.0))


def construct_pairwise_joint(
    obs_i: NoisySpinObservable, obs_j: NoisySpinObservable, params: JointPovmParams
) -> Povm:
    """Four-outcome joint POVM with labels '++', '+-', '-+', '--'."""
    eta = _common_eta(obs_i, obs_j)
    ni, nj = np.array(obs_i.axis), np.array(obs_j.axis)
    a = np.asarray(params.a_vec, dtype=float)
    alpha = float(params.alpha)
    lower = np.sqrt(2 * eta**2 * (1 + ni @ nj) + a @ a + 2 * eta * abs((ni + nj) @ a))
    upper = 2 - np.sqrt(2 * eta**2 * (1 - ni @ nj) + a @ a + 2 * eta * abs((ni - nj) @ a))
    if alpha < lower - SLACK:
        raise InvalidJointParams(f"lower validity bound violated: alpha={alpha} < {lower}")
    if alpha > upper + SLACK:
        raise InvalidJointParams(f"upper validity bound violated: alpha={alpha} > {upper}")

    def eff(scalar: float, vec: np.ndarray) -> np.ndarray:
        return (scalar * I2 + sum(v * p for v, p in zip(vec, PAULIS))) / 2

    g = {
        "++": eff(alpha / 2, (eta * (ni + nj) - a) / 2),
        "+-": eff(1 - alpha / 2, (eta * (ni - nj) + a) / 2),
        "-+": eff(1 - alpha / 2, (eta * (nj - ni) + a) / 2),
        "--": eff(alpha / 2, (-eta * (ni + nj) - a) / 2),
    }
    povm = Povm.from_matrices(list(g.values()), list(g))
    Ei, Ej = obs_i.povm(), obs_j.povm()
    checks = [
        (g["++"] + g["+-"], Ei.effects[0].matrix),
        (g["-+"] + g["--"], Ei.effects[1].matrix),
        (g["++"] + g["-+"], Ej.effects[0].matrix),
        (g["+-"] + g["--"], Ej.effects[1].matrix),
    ]
    for got, want in checks:
        if np.max(np.abs(got - want)) > 1e-12:
            raise InvalidJointParams("joint POVM does not reproduce the marginals")
    return povm


# ---------------------------------------------------------------------------
# projective measurements


@dataclass(frozen=True)
class Incompatible:
    reason: str


def unique_joint_for_pvms(pvms: Sequence[Povm], tol: float = 1e-9) -> Povm | Incompatible:
    """Product joint POVM when all effects commute, else :class:`Incompatible`."""
    if sum(1 for p in pvms if not p.is_projective(tol)) > 1:
        raise NotProjective("at most one input may be non-projective")
    for (a, pa), (b, pb) in itertools.combinations(enumerate(pvms), 2):
        for ea in pa.effects:
            for eb in pb.effects:
                if np.max(np.abs(ea.matrix @ eb.matrix - eb.matrix @ ea.matrix)) > tol:
                    return Incompatible(f"measurements {a} and {b} do not commute")
    mats, labels = [], []
    for combo in itertools.product(*[range(len(p)) for p in pvms]):
        m = np.eye(pvms[0].dim, dtype=complex)
        for p, k in zip(pvms, combo):
            m = m @ p.effects[k].matrix
        mats.append((m + m.conj().T) / 2)
        labels.append(",".join(p.labels[k] for p, k in zip(pvms, combo)))
    return Povm.from_matrices(mats, labels)


# ---------------------------------------------------------------------------
# hypergraphs


@dataclass(frozen=True)
class JmHypergraph:
    n_vertices: int
    edges: frozenset[frozenset[int]]

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[Iterable[int]]) -> "JmHypergraph":
        closed: set[frozenset[int]] = {frozenset([v]) for v in range(1, n_vertices + 1)}
        for e in edges:
            e = frozenset(int(v) for v in e)
            if not e or min(e) < 1 or max(e) > n_vertices:
                raise ShapeMismatch(f"edge {sorted(e)} has vertices outside 1..{n_vertices}")
            for k in range(1, len(e) + 1):
                closed.update(frozenset(s) for s in itertools.combinations(sorted(e), k))
        return cls(n_vertices, frozenset(closed))

    @classmethod
    def from_json(cls, obj: dict | str) -> "JmHypergraph":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls.from_edges(int(obj["n_vertices"]), obj["edges"])

    def to_json(self) -> dict:
        return {"n_vertices": self.n_vertices, "edges": sorted(sorted(e) for e in self.edges)}

    def is_edge(self, s: Iterable[int]) -> bool:
        return frozenset(s) in self.edges


def find_minimal_incompatible_sets(h: JmHypergraph) -> list[tuple[int, ...]]:
    out = []
    verts = range(1, h.n_vertices + 1)
    for k in range(2, h.n_vertices + 1):
        for s in itertools.combinations(verts, k):
            if h.is_edge(s):
                continue
            if all(h.is_edge(sub) for sub in itertools.combinations(s, k - 1)):
                out.append(s)
    return sorted(out)


@dataclass(frozen=True)
class Block:
    vertices: tuple[int, ...]
    offset: int
    dim: int
    eta: float


def block_layout(h: JmHypergraph) -> list[Block]:
    """One Clifford block per minimal incompatible set, in sorted order."""
    sets = find_minimal_incompatible_sets(h)
    blocks, off = [], 0
    for s in sets:
        gens = clifford_generators(len(s))
        blocks.append(Block(s, off, gens.dim, float(1 / np.sqrt(len(s) - 1))))
        off += gens.dim
    if not blocks:
        blocks.append(Block((), 0, 1, 0.0))
        off = 1
    if off > max_dim():
        raise ResourceLimit(f"realisation needs dimension {off} > cap {max_dim()}")
    return blocks


def realize_hypergraph(h: JmHypergraph) -> list[Povm]:
    """Binary POVMs (labels '+', '-') whose compatibility pattern is ``h``.

    In the block of a minimal incompatible set S of size N the k-th member
    of S measures I/2 + Gamma_k / (2 sqrt(N-1)) with anticommuting Gamma_k;
    every other vertex gets the trivial effect 0 there.  Any N-1 members of
    S are then jointly measurable in that block while all N are not.
    """
    blocks = block_layout(h)
    total = blocks[-1].offset + blocks[-1].dim
    povms = []
    for v in range(1, h.n_vertices + 1):
        plus = np.zeros((total, total), dtype=complex)
        for b in blocks:
            if v in b.vertices:
                gam = clifford_generators(len(b.vertices)).generators[b.vertices.index(v)]
                plus[b.offset : b.offset + b.dim, b.offset : b.offset + b.dim] = (np.eye(b.dim) + b.eta * gam) / 2
        povms.append(Povm.from_matrices([plus, np.eye(total) - plus], ["+", "-"]))
    return povms


@dataclass(frozen=True)
class _BlockMember:
    trivial_weight: float | None  # E+ = c I when trivial
    gamma: np.ndarray | None
    eta: float


def _decompose(plus_block: np.ndarray) -> _BlockMember:
    d = plus_block.shape[0]
    c = np.trace(plus_block).real / d
    if np.max(np.abs(plus_block - c * np.eye(d))) < 1e-12:
        return _BlockMember(float(c), None, 0.0)
    x = 2 * plus_block - np.eye(d)
    eta = float(np.linalg.norm(x, 2))
    gamma = x / eta
    if np.max(np.abs(gamma @ gamma - np.eye(d))) > 1e-9:
        raise ValueError("block effect is not of the form (I + eta Gamma)/2")
    return _BlockMember(None, gamma, eta)


def _members(povms: Sequence[Povm], blocks: Sequence[Block]) -> list[list[_BlockMember]]:
    out = []
    for b in blocks:
        sl = slice(b.offset, b.offset + b.dim)
        out.append([_decompose(p.effects[0].matrix[sl, sl]) for p in povms])
    return out


def _block_compatible(members: Sequence[_BlockMember]) -> bool:
    active = [m for m in members if m.gamma is not None]
    if len(active) <= 1:
        return True
    etas = {round(m.eta, 12) for m in active}
    if len(etas) != 1:
        raise EtaMismatch("closed-form test needs one sharpness per block")
    for a, b in itertools.combinations(active, 2):
        if np.max(np.abs(a.gamma @ b.gamma + b.gamma @ a.gamma)) > 1e-9:
            raise ValueError("block generators do not anticommute")
    # anticommuting involutions behave like orthonormal axes
    axes = np.eye(len(active))
    eta = active[0].eta
    suff, nec = n_wise_sufficient(eta, axes), n_wise_necessary(eta, axes)
    if suff != nec:
        raise AssertionError("tests disagree on an orthonormal configuration")
    return suff


def recompute_hypergraph(povms: Sequence[Povm], blocks: Sequence[Block]) -> JmHypergraph:
    """Compatibility pattern of block-structured POVMs, derived blockwise."""
    members = _members(povms, blocks)
    n = len(povms)
    edges = []
    for k in range(1, n + 1):
        for s in itertools.combinations(range(n), k):
            if all(_block_compatible([mem[i] for i in s]) for mem in members):
                edges.append([i + 1 for i in s])
    return JmHypergraph.from_edges(n, edges)


def joint_povm_for_edge(povms: Sequence[Povm], blocks: Sequence[Block], edge: Sequence[int]) -> Povm:
    """Explicit joint POVM for the vertices in ``edge`` (1-based), built blockwise."""
    members = _members(povms, blocks)
    total = povms[0].dim
    outcomes = list(itertools.product((1, -1), repeat=len(edge)))
    mats = [np.zeros((total, total), dtype=complex) for _ in outcomes]
    for b, mem in zip(blocks, members):
        sl = slice(b.offset, b.offset + b.dim)
        chosen = [mem[v - 1] for v in edge]
        active = [i for i, m in enumerate(chosen) if m.gamma is not None]
        for idx, x in enumerate(outcomes):
            blk = np.eye(b.dim, dtype=complex)
            if active:
                eta = chosen[active[0]].eta
                blk = (blk + eta * sum(x[i] * chosen[i].gamma for i in active)) / 2 ** len(active)
            for i, m in enumerate(chosen):
                if m.gamma is None:
                    blk = blk * (m.trivial_weight if x[i] == 1 else 1 - m.trivial_weight)
            mats[idx][sl, sl] = blk
    labels = ["".join("+" if s == 1 else "-" for s in x) for x in outcomes]
    return Povm.from_matrices(mats, labels)
