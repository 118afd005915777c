"""Finite-dimensional quantum states, effects and POVMs.

Operators are stored as read-only complex numpy arrays.  Every constructor
validates its invariant (Hermiticity, positivity, unit trace, completeness)
against the tolerances below, so downstream code can assume well-formed
objects.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidBloch,
    NumericalRangeError,
    ResourceLimit,
    ShapeMismatch,
)

TOL_HERM = 1e-12
TOL_PSD = 1e-9
TOL_TRACE = 1e-12
TOL_COMPLETE = 1e-10

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)


def max_dim() -> int:
    """Largest Hilbert-space dimension we are willing to build."""
    return int(os.environ.get("CONTEXTLAB_MAX_DIM", "1024"))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _check_square(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ShapeMismatch(f"expected a non-empty square matrix, got shape {m.shape}")


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        _check_square(m)
        if np.max(np.abs(m - m.conj().T)) > TOL_HERM:
            raise ValueError("matrix is not Hermitian within tolerance")
        # symmetrise away the sub-tolerance skew part
        object.__setattr__(self, "matrix", _frozen((m + m.conj().T) / 2))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "re": self.matrix.real.ravel().tolist(),
            "im": self.matrix.imag.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "HermitianOperator":
        d = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", [0.0] * d * d), dtype=float)
        if re.size != d * d or im.size != d * d:
            raise ShapeMismatch("re/im length does not match dim*dim")
        return cls((re + 1j * im).reshape(d, d))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    op: HermitianOperator

    def __post_init__(self) -> None:
        if abs(np.trace(self.op.matrix).real - 1.0) > TOL_TRACE * max(1, self.op.dim):
            raise ValueError("density operator must have unit trace")
        if self.op.eigenvalues()[0] < -TOL_PSD:
            raise ValueError("density operator must be positive semidefinite")

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def dim(self) -> int:
        return self.op.dim

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "DensityOperator":
        return cls(HermitianOperator(m))

    @classmethod
    def pure(cls, ket: Sequence[complex]) -> "DensityOperator":
        v = np.asarray(ket, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(HermitianOperator(np.outer(v, v.conj())))

    @classmethod
    def from_bloch(cls, r: Sequence[float]) -> "DensityOperator":
        r = np.asarray(r, dtype=float)
        if np.linalg.norm(r) > 1 + 1e-12:
            raise InvalidBloch("Bloch vector longer than 1")
        return cls(HermitianOperator((I2 + sum(c * p for c, p in zip(r, PAULIS))) / 2))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(HermitianOperator(np.eye(dim) / dim))


@dataclass(frozen=True, eq=False)
class Effect:
    op: HermitianOperator

    def __post_init__(self) -> None:
        ev = self.op.eigenvalues()
        if ev[0] < -TOL_PSD or ev[-1] > 1 + TOL_PSD:
            raise ValueError("effect must satisfy 0 <= E <= I")

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def dim(self) -> int:
        return self.op.dim

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Effect":
        return cls(HermitianOperator(m))

    def is_projector(self, tol: float = 1e-9) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m @ m - m)) <= tol)


@dataclass(frozen=True, eq=False)
class Povm:
    effects: tuple[Effect, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        effects = tuple(self.effects)
        labels = tuple(str(x) for x in self.labels)
        if not effects:
            raise ShapeMismatch("a POVM needs at least one effect")
        if len(labels) != len(effects):
            raise ShapeMismatch("one label per effect is required")
        if len(set(labels)) != len(labels):
            raise ValueError("POVM labels must be distinct")
        d = effects[0].dim
        if any(e.dim != d for e in effects):
            raise DimensionMismatch("all effects must act on the same space")
        total = sum(e.matrix for e in effects)
        if np.max(np.abs(total - np.eye(d))) > TOL_COMPLETE:
            raise ValueError("effects do not sum to the identity")
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    def __len__(self) -> int:
        return len(self.effects)

    def effect(self, label: str) -> Effect:
        return self.effects[self.labels.index(str(label))]

    @classmethod
    def from_matrices(cls, mats: Iterable[np.ndarray], labels: Iterable[str]) -> "Povm":
        return cls(tuple(Effect.from_matrix(m) for m in mats), tuple(labels))

    def is_projective(self, tol: float = 1e-9) -> bool:
        return all(e.is_projector(tol) for e in self.effects)

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "effects": [e.op.to_json() for e in self.effects]}

    @classmethod
    def from_json(cls, obj: dict) -> "Povm":
        ops = [HermitianOperator.from_json(e) for e in obj["effects"]]
        return cls(tuple(Effect(o) for o in ops), tuple(obj["labels"]))


@dataclass(frozen=True)
class BlochEffect:
    """Qubit effect written as E = (e0 I + e . sigma) / 2."""

    e0: float
    e: tuple[float, float, float]

    def __post_init__(self) -> None:
        n = float(np.linalg.norm(self.e))
        tol = 1e-12
        if not (-tol <= self.e0 <= 2 + tol and n <= self.e0 + tol and n <= 2 - self.e0 + tol):
            raise InvalidBloch(f"(e0={self.e0}, |e|={n}) is outside the effect cone")


def born_probability(state: DensityOperator, effect: Effect) -> float:
    """Tr(rho E), checked to lie in [0, 1]."""
    if state.dim != effect.dim:
        raise DimensionMismatch(f"state dim {state.dim} != effect dim {effect.dim}")
    p = float(np.real(np.trace(state.matrix @ effect.matrix)))
    if p < -TOL_PSD or p > 1 + TOL_PSD:
        raise NumericalRangeError(f"probability {p} outside [0, 1]")
    return min(1.0, max(0.0, p))


def outcome_distribution(state: DensityOperator, povm: Povm) -> np.ndarray:
    return np.array([born_probability(state, e) for e in povm.effects])


def bloch_to_effect(b: BlochEffect) -> Effect:
    m = (b.e0 * I2 + sum(c * p for c, p in zip(b.e, PAULIS))) / 2
    return Effect.from_matrix(m)


def effect_to_bloch(e: Effect) -> BlochEffect:
    if e.dim != 2:
        raise DimensionMismatch("Bloch coordinates exist only for qubit effects")
    m = e.matrix
    e0 = float(np.trace(m).real)
    vec = tuple(float(np.trace(m @ p).real) for p in PAULIS)
    return BlochEffect(e0, vec)  # type: ignore[arg-type]


@dataclass(frozen=True, eq=False)
class CliffordSet:
    """Pairwise anticommuting Hermitian involutions."""

    generators: tuple[np.ndarray, ...]

    @property
    def n(self) -> int:
        return len(self.generators)

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]

    def violations(self, tol: float = 1e-12) -> list[str]:
        out = []
        eye = np.eye(self.dim)
        for i, g in enumerate(self.generators):
            if np.max(np.abs(g - g.conj().T)) > tol:
                out.append(f"generator {i} not Hermitian")
            if np.max(np.abs(g @ g - eye)) > tol:
                out.append(f"generator {i} does not square to identity")
            for j in range(i + 1, self.n):
                h = self.generators[j]
                if np.max(np.abs(g @ h + h @ g)) > tol:
                    out.append(f"generators {i},{j} do not anticommute")
        return out


def clifford_dimension(n: int) -> int:
    # 2^ceil((n-1)/2) == 2^floor(n/2)
    return 2 ** (n // 2)


def clifford_generators(n: int) -> CliffordSet:
    """n anticommuting involutions on C^(2^ceil((n-1)/2)).

    Built by the recursion G_i -> G_i (x) Z, plus I (x) X and I (x) Y, which
    adds two generators per doubling.  Even n drops the last generator of
    the n+1 set.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    dim = clifford_dimension(n)
    if dim > max_dim():
        raise ResourceLimit(f"{n} generators need dimension {dim} > cap {max_dim()}")
    target = n if n % 2 == 1 else n + 1
    gens = [np.eye(1, dtype=complex)]
    while len(gens) < target:
        eye = np.eye(gens[0].shape[0], dtype=complex)
        gens = [np.kron(g, SZ) for g in gens] + [np.kron(eye, SX), np.kron(eye, SY)]
    gens = gens[:n]
    for g in gens:
        g.setflags(write=False)
    return CliffordSet(tuple(gens))


def binary_observable(povm: Povm) -> np.ndarray:
    """E_0 - E_1 for a two-outcome POVM (first label counts as +1)."""
    if len(povm) != 2:
        raise ShapeMismatch("binary observable needs exactly two outcomes")
    return povm.effects[0].matrix - povm.effects[1].matrix


def chsh_value(state: DensityOperator, alice: Sequence[Povm], bob: Sequence[Povm]) -> float:
    """<A0B0> + <A0B1> + <A1B0> - <A1B1> on a bipartite state."""
    if len(alice) != 2 or len(bob) != 2:
        raise ShapeMismatch("CHSH needs two binary measurements per party")
    a = [binary_observable(p) for p in alice]
    b = [binary_observable(p) for p in bob]
    if a[0].shape[0] * b[0].shape[0] != state.dim:
        raise DimensionMismatch("state dimension does not match the two parties")
    total = 0.0
    for x in range(2):
        for y in range(2):
            sign = -1.0 if x == y == 1 else 1.0
            total += sign * float(np.real(np.trace(state.matrix @ np.kron(a[x], b[y]))))
    return total


def chsh_win_probability(state: DensityOperator, alice: Sequence[Povm], bob: Sequence[Povm]) -> float:
    """Average over uniform (x, y) of Prob(a XOR b == x AND y), outcome by outcome."""
    win = 0.0
    for x in range(2):
        for y in range(2):
            for ia, ea in enumerate(alice[x].effects):
                for ib, eb in enumerate(bob[y].effects):
                    if (ia ^ ib) == (x & y):
                        joint = Effect.from_matrix(np.kron(ea.matrix, eb.matrix))
                        win += born_probability(state, joint)
    return win / 4


def chsh_optimal_setup() -> tuple[DensityOperator, list[Povm], list[Povm]]:
    """Maximally entangled state with the Tsirelson-optimal observables."""
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    state = DensityOperator.pure(phi)

    def pm(obs: np.ndarray) -> Povm:
        return Povm.from_matrices([(I2 + obs) / 2, (I2 - obs) / 2], ["+", "-"])

    alice = [pm(SZ), pm(SX)]
    bob = [pm((SZ + SX) / np.sqrt(2)), pm((SZ - SX) / np.sqrt(2))]
    return state, alice, bob


def direct_sum(povms: Sequence[Povm]) -> Povm:
    """Block-diagonal POVM; all blocks must share labels."""
    if not povms:
        raise ShapeMismatch("need at least one POVM")
    labels = povms[0].labels
    if any(p.labels != labels for p in povms):
        raise ShapeMismatch("direct sum needs identical outcome labels")
    total = sum(p.dim for p in povms)
    if total > max_dim():
        raise ResourceLimit(f"direct sum dimension {total} > cap {max_dim()}")
    mats = []
    for k in range(len(labels)):
        m = np.zeros((total, total), dtype=complex)
        off = 0
        for p in povms:
            m[off : off + p.dim, off : off + p.dim] = p.effects[k].matrix
            off += p.dim
        mats.append(m)
    return Povm.from_matrices(mats, labels)


def coarse_grain(povm: Povm, grouping: dict[str, Sequence[str]]) -> Povm:
    """Merge outcomes; ``grouping`` maps new labels to disjoint old-label lists covering all outcomes."""
    used = [lab for group in grouping.values() for lab in group]
    if sorted(used) != sorted(povm.labels) or len(set(used)) != len(used):
        raise ShapeMismatch("grouping must partition the POVM's outcomes")
    mats = [sum(povm.effect(l).matrix for l in grouping[new]) for new in grouping]
    return Povm.from_matrices(mats, list(grouping))
