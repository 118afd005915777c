import itertools
import math

import numpy as np
import pytest

from contextlab.errors import EtaMismatch, InvalidJointParams, NotProjective, ResourceLimit, ShapeMismatch
from contextlab.joint_measurability import (
    Incompatible,
    JmHypergraph,
    JointPovmParams,
    NoisySpinObservable,
    block_layout,
    clifford_jm_threshold,
    construct_pairwise_joint,
    find_minimal_incompatible_sets,
    joint_povm_for_edge,
    n_wise_necessary,
    n_wise_sufficient,
    optimal_pair_params,
    pairwise_compatible,
    realize_hypergraph,
    recompute_hypergraph,
    unique_joint_for_pvms,
)
from contextlab.quantum_core import I2, SX, SY, SZ, Povm

X, Y, Z = (1, 0, 0), (0, 1, 0), (0, 0, 1)
TRINE = [(0.0, 0.0, 1.0), (math.sqrt(3) / 2, 0.0, -0.5), (-math.sqrt(3) / 2, 0.0, -0.5)]


def spin(eta, axis):
    return NoisySpinObservable(eta, axis)


def all_hypergraphs(n: int):
    """Every downward-closed hypergraph on vertices 1..n."""
    candidates = [frozenset(s) for k in range(2, n + 1) for s in itertools.combinations(range(1, n + 1), k)]
    for bits in range(1 << len(candidates)):
        chosen = {candidates[i] for i in range(len(candidates)) if bits >> i & 1}
        closed = all(
            frozenset(sub) in chosen
            for e in chosen
            for sub in itertools.combinations(sorted(e), len(e) - 1)
            if len(sub) >= 2
        )
        if closed:
            yield JmHypergraph.from_edges(n, [sorted(e) for e in chosen])


class TestPairwise:
    def test_orthogonal_threshold(self):
        assert pairwise_compatible(spin(0.70, X), spin(0.70, Y))
        assert not pairwise_compatible(spin(0.71, X), spin(0.71, Y))

    def test_trine_boundary(self):
        eta = math.sqrt(3) - 1
        assert pairwise_compatible(spin(eta, TRINE[0]), spin(eta, TRINE[1]))
        assert not pairwise_compatible(spin(eta + 1e-6, TRINE[0]), spin(eta + 1e-6, TRINE[1]))

    def test_zero_eta(self):
        assert pairwise_compatible(spin(0.0, X), spin(0.0, Y))

    def test_eta_mismatch(self):
        with pytest.raises(EtaMismatch):
            pairwise_compatible(spin(0.5, X), spin(0.6, Y))

    def test_closed_form_angle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = rng.normal(size=3), rng.normal(size=3)
            a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
            s = np.linalg.norm(np.cross(a, b))
            eta = rng.uniform(0, 1)
            thr = 1 / math.sqrt(1 + s)
            if abs(eta - thr) > 1e-9:
                assert pairwise_compatible(spin(eta, a), spin(eta, b)) == (eta <= thr)


class TestNWise:
    def test_trine_necessary(self):
        assert n_wise_necessary(2 / 3, TRINE)
        assert not n_wise_necessary(0.67, TRINE)

    def test_orthogonal_triple(self):
        assert n_wise_necessary(0.55, [X, Y, Z])
        assert n_wise_necessary(1 / math.sqrt(3), [X, Y, Z])
        assert not n_wise_necessary(0.58, [X, Y, Z])

    def test_single(self):
        assert n_wise_necessary(1.0, [X]) and n_wise_sufficient(1.0, [X])

    def test_trine_sufficient_small_eta(self):
        assert n_wise_sufficient(0.1, TRINE)

    def test_orthogonal_pair_matches_pairwise(self):
        thr = 1 / math.sqrt(2)
        for eta in (thr - 1e-3, thr, thr + 1e-3):
            pw = pairwise_compatible(spin(eta, X), spin(eta, Y))
            assert n_wise_necessary(eta, [X, Y]) == pw == n_wise_sufficient(eta, [X, Y])

    @pytest.mark.parametrize("n", range(1, 7))
    def test_clifford_threshold(self, n):
        axes = np.eye(n)
        t = clifford_jm_threshold(n)
        assert t == pytest.approx(1 / math.sqrt(n))
        assert n_wise_sufficient(t, axes) and n_wise_necessary(t, axes)
        assert not n_wise_sufficient(t + 1e-6, axes) and not n_wise_necessary(t + 1e-6, axes)

    def test_sufficient_implies_necessary(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            n = int(rng.integers(1, 6))
            axes = rng.normal(size=(n, 3))
            axes /= np.linalg.norm(axes, axis=1, keepdims=True)
            eta = rng.uniform(0, 1)
            if n_wise_sufficient(eta, axes):
                assert n_wise_necessary(eta, axes)


class TestConstructJoint:
    def test_trine_optimal_at_two_thirds(self):
        eta = 2 / 3
        a, b = spin(eta, TRINE[0]), spin(eta, TRINE[1])
        params = optimal_pair_params(eta, -0.5)
        povm = construct_pairwise_joint(a, b, params)
        assert np.linalg.norm(params.a_vec) == pytest.approx(math.sqrt(13) / 9, abs=1e-12)
        anti = povm.effect("+-").matrix + povm.effect("-+").matrix
        expect = (1 - params.alpha / 2) * I2 + 0.5 * sum(c * p for c, p in zip(params.a_vec, (SX, SY, SZ)))
        np.testing.assert_allclose(anti, expect, atol=1e-12)

    def test_zero_sharpness(self):
        povm = construct_pairwise_joint(spin(0, X), spin(0, Y), JointPovmParams(1.0, (0, 0, 0)))
        for e in povm.effects:
            np.testing.assert_allclose(e.matrix, I2 / 4, atol=1e-15)

    def test_commuting_product(self):
        eta = 0.8
        povm = construct_pairwise_joint(spin(eta, Z), spin(eta, Z), JointPovmParams(1 + eta**2, (0, 0, 0)))
        marg = povm.effect("++").matrix + povm.effect("+-").matrix
        np.testing.assert_allclose(marg, (I2 + eta * SZ) / 2, atol=1e-12)

    def test_invalid_params(self):
        with pytest.raises(InvalidJointParams, match="lower"):
            construct_pairwise_joint(spin(0.7, X), spin(0.7, Y), JointPovmParams(0.1, (0, 0, 0)))
        with pytest.raises(InvalidJointParams, match="upper"):
            construct_pairwise_joint(spin(0.7, X), spin(0.7, Y), JointPovmParams(1.9, (0, 0, 0)))

    def test_optimal_params_incompatible(self):
        with pytest.raises(InvalidJointParams):
            optimal_pair_params(0.9, 0.0)

    def test_marginals_on_random_pairs(self):
        rng = np.random.default_rng(6)
        built = 0
        for _ in range(200):
            a, b = rng.normal(size=3), rng.normal(size=3)
            a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
            eta = rng.uniform(0, 1)
            oa, ob = spin(eta, a), spin(eta, b)
            if not pairwise_compatible(oa, ob):
                continue
            # the optimal parameters put a along y; only valid when a is orthogonal to both axes
            c = float(a @ b)
            disc = max(0.0, 1 + eta**4 * c**2 - 2 * eta**2)
            perp = np.cross(a, b)
            if np.linalg.norm(perp) < 1e-6:
                continue
            perp /= np.linalg.norm(perp)
            povm = construct_pairwise_joint(oa, ob, JointPovmParams(1 + eta**2 * c, tuple(math.sqrt(disc) * perp)))
            for e in povm.effects:
                assert np.linalg.eigvalsh(e.matrix)[0] >= -1e-9
            np.testing.assert_allclose(
                povm.effect("++").matrix + povm.effect("+-").matrix, oa.povm().effects[0].matrix, atol=1e-12
            )
            built += 1
        assert built > 50


class TestPvms:
    def pvm(self, s):
        return Povm.from_matrices([(I2 + s) / 2, (I2 - s) / 2], ["+", "-"])

    def test_same_axis(self):
        joint = unique_joint_for_pvms([self.pvm(SZ), self.pvm(SZ)])
        assert not isinstance(joint, Incompatible)
        np.testing.assert_allclose(joint.effect("+,+").matrix, (I2 + SZ) / 2, atol=1e-12)
        np.testing.assert_allclose(joint.effect("+,-").matrix, 0, atol=1e-12)
        assert joint.is_projective()

    def test_noncommuting(self):
        assert isinstance(unique_joint_for_pvms([self.pvm(SZ), self.pvm(SX)]), Incompatible)

    def test_with_trivial(self):
        trivial = Povm.from_matrices([np.zeros((2, 2)), I2], ["+", "-"])
        joint = unique_joint_for_pvms([self.pvm(SZ), trivial])
        np.testing.assert_allclose(joint.effect("+,-").matrix, (I2 + SZ) / 2, atol=1e-12)

    def test_two_unsharp_rejected(self):
        u = Povm.from_matrices([(I2 + 0.5 * SZ) / 2, (I2 - 0.5 * SZ) / 2], ["+", "-"])
        with pytest.raises(NotProjective):
            unique_joint_for_pvms([u, u])


class TestHypergraphs:
    def test_closure(self):
        h = JmHypergraph.from_edges(3, [(1, 2, 3)])
        assert h.is_edge((1, 3)) and h.is_edge((2,))

    def test_bad_vertex(self):
        with pytest.raises(ShapeMismatch):
            JmHypergraph.from_edges(2, [(1, 3)])

    def test_json_round_trip(self):
        h = JmHypergraph.from_edges(3, [(1, 2), (2, 3)])
        assert JmHypergraph.from_json(h.to_json()) == h

    def test_specker(self):
        h = JmHypergraph.from_edges(3, [(1, 2), (2, 3), (1, 3)])
        assert find_minimal_incompatible_sets(h) == [(1, 2, 3)]
        povms = realize_hypergraph(h)
        assert povms[0].dim == 2
        assert block_layout(h)[0].eta == pytest.approx(1 / math.sqrt(2))

    def test_worked_example(self):
        h = JmHypergraph.from_edges(4, [(1, 2), (1, 4), (2, 3), (2, 4), (3, 4)])
        assert find_minimal_incompatible_sets(h) == [(1, 2, 4), (1, 3), (2, 3, 4)]
        povms = realize_hypergraph(h)
        assert all(p.dim == 6 for p in povms)
        assert [b.dim for b in block_layout(h)] == [2, 2, 2]
        assert recompute_hypergraph(povms, block_layout(h)) == h

    def test_complete(self):
        h = JmHypergraph.from_edges(3, [(1, 2, 3)])
        assert find_minimal_incompatible_sets(h) == []
        povms = realize_hypergraph(h)
        assert recompute_hypergraph(povms, block_layout(h)) == h

    def test_exhaustive_up_to_four_vertices(self):
        count = 0
        for n in range(1, 5):
            for h in all_hypergraphs(n):
                blocks = block_layout(h)
                povms = realize_hypergraph(h)
                assert recompute_hypergraph(povms, blocks) == h
                count += 1
        # 1 + 2 + 9 + 114 downward-closed families on 1..4 vertices
        assert count == 126

    def test_constructive_joints_marginalise(self):
        h = JmHypergraph.from_edges(4, [(1, 2), (1, 4), (2, 3), (2, 4), (3, 4)])
        blocks = block_layout(h)
        povms = realize_hypergraph(h)
        for edge in ([1, 2], [1, 4], [2, 3], [2, 4], [3, 4]):
            joint = joint_povm_for_edge(povms, blocks, edge)
            for pos, v in enumerate(edge):
                plus = sum(e.matrix for e, lab in zip(joint.effects, joint.labels) if lab[pos] == "+")
                np.testing.assert_allclose(plus, povms[v - 1].effects[0].matrix, atol=1e-12)

    def test_dimension_cap(self, monkeypatch):
        monkeypatch.setenv("CONTEXTLAB_MAX_DIM", "4")
        h = JmHypergraph.from_edges(4, [(1, 2), (1, 4), (2, 3), (2, 4), (3, 4)])
        with pytest.raises(ResourceLimit):
            realize_hypergraph(h)
