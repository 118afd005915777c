import math

import numpy as np
import pytest

from contextlab.errors import DimensionMismatch, InvalidBloch, NumericalRangeError, ResourceLimit, ShapeMismatch
from contextlab.quantum_core import (
    I2,
    SX,
    SY,
    SZ,
    BlochEffect,
    DensityOperator,
    Effect,
    HermitianOperator,
    Povm,
    bloch_to_effect,
    born_probability,
    chsh_optimal_setup,
    chsh_value,
    chsh_win_probability,
    clifford_dimension,
    clifford_generators,
    coarse_grain,
    direct_sum,
    effect_to_bloch,
    outcome_distribution,
)

from .oracles import chsh_deterministic_max, clifford_ok

UP = DensityOperator.pure([1, 0])
PZ = Effect.from_matrix((I2 + SZ) / 2)


class TestBorn:
    def test_maximally_mixed_on_projector(self):
        assert born_probability(DensityOperator.maximally_mixed(2), PZ) == pytest.approx(0.5, abs=1e-15)

    def test_eigenstate(self):
        assert born_probability(UP, PZ) == pytest.approx(1.0, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            born_probability(DensityOperator.maximally_mixed(4), PZ)

    def test_out_of_range_is_reported(self):
        # bypass Effect validation to hand born_probability an invalid operator
        bad = Effect.__new__(Effect)
        object.__setattr__(bad, "op", HermitianOperator(2 * I2))
        with pytest.raises(NumericalRangeError):
            born_probability(UP, bad)

    def test_linear_in_state(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            r1, r2 = rng.normal(size=3), rng.normal(size=3)
            r1 /= 1.5 * np.linalg.norm(r1)
            r2 /= 1.5 * np.linalg.norm(r2)
            t = rng.uniform()
            mix = DensityOperator.from_bloch(t * r1 + (1 - t) * r2)
            lhs = born_probability(mix, PZ)
            rhs = t * born_probability(DensityOperator.from_bloch(r1), PZ) + (1 - t) * born_probability(
                DensityOperator.from_bloch(r2), PZ
            )
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_linear_in_effect(self):
        rng = np.random.default_rng(2)
        rho = DensityOperator.from_bloch([0.3, -0.2, 0.5])
        for _ in range(50):
            t = rng.uniform()
            e1 = BlochEffect(1.0, tuple(rng.uniform(-0.5, 0.5, 3)))
            e2 = BlochEffect(0.8, tuple(rng.uniform(-0.4, 0.4, 3)))
            mix = Effect.from_matrix(t * bloch_to_effect(e1).matrix + (1 - t) * bloch_to_effect(e2).matrix)
            expect = t * born_probability(rho, bloch_to_effect(e1)) + (1 - t) * born_probability(rho, bloch_to_effect(e2))
            assert born_probability(rho, mix) == pytest.approx(expect, abs=1e-10)


class TestValidation:
    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            HermitianOperator(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_perturbation_beyond_tolerance_rejected(self):
        m = I2 / 2 + np.array([[0, 1e-6], [0, 0]])
        with pytest.raises(ValueError):
            HermitianOperator(m)

    def test_effect_above_identity_rejected(self):
        with pytest.raises(ValueError):
            Effect.from_matrix(1.01 * I2)

    def test_incomplete_povm_rejected(self):
        with pytest.raises(ValueError):
            Povm.from_matrices([PZ.matrix, 0.5 * (I2 - SZ) / 2], ["0", "1"])

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(DimensionMismatch):
            Povm.from_matrices([np.eye(2), np.zeros((3, 3))], ["a", "b"])

    def test_density_needs_unit_trace(self):
        with pytest.raises(ValueError):
            DensityOperator.from_matrix(I2)

    def test_bloch_state_outside_ball(self):
        with pytest.raises(InvalidBloch):
            DensityOperator.from_bloch([1, 1, 0])


class TestBloch:
    def test_projector(self):
        e = bloch_to_effect(BlochEffect(1.0, (0.0, 0.0, 1.0)))
        np.testing.assert_allclose(e.matrix, (I2 + SZ) / 2, atol=1e-15)
        assert e.is_projector()

    def test_identity(self):
        np.testing.assert_allclose(bloch_to_effect(BlochEffect(2.0, (0.0, 0.0, 0.0))).matrix, I2, atol=1e-15)

    def test_noisy_spin_effect(self):
        b = effect_to_bloch(Effect.from_matrix(I2 / 2 + 0.35 * SX))
        assert b.e0 == pytest.approx(1.0)
        np.testing.assert_allclose(b.e, (0.7, 0.0, 0.0), atol=1e-15)

    def test_cone_violation(self):
        with pytest.raises(InvalidBloch):
            BlochEffect(0.5, (0.6, 0.0, 0.0))
        with pytest.raises(InvalidBloch):
            BlochEffect(1.5, (0.6, 0.0, 0.0))

    def test_qubit_only(self):
        with pytest.raises(DimensionMismatch):
            effect_to_bloch(Effect.from_matrix(np.eye(3) / 2))

    def test_round_trip_1000(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            e0 = rng.uniform(0, 2)
            radius = rng.uniform(0, min(e0, 2 - e0))
            v = rng.normal(size=3)
            v = radius * v / np.linalg.norm(v)
            b = BlochEffect(e0, tuple(v))
            back = effect_to_bloch(bloch_to_effect(b))
            assert back.e0 == pytest.approx(e0, abs=1e-12)
            np.testing.assert_allclose(back.e, v, atol=1e-12)


class TestClifford:
    def test_n3_paulis(self):
        g = clifford_generators(3).generators
        for a, b in zip(g, (SZ, SX, SY)):
            np.testing.assert_array_equal(a, b)

    def test_n5_second_iteration(self):
        g = clifford_generators(5).generators
        expect = [np.kron(SZ, SZ), np.kron(SX, SZ), np.kron(SY, SZ), np.kron(I2, SX), np.kron(I2, SY)]
        for a, b in zip(g, expect):
            np.testing.assert_array_equal(a, b)

    def test_n1_scalar(self):
        g = clifford_generators(1)
        assert g.dim == 1 and g.generators[0][0, 0] == 1

    @pytest.mark.parametrize("n", range(1, 10))
    def test_invariants(self, n):
        cs = clifford_generators(n)
        assert cs.dim == 2 ** math.ceil((n - 1) / 2) == clifford_dimension(n)
        assert cs.violations() == []
        assert clifford_ok(cs.generators)
        if n >= 2:
            assert all(abs(np.trace(g)) < 1e-12 for g in cs.generators)
        rng = np.random.default_rng(n)
        for _ in range(10):
            x = rng.normal(size=n)
            s = sum(c * g for c, g in zip(x, cs.generators))
            np.testing.assert_allclose(s @ s, np.dot(x, x) * np.eye(cs.dim), atol=1e-9)

    def test_dimension_cap(self, monkeypatch):
        monkeypatch.setenv("CONTEXTLAB_MAX_DIM", "8")
        clifford_generators(7)
        with pytest.raises(ResourceLimit):
            clifford_generators(9)


class TestChsh:
    def test_tsirelson(self):
        assert chsh_value(*chsh_optimal_setup()) == pytest.approx(2 * math.sqrt(2), abs=1e-10)

    def test_win_probability(self):
        assert chsh_win_probability(*chsh_optimal_setup()) == pytest.approx(0.5 + 1 / (2 * math.sqrt(2)), abs=1e-12)

    def test_product_mixed_state_zero(self):
        _, alice, bob = chsh_optimal_setup()
        assert chsh_value(DensityOperator.maximally_mixed(4), alice, bob) == pytest.approx(0.0, abs=1e-15)

    def test_deterministic_strategies(self):
        z = Povm.from_matrices([(I2 + SZ) / 2, (I2 - SZ) / 2], ["+", "-"])
        state = DensityOperator.pure([1, 0, 0, 0])
        assert chsh_value(state, [z, z], [z, z]) == pytest.approx(2.0)
        assert chsh_deterministic_max() == 2

    def test_dimension_check(self):
        _, alice, bob = chsh_optimal_setup()
        with pytest.raises(DimensionMismatch):
            chsh_value(DensityOperator.maximally_mixed(2), alice, bob)


class TestComposition:
    def test_direct_sum_of_trivial(self):
        a = Povm.from_matrices([np.zeros((2, 2)), I2], ["+", "-"])
        b = Povm.from_matrices([I2, np.zeros((2, 2))], ["+", "-"])
        s = direct_sum([a, b])
        assert s.dim == 4
        np.testing.assert_allclose(s.effect("+").matrix, np.diag([0, 0, 1, 1]))

    def test_direct_sum_labels_must_match(self):
        a = Povm.from_matrices([I2], ["x"])
        b = Povm.from_matrices([I2], ["y"])
        with pytest.raises(ShapeMismatch):
            direct_sum([a, b])

    def test_coarse_grain_pvm(self):
        pvm = Povm.from_matrices([np.diag(np.eye(4)[k]) for k in range(4)], ["1", "2", "3", "4"])
        c = coarse_grain(pvm, {"a": ["1", "2"], "b": ["3", "4"]})
        assert c.is_projective()
        np.testing.assert_allclose(c.effect("a").matrix, np.diag([1, 1, 0, 0]))

    def test_coarse_grain_needs_partition(self):
        pvm = Povm.from_matrices([PZ.matrix, I2 - PZ.matrix], ["0", "1"])
        with pytest.raises(ShapeMismatch):
            coarse_grain(pvm, {"a": ["0"]})

    def test_outcome_distribution_sums_to_one(self):
        pvm = Povm.from_matrices([PZ.matrix, I2 - PZ.matrix], ["0", "1"])
        assert outcome_distribution(DensityOperator.from_bloch([0.1, 0.2, 0.3]), pvm).sum() == pytest.approx(1.0)


class TestJson:
    def test_operator_round_trip(self):
        op = HermitianOperator(SY)
        back = HermitianOperator.from_json(op.to_json())
        np.testing.assert_array_equal(back.matrix, op.matrix)
        assert set(op.to_json()) == {"dim", "re", "im"}

    def test_povm_round_trip(self):
        p = Povm.from_matrices([(I2 + SX) / 2, (I2 - SX) / 2], ["+", "-"])
        back = Povm.from_json(p.to_json())
        assert back.labels == p.labels
        np.testing.assert_allclose(back.effects[0].matrix, p.effects[0].matrix)

    def test_bad_length(self):
        with pytest.raises(ShapeMismatch):
            HermitianOperator.from_json({"dim": 2, "re": [1, 0, 0], "im": [0, 0, 0, 0]})
