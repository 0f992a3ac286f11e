"""Kernel tests: tensor products, evolution, Born rule, collapse."""

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from beablesim import (
    CapacityError,
    LinearOperator,
    ProjectorFamily,
    StateVector,
    Tolerances,
    ValidationError,
    ZeroProbabilityBranchError,
    born_probability,
    evolve,
    evolution_operator,
    luders_collapse,
    tensor_product,
)
from beablesim import tolerances

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def ket(*amps):
    return StateVector.normalized(np.array(amps, dtype=complex))


def random_state(rng, dim):
    return StateVector.normalized(rng.normal(size=dim) + 1j * rng.normal(size=dim))


def random_hermitian(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return LinearOperator((g + g.conj().T) / 2, hermitian=True)


def random_family(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, _ = np.linalg.qr(g)
    members, labels, start = [], [], 0
    while start < dim:
        block = int(rng.integers(1, dim - start + 1))
        vecs = q[:, start : start + block]
        members.append(LinearOperator(vecs @ vecs.conj().T, hermitian=True))
        labels.append(float(len(labels)))
        start += block
    return ProjectorFamily(members, labels)


class TestStateVector:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValidationError):
            StateVector([1.0, 1.0])

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            StateVector([])

    def test_basis_state(self):
        assert StateVector.basis_state(3, 1).amplitudes[1] == 1.0

    def test_amplitudes_frozen(self):
        state = StateVector.basis_state(2, 0)
        with pytest.raises(ValueError):
            state.amplitudes[0] = 0.0


class TestLinearOperator:
    def test_hermitian_flag_checked(self):
        with pytest.raises(ValidationError):
            LinearOperator([[0, 1], [0, 0]], hermitian=True)

    def test_unitary_flag_checked(self):
        with pytest.raises(ValidationError):
            LinearOperator([[1, 0], [0, 2]], unitary=True)

    def test_projector_onto_requires_orthonormal(self):
        plus = ket(1, 1)
        with pytest.raises(ValidationError):
            LinearOperator.projector_onto(plus, plus)


class TestTensorProduct:
    def test_basis_kron(self):
        zero = StateVector.basis_state(2, 0)
        product = tensor_product(zero, zero)
        assert np.array_equal(product.amplitudes, [1, 0, 0, 0])

    def test_identity_case(self):
        eye2 = LinearOperator.identity(2)
        assert np.array_equal(tensor_product(eye2, eye2).matrix, np.eye(4))

    def test_sigma_x_on_first_qubit(self):
        # oracle: direct 4x4 matrix-vector multiply
        op = tensor_product(LinearOperator(SIGMA_X, hermitian=True), LinearOperator.identity(2))
        zero = StateVector.basis_state(2, 0)
        state = tensor_product(zero, zero)
        expected = np.kron(SIGMA_X, np.eye(2)) @ state.amplitudes
        assert np.allclose(op.apply(state), expected)
        assert np.allclose(op.apply(state), StateVector.basis_state(4, 2).amplitudes)

    def test_capacity_cap(self):
        big = StateVector.normalized(np.ones(2 ** 11))
        with pytest.raises(CapacityError):
            tensor_product(big, big)

    def test_mixed_kinds_rejected(self):
        with pytest.raises(ValidationError):
            tensor_product(StateVector.basis_state(2, 0), LinearOperator.identity(2))

    def test_projector_closure(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = random_family(rng, 3).members[0]
            q = random_family(rng, 2).members[0]
            product = tensor_product(p, q)
            assert np.max(np.abs(product.matrix @ product.matrix - product.matrix)) <= 1e-10
            assert np.max(np.abs(product.matrix - product.matrix.conj().T)) <= 1e-12


class TestEvolve:
    def test_zero_hamiltonian(self):
        psi = ket(0.3, 0.4 + 0.5j)
        assert evolve(LinearOperator.zero(2), 1.7, psi) is psi

    def test_against_scaled_and_squared_exponential(self):
        # oracle: scipy's scaling-and-squaring matrix exponential
        plus = ket(1, 1)
        h = LinearOperator(SIGMA_Z, hermitian=True)
        ours = evolve(h, np.pi, plus).amplitudes
        oracle = scipy.linalg.expm(-1j * np.pi * SIGMA_Z) @ plus.amplitudes
        assert np.max(np.abs(ours - oracle)) <= 1e-12
        # e^{-i pi sigma_z}|+> = -|+> up to the computed global phase
        overlap = abs(np.vdot(ours, plus.amplitudes))
        assert abs(overlap - 1.0) <= 1e-12

    @given(st.integers(0, 10 ** 6), st.integers(2, 8))
    @settings(max_examples=40, deadline=None)
    def test_reversibility(self, seed, dim):
        rng = np.random.default_rng(seed)
        h = random_hermitian(rng, dim)
        psi = random_state(rng, dim)
        t = float(rng.uniform(-3, 3))
        back = evolve(h, -t, evolve(h, t, psi))
        assert np.max(np.abs(back.amplitudes - psi.amplitudes)) <= 1e-10

    @given(st.integers(0, 10 ** 6), st.integers(2, 8))
    @settings(max_examples=40, deadline=None)
    def test_inner_product_preserved(self, seed, dim):
        rng = np.random.default_rng(seed)
        h = random_hermitian(rng, dim)
        psi, phi = random_state(rng, dim), random_state(rng, dim)
        t = float(rng.uniform(0, 4))
        before = phi.inner(psi)
        after = evolve(h, t, phi).inner(evolve(h, t, psi))
        assert abs(after - before) <= 1e-10

    def test_non_hermitian_rejected(self):
        h = LinearOperator([[0, 1], [0, 0]])
        with pytest.raises(ValidationError):
            evolve(h, 1.0, StateVector.basis_state(2, 0))

    def test_evolution_operator_matches_evolve(self):
        rng = np.random.default_rng(11)
        h = random_hermitian(rng, 5)
        psi = random_state(rng, 5)
        u = evolution_operator(h, 0.9)
        assert u.unitary
        assert np.max(np.abs(u.apply(psi) - evolve(h, 0.9, psi).amplitudes)) <= 1e-12


class TestBornProbability:
    def test_identity_projector(self):
        assert born_probability(ket(0.6, 0.8j), LinearOperator.identity(2)) == 1.0

    def test_orthogonal_outcome(self):
        p1 = LinearOperator.projector_onto(StateVector.basis_state(2, 1))
        assert born_probability(StateVector.basis_state(2, 0), p1) == 0.0

    def test_half_overlap(self):
        # oracle: direct inner product |<0|+>|^2
        plus = ket(1, 1)
        p0 = LinearOperator.projector_onto(StateVector.basis_state(2, 0))
        expected = abs(np.vdot(StateVector.basis_state(2, 0).amplitudes, plus.amplitudes)) ** 2
        assert abs(born_probability(plus, p0) - expected) <= 1e-15
        assert abs(born_probability(plus, p0) - 0.5) <= 1e-15

    def test_rejects_non_projector(self):
        with pytest.raises(ValidationError):
            born_probability(ket(1, 0), LinearOperator(2 * np.eye(2)))

    @given(st.integers(0, 10 ** 6), st.integers(2, 8))
    @settings(max_examples=40, deadline=None)
    def test_total_probability_over_family(self, seed, dim):
        rng = np.random.default_rng(seed)
        family = random_family(rng, dim)
        psi = random_state(rng, dim)
        total = sum(born_probability(psi, member) for member in family.members)
        assert abs(total - 1.0) <= 1e-10


class TestLudersCollapse:
    def test_eigenstate_fixed_point(self):
        zero = StateVector.basis_state(2, 0)
        collapsed = luders_collapse(zero, LinearOperator.projector_onto(zero))
        assert np.max(np.abs(collapsed.amplitudes - zero.amplitudes)) <= 1e-15

    def test_rank_one_projection(self):
        plus = ket(1, 1)
        zero = StateVector.basis_state(2, 0)
        collapsed = luders_collapse(plus, LinearOperator.projector_onto(zero))
        assert abs(abs(collapsed.inner(zero)) - 1.0) <= 1e-12

    def test_normalize_after_project_oracle(self):
        psi = ket(1, 1, 1, 0)  # (|00> + |01> + |10>)/sqrt(3)
        p = tensor_product(
            LinearOperator.projector_onto(StateVector.basis_state(2, 0)),
            LinearOperator.identity(2),
        )
        collapsed = luders_collapse(psi, p)
        raw = p.matrix @ psi.amplitudes
        oracle = raw / np.linalg.norm(raw)
        assert np.max(np.abs(collapsed.amplitudes - oracle)) <= 1e-15
        assert np.allclose(collapsed.amplitudes, np.array([1, 1, 0, 0]) / np.sqrt(2))

    def test_zero_probability_branch(self):
        zero = StateVector.basis_state(2, 0)
        p1 = LinearOperator.projector_onto(StateVector.basis_state(2, 1))
        with pytest.raises(ZeroProbabilityBranchError):
            luders_collapse(zero, p1)

    @given(st.integers(0, 10 ** 6), st.integers(2, 8))
    @settings(max_examples=40, deadline=None)
    def test_idempotent(self, seed, dim):
        rng = np.random.default_rng(seed)
        family = random_family(rng, dim)
        psi = random_state(rng, dim)
        member = family.members[0]
        if born_probability(psi, member) <= 1e-6:
            return
        once = luders_collapse(psi, member)
        twice = luders_collapse(once, member)
        assert np.max(np.abs(twice.amplitudes - once.amplitudes)) <= 1e-12


class TestProjectorFamily:
    def test_incomplete_family_rejected(self):
        p0 = LinearOperator.projector_onto(StateVector.basis_state(3, 0))
        p1 = LinearOperator.projector_onto(StateVector.basis_state(3, 1))
        with pytest.raises(ValidationError):
            ProjectorFamily([p0, p1], [0.0, 1.0])

    def test_non_orthogonal_rejected(self):
        p0 = LinearOperator.projector_onto(StateVector.basis_state(2, 0))
        plus = LinearOperator.projector_onto(ket(1, 1))
        with pytest.raises(ValidationError):
            ProjectorFamily([p0, plus], [0.0, 1.0])

    def test_two_outcome(self):
        p0 = LinearOperator.projector_onto(StateVector.basis_state(2, 0))
        family = ProjectorFamily.two_outcome(p0)
        assert len(family) == 2
        assert family.labels == (1.0, 0.0)


def test_tolerance_record_defaults():
    assert tolerances.TOL == Tolerances()
    assert tolerances.TOL.structural == 1e-10
    assert tolerances.TOL.scalar == 1e-12
    assert tolerances.TOL.branch_cutoff == 1e-14
    assert tolerances.TOL.dimension_cap == 2 ** 20
