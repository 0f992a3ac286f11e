"""Finite-dimensional complex Hilbert-space kernel.

State vectors, dense linear operators, complete projector families, tensor
products, unitary time evolution, Born probabilities and Lüders collapse.
Everything is ``complex128``, immutable after construction, and validated
against the central tolerance record in :mod:`beablesim.tolerances`.

Time evolution diagonalizes the (Hermitian) generator instead of truncating a
series: the propagator is then unitary to floating-point accuracy, which
matters because conditional-probability denominators downstream amplify any
norm drift.  All reductions use a fixed summation order, so results are
bit-stable across repeated calls; parallelism is only ever applied across
independent calls, never inside one.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import tolerances
from .errors import CapacityError, ValidationError, InvariantBreachError, ZeroProbabilityBranchError

__all__ = [
    "StateVector",
    "LinearOperator",
    "ProjectorFamily",
    "tensor_product",
    "evolve",
    "evolution_operator",
    "born_probability",
    "luders_collapse",
    "validate_projector",
]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class StateVector:
    """A normalized ket on a finite-dimensional complex Hilbert space.

    Parameters
    ----------
    amplitudes : array_like
        One-dimensional complex amplitudes.  The squared amplitudes must sum
        to one within the scalar tolerance; use :meth:`normalized` to build a
        state from an unnormalized vector.
    """

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes) -> None:
        arr = np.ascontiguousarray(amplitudes, dtype=np.complex128)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("state amplitudes must form a nonempty 1-D array")
        norm_sq = float(np.sum(np.abs(arr) ** 2))
        if abs(norm_sq - 1.0) > tolerances.TOL.scalar:
            raise ValidationError(
                f"state is not normalized: sum of |amplitude|^2 is {norm_sq!r}"
            )
        self.amplitudes = _frozen(arr)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        """Build a state from any nonzero vector by rescaling it to unit norm."""
        arr = np.asarray(amplitudes, dtype=np.complex128)
        norm = float(np.linalg.norm(arr))
        if norm <= 0.0:
            raise ValidationError("cannot normalize the zero vector")
        return cls(arr / norm)

    @classmethod
    def basis_state(cls, dim: int, index: int) -> "StateVector":
        """The computational basis ket ``|index>`` in ``dim`` dimensions."""
        if not 0 <= index < dim:
            raise ValidationError(f"basis index {index} out of range for dim {dim}")
        arr = np.zeros(dim, dtype=np.complex128)
        arr[index] = 1.0
        return cls(arr)

    def inner(self, other: "StateVector") -> complex:
        """Inner product ``<self|other>``."""
        if other.dim != self.dim:
            raise ValidationError("inner product requires equal dimensions")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"StateVector(dim={self.dim})"


class LinearOperator:
    """A dense operator on a finite-dimensional space.

    Operators may be flagged ``hermitian`` and/or ``unitary``; flags are
    verified at construction (max-norm residues against the scalar and
    structural tolerances respectively) so downstream code can rely on them.
    """

    __slots__ = ("matrix", "hermitian", "unitary")

    def __init__(self, matrix, *, hermitian: bool = False, unitary: bool = False) -> None:
        arr = np.ascontiguousarray(matrix, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValidationError("operator entries must form a square matrix")
        if hermitian:
            residue = float(np.max(np.abs(arr - arr.conj().T)))
            if residue > tolerances.TOL.scalar:
                raise ValidationError(f"operator flagged Hermitian has residue {residue:.3e}")
        if unitary:
            eye = np.eye(arr.shape[0])
            residue = float(np.max(np.abs(arr @ arr.conj().T - eye)))
            if residue > tolerances.TOL.structural:
                raise ValidationError(f"operator flagged unitary has residue {residue:.3e}")
        self.matrix = _frozen(arr)
        self.hermitian = bool(hermitian)
        self.unitary = bool(unitary)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "LinearOperator":
        return cls(np.eye(dim), hermitian=True, unitary=True)

    @classmethod
    def zero(cls, dim: int) -> "LinearOperator":
        return cls(np.zeros((dim, dim)), hermitian=True)

    @classmethod
    def projector_onto(cls, *states: StateVector) -> "LinearOperator":
        """The orthogonal projector onto the span of the given orthonormal kets."""
        if not states:
            raise ValidationError("projector_onto needs at least one state")
        dim = states[0].dim
        vecs = np.column_stack([s.amplitudes for s in states])
        gram = vecs.conj().T @ vecs
        if float(np.max(np.abs(gram - np.eye(len(states))))) > tolerances.TOL.structural:
            raise ValidationError("projector_onto requires orthonormal states")
        return cls(vecs @ vecs.conj().T, hermitian=True)

    def apply(self, state: StateVector) -> np.ndarray:
        """Raw matrix-vector product; the result is generally unnormalized."""
        if state.dim != self.dim:
            raise ValidationError("operator/state dimension mismatch")
        return self.matrix @ state.amplitudes

    def adjoint(self) -> "LinearOperator":
        return LinearOperator(self.matrix.conj().T, hermitian=self.hermitian, unitary=self.unitary)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def __matmul__(self, other: "LinearOperator") -> "LinearOperator":
        if not isinstance(other, LinearOperator):
            return NotImplemented
        if other.dim != self.dim:
            raise ValidationError("operator dimension mismatch")
        return LinearOperator(self.matrix @ other.matrix)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        flags = [name for name in ("hermitian", "unitary") if getattr(self, name)]
        suffix = f", {'|'.join(flags)}" if flags else ""
        return f"LinearOperator(dim={self.dim}{suffix})"


def validate_projector(op: LinearOperator, *, what: str = "operator") -> None:
    """Raise unless ``op`` is an orthogonal projector.

    Checks hermiticity against the scalar tolerance and idempotency
    (``max|P^2 - P|``) against the structural tolerance.
    """
    mat = op.matrix
    herm = float(np.max(np.abs(mat - mat.conj().T)))
    if herm > tolerances.TOL.scalar:
        raise ValidationError(f"{what} is not Hermitian (residue {herm:.3e})")
    idem = float(np.max(np.abs(mat @ mat - mat)))
    if idem > tolerances.TOL.structural:
        raise ValidationError(f"{what} is not idempotent (residue {idem:.3e})")


class ProjectorFamily:
    """An ordered, complete family of mutually orthogonal projectors.

    Each member carries a real outcome label (a mass, an index, ...).  The
    constructor verifies idempotency of every member, pairwise orthogonality,
    and completeness ``sum(P_i) == I``, all in max-norm against the structural
    tolerance.
    """

    __slots__ = ("members", "labels")

    def __init__(self, members: Sequence[LinearOperator], labels: Sequence[float]) -> None:
        members = tuple(members)
        labels = tuple(float(v) for v in labels)
        if not members:
            raise ValidationError("projector family must have at least one member")
        if len(members) != len(labels):
            raise ValidationError("projector family needs one label per member")
        dim = members[0].dim
        for pos, member in enumerate(members):
            if member.dim != dim:
                raise ValidationError("projector family members must share one dimension")
            validate_projector(member, what=f"family member {pos}")
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                residue = float(np.max(np.abs(members[i].matrix @ members[j].matrix)))
                if residue > tolerances.TOL.structural:
                    raise ValidationError(
                        f"family members {i} and {j} are not orthogonal (residue {residue:.3e})"
                    )
        total = np.zeros((dim, dim), dtype=np.complex128)
        for member in members:
            total = total + member.matrix
        completeness = float(np.max(np.abs(total - np.eye(dim))))
        if completeness > tolerances.TOL.structural:
            raise ValidationError(f"projector family is not complete (residue {completeness:.3e})")
        self.members = members
        self.labels = labels

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def __len__(self) -> int:
        return len(self.members)

    def items(self) -> Iterable[tuple[float, LinearOperator]]:
        return zip(self.labels, self.members)

    @classmethod
    def from_basis(cls, states: Sequence[StateVector], labels: Sequence[float] | None = None) -> "ProjectorFamily":
        """Rank-1 family ``{|b_i><b_i|}`` from a complete orthonormal basis."""
        members = [LinearOperator.projector_onto(s) for s in states]
        if labels is None:
            labels = [float(i) for i in range(len(states))]
        return cls(members, labels)

    @classmethod
    def two_outcome(cls, projector: LinearOperator, labels: tuple[float, float] = (1.0, 0.0)) -> "ProjectorFamily":
        """The family ``{P, I - P}``, labelled ``labels`` in that order."""
        complement = LinearOperator(np.eye(projector.dim) - projector.matrix, hermitian=True)
        return cls([projector, complement], labels)


def _check_capacity(dim: int) -> None:
    cap = tolerances.TOL.dimension_cap
    if dim > cap:
        raise CapacityError(f"total dimension {dim} exceeds the configured cap {cap}")


def tensor_product(a, b):
    """Kronecker product of two states or two operators (``a``'s index major).

    Raises
    ------
    CapacityError
        If the combined dimension exceeds the configured cap.
    ValidationError
        If the operands are not both states or both operators.
    """
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        _check_capacity(a.dim * b.dim)
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, LinearOperator) and isinstance(b, LinearOperator):
        _check_capacity(a.dim * b.dim)
        return LinearOperator(
            np.kron(a.matrix, b.matrix),
            hermitian=a.hermitian and b.hermitian,
            unitary=a.unitary and b.unitary,
        )
    raise ValidationError("tensor_product requires two StateVectors or two LinearOperators")


def _require_hermitian(hamiltonian: LinearOperator) -> None:
    if hamiltonian.hermitian:
        return
    residue = float(np.max(np.abs(hamiltonian.matrix - hamiltonian.matrix.conj().T)))
    if residue > tolerances.TOL.scalar:
        raise ValidationError(f"generator is not Hermitian (residue {residue:.3e})")


def evolve(hamiltonian: LinearOperator, t: float, state: StateVector) -> StateVector:
    """Evolve ``state`` to ``exp(-i H t) |state>`` (natural units).

    The exponential is evaluated through the eigendecomposition of ``H``;
    the norm is preserved to floating-point accuracy.
    """
    _require_hermitian(hamiltonian)
    if state.dim != hamiltonian.dim:
        raise ValidationError("generator/state dimension mismatch")
    if t == 0.0 or not np.any(hamiltonian.matrix):
        return state
    w, v = np.linalg.eigh(hamiltonian.matrix)
    phases = np.exp(-1j * w * t)
    amps = v @ (phases * (v.conj().T @ state.amplitudes))
    return StateVector(amps)


def evolution_operator(hamiltonian: LinearOperator, t: float) -> LinearOperator:
    """The unitary ``exp(-i H t)`` as an explicit operator."""
    _require_hermitian(hamiltonian)
    if t == 0.0 or not np.any(hamiltonian.matrix):
        return LinearOperator.identity(hamiltonian.dim)
    w, v = np.linalg.eigh(hamiltonian.matrix)
    phases = np.exp(-1j * w * t)
    return LinearOperator((v * phases) @ v.conj().T, unitary=True)


def born_probability(state: StateVector, projector: LinearOperator) -> float:
    """Born probability ``<psi|P|psi>`` of the projective outcome ``P``.

    The imaginary residue must stay below the scalar tolerance, and values are
    clamped to ``[0, 1]`` only when they lie within that tolerance of the
    boundary; anything further out is reported as an invariant breach.
    """
    validate_projector(projector, what="Born-rule projector")
    if state.dim != projector.dim:
        raise ValidationError("projector/state dimension mismatch")
    raw = complex(np.vdot(state.amplitudes, projector.matrix @ state.amplitudes))
    tol = tolerances.TOL.scalar
    if abs(raw.imag) > tol:
        raise InvariantBreachError(f"Born probability has imaginary residue {raw.imag:.3e}")
    value = raw.real
    if value < 0.0:
        if value < -tol:
            raise InvariantBreachError(f"Born probability {value!r} below zero beyond tolerance")
        value = 0.0
    elif value > 1.0:
        if value > 1.0 + tol:
            raise InvariantBreachError(f"Born probability {value!r} above one beyond tolerance")
        value = 1.0
    return value


def luders_collapse(state: StateVector, projector: LinearOperator) -> StateVector:
    """Post-measurement state ``P|psi> / ||P|psi>||``.

    Raises
    ------
    ZeroProbabilityBranchError
        If the outcome probability does not exceed the branch cutoff; callers
        must not collapse onto an impossible outcome.
    """
    probability = born_probability(state, projector)
    if probability <= tolerances.TOL.branch_cutoff:
        raise ZeroProbabilityBranchError(
            f"cannot collapse onto an outcome of probability {probability!r}"
        )
    amps = projector.matrix @ state.amplitudes
    return StateVector(amps / np.linalg.norm(amps))
