"""Nonrelativistic lattice models: N particles on a 1-D chain of L sites.

The continuum model is transcribed onto a finite lattice: Dirac deltas become
one-site indicators, integrals become site sums, and the N-particle Hilbert
space is the L^N-fold tensor product with particle 1 as the major index.  All
position and mass projectors are diagonal in the site basis, so expectation
values are computed from index masks without materializing matrices; the
projector-returning operations build dense operators on demand for use with
the conditional-probability engine.

Mass measurements adopt the no-overlap convention throughout: the projector
for "a particle of mass M alone at site x" requires every other particle to
sit elsewhere, which keeps the per-site mass projectors idempotent and
mutually orthogonal so they complete to a valid measurement family.
"""

from __future__ import annotations

import enum
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tolerances
from .abl import ConditionalDistribution, PrePostScenario, abl_evolved, abl_expectation
from .errors import (
    CapacityError,
    ImpossiblePostSelectionError,
    ValidationError,
)
from .fields import BeableField
from .hilbert import LinearOperator, ProjectorFamily, StateVector, born_probability, evolve

__all__ = [
    "Statistics",
    "ParticleClass",
    "ParticleSpec",
    "LatticeModel",
    "MassDistribution",
    "MassSpectrum",
    "position_projector",
    "mass_projector_at",
    "mass_projector_anywhere",
    "mass_family_at",
    "final_boundary_projector",
    "class_labels",
    "class_mass_density",
    "class_mass_distribution",
    "abl_mass_field",
    "sample_final_sites",
    "catastrophe_demo",
    "make_catastrophe_model",
    "site_product_state",
    "uniform_product_state",
    "hopping_contact_hamiltonian",
]


class Statistics(enum.Enum):
    DISTINGUISHABLE = "distinguishable"
    BOSON = "boson"
    FERMION = "fermion"


class ParticleClass(enum.Enum):
    B = "B"
    F = "F"

    def other(self) -> "ParticleClass":
        return ParticleClass.F if self is ParticleClass.B else ParticleClass.B


@dataclass(frozen=True)
class ParticleSpec:
    """Mass, exchange statistics and interaction class of one particle."""

    mass: float
    statistics: Statistics = Statistics.DISTINGUISHABLE
    particle_class: ParticleClass = ParticleClass.B

    def __post_init__(self) -> None:
        if not self.mass > 0.0:
            raise ValidationError(f"particle mass must be positive, got {self.mass!r}")


def _swap_particles(amplitudes: np.ndarray, sites: int, count: int, i: int, j: int) -> np.ndarray:
    """Amplitudes with particle labels i and j (0-based) exchanged."""
    tensor = amplitudes.reshape((sites,) * count)
    return np.swapaxes(tensor, i, j).reshape(-1)


@dataclass(frozen=True, eq=False)
class LatticeModel:
    """N particles on an L-site chain with shared unitary dynamics.

    ``hamiltonian`` may be ``None`` for frozen dynamics (a zero generator)
    without materializing an L^N-dimensional zero matrix.  The initial state
    must respect exchange statistics: symmetric under swaps of any two boson
    labels, antisymmetric under swaps of any two fermion labels.
    """

    sites: int
    particles: tuple[ParticleSpec, ...]
    initial: StateVector
    hamiltonian: LinearOperator | None = None
    t_final: float = 1.0
    spacing: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "particles", tuple(self.particles))
        if self.sites < 1:
            raise ValidationError("lattice needs at least one site")
        if not self.particles:
            raise ValidationError("lattice model needs at least one particle")
        if not self.spacing > 0.0:
            raise ValidationError("lattice spacing must be positive")
        if self.t_final < 0.0:
            raise ValidationError("final time must be nonnegative")
        dim = self.sites ** len(self.particles)
        if dim > tolerances.TOL.dimension_cap:
            raise CapacityError(
                f"lattice dimension {self.sites}^{len(self.particles)} exceeds the cap"
            )
        if self.initial.dim != dim:
            raise ValidationError(
                f"initial state has dim {self.initial.dim}, model needs {dim}"
            )
        if self.hamiltonian is not None and self.hamiltonian.dim != dim:
            raise ValidationError("hamiltonian dimension does not match the lattice")
        for statistics, mass_name in (
            (Statistics.BOSON, "boson"),
            (Statistics.FERMION, "fermion"),
        ):
            masses = {p.mass for p in self.particles if p.statistics is statistics}
            if len(masses) > 1:
                raise ValidationError(f"all {mass_name}s must share one mass, got {sorted(masses)}")
        self._check_exchange_symmetry()

    def _check_exchange_symmetry(self) -> None:
        count = len(self.particles)
        for statistics, sign in ((Statistics.BOSON, 1.0), (Statistics.FERMION, -1.0)):
            labels = [i for i, p in enumerate(self.particles) if p.statistics is statistics]
            for a, b in zip(labels, labels[1:]):
                swapped = _swap_particles(self.initial.amplitudes, self.sites, count, a, b)
                residue = float(np.max(np.abs(swapped - sign * self.initial.amplitudes)))
                if residue > tolerances.TOL.structural:
                    kind = statistics.value
                    raise ValidationError(
                        f"initial state breaks {kind} exchange symmetry between labels "
                        f"{a + 1} and {b + 1} (residue {residue:.3e})"
                    )

    @property
    def particle_count(self) -> int:
        return len(self.particles)

    @property
    def dim(self) -> int:
        return self.sites ** len(self.particles)

    def positions_by_particle(self) -> np.ndarray:
        """(N, dim) table: site of each particle in every basis state."""
        count = len(self.particles)
        index = np.arange(self.dim)
        rows = [
            (index // self.sites ** (count - 1 - slot)) % self.sites for slot in range(count)
        ]
        return np.array(rows)

    def evolved_state(self, t: float) -> StateVector:
        if self.hamiltonian is None:
            return self.initial
        return evolve(self.hamiltonian, t, self.initial)

    def site_coordinates(self) -> np.ndarray:
        return self.spacing * np.arange(self.sites, dtype=float)


@dataclass(frozen=True)
class MassDistribution:
    """Mass carried by each site, summing to the contributing particles' total."""

    site_masses: tuple[float, ...]
    expected_total: float

    def __post_init__(self) -> None:
        if any(v < -tolerances.TOL.scalar for v in self.site_masses):
            raise ValidationError("site masses must be nonnegative")
        total = 0.0
        for v in self.site_masses:
            total += v
        if abs(total - self.expected_total) > tolerances.TOL.structural:
            raise ValidationError(
                f"site masses sum to {total!r}, expected {self.expected_total!r}"
            )


@dataclass(frozen=True)
class MassSpectrum:
    """Sorted distinct single-measurement masses available to a scope."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValidationError("mass spectrum cannot be empty")
        if list(self.values) != sorted(set(self.values)):
            raise ValidationError("mass spectrum must be sorted and distinct")

    def __contains__(self, mass: float) -> bool:
        return mass in self.values


def _scope_indices(model: LatticeModel, scope: ParticleClass | None) -> list[int]:
    if scope is None:
        return list(range(model.particle_count))
    return [i for i, p in enumerate(model.particles) if p.particle_class is scope]


def class_labels(model: LatticeModel, scope: ParticleClass | None) -> tuple[int, ...]:
    """1-based particle labels belonging to ``scope`` (all particles if None)."""
    return tuple(i + 1 for i in _scope_indices(model, scope))


def mass_spectrum(model: LatticeModel, scope: ParticleClass | None = None) -> MassSpectrum:
    indices = _scope_indices(model, scope)
    if not indices:
        raise ValidationError(f"no particles in scope {scope}")
    return MassSpectrum(tuple(sorted({model.particles[i].mass for i in indices})))


def _check_particle_index(model: LatticeModel, index: int) -> int:
    if not 1 <= index <= model.particle_count:
        raise ValidationError(
            f"particle index {index} out of range 1..{model.particle_count}"
        )
    return index - 1


def _check_site(model: LatticeModel, site: int) -> int:
    if not 0 <= site < model.sites:
        raise ValidationError(f"site {site} out of range 0..{model.sites - 1}")
    return int(site)


def _diagonal_projector(mask: np.ndarray) -> LinearOperator:
    return LinearOperator(np.diag(mask.astype(np.complex128)), hermitian=True)


def position_projector(model: LatticeModel, particle: int, site: int) -> LinearOperator:
    """Projector localizing particle ``particle`` (1-based) at ``site``.

    This is ``I x ... x |site><site| x ... x I`` with the marked factor in the
    particle's slot.  For indistinguishable labels a single-label projector is
    bookkeeping only; observable quantities sum it over the identical labels,
    as :func:`class_mass_density` and :func:`mass_projector_at` do.
    """
    slot = _check_particle_index(model, particle)
    site = _check_site(model, site)
    mask = model.positions_by_particle()[slot] == site
    return _diagonal_projector(mask)


def _exclusive_mask(positions: np.ndarray, slot: int, site: int) -> np.ndarray:
    """Basis mask: particle ``slot`` at ``site`` with no other particle there."""
    at_site = positions == site
    return at_site[slot] & (at_site.sum(axis=0) == 1)


def _mass_group(model: LatticeModel, scope: ParticleClass | None, mass: float) -> list[int]:
    group = [i for i in _scope_indices(model, scope) if model.particles[i].mass == mass]
    if not group:
        raise ValidationError(f"mass {mass!r} is not in the spectrum of scope {scope}")
    return group


def _mass_at_site_mask(
    model: LatticeModel, scope: ParticleClass | None, mass: float, site: int
) -> np.ndarray:
    positions = model.positions_by_particle()
    mask = np.zeros(model.dim, dtype=bool)
    for slot in _mass_group(model, scope, mass):
        mask |= _exclusive_mask(positions, slot, site)
    return mask


def mass_projector_at(
    model: LatticeModel, scope: ParticleClass | None, mass: float, site: int
) -> LinearOperator:
    """Projector onto "a scope particle of this mass sits alone at ``site``".

    Sums, over the scope particles carrying ``mass``, the projector that pins
    that particle at ``site`` while every other particle occupies some other
    site (the lattice no-overlap convention).  Distinct masses at the same
    site give mutually orthogonal projectors.
    """
    site = _check_site(model, site)
    return _diagonal_projector(_mass_at_site_mask(model, scope, mass, site))


def mass_projector_anywhere(
    model: LatticeModel, scope: ParticleClass | None, mass: float
) -> LinearOperator:
    """Site sum of :func:`mass_projector_at` over the whole chain.

    Counts the basis states' isolated scope particles of the given mass, so it
    is idempotent only when that count never exceeds one; it is exposed for
    completeness identities and diagnostics, not as a measurement outcome.
    """
    positions = model.positions_by_particle()
    total = np.zeros(model.dim, dtype=np.complex128)
    for site in range(model.sites):
        mask = np.zeros(model.dim, dtype=bool)
        for slot in _mass_group(model, scope, mass):
            mask |= _exclusive_mask(positions, slot, site)
        total += mask.astype(np.complex128)
    return LinearOperator(np.diag(total), hermitian=True)


def mass_family_at(
    model: LatticeModel, scope: ParticleClass | None, site: int
) -> ProjectorFamily:
    """The complete measurement family "which scope mass sits at ``site``".

    One member per distinct scope mass, labelled by that mass, plus the
    complement projector labelled 0 ("no isolated scope mass here").
    """
    site = _check_site(model, site)
    members: list[LinearOperator] = []
    labels: list[float] = []
    combined = np.zeros(model.dim, dtype=bool)
    for mass in mass_spectrum(model, scope).values:
        mask = _mass_at_site_mask(model, scope, mass, site)
        members.append(_diagonal_projector(mask))
        labels.append(mass)
        combined |= mask
    members.append(_diagonal_projector(~combined))
    labels.append(0.0)
    return ProjectorFamily(members, labels)


def final_boundary_projector(
    model: LatticeModel, conditioned_class: ParticleClass | None, sites: Sequence[int]
) -> LinearOperator:
    """Product of position projectors pinning each conditioned particle.

    ``sites`` lists one site per particle of ``conditioned_class`` in label
    order (all particles when the scope is None); the projector acts as the
    identity on the other class.  An empty scope yields the identity (no
    post-selection).
    """
    indices = _scope_indices(model, conditioned_class)
    if len(sites) != len(indices):
        raise ValidationError(
            f"need one site per conditioned particle ({len(indices)}), got {len(sites)}"
        )
    positions = model.positions_by_particle()
    mask = np.ones(model.dim, dtype=bool)
    for slot, site in zip(indices, sites):
        mask &= positions[slot] == _check_site(model, site)
    return _diagonal_projector(mask)


def _particle_site_probabilities(model: LatticeModel, state: StateVector) -> np.ndarray:
    """(N, L) marginal probability of finding each particle at each site."""
    weights = np.abs(state.amplitudes) ** 2
    positions = model.positions_by_particle()
    table = np.zeros((model.particle_count, model.sites))
    for slot in range(model.particle_count):
        table[slot] = np.bincount(positions[slot], weights=weights, minlength=model.sites)
    return table


def class_mass_density(
    model: LatticeModel, scope: ParticleClass | None, site: int, t: float
) -> float:
    """Unconditioned mass density ``sum_i m_i <psi(t)|P_i^x|psi(t)>`` at a site."""
    site = _check_site(model, site)
    table = _particle_site_probabilities(model, model.evolved_state(t))
    value = 0.0
    for slot in _scope_indices(model, scope):
        value += model.particles[slot].mass * table[slot, site]
    return value


def class_mass_distribution(
    model: LatticeModel, scope: ParticleClass | None, t: float
) -> MassDistribution:
    """Whole-chain mass distribution of a scope at time ``t``."""
    table = _particle_site_probabilities(model, model.evolved_state(t))
    indices = _scope_indices(model, scope)
    sites = [
        float(sum(model.particles[slot].mass * table[slot, x] for slot in indices))
        for x in range(model.sites)
    ]
    expected = sum(model.particles[slot].mass for slot in indices)
    return MassDistribution(tuple(sites), expected)


def _zero_generator(model: LatticeModel) -> LinearOperator:
    return LinearOperator.zero(model.dim)


def sample_final_sites(
    model: LatticeModel,
    conditioned_class: ParticleClass | None,
    rng: np.random.Generator | int,
) -> tuple[int, ...]:
    """Sample one final site assignment for the conditioned class.

    Enumerates every assignment of the conditioned particles to sites,
    weights each by the Born probability of its boundary projector on the
    evolved state at the final time, and draws one.  Deterministic given a
    seed or a generator state.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    indices = _scope_indices(model, conditioned_class)
    psi_final = model.evolved_state(model.t_final)
    weights = np.abs(psi_final.amplitudes) ** 2
    positions = model.positions_by_particle()
    assignments = [()]
    for _ in indices:
        assignments = [a + (s,) for a in assignments for s in range(model.sites)]
    probabilities = []
    for assignment in assignments:
        mask = np.ones(model.dim, dtype=bool)
        for slot, site in zip(indices, assignment):
            mask &= positions[slot] == site
        probabilities.append(float(weights[mask].sum()))
    probabilities = np.asarray(probabilities)
    probabilities = probabilities / probabilities.sum()
    choice = int(rng.choice(len(assignments), p=probabilities))
    return assignments[choice]


def abl_mass_field(
    model: LatticeModel,
    beable_class: ParticleClass | None,
    final_sites: Sequence[int],
    times: Sequence[float],
    threads: int = 1,
) -> BeableField:
    """Conditioned mass-density expectation field over (site, time).

    For each grid point the intermediate measurement asks which beable-class
    mass sits alone at that site, the pre-selection is the initial state and
    the post-selection pins the final sites of the *other* class (all
    particles when the beable scope is None and ``final_sites`` covers every
    label).  The field value is the mass-label expectation of the conditional
    distribution, so it lies in [0, total scope mass].

    Raises
    ------
    ImpossiblePostSelectionError
        If the chosen final configuration has no Born weight at the final
        time.
    """
    conditioned = beable_class.other() if beable_class is not None else None
    p_final = final_boundary_projector(model, conditioned, final_sites)
    if born_probability(model.evolved_state(model.t_final), p_final) <= tolerances.TOL.branch_cutoff:
        raise ImpossiblePostSelectionError(
            f"final sites {tuple(final_sites)} carry no Born weight at t = {model.t_final}"
        )
    times = [float(t) for t in times]
    for t in times:
        if not 0.0 <= t <= model.t_final:
            raise ValidationError(f"grid time {t} outside [0, {model.t_final}]")
    hamiltonian = model.hamiltonian if model.hamiltonian is not None else _zero_generator(model)
    families = [mass_family_at(model, beable_class, x) for x in range(model.sites)]

    def value_at(point: tuple[int, int]) -> float:
        ti, xi = point
        scenario = PrePostScenario(
            initial=model.initial,
            intermediate=families[xi],
            final=p_final,
            hamiltonian=hamiltonian,
            t_mid=times[ti],
            t_final=model.t_final,
        )
        return abl_expectation(abl_evolved(scenario))

    points = [(ti, xi) for ti in range(len(times)) for xi in range(model.sites)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flat = list(pool.map(value_at, points))
    else:
        flat = [value_at(p) for p in points]
    values = np.array(flat).reshape(len(times), model.sites)
    return BeableField(np.asarray(times), model.site_coordinates(), values)


def site_product_state(
    sites: int, particles: Sequence[ParticleSpec], occupied: Sequence[int]
) -> StateVector:
    """Product state with particle ``i`` at ``occupied[i]``, symmetrized as needed.

    Boson labels are symmetrized and fermion labels antisymmetrized over their
    respective identical groups; repeated fermion sites therefore raise (the
    antisymmetrized vector vanishes).
    """
    count = len(particles)
    if len(occupied) != count:
        raise ValidationError("need one site per particle")
    for site in occupied:
        if not 0 <= site < sites:
            raise ValidationError(f"site {site} out of range 0..{sites - 1}")
    amplitudes = np.zeros(sites ** count, dtype=np.complex128)

    def flat_index(assignment: Sequence[int]) -> int:
        idx = 0
        for site in assignment:
            idx = idx * sites + site
        return idx

    groups = {
        Statistics.BOSON: [i for i, p in enumerate(particles) if p.statistics is Statistics.BOSON],
        Statistics.FERMION: [i for i, p in enumerate(particles) if p.statistics is Statistics.FERMION],
    }
    terms = [(tuple(occupied), 1.0)]
    for statistics, labels in groups.items():
        if len(labels) < 2:
            continue
        new_terms = []
        for assignment, coeff in terms:
            for perm in itertools.permutations(range(len(labels))):
                sign = 1.0
                if statistics is Statistics.FERMION:
                    sign = float(_permutation_sign(perm))
                permuted = list(assignment)
                for dst, src in zip(labels, perm):
                    permuted[dst] = assignment[labels[src]]
                new_terms.append((tuple(permuted), coeff * sign))
        terms = new_terms
    for assignment, coeff in terms:
        amplitudes[flat_index(assignment)] += coeff
    norm = np.linalg.norm(amplitudes)
    if norm <= tolerances.TOL.branch_cutoff:
        raise ValidationError("configuration vanishes under antisymmetrization")
    return StateVector(amplitudes / norm)


def _permutation_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        node = start
        while not seen[node]:
            seen[node] = True
            node = perm[node]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def uniform_product_state(sites: int, count: int) -> StateVector:
    """Every particle fully delocalized: the uniform single-particle state,
    tensored ``count`` times."""
    single = np.full(sites, 1.0 / np.sqrt(sites), dtype=np.complex128)
    amplitudes = single
    for _ in range(count - 1):
        amplitudes = np.kron(amplitudes, single)
    return StateVector(amplitudes)


def hopping_contact_hamiltonian(
    sites: int,
    particles: Sequence[ParticleSpec],
    hopping: float,
    contact: float,
    periodic: bool = False,
) -> LinearOperator:
    """Nearest-neighbour hopping plus on-site B-F contact interaction.

    Each particle hops with amplitude ``-hopping`` between neighbouring sites;
    every boson-class/fermion-class pair pays energy ``contact`` when sharing
    a site.  This is the default genuinely interacting model; any explicit
    Hermitian matrix may be supplied to :class:`LatticeModel` instead.
    """
    count = len(particles)
    dim = sites ** count
    if dim > tolerances.TOL.dimension_cap:
        raise CapacityError(f"lattice dimension {sites}^{count} exceeds the cap")
    hop = np.zeros((sites, sites))
    for x in range(sites - 1):
        hop[x, x + 1] = hop[x + 1, x] = -hopping
    if periodic and sites > 2:
        hop[0, sites - 1] = hop[sites - 1, 0] = -hopping
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    for slot in range(count):
        term = np.array([[1.0]])
        for other in range(count):
            term = np.kron(term, hop if other == slot else np.eye(sites))
        matrix += term
    index = np.arange(dim)
    positions = np.array(
        [(index // sites ** (count - 1 - slot)) % sites for slot in range(count)]
    )
    b_slots = [i for i, p in enumerate(particles) if p.particle_class is ParticleClass.B]
    f_slots = [i for i, p in enumerate(particles) if p.particle_class is ParticleClass.F]
    overlap = np.zeros(dim)
    for b in b_slots:
        for f in f_slots:
            overlap += (positions[b] == positions[f]).astype(float)
    matrix += np.diag(contact * overlap)
    return LinearOperator(matrix, hermitian=True)


def make_catastrophe_model(
    masses: Sequence[float], sites: int, t_final: float = 1.0, spacing: float = 1.0
) -> LatticeModel:
    """The engineered flat-field setup: delocalized particles, frozen dynamics.

    Every particle starts in the uniform single-particle state (a product over
    labels, hence exchange-symmetric) and nothing evolves, so the final
    boundary condition carries no information about intermediate positions.
    """
    particles = tuple(ParticleSpec(mass) for mass in masses)
    return LatticeModel(
        sites=sites,
        particles=particles,
        initial=uniform_product_state(sites, len(particles)),
        hamiltonian=None,
        t_final=t_final,
        spacing=spacing,
    )


def catastrophe_demo(
    model: LatticeModel, times: Sequence[float]
) -> list[list[ConditionalDistribution]]:
    """Mass-outcome distributions at every grid point of an uninformative run.

    Requires the engineered setup of :func:`make_catastrophe_model`: frozen
    dynamics and per-particle site marginals that are uniform, so that the
    post-selected final condition is equally likely after every intermediate
    outcome.  The conditional distribution of the isolated mass found at any
    site then collapses to multiplicity counting - each mass value gets
    (number of particles with that mass) / N - flat across all of spacetime.

    Returns one distribution per (time, site), indexed ``result[ti][x]``.
    Evaluation uses diagonal masks and plain vector sums, so models far too
    large for the dense conditional-probability engine remain cheap; the
    dense engine reproduces these numbers on small models.
    """
    if model.hamiltonian is not None and np.any(model.hamiltonian.matrix):
        raise ValidationError("flat-field demonstration requires frozen dynamics")
    state = model.initial
    marginals = _particle_site_probabilities(model, state)
    spread = float(np.max(np.abs(marginals - 1.0 / model.sites)))
    if spread > tolerances.TOL.structural:
        raise ValidationError(
            f"flat-field demonstration requires uniform site marginals (spread {spread:.3e})"
        )
    weights = np.abs(state.amplitudes) ** 2
    positions = model.positions_by_particle()
    spectrum = mass_spectrum(model, None).values
    per_site: list[ConditionalDistribution] = []
    for site in range(model.sites):
        mass_weights = []
        for mass in spectrum:
            w = 0.0
            for slot in _mass_group(model, None, mass):
                w += float(weights[_exclusive_mask(positions, slot, site)].sum())
            mass_weights.append(w)
        total = sum(mass_weights)
        if total <= tolerances.TOL.branch_cutoff:
            raise ImpossiblePostSelectionError(f"no isolated particle is ever seen at site {site}")
        per_site.append(
            ConditionalDistribution(spectrum, tuple(w / total for w in mass_weights))
        )
    return [list(per_site) for _ in times]
