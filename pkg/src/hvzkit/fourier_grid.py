"""Periodic Fourier grids for fiber Hamiltonians in relative coordinates.

Coordinates are differences x_j = r_j - r_ref for every member j except the
reference (the first member), each living on [0, L) with N points per axis.
That convention makes every particle permutation act as an integer linear
map on grid indices modulo N, with no affine shift and hence no phase in
momentum space: permutation operators are exact index gathers.

The kinetic term is diagonal in momentum space, the potential diagonal in
coordinate space; applying the Hamiltonian is two FFTs and two pointwise
multiplies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import symgroup
from .system import ParticleSystem, evaluate_potential

SIZE_CAP = 1 << 24  # refuse grids that would not fit desk-scale memory


class GridError(ValueError):
    """Inconsistent grid construction or use."""


@dataclass(frozen=True)
class GridSpec:
    """Relative-coordinate grid for a cluster of particles.

    members lists the particle indices living on this grid; the first one is
    the reference whose coordinate is eliminated. Each remaining member
    contributes `dimension` axes, member-major: axis = member_slot * d + c.
    """

    dimension: int
    members: tuple[int, ...]
    n: int
    box: float
    momentum: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if len(self.members) < 2:
            raise GridError("a grid needs at least two members (one relative axis)")
        if len(set(self.members)) != len(self.members):
            raise GridError(f"duplicate members {self.members}")
        if self.n < 2:
            raise GridError(f"need at least two points per axis, got {self.n}")
        if not self.box > 0:
            raise GridError(f"box length must be positive, got {self.box}")
        if len(self.momentum) != self.dimension:
            raise GridError("total momentum length does not match dimension")
        if self.size > SIZE_CAP:
            raise GridError(f"grid size {self.size} exceeds cap {SIZE_CAP}")

    @property
    def ref(self) -> int:
        return self.members[0]

    @property
    def internal(self) -> tuple[int, ...]:
        return self.members[1:]

    @property
    def n_axes(self) -> int:
        return len(self.internal) * self.dimension

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.n_axes

    @property
    def size(self) -> int:
        return self.n**self.n_axes

    @property
    def dx(self) -> float:
        return self.box / self.n

    def coords(self) -> np.ndarray:
        """Coordinate samples along one axis, [0, L)."""
        return np.arange(self.n) * self.dx

    def int_freqs(self) -> np.ndarray:
        """Integer frequencies along one axis in FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    def momenta(self) -> np.ndarray:
        """Momentum samples along one axis in FFT order."""
        return 2.0 * np.pi / self.box * self.int_freqs()

    def axis_of(self, member: int, component: int) -> int:
        return self.internal.index(member) * self.dimension + component

    def wrap(self, delta: np.ndarray) -> np.ndarray:
        """Minimum-image reduction to [-L/2, L/2)."""
        half = self.box / 2.0
        return (delta + half) % self.box - half

    def broadcast_axis(self, values: np.ndarray, axis: int) -> np.ndarray:
        """View a length-n vector as a full-rank broadcastable array."""
        shape = [1] * self.n_axes
        shape[axis] = self.n
        return values.reshape(shape)


# ---------------------------------------------------------------------------
# Diagonal multipliers
# ---------------------------------------------------------------------------


def snap_to_dual(box: float, momentum: Sequence[float]) -> tuple[float, ...]:
    """Round a momentum to the box's reciprocal lattice (2 pi / L) Z^d."""
    unit = 2.0 * np.pi / box
    return tuple(unit * round(float(c) / unit) for c in momentum)


def _reduce_freq(z: np.ndarray, n: int) -> np.ndarray:
    """Reduce frequencies mod n into the principal window [-n/2, n/2)."""
    return z - n * np.floor(z / n + 0.5)


def _reference_freqs(spec: GridSpec) -> list[np.ndarray]:
    """Integer-frequency components of the reference member's momentum.

    The reference carries P - sum(k); on the lattice this is a frequency
    class mod N, taken at its principal representative. The reduction is
    what makes particle permutations exact lattice symmetries: they permute
    the multiset of per-particle frequency classes.
    """
    f1 = spec.int_freqs().astype(float)
    d = spec.dimension
    unit = 2.0 * np.pi / spec.box
    out = []
    for c in range(d):
        fsum = np.zeros(spec.shape)
        for slot in range(len(spec.internal)):
            fsum = fsum + spec.broadcast_axis(f1, slot * d + c)
        out.append(_reduce_freq(spec.momentum[c] / unit - fsum, spec.n))
    return out


def kinetic_multiplier(spec: GridSpec, masses: Mapping[int, float]) -> np.ndarray:
    """Mass-subtracted relativistic kinetic energy on the momentum grid.

    sum over internal members of sqrt(k^2 + m^2) - m, plus the same for the
    reference member at momentum P - sum(k) reduced to the principal
    frequency window. Built with hypot chains so the value at the all-zero
    lattice point with P = 0 is exactly 0.
    """
    k1 = spec.momenta()
    d = spec.dimension
    unit = 2.0 * np.pi / spec.box
    total = np.zeros(spec.shape)
    for slot, member in enumerate(spec.internal):
        m = float(masses[member])
        acc = np.full((), m)
        for c in range(d):
            acc = np.hypot(acc, spec.broadcast_axis(k1, slot * d + c))
        total = total + (acc - m)
    mref = float(masses[spec.ref])
    acc = np.full((), mref)
    for fref in _reference_freqs(spec):
        acc = np.hypot(acc, unit * fref)
    return total + (acc - mref)


def quadratic_kinetic_multiplier(
    spec: GridSpec, masses: Mapping[int, float]
) -> np.ndarray:
    """Nonrelativistic counterpart, sum k^2/2m with the same fiber reduction."""
    k1 = spec.momenta()
    d = spec.dimension
    unit = 2.0 * np.pi / spec.box
    total = np.zeros(spec.shape)
    for slot, member in enumerate(spec.internal):
        m = float(masses[member])
        for c in range(d):
            ka = spec.broadcast_axis(k1, slot * d + c)
            total = total + ka * ka / (2.0 * m)
    mref = float(masses[spec.ref])
    for fref in _reference_freqs(spec):
        dk = unit * fref
        total = total + dk * dk / (2.0 * mref)
    return total


def pair_distance(spec: GridSpec, i: int, j: int) -> np.ndarray:
    """Minimum-image distance |r_i - r_j| on the coordinate grid."""
    x1 = spec.coords()
    d = spec.dimension
    acc = np.zeros(spec.shape)
    for c in range(d):
        if i == spec.ref:
            delta = -spec.broadcast_axis(x1, spec.axis_of(j, c))
        elif j == spec.ref:
            delta = spec.broadcast_axis(x1, spec.axis_of(i, c))
        else:
            delta = spec.broadcast_axis(x1, spec.axis_of(i, c)) - spec.broadcast_axis(
                x1, spec.axis_of(j, c)
            )
        w = spec.wrap(delta)
        acc = acc + w * w
    return np.sqrt(acc)


def potential_multiplier(sys: ParticleSystem, spec: GridSpec) -> np.ndarray:
    """Sum of pair potentials among the grid members, coordinate diagonal."""
    total = np.zeros(spec.shape)
    members = spec.members
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            i, j = members[a], members[b]
            pot = sys.pair_potential(i, j)
            if pot.is_zero:
                continue
            total = total + evaluate_potential(pot, pair_distance(spec, i, j))
    return total


# ---------------------------------------------------------------------------
# Wavefunctions
# ---------------------------------------------------------------------------

COORD = "coordinate"
MOMENTUM = "momentum"


@dataclass
class WaveFunction:
    values: np.ndarray
    representation: str
    spec: GridSpec

    def __post_init__(self) -> None:
        if self.representation not in (COORD, MOMENTUM):
            raise GridError(f"unknown representation {self.representation!r}")
        if self.values.shape != self.spec.shape:
            raise GridError(
                f"values shape {self.values.shape} does not match grid {self.spec.shape}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def inner(self, other: "WaveFunction") -> complex:
        if other.representation != self.representation:
            raise GridError("inner product needs matching representations")
        return complex(np.vdot(self.values, other.values))

    def to_momentum(self) -> "WaveFunction":
        if self.representation == MOMENTUM:
            return self
        vals = np.fft.fftn(self.values, norm="ortho")
        return WaveFunction(vals, MOMENTUM, self.spec)

    def to_coordinate(self) -> "WaveFunction":
        if self.representation == COORD:
            return self
        vals = np.fft.ifftn(self.values, norm="ortho")
        return WaveFunction(vals, COORD, self.spec)

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.values.copy(), self.representation, self.spec)

    def save(self, prefix: str | Path) -> None:
        """Raw little-endian binary plus a JSON sidecar; round trips bit-exactly."""
        prefix = Path(prefix)
        data = np.ascontiguousarray(self.values, dtype=np.complex128)
        data.tofile(prefix.with_suffix(".bin"))
        sidecar = {
            "dtype": "complex128",
            "byte_order": "little",
            "shape": list(data.shape),
            "representation": self.representation,
            "grid": {
                "dimension": self.spec.dimension,
                "members": list(self.spec.members),
                "n": self.spec.n,
                "box": self.spec.box,
                "momentum": list(self.spec.momentum),
            },
        }
        prefix.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")

    @classmethod
    def load(cls, prefix: str | Path) -> "WaveFunction":
        prefix = Path(prefix)
        sidecar = json.loads(prefix.with_suffix(".json").read_text())
        g = sidecar["grid"]
        spec = GridSpec(
            g["dimension"], tuple(g["members"]), g["n"], g["box"], tuple(g["momentum"])
        )
        values = np.fromfile(prefix.with_suffix(".bin"), dtype=np.complex128)
        values = values.reshape(tuple(sidecar["shape"]))
        return cls(values, sidecar["representation"], spec)


# ---------------------------------------------------------------------------
# Hamiltonian application
# ---------------------------------------------------------------------------


@dataclass
class GridOperator:
    """Fiber Hamiltonian as a pair of diagonal multipliers."""

    spec: GridSpec
    tmult: np.ndarray
    vmult: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Coordinate-representation action: F^-1 T F psi + V psi."""
        out = np.fft.ifftn(self.tmult * np.fft.fftn(values))
        if self.vmult is not None:
            out = out + self.vmult * values
        return out

    @property
    def is_free(self) -> bool:
        return self.vmult is None or not np.any(self.vmult)


def build_operator(
    sys: ParticleSystem,
    spec: GridSpec,
    kinetic: str = "sqrt",
) -> GridOperator:
    """Assemble the fiber Hamiltonian for the grid members of a system."""
    masses = {i: sys.particles[i].mass for i in spec.members}
    if kinetic == "sqrt":
        t = kinetic_multiplier(spec, masses)
    elif kinetic == "quadratic":
        t = quadratic_kinetic_multiplier(spec, masses)
    else:
        raise GridError(f"unknown kinetic form {kinetic!r}")
    v = potential_multiplier(sys, spec)
    return GridOperator(spec, t, v if np.any(v) else None)


def apply_hamiltonian(op: GridOperator, wf: WaveFunction) -> WaveFunction:
    wf = wf.to_coordinate()
    return WaveFunction(op.apply(wf.values), COORD, wf.spec)


# ---------------------------------------------------------------------------
# Permutation operators
# ---------------------------------------------------------------------------


def permutation_matrix(spec: GridSpec, perm: Mapping[int, int]) -> np.ndarray:
    """Integer matrix of the coordinate action x -> x' with
    x'_j = x_{g(j)} - x_{g(ref)}, rows and columns over internal members."""
    members = set(spec.members)
    for i, j in perm.items():
        if i not in members or j not in members:
            raise GridError(f"permutation moves {i}->{j} outside the grid members")
    full = {i: perm.get(i, i) for i in spec.members}
    if sorted(full.values()) != sorted(spec.members):
        raise GridError("mapping is not a bijection on the grid members")

    m = len(spec.internal)
    col = {member: k for k, member in enumerate(spec.internal)}
    mat = np.zeros((m, m), dtype=np.int64)
    t = full[spec.ref]
    for row, j in enumerate(spec.internal):
        gj = full[j]
        if gj != spec.ref:
            mat[row, col[gj]] += 1
        if t != spec.ref:
            mat[row, col[t]] -= 1
    return mat


def _invert(perm: Mapping[int, int]) -> dict[int, int]:
    return {v: k for k, v in perm.items()}


def _index_map(
    spec: GridSpec, mat: np.ndarray, pre_shift: np.ndarray | None = None
) -> np.ndarray:
    """Flat gather indices for the affine action o -> mat (o - shift) mod N.

    Component axes never mix: the same member matrix applies per component.
    """
    d = spec.dimension
    m = len(spec.internal)
    grids = np.indices(spec.shape, dtype=np.int64)
    if pre_shift is not None:
        grids = [grids[a] - int(pre_shift[a]) for a in range(spec.n_axes)]
    new_axes = []
    for row in range(m):
        for c in range(d):
            acc = np.zeros(spec.shape, dtype=np.int64)
            for colk in range(m):
                coeff = mat[row, colk]
                if coeff:
                    acc = acc + coeff * grids[colk * d + c]
            new_axes.append(np.mod(acc, spec.n))
    return np.ravel_multi_index(new_axes, spec.shape).reshape(-1)


def _integer_momentum(spec: GridSpec) -> np.ndarray:
    """Total momentum in reciprocal-lattice units; symmetrization at nonzero
    momentum is only exact when these are integers."""
    unit = 2.0 * np.pi / spec.box
    n = np.asarray(spec.momentum) / unit
    rounded = np.round(n)
    if np.max(np.abs(n - rounded)) > 1e-9:
        raise GridError(
            f"momentum {spec.momentum} is not on the reciprocal lattice "
            f"(2 pi / {spec.box}) Z; permutations moving the reference need "
            "a lattice momentum (see snap_to_dual)"
        )
    return rounded.astype(np.int64)


@dataclass
class PermutationOperator:
    """Exact unitary action of one particle permutation on grid functions.

    When the permutation moves the grid reference at nonzero total momentum,
    the fiber picks up the phase exp(i P . x_{g(ref)}); with P on the
    reciprocal lattice that phase is an exact lattice function, and in the
    momentum representation it becomes an integer shift folded into the
    gather, so the operator stays an exact unitary homomorphism.
    """

    spec: GridSpec
    perm: dict[int, int]
    _coord_map: np.ndarray | None = field(default=None, repr=False)
    _coord_phase: np.ndarray | None = field(default=None, repr=False)
    _mom_map: np.ndarray | None = field(default=None, repr=False)
    _built: bool = field(default=False, repr=False)

    @property
    def moves_reference(self) -> bool:
        return self.perm.get(self.spec.ref, self.spec.ref) != self.spec.ref

    @property
    def _needs_phase(self) -> bool:
        return self.moves_reference and any(c != 0.0 for c in self.spec.momentum)

    def _build_coord(self) -> None:
        mat = permutation_matrix(self.spec, self.perm)
        self._coord_map = _index_map(self.spec, mat)
        if self._needs_phase:
            target = self.perm[self.spec.ref]
            x1 = self.spec.coords()
            angle = np.zeros(self.spec.shape)
            for c in range(self.spec.dimension):
                axis = self.spec.axis_of(target, c)
                angle = angle + self.spec.momentum[c] * self.spec.broadcast_axis(
                    x1, axis
                )
            self._coord_phase = np.exp(1j * angle).reshape(-1)

    def index_map(self, representation: str) -> np.ndarray:
        if representation == COORD:
            if self._coord_map is None:
                self._build_coord()
            return self._coord_map
        if representation == MOMENTUM:
            if self._mom_map is None:
                inv = permutation_matrix(self.spec, _invert(self.perm))
                shift = None
                if self._needs_phase:
                    nint = _integer_momentum(self.spec)
                    target = self.perm[self.spec.ref]
                    shift = np.zeros(self.spec.n_axes, dtype=np.int64)
                    for c in range(self.spec.dimension):
                        shift[self.spec.axis_of(target, c)] = nint[c]
                self._mom_map = _index_map(self.spec, inv.T, pre_shift=shift)
            return self._mom_map
        raise GridError(f"unknown representation {representation!r}")

    def phase(self, representation: str) -> np.ndarray | None:
        """Flat phase factors for the representation, or None when trivial."""
        if representation == COORD:
            if self._coord_map is None:
                self._build_coord()
            return self._coord_phase
        if representation == MOMENTUM:
            return None
        raise GridError(f"unknown representation {representation!r}")

    def apply(self, wf: WaveFunction) -> WaveFunction:
        gather = self.index_map(wf.representation)
        vals = wf.values.reshape(-1)[gather]
        ph = self.phase(wf.representation)
        if ph is not None:
            vals = vals * ph
        return WaveFunction(vals.reshape(self.spec.shape), wf.representation, self.spec)


def permutation_operator(
    spec: GridSpec,
    perm: Mapping[int, int],
    species: Mapping[int, int] | None = None,
) -> PermutationOperator:
    """Build the grid operator for g; optionally insist g preserves species."""
    if species is not None:
        for i, j in perm.items():
            if species.get(i) != species.get(j):
                raise GridError(
                    f"permutation maps particle {i} (species {species.get(i)}) "
                    f"to {j} (species {species.get(j)})"
                )
    cleaned = {i: j for i, j in perm.items() if i != j}
    op = PermutationOperator(spec, cleaned)
    if op._needs_phase:
        _integer_momentum(spec)  # fail fast on off-lattice momenta
    op.index_map(COORD)  # validate eagerly
    return op


# ---------------------------------------------------------------------------
# Isotypic projection on the grid
# ---------------------------------------------------------------------------


@dataclass
class GridProjector:
    """Precomputed sum of coefficient-weighted permutation gathers."""

    spec: GridSpec
    terms: tuple[tuple[float, np.ndarray, np.ndarray | None], ...]
    label: str = ""

    def apply(self, values: np.ndarray) -> np.ndarray:
        flat = values.reshape(-1)
        out = None
        for coeff, gather, phase in self.terms:
            term = coeff * flat[gather]
            if phase is not None:
                term = term * phase
            out = term if out is None else out + term
        return out.reshape(values.shape)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        return self.apply(values)


def build_projector(
    spec: GridSpec,
    coeffs: Mapping[symgroup.Element, object],
    species_members: Sequence[Sequence[int]],
    representation: str = COORD,
    label: str = "",
) -> GridProjector:
    """Grid realization of a group-algebra element sum c(g) T(g).

    species_members aligns the group factors with particle indices exactly as
    in symgroup.assemble_permutation; every listed particle must live on the
    grid.
    """
    terms = []
    for g, c in coeffs.items():
        cf = float(c)
        if cf == 0.0:
            continue
        perm = symgroup.assemble_permutation(g, species_members)
        op = permutation_operator(spec, perm)
        terms.append((cf, op.index_map(representation), op.phase(representation)))
    if not terms:
        raise GridError("projector has no nonzero terms")
    return GridProjector(spec, tuple(terms), label)


def apply_projector(
    proj: GridProjector, wf: WaveFunction, representation: str = COORD
) -> WaveFunction:
    if wf.representation != representation:
        raise GridError("projector was built for a different representation")
    return WaveFunction(proj.apply(wf.values), wf.representation, wf.spec)
