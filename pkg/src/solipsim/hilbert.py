"""Exact small-dimension complex linear algebra over named register layouts.

A RegisterLayout is an ordered list of named registers; its tensor product
fixes the amplitude order of every PureState (row-major, first register
slowest). Tensor factors are never reordered implicitly: a permutation,
when needed, is an explicit isometry.

Probabilities follow the Born rule. Conditioning renormalizes the
projected state and raises on probability-zero outcomes instead of
returning garbage. `born` and `condition` share one projection routine,
so the probability reported by either is bit-identical for a given
(state, measurement, label) triple.

Convention used throughout the package: basis index 0 of a register doubles
as its blank (pre-measurement) state. Measure-and-record steps check
blankness before writing, so the overlap is harmless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ImpossibleEventError,
    IsometryError,
    LayoutError,
    MeasurementError,
    NormalizationError,
)

NORM_TOL = 1e-12
EQUAL_TOL = 1e-10


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered sequence of (name, dimension) registers."""

    registers: tuple[tuple[str, int], ...]

    def __init__(self, registers) -> None:
        regs = tuple((str(name), int(dim)) for name, dim in registers)
        names = [name for name, _ in regs]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        for name, dim in regs:
            if dim < 1:
                raise LayoutError(f"register {name!r} has dimension {dim}")
        object.__setattr__(self, "registers", regs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.registers)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def axis(self, name: str) -> int:
        """Tensor axis of a register (its position in declaration order)."""
        try:
            return self.names.index(name)
        except ValueError:
            raise LayoutError(f"register {name!r} not in layout {self.names}") from None

    def dim(self, name: str) -> int:
        return self.registers[self.axis(name)][1]

    def extended(self, name: str, dim: int) -> "RegisterLayout":
        """New layout with one register appended at the end."""
        if name in self:
            raise LayoutError(f"register {name!r} already in layout")
        return RegisterLayout(self.registers + ((name, int(dim)),))


@dataclass(frozen=True)
class PureState:
    """Normalized amplitude vector over a layout (row-major register order)."""

    layout: RegisterLayout
    amplitudes: np.ndarray

    def __init__(self, layout: RegisterLayout, amplitudes) -> None:
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.size != layout.total_dim:
            raise LayoutError(
                f"amplitude length {amps.size} != layout dimension {layout.total_dim}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise NormalizationError(f"state norm {norm!r} deviates from 1 beyond {NORM_TOL}")
        amps.flags.writeable = False
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", amps)

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per register."""
        return self.amplitudes.reshape(self.layout.dims)

    def overlap(self, other: "PureState") -> complex:
        _require_same_layout(self.layout, other.layout)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class Isometry:
    """Norm-preserving linear map between register layouts."""

    input_layout: RegisterLayout
    output_layout: RegisterLayout
    matrix: np.ndarray

    def __init__(self, input_layout, output_layout, matrix) -> None:
        mat = np.array(matrix, dtype=complex)
        expected = (output_layout.total_dim, input_layout.total_dim)
        if mat.shape != expected:
            raise LayoutError(f"isometry shape {mat.shape} != expected {expected}")
        gram = mat.conj().T @ mat
        if np.max(np.abs(gram - np.eye(input_layout.total_dim))) > NORM_TOL:
            raise IsometryError("adjoint composed with self deviates from identity")
        mat.flags.writeable = False
        object.__setattr__(self, "input_layout", input_layout)
        object.__setattr__(self, "output_layout", output_layout)
        object.__setattr__(self, "matrix", mat)


@dataclass(frozen=True)
class ProjectiveMeasurement:
    """Labelled orthogonal projectors resolving the identity on a target subspace."""

    target: tuple[str, ...]
    outcomes: tuple[tuple[str, np.ndarray], ...]

    def __init__(self, target, outcomes) -> None:
        tgt = tuple(str(name) for name in target)
        outs = []
        dim = None
        for label, proj in outcomes:
            mat = np.array(proj, dtype=complex)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise MeasurementError(f"projector for {label!r} is not square")
            if dim is None:
                dim = mat.shape[0]
            elif mat.shape[0] != dim:
                raise MeasurementError("projectors have inconsistent dimensions")
            if np.max(np.abs(mat - mat.conj().T)) > NORM_TOL:
                raise MeasurementError(f"projector for {label!r} is not Hermitian")
            if np.max(np.abs(mat @ mat - mat)) > NORM_TOL:
                raise MeasurementError(f"projector for {label!r} is not idempotent")
            mat.flags.writeable = False
            outs.append((str(label), mat))
        labels = [label for label, _ in outs]
        if len(set(labels)) != len(labels):
            raise MeasurementError(f"duplicate outcome labels {labels}")
        total = sum(mat for _, mat in outs)
        if np.max(np.abs(total - np.eye(dim))) > NORM_TOL:
            raise MeasurementError("projectors do not sum to the identity")
        for i, (_, a) in enumerate(outs):
            for _, b in outs[i + 1 :]:
                if np.max(np.abs(a @ b)) > NORM_TOL:
                    raise MeasurementError("projectors are not pairwise orthogonal")
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "outcomes", tuple(outs))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.outcomes)

    def projector(self, label: str) -> np.ndarray:
        for lab, mat in self.outcomes:
            if lab == label:
                return mat
        raise MeasurementError(f"unknown outcome label {label!r}; have {self.labels}")


def _require_same_layout(a: RegisterLayout, b: RegisterLayout) -> None:
    if a.registers != b.registers:
        raise LayoutError(f"layout mismatch: {a.registers} vs {b.registers}")


def _targets_front(state: PureState, targets: tuple[str, ...]):
    """Reshape amplitudes to (target_dim, rest_dim) with targets leading.

    Returns (matrix, permutation) where permutation maps original axes to
    the transposed order; callers undo it with np.argsort(permutation).
    """
    layout = state.layout
    axes = [layout.axis(name) for name in targets]
    if len(set(axes)) != len(axes):
        raise LayoutError(f"duplicate target registers {targets}")
    rest = [i for i in range(len(layout.dims)) if i not in axes]
    perm = axes + rest
    dims = layout.dims
    tdim = math.prod(dims[i] for i in axes)
    arr = state.tensor().transpose(perm).reshape(tdim, -1)
    return arr, perm


def _restore(layout: RegisterLayout, arr: np.ndarray, perm: list[int]) -> np.ndarray:
    dims = layout.dims
    shaped = arr.reshape([dims[i] for i in perm])
    return shaped.transpose(np.argsort(perm)).reshape(-1)


def embed_apply(op: Isometry, state: PureState, targets) -> PureState:
    """Apply `op` to the named target registers, identity elsewhere.

    Output registers of `op` beyond its inputs are appended to the end of
    the state's layout; their names must be fresh. Kept registers must
    match the input dimensions position by position.
    """
    targets = tuple(targets)
    in_regs = op.input_layout.registers
    out_regs = op.output_layout.registers
    if len(targets) != len(in_regs):
        raise LayoutError(f"{len(targets)} targets for a {len(in_regs)}-register isometry")
    layout = state.layout
    for name, (_, dim) in zip(targets, in_regs):
        if layout.dim(name) != dim:
            raise LayoutError(f"target {name!r} has dim {layout.dim(name)}, operator wants {dim}")
    if len(out_regs) < len(in_regs):
        raise LayoutError("isometries may add registers but not remove them")
    for (_, din), (_, dout) in zip(in_regs, out_regs):
        if din != dout:
            raise LayoutError("kept registers must preserve their dimensions")
    extra = out_regs[len(in_regs) :]

    arr, perm = _targets_front(state, targets)
    out = op.matrix @ arr

    new_layout = layout
    for name, dim in extra:
        new_layout = new_layout.extended(name, dim)
    n_old = len(layout.dims)
    # transposed axis order after application: targets, extras, rest
    rest_axes = [i for i in range(n_old) if i not in perm[: len(targets)]]
    current = list(targets) + [name for name, _ in extra] + [layout.names[i] for i in rest_axes]
    shaped = out.reshape([new_layout.dim(name) for name in current])
    final = shaped.transpose([current.index(name) for name in new_layout.names])
    return PureState(new_layout, final.reshape(-1))


def _project(state: PureState, meas: ProjectiveMeasurement, label: str):
    """Shared projection core for `born` and `condition`."""
    arr, perm = _targets_front(state, meas.target)
    proj = meas.projector(label)
    if proj.shape[0] != arr.shape[0]:
        raise LayoutError(
            f"measurement dimension {proj.shape[0]} != target dimension {arr.shape[0]}"
        )
    projected = proj @ arr
    prob = float(np.vdot(projected, projected).real)
    return prob, projected, perm


def born(state: PureState, meas: ProjectiveMeasurement) -> dict[str, float]:
    """Outcome label -> Born probability, in declared outcome order."""
    return {label: _project(state, meas, label)[0] for label in meas.labels}


def condition(
    state: PureState, meas: ProjectiveMeasurement, label: str
) -> tuple[float, PureState]:
    """Born probability of `label` and the renormalized projected state."""
    prob, projected, perm = _project(state, meas, label)
    if prob < NORM_TOL:
        raise ImpossibleEventError(
            f"outcome {label!r} has probability {prob!r}; cannot condition"
        )
    amps = _restore(state.layout, projected / math.sqrt(prob), perm)
    return prob, PureState(state.layout, amps)


def states_equal(a: PureState, b: PureState, tol: float = EQUAL_TOL) -> bool:
    """True iff |<a|b>| = 1 within tol (insensitive to global phase)."""
    return abs(abs(a.overlap(b)) - 1.0) <= tol


def fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>|^2."""
    return abs(a.overlap(b)) ** 2


# ---------------------------------------------------------------------------
# construction helpers


def blank_state(layout: RegisterLayout) -> PureState:
    """All registers in basis index 0."""
    amps = np.zeros(layout.total_dim, dtype=complex)
    amps[0] = 1.0
    return PureState(layout, amps)


def basis_state(layout: RegisterLayout, assignment: dict[str, int] | None = None) -> PureState:
    """Product basis state; unassigned registers sit at index 0."""
    assignment = assignment or {}
    index = 0
    for name, dim in layout.registers:
        k = assignment.get(name, 0)
        if not 0 <= k < dim:
            raise LayoutError(f"index {k} out of range for register {name!r} (dim {dim})")
        index = index * dim + k
    amps = np.zeros(layout.total_dim, dtype=complex)
    amps[index] = 1.0
    return PureState(layout, amps)


def product_state(layout: RegisterLayout, factors: dict[str, np.ndarray]) -> PureState:
    """Product state from per-register vectors; missing registers are blank."""
    amps = np.ones(1, dtype=complex)
    for name, dim in layout.registers:
        if name in factors:
            vec = np.asarray(factors[name], dtype=complex).reshape(-1)
            if vec.size != dim:
                raise LayoutError(f"factor for {name!r} has size {vec.size}, expected {dim}")
        else:
            vec = np.zeros(dim, dtype=complex)
            vec[0] = 1.0
        amps = np.kron(amps, vec)
    return PureState(layout, amps)


def projector(vec: np.ndarray) -> np.ndarray:
    """|v><v| for a normalized vector."""
    v = np.asarray(vec, dtype=complex).reshape(-1)
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > NORM_TOL:
        raise NormalizationError(f"projector vector norm {norm!r} deviates from 1")
    return np.outer(v, v.conj())


def measurement_from_vectors(
    target,
    vector_outcomes,
    complement_label: str | None = None,
) -> ProjectiveMeasurement:
    """Rank-1 projectors from orthonormal vectors, optionally completed.

    With `complement_label`, one extra outcome I - sum(|v><v|) absorbs the
    rest of the space, giving a complete measurement with few outcomes.
    """
    outs = []
    dim = None
    for label, vec in vector_outcomes:
        p = projector(vec)
        dim = p.shape[0]
        outs.append((label, p))
    if complement_label is not None:
        rest = np.eye(dim) - sum(p for _, p in outs)
        outs.append((complement_label, rest))
    return ProjectiveMeasurement(tuple(target), tuple(outs))


def computational_measurement(
    layout: RegisterLayout,
    registers,
    register_labels: dict[str, tuple[str, ...]],
    sep: str = ",",
) -> ProjectiveMeasurement:
    """Joint computational-basis measurement of the named registers.

    Outcome labels are the per-register labels joined with `sep`, ordered
    row-major over the register indices.
    """
    registers = tuple(registers)
    dims = [layout.dim(name) for name in registers]
    for name, d in zip(registers, dims):
        labels = register_labels[name]
        if len(labels) != d:
            raise LayoutError(f"{len(labels)} labels for register {name!r} of dim {d}")
    total = math.prod(dims)
    outs = []
    for flat in range(total):
        idx = []
        rem = flat
        for d in reversed(dims):
            idx.append(rem % d)
            rem //= d
        idx.reverse()
        label = sep.join(register_labels[name][k] for name, k in zip(registers, idx))
        mat = np.zeros((total, total), dtype=complex)
        mat[flat, flat] = 1.0
        outs.append((label, mat))
    return ProjectiveMeasurement(registers, tuple(outs))


def complete_unitary(dim: int, assigned: dict[int, np.ndarray]) -> np.ndarray:
    """Unitary whose given columns are exactly the assigned vectors.

    Free columns are filled by Gram-Schmidt over the canonical basis, so
    the result is deterministic. Assigned vectors must be orthonormal.
    """
    cols = {}
    vecs = []
    for index, vec in assigned.items():
        v = np.asarray(vec, dtype=complex).reshape(-1)
        if v.size != dim:
            raise LayoutError(f"assigned column has size {v.size}, expected {dim}")
        for w in vecs:
            if abs(np.vdot(w, v)) > NORM_TOL:
                raise IsometryError("assigned columns are not orthogonal")
        if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
            raise NormalizationError("assigned column is not normalized")
        cols[index] = v
        vecs.append(v)
    free = []
    for j in range(dim):
        if len(vecs) == dim:
            break
        cand = np.zeros(dim, dtype=complex)
        cand[j] = 1.0
        for w in vecs:
            cand = cand - np.vdot(w, cand) * w
        norm = float(np.linalg.norm(cand))
        if norm > 1e-9:
            cand = cand / norm
            vecs.append(cand)
            free.append(cand)
    mat = np.zeros((dim, dim), dtype=complex)
    it = iter(free)
    for j in range(dim):
        mat[:, j] = cols[j] if j in cols else next(it)
    return mat


def reduced_density(state: PureState, keep) -> np.ndarray:
    """Density matrix of the kept registers, all others traced out."""
    keep = tuple(keep)
    arr, _ = _targets_front(state, keep)
    return arr @ arr.conj().T


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2) * trace norm of rho - sigma, for Hermitian matrices."""
    eigs = np.linalg.eigvalsh(np.asarray(rho) - np.asarray(sigma))
    return 0.5 * float(np.sum(np.abs(eigs)))
