import math

import numpy as np
import pytest

from solipsim.errors import (
    ImpossibleEventError,
    IsometryError,
    LayoutError,
    MeasurementError,
    NormalizationError,
)
from solipsim.hilbert import (
    Isometry,
    ProjectiveMeasurement,
    PureState,
    RegisterLayout,
    basis_state,
    blank_state,
    born,
    complete_unitary,
    computational_measurement,
    condition,
    embed_apply,
    fidelity,
    measurement_from_vectors,
    product_state,
    projector,
    reduced_density,
    states_equal,
    trace_distance,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def small_layout():
    return RegisterLayout((("A", 2), ("B", 2), ("C", 3)))


def test_layout_basics():
    layout = small_layout()
    assert layout.names == ("A", "B", "C")
    assert layout.dims == (2, 2, 3)
    assert layout.total_dim == 12
    assert "B" in layout and "X" not in layout
    assert layout.axis("C") == 2
    assert layout.dim("C") == 3


def test_layout_extended_appends_at_end():
    layout = small_layout().extended("G", 2)
    assert layout.names == ("A", "B", "C", "G")
    assert layout.total_dim == 24


def test_layout_rejects_duplicates_and_bad_dims():
    with pytest.raises(LayoutError):
        RegisterLayout((("A", 2), ("A", 2)))
    with pytest.raises(LayoutError):
        RegisterLayout((("A", 0),))
    # dimension 1 is legal (placeholder flag register)
    assert RegisterLayout((("A", 2), ("T", 1))).total_dim == 2


def test_pure_state_normalization_enforced():
    layout = RegisterLayout((("A", 2),))
    PureState(layout, (INV_SQRT2, INV_SQRT2))
    with pytest.raises(NormalizationError):
        PureState(layout, (0.5, 0.5))


def test_basis_product_blank_states():
    layout = small_layout()
    blank = blank_state(layout)
    assert blank.amplitudes[0] == 1.0 and np.count_nonzero(blank.amplitudes) == 1
    one = basis_state(layout, {"B": 1})
    # row-major: B=1 sits at stride 3
    assert one.amplitudes[3] == 1.0
    plus = product_state(layout, {"A": np.array([INV_SQRT2, INV_SQRT2])})
    assert plus.amplitudes[0] == pytest.approx(INV_SQRT2)
    assert plus.amplitudes[6] == pytest.approx(INV_SQRT2)


def test_isometry_validation():
    sub = RegisterLayout((("A", 2),))
    Isometry(sub, sub, np.eye(2))
    with pytest.raises(IsometryError):
        Isometry(sub, sub, np.array([[1.0, 0.0], [0.0, 2.0]]))


def test_projective_measurement_validation():
    target = ("A",)
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    ProjectiveMeasurement(target, (("zero", p0), ("one", p1)))
    with pytest.raises(MeasurementError):
        # not idempotent
        ProjectiveMeasurement(target, (("a", np.array([[0.0, 1.0], [1.0, 0.0]])), ("b", p1)))
    with pytest.raises(MeasurementError):
        # does not resolve the identity
        ProjectiveMeasurement(target, (("zero", p0),))
    with pytest.raises(MeasurementError):
        # over-complete: outcomes sum past the identity
        ProjectiveMeasurement(target, (("a", p0), ("b", p0), ("c", p1)))


def test_born_on_balanced_superposition():
    layout = RegisterLayout((("A", 2), ("B", 2)))
    state = product_state(layout, {"A": np.array([INV_SQRT2, INV_SQRT2])})
    meas = computational_measurement(layout, ("A",), {"A": ("zero", "one")})
    probs = born(state, meas)
    assert list(probs) == ["zero", "one"]
    np.testing.assert_allclose([probs["zero"], probs["one"]], [0.5, 0.5], atol=1e-15)


def test_condition_renormalizes_and_rejects_impossible():
    layout = RegisterLayout((("A", 2), ("B", 2)))
    bell = PureState(layout, (INV_SQRT2, 0.0, 0.0, INV_SQRT2))
    meas = computational_measurement(layout, ("A",), {"A": ("zero", "one")})
    p, collapsed = condition(bell, meas, "one")
    assert p == pytest.approx(0.5)
    np.testing.assert_allclose(collapsed.amplitudes, [0.0, 0.0, 0.0, 1.0], atol=1e-15)
    blank = blank_state(layout)
    with pytest.raises(ImpossibleEventError):
        condition(blank, meas, "one")


def test_states_equal_ignores_global_phase():
    layout = RegisterLayout((("A", 2),))
    a = PureState(layout, (INV_SQRT2, INV_SQRT2))
    b = PureState(layout, (INV_SQRT2 * 1j, INV_SQRT2 * 1j))
    c = PureState(layout, (INV_SQRT2, -INV_SQRT2))
    assert states_equal(a, b)
    assert not states_equal(a, c)
    assert fidelity(a, b) == pytest.approx(1.0)
    assert fidelity(a, c) == pytest.approx(0.0, abs=1e-15)


def test_embed_apply_identity_is_noop():
    layout = small_layout()
    state = basis_state(layout, {"A": 1, "C": 2})
    ident = Isometry(RegisterLayout((("B", 2),)), RegisterLayout((("B", 2),)), np.eye(2))
    out = embed_apply(ident, state, ("B",))
    assert states_equal(out, state)


def test_embed_apply_matches_manual_tensor_contraction():
    # operator on out-of-order targets (C, A) exercises the axis permutation
    layout = small_layout()
    rng = np.random.default_rng(7)
    amps = rng.normal(size=12) + 1j * rng.normal(size=12)
    amps /= np.linalg.norm(amps)
    state = PureState(layout, amps)
    mat = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))[0]
    sub = RegisterLayout((("C", 3), ("A", 2)))
    out = embed_apply(Isometry(sub, sub, mat), state, ("C", "A"))

    tensor = state.tensor()  # axes (A, B, C)
    op = mat.reshape(3, 2, 3, 2)  # row-major composite: (C', A', C, A)
    expected = np.einsum("wxyz,zby->xbw", op, tensor)  # -> axes (A', B, C')
    np.testing.assert_allclose(out.tensor(), expected, atol=1e-12)


def test_embed_apply_can_add_registers():
    layout = RegisterLayout((("A", 2),))
    state = basis_state(layout, {"A": 1})
    copy = np.zeros((4, 2), dtype=complex)
    copy[0, 0] = 1.0  # |0> -> |0,0>
    copy[3, 1] = 1.0  # |1> -> |1,1>
    iso = Isometry(
        RegisterLayout((("A", 2),)), RegisterLayout((("A", 2), ("G", 2))), copy
    )
    out = embed_apply(iso, state, ("A",))
    assert out.layout.names == ("A", "G")
    np.testing.assert_allclose(out.amplitudes, [0.0, 0.0, 0.0, 1.0], atol=1e-15)


def test_measurement_from_vectors_complement():
    meas = measurement_from_vectors(
        ("A",),
        (("plus", np.array([INV_SQRT2, INV_SQRT2])),),
        complement_label="rest",
    )
    assert meas.labels == ("plus", "rest")
    np.testing.assert_allclose(
        meas.projector("rest"), np.array([[0.5, -0.5], [-0.5, 0.5]]), atol=1e-12
    )


def test_complete_unitary_keeps_prescribed_columns():
    col0 = np.array([INV_SQRT2, 0.0, INV_SQRT2, 0.0])
    u = complete_unitary(4, {0: col0})
    np.testing.assert_allclose(u[:, 0], col0, atol=1e-12)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)
    # deterministic completion
    np.testing.assert_allclose(u, complete_unitary(4, {0: col0}), atol=0)


def test_reduced_density_and_trace_distance():
    layout = RegisterLayout((("A", 2), ("B", 2)))
    bell = PureState(layout, (INV_SQRT2, 0.0, 0.0, INV_SQRT2))
    rho = reduced_density(bell, ("A",))
    np.testing.assert_allclose(rho, np.eye(2) / 2.0, atol=1e-12)
    assert trace_distance(projector(np.array([1.0, 0.0])), np.eye(2) / 2.0) == pytest.approx(0.5)
    assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-15)
