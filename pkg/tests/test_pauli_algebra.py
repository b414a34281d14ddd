import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mitiq_forge.errors import DimensionMismatch, IndexOutOfRange, InvalidProbability, SpanOutOfRange
from mitiq_forge.pauli_algebra import (
    BlochVector,
    PrecisionContext,
    TransferMatrix,
    anticommutes,
    apply,
    apply_rotation,
    basis_ptm,
    dense_unitary_ptm,
    get_context,
    initial_bloch,
    measure_qubit1,
    pauli_word,
    promote,
    rotation_ptm,
    word_product,
    zz_ptm,
)

PAULIS = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def word_matrix(index, n):
    out = np.eye(1, dtype=complex)
    for q in range(n, 0, -1):
        out = np.kron(out, PAULIS[(index // 4 ** (q - 1)) % 4])
    return out


def rotation_unitary(gen, n, theta):
    """Gate convention ``exp(+i theta/2 P)``."""
    p = word_matrix(gen, n)
    return math.cos(theta / 2) * np.eye(2**n) + 1j * math.sin(theta / 2) * p


def as_float(tm):
    return np.array(tm.entries, dtype=float)


def test_word_labels_follow_qubit_order():
    w = pauli_word(1 + 3 * 4, 2)
    assert w.factor(1) == 1 and w.factor(2) == 3
    assert w.label() == "ZX"


def test_pauli_word_range():
    with pytest.raises(IndexOutOfRange):
        pauli_word(16, 2)
    with pytest.raises(IndexOutOfRange):
        pauli_word(-1, 1)


@given(st.integers(1, 3).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 4**n - 1), st.integers(0, 4**n - 1))))
def test_word_product_matches_matrices(args):
    n, a, b = args
    phase, idx = word_product(a, b, n)
    assert np.allclose(word_matrix(a, n) @ word_matrix(b, n), phase * word_matrix(idx, n))


@given(st.integers(1, 3).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 4**n - 1), st.integers(0, 4**n - 1))))
def test_anticommutation_matches_matrices(args):
    n, a, b = args
    pa, pb = word_matrix(a, n), word_matrix(b, n)
    assert anticommutes(a, b, n) == np.allclose(pa @ pb, -pb @ pa)


@settings(max_examples=30, deadline=None)
@given(
    st.integers(1, 2).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, 4**n - 1))),
    st.floats(-math.pi, math.pi),
)
def test_rotation_ptm_matches_dense_oracle(args, theta):
    n, gen = args
    tm = rotation_ptm(gen, n, math.cos(theta), math.sin(theta), get_context(30))
    oracle = dense_unitary_ptm(rotation_unitary(gen, n, theta), n)
    assert np.allclose(as_float(tm), oracle, atol=1e-12)


@pytest.mark.parametrize("axis", [1, 2, 3])
def test_basis_ptm_is_rotation_about_axis(axis):
    ctx = get_context(30)
    theta, p = 0.37, 0.1
    scale = 1 - 2 * p
    want = rotation_ptm(axis, 1, scale * math.cos(theta), scale * math.sin(theta), ctx)
    assert np.allclose(as_float(basis_ptm(axis, theta, p, ctx)), as_float(want), atol=1e-25)


def test_zz_ptm_matches_generic_rotation():
    ctx = get_context(30)
    got = zz_ptm(0.4, 0.05, ctx)
    want = rotation_ptm(15, 2, 0.9 * math.cos(0.4), 0.9 * math.sin(0.4), ctx)
    assert np.allclose(as_float(got), as_float(want), atol=1e-25)


def test_invalid_flip_probability():
    with pytest.raises(InvalidProbability):
        basis_ptm(1, 0.1, 1.5)
    with pytest.raises(InvalidProbability):
        zz_ptm(0.1, -0.1)


def test_promote_places_gate_on_its_qubit():
    ctx = get_context(30)
    single = basis_ptm(1, 0.3, 0, ctx)
    big = promote(single, 2, 3, ctx)
    gen = 1 << 2  # X on qubit 2
    want = rotation_ptm(gen, 3, math.cos(0.3), math.sin(0.3), ctx)
    assert np.allclose(as_float(big), as_float(want), atol=1e-25)
    with pytest.raises(SpanOutOfRange):
        promote(zz_ptm(0.1), 3, 3, ctx)


def test_apply_rotation_equals_matrix_product():
    ctx = get_context(30)
    rng = np.random.default_rng(1)
    state = ctx.array(rng.normal(size=16))
    tm = rotation_ptm(7, 2, 0.8, 0.3, ctx)
    direct = apply(tm, BlochVector(2, state)).entries
    fast = apply_rotation(state, 7, 2, ctx.mpf(0.8), ctx.mpf(0.3))
    assert all(abs(a - b) < 1e-25 for a, b in zip(direct, fast))


def test_initial_state_and_measurement():
    v = initial_bloch(2, get_context(30))
    x, y, z, i = measure_qubit1(v)
    assert (x, y, z, i) == (0, 0, 1, 1)


def test_composition_and_trace_preservation():
    ctx = get_context(30)
    a = rotation_ptm(1, 1, 0.6, 0.8, ctx)
    b = rotation_ptm(3, 1, 0.6, -0.8, ctx)
    assert (a @ b).is_trace_preserving()
    with pytest.raises(DimensionMismatch):
        a @ rotation_ptm(1, 2, 1, 0, ctx)
    with pytest.raises(DimensionMismatch):
        TransferMatrix(1, ctx.identity(3))


def test_precision_contexts_are_independent():
    lo, hi = PrecisionContext(20), PrecisionContext(80)
    assert lo.mp.dps == 20 and hi.mp.dps == 80
    third = hi.mpf(1) / 3
    assert abs(third - hi.mpf("0.3333333333333333333333333333333333333333")) < hi.mpf(10) ** -39
    assert lo.mp.dps == 20
    with pytest.raises(ValueError):
        PrecisionContext(8)


def test_get_context_reads_environment(monkeypatch):
    from mitiq_forge import pauli_algebra

    monkeypatch.setenv("MITIQ_FORGE_DIGITS", "33")
    assert pauli_algebra.default_context().digits == 33
    monkeypatch.delenv("MITIQ_FORGE_DIGITS")
    assert get_context(None).digits == 64
    assert get_context(40) is get_context(40)
