import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_circuit
from mitiq_forge.circuit_ir import (
    GATE_SET,
    Circuit,
    GateSpec,
    benchmark_circuit,
    circuit_from_text,
    circuit_to_text,
    compile_universal,
    gate_from_set,
    usemore_gate_set,
)
from mitiq_forge.errors import SpanOutOfRange
from mitiq_forge.noise_models import NoiseKind, ore, re, sn
from mitiq_forge.pauli_algebra import dense_unitary_ptm
from mitiq_forge.simulator import ideal_output

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
I2 = np.eye(2, dtype=complex)


def gate_unitary(g: GateSpec, n: int) -> np.ndarray:
    """Dense ``exp(i Omega/2 P)`` on ``n`` qubits (qubit 1 rightmost)."""
    paulis = [I2, X, np.array([[0, -1j], [1j, 0]]), Z]
    word = np.eye(1, dtype=complex)
    gen = g.global_generator()
    for q in range(n, 0, -1):
        word = np.kron(word, paulis[(gen >> (2 * (q - 1))) & 3])
    return math.cos(g.target_angle / 2) * np.eye(2**n) + 1j * math.sin(g.target_angle / 2) * word


def sequence_ptm(gates, n):
    u = np.eye(2**n, dtype=complex)
    for g in gates:
        u = gate_unitary(g, n) @ u
    return dense_unitary_ptm(u, n)


def test_benchmark_structure():
    c = benchmark_circuit(2)
    assert c.n_qubits == 4 and c.n_gates == 36
    names = [g.name for g in c.gates[:18]]
    assert names[:3] == ["Y", "T1", "S15"]
    assert names[9:] == [g.name + "†" if not g.name.endswith("†") else g.name for g in c.gates[:9]][::-1]


def test_benchmark_is_identity_when_noise_free():
    c = benchmark_circuit(1)
    assert np.allclose(sequence_ptm(c.gates, 4), np.eye(256), atol=1e-12)
    out = ideal_output(c)
    # |0000> has expectation 1 on every Z/I word and 0 elsewhere
    z_words = {i for i in range(256) if all(((i >> (2 * q)) & 3) in (0, 3) for q in range(4))}
    assert all(abs(x - (1 if i in z_words else 0)) < 1e-60 for i, x in enumerate(out))


def test_benchmark_carries_uniform_noise():
    c = benchmark_circuit(1, re(0.01))
    assert c.uniform_noise() == re(0.01)
    assert all(g.noise.kind == NoiseKind.RE for g in c.gates)


def test_gate_validation():
    with pytest.raises(SpanOutOfRange):
        GateSpec(1, 0.1, (1, 3))
    with pytest.raises(ValueError):
        GateSpec(16, 0.1, (1,))
    with pytest.raises(SpanOutOfRange):
        Circuit(1, (GateSpec(15, 0.1, (1, 2)),))
    with pytest.raises(ValueError):
        Circuit(1, ())
    with pytest.raises(ValueError):
        GateSpec(1, 0.1, (1,), exec_time=0.5)


def test_inverse_negates_angle():
    g = gate_from_set("T", 2, sn(0.01))
    inv = g.inverse()
    assert inv.target_angle == -g.target_angle and inv.noise == g.noise
    assert inv.inverse().name == g.name


def test_gate_set_members():
    names = {g.name for g in usemore_gate_set()}
    assert names == set(GATE_SET)
    t = gate_from_set("T")
    s = gate_from_set("S")
    assert np.allclose(sequence_ptm([t, t], 1), sequence_ptm([s], 1))
    sx = gate_from_set("SX")
    assert np.allclose(sequence_ptm([sx, sx], 1), sequence_ptm([gate_from_set("X")], 1))


H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
# the gate set defines T as exp(i pi/8 Z)
T = np.diag([np.exp(1j * math.pi / 8), np.exp(-1j * math.pi / 8)])
CZ = np.diag([1, 1, 1, -1]).astype(complex)
# control on qubit 2 (left factor), target on qubit 1 (right factor)
CX = np.kron(np.diag([1, 0]), I2) + np.kron(np.diag([0, 1]), X)


@pytest.mark.parametrize(
    "name, unitary, n",
    [("T", T, 1), ("H", H, 1), ("CZ", CZ, 2), ("CX", CX, 2)],
)
def test_universal_compilation(name, unitary, n):
    gates = compile_universal(name)
    assert np.allclose(sequence_ptm(gates, n), dense_unitary_ptm(unitary, n), atol=1e-12)


def test_unknown_compilation():
    with pytest.raises(ValueError):
        compile_universal("Toffoli")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["SN", "RE", "ORE"]))
def test_text_round_trip(seed, kind):
    c = random_circuit(np.random.default_rng(seed), kind, max_qubits=3, max_gates=8)
    back = circuit_from_text(circuit_to_text(c))
    assert back == c


def test_text_mixed_kinds_and_comments():
    gates = (GateSpec(1, 0.3, (1,), sn(0.01, 0.5)), GateSpec(15, 0.2, (1, 2), ore(0.01, 0.02)))
    c = Circuit(2, gates)
    text = "# header comment\n" + c.to_text()
    back = circuit_from_text(text)
    assert back == c and back.gates[0].noise.a_param == 0.5
    with pytest.raises(ValueError):
        circuit_from_text("qubits 1\nwire 1\n")
