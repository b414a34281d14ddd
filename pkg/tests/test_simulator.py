import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_circuit
from mitiq_forge.circuit_ir import Circuit, GateSpec, benchmark_circuit
from mitiq_forge.errors import DimensionMismatch, ScopeMismatch
from mitiq_forge.metrics import metrics
from mitiq_forge.mitigation_catalog import build_plan, concatenate_local
from mitiq_forge.noise_models import ore, re, sn, unmitigated_proxy_bias
from mitiq_forge.pauli_algebra import get_context
from mitiq_forge.simulator import ideal_output, monte_carlo, pauli_biases, simulate

CTX = get_context(40)
PAULIS = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.diag([1, -1]).astype(complex),
]


def word_matrix(index, n):
    out = np.eye(1, dtype=complex)
    for q in range(n, 0, -1):
        out = np.kron(out, PAULIS[(index >> (2 * (q - 1))) & 3])
    return out


def density_matrix_oracle(circuit: Circuit) -> np.ndarray:
    """Pauli expectations of the noisy output from explicit Kraus evolution."""
    n = circuit.n_qubits
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1
    for g in circuit.gates:
        p_word = word_matrix(g.global_generator(), n)
        angle = float(g.target_angle) + float(g.noise.phi)
        u = math.cos(angle / 2) * np.eye(2**n) + 1j * math.sin(angle / 2) * p_word
        rho = u @ rho @ u.conj().T
        p = float(g.noise.p)
        rho = (1 - p) * rho + p * p_word @ rho @ p_word
    return np.array([np.trace(word_matrix(w, n) @ rho).real for w in range(4**n)])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["SN", "RE", "ORE"]))
def test_unmitigated_simulation_matches_density_matrix(seed, kind):
    c = random_circuit(np.random.default_rng(seed), kind, max_qubits=3, max_gates=6)
    got = np.array(simulate(c, None, CTX).bloch_out.entries, dtype=float)
    assert np.allclose(got, density_matrix_oracle(c), atol=1e-12)


def test_ideal_output_matches_noise_free_oracle():
    c = random_circuit(np.random.default_rng(3), "SN", max_qubits=2, max_gates=5)
    clean = Circuit(c.n_qubits, tuple(GateSpec(g.generator, g.target_angle, g.qubits) for g in c.gates))
    assert np.allclose(np.array(ideal_output(c, CTX), dtype=float), density_matrix_oracle(clean), atol=1e-12)


@pytest.mark.parametrize("spec", [sn(0.01), re(0.05), ore(0.01, 0.05)])
def test_unmitigated_bias_is_bounded_by_proxy(spec):
    c = benchmark_circuit(1, spec)
    res = simulate(c, None, CTX)
    proxy = unmitigated_proxy_bias(spec, c.n_gates, CTX)
    assert max(res.biases) <= proxy
    assert abs(res.norm_check - 1) < CTX.tol(5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["CLM", "CHILM", "TIILM", "IILM:NA"]))
def test_unbiased_plans_on_random_circuits(seed, method):
    kind = "SN" if method in ("CLM", "TIILM", "IILM:NA") and seed % 2 else "RE"
    c = random_circuit(np.random.default_rng(seed), kind, max_qubits=2, max_gates=5)
    plan = build_plan(method, c.uniform_noise(), c.n_gates, None, CTX)
    assert max(pauli_biases(c, plan, CTX)) < CTX.tol(5)


def test_synchronous_and_asynchronous_plans_normalise():
    spec = sn(0.01)
    c = benchmark_circuit(1, spec)
    for method, order in (("CSM", 3), ("IISM:KF", 2), ("IIAM", 2)):
        res = simulate(c, build_plan(method, spec, c.n_gates, order, CTX), CTX)
        assert abs(res.norm_check - 1) < CTX.tol(5)
        assert res.benchmark_bias < simulate(c, None, CTX).benchmark_bias


def test_concatenated_local_plan_equals_uniform_plan():
    spec = re(0.04)
    c = random_circuit(np.random.default_rng(11), "RE", max_qubits=2, max_gates=4)
    c = Circuit(c.n_qubits, tuple(GateSpec(g.generator, g.target_angle, g.qubits, spec) for g in c.gates))
    uniform = build_plan("IILM:KF", spec, c.n_gates, 2, CTX)
    cat = concatenate_local([uniform] * c.n_gates)
    a = simulate(c, uniform, CTX).bloch_out.entries
    b = simulate(c, cat, CTX).bloch_out.entries
    assert all(abs(x - y) < CTX.tol(5) for x, y in zip(a, b))
    with pytest.raises(DimensionMismatch):
        simulate(c, concatenate_local([uniform] * (c.n_gates + 1)), CTX)


def test_asynchronous_plan_size_must_match():
    c = benchmark_circuit(1, sn(0.01))
    with pytest.raises(ScopeMismatch):
        simulate(c, build_plan("IIAM", sn(0.01), 10, 1, CTX), CTX)


def test_pauli_biases_shape():
    c = random_circuit(np.random.default_rng(5), "SN", max_qubits=2)
    b = pauli_biases(c, None, CTX)
    assert len(b) == 4**c.n_qubits and b[0] == 0


def test_monte_carlo_is_deterministic_per_seed():
    spec = sn(0.01)
    c = random_circuit(np.random.default_rng(2), "SN", max_qubits=2, max_gates=4)
    c = Circuit(c.n_qubits, tuple(GateSpec(g.generator, g.target_angle, g.qubits, spec) for g in c.gates))
    plan = build_plan("CLM", spec, c.n_gates, None, CTX)
    a = monte_carlo(c, plan, "Z", n_runs=5000, seed=7, batch_size=1024)
    b = monte_carlo(c, plan, "Z", n_runs=5000, seed=7, batch_size=1024)
    d = monte_carlo(c, plan, "Z", n_runs=5000, seed=8, batch_size=1024)
    assert a == b and a.mean != d.mean
    assert a.sampling_cost_applied == pytest.approx(float(metrics(plan, n_gates=c.n_gates, proxy=False).sampling_cost))


@pytest.mark.parametrize("method", [None, "CLM", "CSM", "IIAM"])
def test_monte_carlo_converges_to_exact(method):
    spec = sn(0.02)
    c = benchmark_circuit(1, spec)
    plan = None if method is None else build_plan(method, spec, c.n_gates, 2 if method == "IIAM" else None, CTX)
    exact = float(simulate(c, plan, CTX).expectations[2])
    est = monte_carlo(c, plan, "Z", n_runs=40_000, seed=1)
    assert abs(est.mean - exact) < 5 * est.std_error
    assert est.n_runs == 40_000


def test_monte_carlo_rejects_bad_arguments():
    c = benchmark_circuit(1, sn(0.01))
    with pytest.raises(ValueError):
        monte_carlo(c, None, "Z", n_runs=0)
    with pytest.raises(ValueError):
        monte_carlo(c, None, "W", n_runs=10)
