import math

import numpy as np
import pytest

from mitiq_forge.circuit_ir import Circuit, GateSpec
from mitiq_forge.noise_models import ore, re, sn

_ACCEPTANCE = []


@pytest.fixture
def record():
    """Record one acceptance line; the collected lines are repeated in the summary."""

    def _record(number: int, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        _ACCEPTANCE.append((number, line))

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(line)


def random_circuit(rng: np.random.Generator, noise_kind: str, max_qubits: int = 2, max_gates: int = 6) -> Circuit:
    """Random circuit of rotation gates carrying uniform noise of the given kind."""
    n_qubits = int(rng.integers(1, max_qubits + 1))
    n_gates = int(rng.integers(1, max_gates + 1))
    if noise_kind == "SN":
        noise = sn(float(rng.uniform(0.001, 0.05)))
    elif noise_kind == "RE":
        noise = re(float(rng.uniform(-0.2, 0.2)))
    else:
        noise = ore(float(rng.uniform(0.001, 0.05)), float(rng.uniform(-0.2, 0.2)))
    gates = []
    for _ in range(n_gates):
        span = int(rng.integers(1, n_qubits + 1))
        low = int(rng.integers(1, n_qubits - span + 2))
        gen = int(rng.integers(1, 4**span))
        angle = float(rng.uniform(-math.pi, math.pi))
        gates.append(GateSpec(gen, angle, tuple(range(low, low + span)), noise))
    return Circuit(n_qubits, tuple(gates))
