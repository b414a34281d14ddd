"""Gates, circuits, the benchmark circuit and the over-rotation gate set.

A gate ``U(Omega)`` generated by Pauli word ``P`` is ``exp(i Omega/2 P)``; its
transfer matrix is the rotation ``R_P(Omega)``. Global phases are dropped since
transfer matrices cannot see them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import SpanOutOfRange
from .noise_models import NoiseChannelSpec, NoiseKind

ZERO_NOISE = NoiseChannelSpec(NoiseKind.SN, 0.0, 0.0)


@dataclass(frozen=True)
class GateSpec:
    """A noisy rotation gate.

    Attributes:
        generator: Pauli-word index of the generator on the gate's own span
            (qubit ``qubits[0]`` is the least-significant digit).
        target_angle: rotation angle ``Omega`` in radians.
        qubits: contiguous 1-based qubit indices, lowest first.
        noise: error channel generated by the same generator.
        exec_time: duration in units of one elementary gate time.
        name: optional label.
    """

    generator: int
    target_angle: float
    qubits: tuple
    noise: NoiseChannelSpec = ZERO_NOISE
    exec_time: float = 1.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        q = tuple(int(x) for x in self.qubits)
        object.__setattr__(self, "qubits", q)
        if list(q) != list(range(q[0], q[0] + len(q))):
            raise SpanOutOfRange(f"qubits {q} are not a contiguous ascending span")
        if self.generator < 0 or self.generator >= 4 ** len(q):
            raise ValueError("generator index does not fit the span")
        if self.noise.generator is not None and self.noise.generator != self.generator:
            raise ValueError("noise must be generated by the gate's own generator")
        if self.exec_time < 1:
            raise ValueError("exec_time must be at least 1")

    @property
    def span(self) -> int:
        return len(self.qubits)

    @property
    def lowest_qubit(self) -> int:
        return self.qubits[0]

    def global_generator(self) -> int:
        """Generator index on the full register (shifted to the gate's span)."""
        return self.generator << (2 * (self.lowest_qubit - 1))

    def with_noise(self, noise: NoiseChannelSpec) -> "GateSpec":
        return replace(self, noise=noise)

    def inverse(self) -> "GateSpec":
        name = self.name[:-1] if self.name.endswith("†") else self.name + "†"
        return replace(self, target_angle=-self.target_angle, name=name)


@dataclass(frozen=True)
class Circuit:
    """Ordered list of gates acting on ``n_qubits`` qubits."""

    n_qubits: int
    gates: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not self.gates:
            raise ValueError("a circuit needs at least one gate")
        for g in self.gates:
            if g.qubits[-1] > self.n_qubits:
                raise SpanOutOfRange(f"gate on {g.qubits} exceeds {self.n_qubits} qubits")

    @property
    def n_gates(self) -> int:
        return len(self.gates)

    @property
    def exec_time(self) -> float:
        return sum(g.exec_time for g in self.gates)

    def with_noise(self, noise: NoiseChannelSpec) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g.with_noise(noise) for g in self.gates))

    def uniform_noise(self) -> NoiseChannelSpec | None:
        """The shared noise spec if every gate carries the same one."""
        first = self.gates[0].noise
        return first if all(g.noise == first for g in self.gates) else None

    def to_text(self) -> str:
        return circuit_to_text(self)


def _y(q, noise):
    return GateSpec(2, math.pi, (q,), noise, name="Y")


def _t1(q, noise):
    return GateSpec(1, math.pi / 4, (q,), noise, name="T1")


def _s15(q, noise):
    return GateSpec(15, math.pi / 2, (q, q + 1), noise, name="S15")


def benchmark_circuit(n_repeat: int, noise: NoiseChannelSpec = ZERO_NOISE) -> Circuit:
    """Four-qubit mirror benchmark with ``18 * n_repeat`` noisy gates.

    Each repeat is a ladder of Y, T1 (a pi/4 X-rotation) and S15 (a pi/2
    ZZ-rotation) gates climbing from qubit 1 to qubit 4, followed by its exact
    inverse, so the noise-free circuit is the identity.
    """
    if n_repeat < 1:
        raise ValueError("n_repeat must be positive")
    forward = [_y(1, noise), _t1(1, noise)]
    for q in (1, 2, 3):
        forward += [_s15(q, noise), _t1(q + 1, noise)]
    forward.append(_y(4, noise))
    block = forward + [g.inverse() for g in reversed(forward)]
    return Circuit(4, tuple(block * n_repeat))


GATE_SET = {
    "T": (3, math.pi / 4, 1),
    "S": (3, math.pi / 2, 1),
    "Z": (3, math.pi, 1),
    "SX": (1, math.pi / 2, 1),
    "X": (1, math.pi, 1),
    "S15": (15, math.pi / 2, 2),
}


def usemore_gate_set(noise: NoiseChannelSpec = ZERO_NOISE) -> list:
    """Templates of the over-rotation strategy gate set on the lowest qubits.

    ``T = exp(i pi/8 Z)`` has target angle pi/4, ``S = T^2``, ``Z = S^2``,
    ``SX = exp(i pi/4 X)``, ``X = SX^2`` and ``S15 = exp(i pi/4 Z(x)Z)``.
    """
    out = []
    for name, (gen, angle, span) in GATE_SET.items():
        out.append(GateSpec(gen, angle, tuple(range(1, span + 1)), noise, name=name))
    return out


def gate_from_set(name: str, lowest_qubit: int = 1, noise: NoiseChannelSpec = ZERO_NOISE) -> GateSpec:
    gen, angle, span = GATE_SET[name]
    return GateSpec(gen, angle, tuple(range(lowest_qubit, lowest_qubit + span)), noise, name=name)


def compile_universal(gate: str, noise: NoiseChannelSpec = ZERO_NOISE) -> list:
    """Decompose T, H, CZ or CX into gate-set members (global phases dropped).

    Two-qubit gates act on qubits (1, 2); CX takes qubit 2 as control and
    qubit 1 as target. The returned list is in application order.
    """
    key = gate.upper()
    if key == "T":
        return [gate_from_set("T", 1, noise)]
    if key == "H":
        return [gate_from_set("SX", 1, noise), gate_from_set("S", 1, noise), gate_from_set("SX", 1, noise)]
    if key == "CZ":
        return [
            gate_from_set("S15", 1, noise),
            gate_from_set("Z", 1, noise),
            gate_from_set("S", 1, noise),
            gate_from_set("Z", 2, noise),
            gate_from_set("S", 2, noise),
        ]
    if key in ("CX", "CNOT"):
        h = compile_universal("H", noise)
        return h + compile_universal("CZ", noise) + h
    raise ValueError(f"no decomposition for {gate!r}")


def _noise_from_amplitudes(p: float, phi: float, kind: NoiseKind | None, a: float) -> NoiseChannelSpec:
    if kind is None:
        if p and phi:
            kind = NoiseKind.ORE
        elif phi:
            kind = NoiseKind.RE
        else:
            kind = NoiseKind.SN
    return NoiseChannelSpec(kind, p, phi, a)


def circuit_to_text(circuit: Circuit) -> str:
    """Serialise to the line format ``gate <generator> <angle> <qubits...> <p> <phi>``.

    A ``qubits <n>`` header records the register size and ``noise <kind> <a>``
    lines record the channel kind and closure parameter for the gates that
    follow. Floats are written with ``repr`` so the round trip is exact.
    """
    lines = [f"qubits {circuit.n_qubits}"]
    current = None
    for g in circuit.gates:
        key = (g.noise.kind.value, g.noise.a_param)
        if key != current:
            lines.append(f"noise {key[0]} {key[1]!r}")
            current = key
        qubits = " ".join(str(q) for q in g.qubits)
        lines.append(f"gate {g.generator} {g.target_angle!r} {qubits} {g.noise.p!r} {g.noise.phi!r}")
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> Circuit:
    """Parse the format written by :func:`circuit_to_text`."""
    n_qubits = None
    kind, a = None, 1.0
    gates = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "qubits":
            n_qubits = int(tok[1])
        elif tok[0] == "noise":
            kind = NoiseKind.parse(tok[1])
            a = float(tok[2]) if len(tok) > 2 else 1.0
        elif tok[0] == "gate":
            if len(tok) < 6:
                raise ValueError(f"malformed gate line: {raw!r}")
            gen, angle = int(tok[1]), float(tok[2])
            qubits = tuple(int(x) for x in tok[3:-2])
            p, phi = float(tok[-2]), float(tok[-1])
            gates.append(GateSpec(gen, angle, qubits, _noise_from_amplitudes(p, phi, kind, a)))
        else:
            raise ValueError(f"unknown directive {tok[0]!r}")
    if n_qubits is None:
        n_qubits = max(g.qubits[-1] for g in gates)
    return Circuit(n_qubits, tuple(gates))
