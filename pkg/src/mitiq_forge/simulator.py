"""Deterministic transfer-matrix simulation and the Monte-Carlo executor.

Every gate, noise channel and mitigation variant in this package is a scaled
rotation about the gate's generator, so a gate acts on a Bloch vector through
one complex multiplier ``z`` (real part on the diagonal, imaginary part on the
partner entries). The deterministic simulator therefore applies sparse updates
instead of multiplying dense ``4^n`` matrices; :func:`gate_transfer_matrix`
builds the equivalent dense matrix for checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit_ir import Circuit, GateSpec
from .errors import DimensionMismatch, ScopeMismatch
from .mitigation_catalog import ORIGINAL, GateVariant, MitigationPlan, Scope
from .noise_models import NoiseKind, stochastic_eigenvalue
from .pauli_algebra import (
    BlochVector,
    TransferMatrix,
    apply_rotation,
    get_context,
    initial_bloch,
    measure_qubit1,
    rotation_ptm,
)

OBSERVABLES = {"X": 1, "Y": 2, "Z": 3}


@dataclass(frozen=True)
class SimulationResult:
    """Outcome of :func:`simulate`.

    Attributes:
        bloch_out: mitigated (or noisy) output Bloch vector.
        ideal: noise-free output Bloch vector.
        biases: ``(eps_X, eps_Y, eps_Z)`` on qubit 1.
        benchmark_bias: root mean square of the three biases.
        norm_check: the identity entry of ``bloch_out`` (should be 1).
    """

    bloch_out: BlochVector
    ideal: BlochVector
    biases: tuple
    benchmark_bias: object
    norm_check: object

    @property
    def expectations(self) -> tuple:
        x, y, z, _ = measure_qubit1(self.bloch_out)
        return x, y, z


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Quasi-probability Monte-Carlo estimate of one observable.

    Attributes:
        mean: average of ``C * sign * outcome`` over runs.
        std_error: sample standard deviation of that product over ``sqrt(n_runs)``.
        n_runs: number of runs.
        sampling_cost_applied: the factor ``C`` the signed outcomes were scaled by.
        run_variance: sample variance of the scaled single-run estimator.
        batch_means: mean of each fixed-size batch of runs (for variance checks).
        batch_size: runs per batch (the last batch may be shorter).
    """

    mean: float
    std_error: float
    n_runs: int
    sampling_cost_applied: float
    run_variance: float = 0.0
    batch_means: tuple = ()
    batch_size: int = 0


# ---------------------------------------------------------------------------
# deterministic simulation


def gate_multiplier(gate: GateSpec, variant: GateVariant | None, ctx, pretailor=None):
    """Multiplier of the noisy gate (ideal rotation included) for one variant."""
    ctx = get_context(ctx)
    omega = ctx.mp.expj(ctx.mpf(gate.target_angle))
    if variant is None:
        variant = ORIGINAL
    elementary = None if pretailor is None else pretailor.elementary_multiplier(gate.noise, ctx)
    return omega * variant.multiplier(gate.noise, ctx, elementary)


def gate_transfer_matrix(gate: GateSpec, n_qubits: int, z, ctx=None) -> TransferMatrix:
    """Dense transfer matrix of a gate whose multiplier is ``z``."""
    ctx = get_context(ctx)
    z = ctx.mp.mpc(z)
    return rotation_ptm(gate.global_generator(), n_qubits, z.real, z.imag, ctx)


def _run(circuit: Circuit, multipliers, ctx) -> np.ndarray:
    state = initial_bloch(circuit.n_qubits, ctx).entries.copy()
    for gate, z in zip(circuit.gates, multipliers):
        state = apply_rotation(state, gate.global_generator(), circuit.n_qubits, z.real, z.imag)
    return state


def ideal_output(circuit: Circuit, ctx=None) -> np.ndarray:
    ctx = get_context(ctx)
    return _run(circuit, [ctx.mp.expj(ctx.mpf(g.target_angle)) for g in circuit.gates], ctx)


def _check_plan(circuit: Circuit, plan: MitigationPlan | None):
    if plan is None:
        return
    if plan.scope == Scope.LOCAL and not plan.is_uniform and len(plan.per_gate_variants) != circuit.n_gates:
        raise DimensionMismatch("concatenated plan does not have one entry per gate")
    if plan.scope == Scope.ASYNCHRONOUS:
        n = plan.params.get("n_gates")
        if n is not None and int(n) != circuit.n_gates:
            raise ScopeMismatch(f"asynchronous plan built for {n} gates, circuit has {circuit.n_gates}")


_VARIANT_CACHE: dict = {}
_CACHE_LIMIT = 4096


def _variant_run(circuit: Circuit, variant: GateVariant, pretailor, ctx) -> np.ndarray:
    """Output of the circuit with ``variant`` applied to every gate (memoised)."""
    key = (circuit, variant.key(), None if pretailor is None else (pretailor.coefficients, pretailor.angles), ctx.digits)
    hit = _VARIANT_CACHE.get(key)
    if hit is not None:
        return hit
    cache = {}
    mults = []
    for g in circuit.gates:
        k = (g.target_angle, g.noise)
        if k not in cache:
            cache[k] = gate_multiplier(g, variant, ctx, pretailor)
        mults.append(cache[k])
    out = _run(circuit, mults, ctx)
    if len(_VARIANT_CACHE) >= _CACHE_LIMIT:
        _VARIANT_CACHE.clear()
    _VARIANT_CACHE[key] = out
    return out


def _local_multipliers(circuit: Circuit, plan: MitigationPlan, ctx) -> list:
    cache = {}
    out = []
    for n, g in enumerate(circuit.gates):
        k = (0 if plan.is_uniform else n, g.target_angle, g.noise)
        if k not in cache:
            total = ctx.mp.mpc(0)
            for t in plan.local_terms(n):
                total += t.coefficient * gate_multiplier(g, t.variant, ctx, plan.pretailor)
            cache[k] = total
        out.append(cache[k])
    return out


def _async_run(circuit: Circuit, plan: MitigationPlan, ctx) -> np.ndarray:
    """Sum over every circuit of each configuration class, by dynamic programming.

    The state is the tuple of insertions still to be placed for each level of
    the class partition; each gate either takes no insertions or consumes one
    of the remaining levels.
    """
    n = circuit.n_qubits
    base_state = initial_bloch(n, ctx).entries
    total = ctx.zeros(4**n)
    mult_cache = {}

    def mult(g, m):
        k = (g.target_angle, g.noise, m)
        if k not in mult_cache:
            mult_cache[k] = gate_multiplier(g, GateVariant(identity_insertions=m), ctx, plan.pretailor)
        return mult_cache[k]

    for term in plan.circuit_variants:
        levels = [ins for ins, _ in term.partition]
        start = tuple(cnt for _, cnt in term.partition)
        states = {start: base_state.copy()}
        for g in circuit.gates:
            gen = g.global_generator()
            nxt = {}
            for key, vec in states.items():
                options = [(key, 0)]
                for li, left in enumerate(key):
                    if left > 0:
                        options.append((key[:li] + (left - 1,) + key[li + 1 :], levels[li]))
                for new_key, m in options:
                    z = mult(g, m)
                    out = apply_rotation(vec, gen, n, z.real, z.imag)
                    if new_key in nxt:
                        nxt[new_key] = nxt[new_key] + out
                    else:
                        nxt[new_key] = out
            states = nxt
        done = tuple(0 for _ in start)
        if done in states:
            total = total + term.coefficient * states[done]
    return total


def simulate(circuit: Circuit, plan: MitigationPlan | None = None, ctx=None) -> SimulationResult:
    """Simulate the circuit, unmitigated (``plan=None``) or under a plan.

    Local plans replace each gate by its coefficient-weighted combination of
    variants; synchronous and asynchronous plans simulate each circuit variant
    and combine the output Bloch vectors with the plan coefficients.
    """
    ctx = get_context(ctx if ctx is not None else (plan.digits if plan is not None else None))
    _check_plan(circuit, plan)
    if plan is None:
        out = _run(circuit, [gate_multiplier(g, None, ctx) for g in circuit.gates], ctx)
    elif plan.scope == Scope.LOCAL:
        out = _run(circuit, _local_multipliers(circuit, plan, ctx), ctx)
    elif plan.scope == Scope.SYNCHRONOUS:
        out = ctx.zeros(4**circuit.n_qubits)
        for t in plan.circuit_variants:
            out = out + t.coefficient * _variant_run(circuit, t.variant, plan.pretailor, ctx)
    else:
        out = _async_run(circuit, plan, ctx)
    ideal = ideal_output(circuit, ctx)
    biases = tuple(abs(ideal[i] - out[i]) for i in (1, 2, 3))
    bench = ctx.mp.sqrt(sum(b * b for b in biases) / 3)
    return SimulationResult(
        BlochVector(circuit.n_qubits, out), BlochVector(circuit.n_qubits, ideal), biases, bench, out[0]
    )


def pauli_biases(circuit: Circuit, plan: MitigationPlan | None = None, ctx=None) -> np.ndarray:
    """``|ideal - simulated|`` for every Pauli word of the register."""
    res = simulate(circuit, plan, ctx)
    return np.array([abs(a - b) for a, b in zip(res.ideal.entries, res.bloch_out.entries)], dtype=object)


# ---------------------------------------------------------------------------
# Monte Carlo


def _pauli_action(word: int, n_qubits: int):
    """Permutation and phases with ``(P psi)[y] = phase[y] * psi[perm[y]]``."""
    dim = 2**n_qubits
    perm = np.empty(dim, dtype=np.int64)
    phase = np.empty(dim, dtype=complex)
    for y in range(dim):
        x = y
        ph = 1 + 0j
        flip = 0
        for q in range(n_qubits):
            f = (word >> (2 * q)) & 3
            bit = (x >> q) & 1
            if f in (1, 2):
                flip |= 1 << q
            if f == 2:
                ph *= 1j if bit == 0 else -1j
            elif f == 3 and bit:
                ph *= -1
        # P|x> = ph |x ^ flip>, so (P psi)[x ^ flip] = ph * psi[x]
        perm[x ^ flip] = x
        phase[x ^ flip] = ph
    return perm, phase


@dataclass(frozen=True)
class _VariantDraw:
    """Float description of a variant for one gate."""

    angle: float  # deterministic extra angle (custom + coherent error)
    flip: float  # probability of an odd number of generator flips
    k: int  # elementary gates
    tailored_angle: bool


def _variant_draw(gate: GateSpec, v: GateVariant, pretailor) -> _VariantDraw:
    spec = gate.noise
    if spec.kind == NoiseKind.SN and spec.p > 0 and spec.a_param != 1:
        raise NotImplementedError("Monte-Carlo branch sampling needs a = 1 stochastic noise")
    if float(v.custom_stochastic) > 0 and spec.kind == NoiseKind.SN and spec.a_param != 1:
        raise NotImplementedError("custom flips need a = 1")
    k = 2 * v.identity_insertions + 1
    lam = 1 - 2 * float(spec.p) if spec.kind != NoiseKind.RE else 1.0
    c = float(v.custom_stochastic)
    q_noise = (1 - lam**k) / 2
    q_custom = (1 - (1 - 2 * c) ** k) / 2 if v.tailored else c
    flip = (1 - (1 - 2 * q_noise) * (1 - 2 * q_custom)) / 2
    theta = float(v.custom_angle) * (k if v.tailored else 1)
    if pretailor is None:
        if v.error_angle is not None:
            phi = float(v.error_angle)
        else:
            phi = float(spec.phi) * (-1 if v.hidden_inverse else 1)
        theta += k * phi
    return _VariantDraw(theta, flip, k, pretailor is not None)


def _signed_choice(rng, coefs, size):
    """Sample indices with probability ``|c|/C``; returns (indices, signs, C)."""
    mags = np.abs(np.asarray(coefs, dtype=float))
    cost = mags.sum()
    idx = rng.choice(len(coefs), size=size, p=mags / cost)
    signs = np.sign(np.asarray(coefs, dtype=float))[idx]
    return idx, signs, cost


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, batch], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def monte_carlo(
    circuit: Circuit,
    plan: MitigationPlan | None,
    observable: str = "Z",
    n_runs: int = 100_000,
    seed: int = 0,
    batch_size: int = 1 << 14,
) -> MonteCarloEstimate:
    """Estimate a qubit-1 Pauli expectation by quasi-probability sampling.

    Each run draws a circuit variant with probability ``|c_i|/C`` (per gate for
    local plans, one per circuit otherwise; for asynchronous plans a class is
    drawn and then one of its circuits uniformly), samples every stochastic
    flip explicitly, evaluates the exact expectation of the resulting pure
    state, and records ``C * sign * outcome``. Batch ``b`` uses its own Philox
    stream keyed by ``(seed, b)``, so results do not depend on how batches are
    scheduled.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    if observable.upper() not in OBSERVABLES:
        raise ValueError(f"observable must be one of X, Y, Z, got {observable!r}")
    obs = OBSERVABLES[observable.upper()]
    n = circuit.n_qubits
    gens = [g.global_generator() for g in circuit.gates]
    actions = {w: _pauli_action(w, n) for w in set(gens) | {obs}}
    omegas = np.array([float(g.target_angle) for g in circuit.gates])
    pretailor = None if plan is None else plan.pretailor
    lc = None
    if pretailor is not None:
        lc = (float(pretailor.coefficients[0]), float(pretailor.angles[0]), float(pretailor.angles[1]))

    # per-gate tables of variants, coefficients and draws
    if plan is None:
        scope = Scope.LOCAL
        gate_terms = [((1.0,), (ORIGINAL,))] * circuit.n_gates
    else:
        scope = plan.scope
        if scope == Scope.LOCAL:
            gate_terms = [
                (tuple(float(t.coefficient) for t in plan.local_terms(i)), tuple(t.variant for t in plan.local_terms(i)))
                for i in range(circuit.n_gates)
            ]
    if scope == Scope.LOCAL:
        draws = [[_variant_draw(g, v, pretailor) for v in vs] for g, (_, vs) in zip(circuit.gates, gate_terms)]
        cost = math.prod(float(np.abs(np.asarray(cs)).sum()) for cs, _ in gate_terms)
    elif scope == Scope.SYNCHRONOUS:
        variants = [t.variant for t in plan.circuit_variants]
        sync_coefs = [float(t.coefficient) for t in plan.circuit_variants]
        draws = [[_variant_draw(g, v, pretailor) for v in variants] for g in circuit.gates]
        cost = float(np.abs(sync_coefs).sum())
    else:
        terms = plan.circuit_variants
        class_coefs = [float(t.weight) for t in terms]
        max_ins = max([ins for t in terms for ins, _ in t.partition] + [0])
        ins_variants = [GateVariant(identity_insertions=m) for m in range(max_ins + 1)]
        draws = [[_variant_draw(g, v, pretailor) for v in ins_variants] for g in circuit.gates]
        cost = float(np.abs(class_coefs).sum())

    values = []
    batch_means = []
    n_batches = (n_runs + batch_size - 1) // batch_size
    for b in range(n_batches):
        size = min(batch_size, n_runs - b * batch_size)
        rng = _batch_rng(seed, b)
        sign = np.ones(size)
        if scope == Scope.LOCAL:
            choice = np.empty((circuit.n_gates, size), dtype=np.int64)
            for i, (cs, _) in enumerate(gate_terms):
                if len(cs) == 1:
                    choice[i] = 0
                    sign *= np.sign(cs[0])
                else:
                    idx, s, _ = _signed_choice(rng, cs, size)
                    choice[i] = idx
                    sign *= s
        elif scope == Scope.SYNCHRONOUS:
            idx, sign, _ = _signed_choice(rng, sync_coefs, size)
            choice = np.broadcast_to(idx, (circuit.n_gates, size))
        else:
            idx, sign, _ = _signed_choice(rng, class_coefs, size)
            choice = np.zeros((circuit.n_gates, size), dtype=np.int64)
            perms = np.argsort(rng.random((size, circuit.n_gates)), axis=1)
            for ci, t in enumerate(terms):
                rows = np.nonzero(idx == ci)[0]
                if rows.size == 0 or not t.partition:
                    continue
                pos = 0
                for ins, count in t.partition:
                    gates = perms[rows, pos : pos + count]
                    choice[gates.T, rows] = ins
                    pos += count

        # amplitudes along axis 0 so Pauli permutations gather whole rows
        psi = np.zeros((2**n, size), dtype=complex)
        psi[0] = 1.0
        for i, gen in enumerate(gens):
            table = draws[i]
            ch = choice[i]
            if len(table) == 1:
                d = table[0]
                angle = np.full(size, omegas[i] + d.angle)
                flip_p = d.flip
                ks = d.k
            else:
                angle = np.full(size, omegas[i])
                flip_p = np.empty(size)
                ks = np.empty(size, dtype=np.int64)
                for vi, d in enumerate(table):
                    mask = ch == vi
                    if not mask.any():
                        continue
                    angle[mask] += d.angle
                    flip_p[mask] = d.flip
                    ks[mask] = d.k
            if np.any(flip_p):
                angle += np.pi * (rng.random(size) < flip_p)
            if lc is not None:
                n0 = rng.binomial(ks, lc[0], size=size)
                angle += n0 * lc[1] + (ks - n0) * lc[2]
            perm, phase = actions[gen]
            half = angle / 2
            ppsi = psi[perm]
            ppsi *= phase[:, None]
            ppsi *= 1j * np.sin(half)
            psi *= np.cos(half)
            psi += ppsi
        perm, phase = actions[obs]
        outcome = np.real(np.sum(np.conj(psi) * (psi[perm] * phase[:, None]), axis=0))
        vals = cost * sign * outcome
        values.append(vals)
        batch_means.append(float(vals.mean()))
    allv = np.concatenate(values)
    var = float(allv.var(ddof=1)) if n_runs > 1 else 0.0
    return MonteCarloEstimate(
        mean=float(allv.mean()),
        std_error=math.sqrt(var / n_runs),
        n_runs=n_runs,
        sampling_cost_applied=cost,
        run_variance=var,
        batch_means=tuple(batch_means),
        batch_size=batch_size,
    )
