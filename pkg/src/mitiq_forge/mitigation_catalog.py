"""Mitigation methods as plan generators.

A plan lists noisy gate variants (or circuit variants) and the quasi-probability
coefficients that combine them. Every variant here is the original gate with a
modified error channel along the gate's own generator, so a variant is fully
described by a handful of numbers (custom channel, identity insertions, hidden
inverse). The effective channel of a variant on anticommuting Pauli words is a
single complex multiplier; see :meth:`GateVariant.multiplier`.

Coefficient formulas are evaluated as products and ratios before any summation
so that they stay accurate at the high orders that need hundreds of digits.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .errors import (
    DegenerateAmplitudes,
    DegenerateAngles,
    SameSignErrors,
    ScopeMismatch,
    SingularNoise,
    UnsupportedOrder,
)
from .noise_models import NoiseChannelSpec, NoiseKind, stochastic_eigenvalue
from .pauli_algebra import get_context

# Identity insertions used when the analytic TIILM seed diverges (zero noise).
TIILM_SEED_CAP = 10**6


class Scope(str, enum.Enum):
    LOCAL = "Local"
    SYNCHRONOUS = "Synchronous"
    ASYNCHRONOUS = "Asynchronous"


@dataclass(frozen=True)
class GateVariant:
    """A noisy variant of a gate: same ideal action, modified error channel.

    Attributes:
        custom_angle: channel angle ``theta_c`` of an added custom rotation.
        custom_stochastic: flip amplitude ``c`` of an added custom stochastic
            channel (same closure parameter as the gate noise).
        identity_insertions: number ``m`` of (gate, inverse) pairs prefixed,
            raising the elementary channel to the power ``2m+1``.
        hidden_inverse: implement the gate by its hidden inverse, which
            reverses the coherent error.
        exec_time_ratio: duration relative to the original gate.
        tailored: apply the custom channel to every elementary gate (so it is
            amplified by the insertions as well).
        error_angle: if set, the coherent error angle of each elementary gate,
            overriding ``+-phi`` (used by local cancellation with unequal
            angles).
        base: optional template gate this variant belongs to.
    """

    custom_angle: object = 0
    custom_stochastic: object = 0
    identity_insertions: int = 0
    hidden_inverse: bool = False
    exec_time_ratio: object = 1
    tailored: bool = False
    error_angle: object = None
    base: object = None

    def elementary_multiplier(self, spec: NoiseChannelSpec, ctx=None):
        """Multiplier of one elementary noisy gate of this variant."""
        ctx = get_context(ctx)
        lam = stochastic_eigenvalue(spec, ctx)
        if self.error_angle is not None:
            phi = ctx.mpf(self.error_angle)
        else:
            phi = ctx.mpf(spec.phi) * (-1 if self.hidden_inverse else 1)
        return lam * ctx.mp.expj(phi)

    def custom_multiplier(self, spec: NoiseChannelSpec, ctx=None):
        ctx = get_context(ctx)
        a = ctx.mpf(spec.effective_a)
        lam_c = 1 - (1 + a) * ctx.mpf(self.custom_stochastic)
        return lam_c * ctx.mp.expj(ctx.mpf(self.custom_angle))

    def multiplier(self, spec: NoiseChannelSpec, ctx=None, elementary=None):
        """Complex multiplier of the whole variant channel on anticommuting words.

        Args:
            spec: the gate's characterised noise.
            ctx: precision context.
            elementary: optional replacement for the elementary-gate multiplier
                (used after local cancellation).
        """
        ctx = get_context(ctx)
        z_e = self.elementary_multiplier(spec, ctx) if elementary is None else elementary
        z_c = self.custom_multiplier(spec, ctx)
        k = 2 * self.identity_insertions + 1
        if self.tailored:
            return (z_c * z_e) ** k
        return z_c * z_e**k

    def key(self) -> tuple:
        return (
            str(self.custom_angle),
            str(self.custom_stochastic),
            self.identity_insertions,
            self.hidden_inverse,
            self.tailored,
            None if self.error_angle is None else str(self.error_angle),
        )


ORIGINAL = GateVariant()


@dataclass(frozen=True)
class Term:
    """One weighted entry of a plan.

    For local and synchronous plans ``variant`` is the gate variant (applied to
    one gate, or to every gate). Asynchronous plans instead carry ``partition``,
    a tuple of ``(insertions, n_gates)`` pairs describing a class of circuits,
    and ``multiplicity`` circuits share the per-circuit ``coefficient``.
    """

    coefficient: object
    exec_time_ratio: object = 1
    variant: GateVariant | None = None
    partition: tuple = ()
    multiplicity: int = 1

    @property
    def weight(self):
        """Total coefficient of the term, ``multiplicity * coefficient``."""
        return self.multiplicity * self.coefficient


@dataclass(frozen=True)
class LCInfo:
    """Local-cancellation pre-tailoring applied to every elementary gate."""

    coefficients: tuple
    angles: tuple

    def elementary_multiplier(self, spec: NoiseChannelSpec, ctx=None):
        ctx = get_context(ctx)
        lam = stochastic_eigenvalue(spec, ctx)
        total = ctx.mp.mpc(0)
        for c, ang in zip(self.coefficients, self.angles):
            total += c * ctx.mp.expj(ctx.mpf(ang))
        return lam * total


@dataclass(frozen=True)
class MitigationPlan:
    """A mitigation recipe.

    Attributes:
        method: catalogue name, e.g. ``"CLM"`` or ``"IISM:KF"``.
        scope: Local, Synchronous or Asynchronous.
        order: mitigation order (0 for unmitigated plans).
        biased: whether the plan leaves an intrinsic bias.
        per_gate_variants: local plans only; a tuple of per-gate term tuples.
            A single entry applies to every gate of the circuit.
        circuit_variants: synchronous/asynchronous plans only.
        noise: the characterised noise the coefficients were built for.
        params: free-form method parameters (``m_values``, ``n_variants`` ...).
        pretailor: optional local-cancellation pre-tailoring.
        flags: notes raised while building, e.g. optimiser fallbacks.
        digits: precision the coefficients were computed at.
    """

    method: str
    scope: Scope
    order: int
    biased: bool
    per_gate_variants: tuple = ()
    circuit_variants: tuple = ()
    noise: NoiseChannelSpec | None = None
    params: dict = field(default_factory=dict, compare=False)
    pretailor: LCInfo | None = None
    flags: tuple = ()
    digits: int = 64

    @property
    def is_uniform(self) -> bool:
        return self.scope == Scope.LOCAL and len(self.per_gate_variants) == 1

    def local_terms(self, gate_index: int = 0) -> tuple:
        if self.scope != Scope.LOCAL:
            raise ScopeMismatch("plan is not local")
        if self.is_uniform:
            return self.per_gate_variants[0]
        return self.per_gate_variants[gate_index]

    def terms(self) -> tuple:
        """Top-level terms: uniform local terms or the circuit variants."""
        if self.scope == Scope.LOCAL:
            if not self.is_uniform:
                raise ScopeMismatch("concatenated plan has per-gate terms")
            return self.per_gate_variants[0]
        return self.circuit_variants

    def coefficients(self) -> list:
        """Coefficients of :meth:`terms` (class weights for asynchronous plans)."""
        return [t.weight for t in self.terms()]

    def coefficient_sums(self) -> list:
        """Sum of coefficients at every level (each should equal 1)."""
        if self.scope == Scope.LOCAL:
            return [sum(t.coefficient for t in terms) for terms in self.per_gate_variants]
        return [sum(t.weight for t in self.circuit_variants)]

    def to_text(self) -> str:
        return plan_to_text(self)


# ---------------------------------------------------------------------------
# coefficient formulas


def richardson_coefficients(amplitudes, ctx=None) -> list:
    """``c_i = prod_{j != i} x_j / (x_j - x_i)``: cancels polynomials in ``x`` up to degree n-1.

    Raises:
        DegenerateAmplitudes: if two amplitudes coincide.
    """
    ctx = get_context(ctx)
    x = [ctx.mpf(v) for v in amplitudes]
    out = []
    for i, xi in enumerate(x):
        c = ctx.mpf(1)
        for j, xj in enumerate(x):
            if j == i:
                continue
            if xj == xi:
                raise DegenerateAmplitudes(f"amplitudes {i} and {j} coincide")
            c *= xj / (xj - xi)
        out.append(c)
    return out


def sine_product_coefficients(angles, ctx=None) -> list:
    """``c_i = prod_{j != i} sin(a_j/2) / sin((a_j - a_i)/2)``.

    These interpolate trigonometric polynomials through the points
    ``exp(i a_j)``, so ``sum_i c_i exp(+-i k a_i) = 1`` for every ``|k|`` up to
    half the number of angles rounded down.

    Raises:
        DegenerateAngles: if two angles coincide modulo ``2 pi``.
    """
    ctx = get_context(ctx)
    a = [ctx.mpf(v) for v in angles]
    sin = ctx.mp.sin
    tiny = ctx.tol(4)
    out = []
    for i, ai in enumerate(a):
        c = ctx.mpf(1)
        for j, aj in enumerate(a):
            if j == i:
                continue
            den = sin((aj - ai) / 2)
            if abs(den) <= tiny:
                raise DegenerateAngles(f"angles {i} and {j} coincide modulo 2pi")
            c *= sin(aj / 2) / den
        out.append(c)
    return out


def _lagrange_at_zero(nodes) -> list:
    """Exact ``prod_{j != i} x_j / (x_j - x_i)`` for integer or rational nodes."""
    nodes = [Fraction(v) for v in nodes]
    out = []
    for i, xi in enumerate(nodes):
        c = Fraction(1)
        for j, xj in enumerate(nodes):
            if j != i:
                c *= xj / (xj - xi)
        out.append(c)
    return out


def kf_coefficients(order: int, ctx=None) -> list:
    """Knowledge-free identity-insertion coefficients ``prod_{m != i} (2m+1)/(2(m-i))``."""
    ctx = get_context(ctx)
    return [ctx.mpf(c.numerator) / c.denominator for c in _lagrange_at_zero([2 * m + 1 for m in range(order + 1)])]


def _frac(ctx, f: Fraction):
    return ctx.mpf(f.numerator) / f.denominator


def _local_plan(method, spec, terms, order, biased, ctx, **kw) -> MitigationPlan:
    return MitigationPlan(
        method=method,
        scope=Scope.LOCAL,
        order=order,
        biased=biased,
        per_gate_variants=(tuple(terms),),
        noise=spec,
        digits=ctx.digits,
        **kw,
    )


def _sync_plan(method, spec, terms, order, biased, ctx, **kw) -> MitigationPlan:
    return MitigationPlan(
        method=method,
        scope=Scope.SYNCHRONOUS,
        order=order,
        biased=biased,
        circuit_variants=tuple(terms),
        noise=spec,
        digits=ctx.digits,
        **kw,
    )


def _check_kind(spec, allowed, method):
    if spec.kind not in allowed:
        names = ", ".join(k.value for k in allowed)
        raise ValueError(f"{method} supports noise kinds {names}, got {spec.kind.value}")


def identity_plan(ctx=None) -> MitigationPlan:
    """Unmitigated plan: one variant (the original gate) with coefficient 1."""
    ctx = get_context(ctx)
    return _local_plan("Unmitigated", None, [Term(ctx.mpf(1), 1, ORIGINAL)], 0, True, ctx)


# ---------------------------------------------------------------------------
# local methods


def clm_plan(spec: NoiseChannelSpec, clifford_timing: bool = False, ctx=None) -> MitigationPlan:
    """Custom-channel-assisted local mitigation.

    Stochastic noise uses a full-strength custom flip; rotational and
    over-rotational errors use custom rotations by ``pi/2`` and ``3pi/2``.
    ``clifford_timing`` charges the ``3pi/2`` rotation three gate times.
    """
    ctx = get_context(ctx)
    _check_kind(spec, (NoiseKind.SN, NoiseKind.DEPHASING, NoiseKind.RE, NoiseKind.ORE), "CLM")
    if spec.kind in (NoiseKind.SN, NoiseKind.DEPHASING):
        a = ctx.mpf(spec.effective_a)
        p0 = ctx.mpf(spec.p)
        p1 = p0 + (1 - (1 + a) * p0)
        if p1 == p0:
            raise SingularNoise("custom flip does not change the amplitude")
        coefs = [p1 / (p1 - p0), -p0 / (p1 - p0)]
        variants = [ORIGINAL, GateVariant(custom_stochastic=1, exec_time_ratio=2)]
    else:
        phi = ctx.mpf(spec.phi)
        lam = stochastic_eigenvalue(spec, ctx)
        if lam == 0:
            raise SingularNoise("1 - 2p = 0")
        cos, sin = ctx.mp.cos(phi), ctx.mp.sin(phi)
        coefs = [cos / lam, -(cos - lam + sin) / (2 * lam), (lam - cos + sin) / (2 * lam)]
        half = ctx.pi / 2
        variants = [
            ORIGINAL,
            GateVariant(custom_angle=half, exec_time_ratio=2),
            GateVariant(custom_angle=3 * half, exec_time_ratio=3 if clifford_timing else 2),
        ]
    terms = [Term(c, v.exec_time_ratio, v) for c, v in zip(coefs, variants)]
    return _local_plan("CLM", spec, terms, 1, False, ctx, params={"clifford_timing": clifford_timing})


def chilm_plan(spec: NoiseChannelSpec, ctx=None) -> MitigationPlan:
    """Custom-channel-and-hidden-inverse local mitigation (rotations by ``pi`` plus hidden inverse)."""
    ctx = get_context(ctx)
    _check_kind(spec, (NoiseKind.RE, NoiseKind.ORE), "CHILM")
    lam = stochastic_eigenvalue(spec, ctx)
    d = lam * ctx.mp.cos(ctx.mpf(spec.phi))
    if d == 0:
        raise SingularNoise("(1 - 2p) cos(phi) = 0")
    coefs = [ctx.mpf(1) / 2, -(1 - d) / (2 * d), 1 / (2 * d)]
    variants = [
        ORIGINAL,
        GateVariant(custom_angle=ctx.pi, exec_time_ratio=2),
        GateVariant(hidden_inverse=True, exec_time_ratio=1),
    ]
    terms = [Term(c, v.exec_time_ratio, v) for c, v in zip(coefs, variants)]
    return _local_plan("CHILM", spec, terms, 1, False, ctx)


def ciilm_plan(spec: NoiseChannelSpec, ctx=None) -> MitigationPlan:
    """Custom-channel-and-identity-insertion local mitigation.

    Each elementary gate is tailored with a custom rotation whose channel angle
    is ``2pi/3``; variants use 0, 1 and 2 identity insertions.
    """
    ctx = get_context(ctx)
    _check_kind(spec, (NoiseKind.RE,), "CIILM")
    theta = 2 * ctx.pi / 3
    phi = ctx.mpf(spec.phi)
    variants = [
        GateVariant(custom_angle=theta, identity_insertions=j, tailored=True, exec_time_ratio=2 * (2 * j + 1))
        for j in range(3)
    ]
    coefs = sine_product_coefficients([(2 * j + 1) * (theta + phi) for j in range(3)], ctx)
    terms = [Term(c, v.exec_time_ratio, v) for c, v in zip(coefs, variants)]
    return _local_plan("CIILM", spec, terms, 1, False, ctx)


def _zero_limit_coefficients(time_factors, ctx) -> list:
    """Zero-noise limit of eigenvalue/sine-product coefficients with amplification factors ``k_i``."""
    return [_frac(ctx, c) for c in _lagrange_at_zero(time_factors)]


def _insertion_coefficients(spec, m_values, ctx) -> list:
    """Noise-aware coefficients for variants with ``m_values`` identity insertions.

    Stochastic noise: Richardson on the amplified amplitudes. Rotational
    errors: sine products on the amplified angles ``(2m+1) phi``. Zero noise:
    the limit of either, a Lagrange product in ``2m+1``.
    """
    ks = [2 * m + 1 for m in m_values]
    if spec.is_zero():
        return _zero_limit_coefficients(ks, ctx)
    if spec.kind in (NoiseKind.SN, NoiseKind.DEPHASING):
        a = ctx.mpf(spec.effective_a)
        lam = stochastic_eigenvalue(spec, ctx)
        if lam == 0:
            raise DegenerateAmplitudes("stochastic eigenvalue is zero")
        return richardson_coefficients([(1 - lam**k) / (1 + a) for k in ks], ctx)
    if spec.kind == NoiseKind.RE:
        phi = ctx.mpf(spec.phi)
        return sine_product_coefficients([k * phi for k in ks], ctx)
    raise ValueError(f"noise-aware insertion coefficients not defined for {spec.kind.value}")


def iilm_plan(spec: NoiseChannelSpec, order: int, noise_aware: bool, ctx=None) -> MitigationPlan:
    """Identity-insertion local mitigation; variant ``j`` uses ``j`` insertions."""
    ctx = get_context(ctx)
    if order < 1:
        raise UnsupportedOrder("IILM needs order >= 1")
    m_values = list(range(order + 1))
    if noise_aware:
        _check_kind(spec, (NoiseKind.SN, NoiseKind.DEPHASING, NoiseKind.RE), "IILM:NA")
        needed = 2 if spec.kind == NoiseKind.RE else 1
        if order != needed:
            raise UnsupportedOrder(f"IILM:NA for {spec.kind.value} is defined at order {needed}")
        coefs = _insertion_coefficients(spec, m_values, ctx)
    else:
        coefs = kf_coefficients(order, ctx)
    terms = [
        Term(c, 2 * m + 1, GateVariant(identity_insertions=m, exec_time_ratio=2 * m + 1))
        for c, m in zip(coefs, m_values)
    ]
    method = "IILM:NA" if noise_aware else "IILM:KF"
    return _local_plan(method, spec, terms, order, not noise_aware, ctx)


def tiilm_plan(spec: NoiseChannelSpec, n_gates: int, m_values="auto", ctx=None) -> MitigationPlan:
    """Tuned identity-insertion local mitigation.

    Args:
        spec: SN (two variants) or RE (three variants) noise.
        n_gates: circuit size the insertion numbers are tuned for.
        m_values: strictly increasing insertion numbers starting at 0, or
            ``"auto"`` to run :func:`optimize_tiilm`.
    """
    ctx = get_context(ctx)
    spec = _as_sn(spec)
    _check_kind(spec, (NoiseKind.SN, NoiseKind.RE), "TIILM")
    flags = ()
    if isinstance(m_values, str):
        m_values = optimize_tiilm(spec, n_gates)
        if spec.is_zero():
            flags = ("zero-noise: insertion numbers fixed at the seed cap",)
    m_values = [int(m) for m in m_values]
    want = 2 if spec.kind == NoiseKind.SN else 3
    if len(m_values) != want or m_values[0] != 0 or any(b <= a for a, b in zip(m_values, m_values[1:])):
        raise ValueError(f"TIILM for {spec.kind.value} needs {want} strictly increasing m-values starting at 0")
    coefs = _insertion_coefficients(spec, m_values, ctx)
    terms = [
        Term(c, 2 * m + 1, GateVariant(identity_insertions=m, exec_time_ratio=2 * m + 1))
        for c, m in zip(coefs, m_values)
    ]
    return _local_plan(
        "TIILM", spec, terms, want - 1, False, ctx, params={"m_values": tuple(m_values)}, flags=flags
    )


def _as_sn(spec: NoiseChannelSpec) -> NoiseChannelSpec:
    """Dephasing is handled as stochastic noise with ``a = 1``."""
    if spec.kind == NoiseKind.DEPHASING:
        return NoiseChannelSpec(NoiseKind.SN, p=spec.p, a_param=1.0, generator=spec.generator)
    return spec


def tiilm_runtime_scaling(spec: NoiseChannelSpec, n_gates: int, m_values, ctx=None):
    """``S = C_L^(2N) F_L`` of a uniform TIILM plan with the given insertion numbers."""
    ctx = get_context(ctx)
    coefs = _insertion_coefficients(spec, m_values, ctx)
    cost = sum(abs(c) for c in coefs)
    length = sum(abs(c) * (2 * m + 1) for c, m in zip(coefs, m_values)) / cost
    return cost ** (2 * n_gates) * length


def tiilm_seeds(spec: NoiseChannelSpec, n_gates: int) -> list:
    """Analytic small-noise and large-circuit insertion numbers (as floats)."""
    n = n_gates
    if spec.kind == NoiseKind.SN:
        a = spec.effective_a
        e = 2 * spec.p * n
        kappa = math.sqrt(8 - 2 / n)
        return [
            [0.0, kappa / math.sqrt(1 + a) * n / math.sqrt(e)],
            [0.0, math.log(2) / (1 + a) * n / e],
        ]
    e = n * abs(spec.phi)
    kappa1 = math.sqrt(2 / math.pi) * math.sqrt(4 - 1 / n)
    return [
        [0.0, kappa1 * n / math.sqrt(e), math.pi / 2 * n / e],
        [0.0, math.pi / 4 * n / e, 3 * math.pi / 4 * n / e],
    ]


def optimize_tiilm(spec: NoiseChannelSpec, n_gates: int, digits: int = 40) -> list:
    """Integer insertion numbers minimising the TIILM runtime scaling.

    The search starts from the better of the analytic seeds and runs a
    pattern search (steps halving down to 1) inside a window spanning half the
    smallest seed to 1.5 times the largest seed per coordinate. The window is
    widened if the minimum lands on its edge. Among candidates within a
    relative ``1e-12`` of the minimum in the final unit neighbourhood the
    lexicographically smallest is returned. At zero noise the seeds diverge
    and the fixed cap :data:`TIILM_SEED_CAP` is returned instead.
    """
    spec = _as_sn(spec)
    _check_kind(spec, (NoiseKind.SN, NoiseKind.RE), "TIILM")
    if spec.is_zero():
        return [0, TIILM_SEED_CAP] if spec.kind == NoiseKind.SN else [0, TIILM_SEED_CAP, 3 * TIILM_SEED_CAP]
    ctx = get_context(digits)
    dim = 1 if spec.kind == NoiseKind.SN else 2
    cache = {}

    def valid(m):
        return m[0] >= 1 and all(b > a for a, b in zip(m, m[1:]))

    def score(m):
        m = tuple(m)
        if m not in cache:
            if not valid(m):
                cache[m] = ctx.mp.inf
            else:
                try:
                    cache[m] = tiilm_runtime_scaling(spec, n_gates, (0,) + m, ctx)
                except (DegenerateAngles, DegenerateAmplitudes):
                    cache[m] = ctx.mp.inf
        return cache[m]

    seeds = [[max(1, round(x)) for x in s[1:]] for s in tiilm_seeds(spec, n_gates)]
    for s in seeds:
        for d in range(1, dim):
            s[d] = max(s[d], s[d - 1] + 1)
    lo = [max(1, int(0.5 * min(s[d] for s in seeds))) for d in range(dim)]
    hi = [max(lo[d] + 1, int(math.ceil(1.5 * max(s[d] for s in seeds)))) for d in range(dim)]
    best = min(seeds, key=lambda s: (score(s), s))

    while True:
        step = max(1, max(h - l for l, h in zip(lo, hi)) // 4)
        moves = [v for v in itertools.product((-1, 0, 1), repeat=dim) if any(v)]
        while True:
            improved = False
            for v in moves:
                cand = [min(hi[d], max(lo[d], best[d] + step * v[d])) for d in range(dim)]
                if score(cand) < score(best):
                    best, improved = cand, True
            if not improved:
                if step == 1:
                    break
                step = max(1, step // 2)
        on_edge = [d for d in range(dim) if best[d] in (lo[d], hi[d]) and not (best[d] == 1 and lo[d] == 1)]
        if not on_edge:
            break
        for d in on_edge:
            lo[d] = max(1, lo[d] // 2)
            hi[d] = hi[d] * 2

    s_best = score(best)
    tol = s_best * ctx.mpf("1e-12")
    box = [
        [best[d] + v[d] for d in range(dim)]
        for v in itertools.product((-1, 0, 1), repeat=dim)
    ]
    close = [m for m in box if score(m) <= s_best + tol]
    best = min(close)
    return [0] + [int(x) for x in best]


# ---------------------------------------------------------------------------
# synchronous and asynchronous methods


def chism_plan(spec: NoiseChannelSpec, n_variants: int, ctx=None) -> MitigationPlan:
    """Custom-channel-and-hidden-inverse synchronous mitigation with ``N_C`` variants.

    Variant 0 is the original circuit, variants ``0 < i < N_C`` add custom
    rotations with channel angle ``2 pi i / N_C`` to every gate and variant
    ``N_C`` uses hidden inverses throughout. Unbiased at ``N_C = 2 N``.
    """
    ctx = get_context(ctx)
    _check_kind(spec, (NoiseKind.RE,), "CHISM")
    if n_variants < 2 or n_variants % 2:
        raise ValueError("n_variants must be a positive even integer")
    phi = ctx.mpf(spec.phi)
    variants = [ORIGINAL]
    angles = [phi]
    for i in range(1, n_variants):
        theta = 2 * ctx.pi * i / n_variants
        variants.append(GateVariant(custom_angle=theta, exec_time_ratio=2))
        angles.append(phi + theta)
    variants.append(GateVariant(hidden_inverse=True, exec_time_ratio=1))
    angles.append(-phi)
    if phi == 0:
        # original and hidden inverse coincide; take the phi -> 0 limit
        coefs = [ctx.mpf(0)] * (n_variants + 1)
        coefs[0] = coefs[-1] = ctx.mpf(1) / 2
    else:
        coefs = sine_product_coefficients(angles, ctx)
    terms = [Term(c, v.exec_time_ratio, v) for c, v in zip(coefs, variants)]
    return _sync_plan("CHISM", spec, terms, n_variants, True, ctx, params={"n_variants": n_variants})


def csm_plan(spec: NoiseChannelSpec, order: int, ctx=None) -> MitigationPlan:
    """Custom-channel synchronous mitigation of order ``M``.

    Stochastic noise: variant ``i`` adds a custom flip of amplitude
    ``sin^2(i pi / 2M)`` to every gate and Richardson coefficients are used on
    the amplified amplitudes (unbiased at ``M = N``). Rotational errors: custom
    rotations with channel angles ``(2i-1) pi / M`` and sine-product
    coefficients (unbiased at ``M = 2N``).
    """
    ctx = get_context(ctx)
    spec = _as_sn(spec)
    _check_kind(spec, (NoiseKind.SN, NoiseKind.RE), "CSM")
    if order < 1:
        raise UnsupportedOrder("CSM needs order >= 1")
    pi = ctx.pi
    variants = [ORIGINAL]
    if spec.kind == NoiseKind.SN:
        a = ctx.mpf(spec.effective_a)
        p = ctx.mpf(spec.p)
        lam = 1 - (1 + a) * p
        amps = [p]
        for i in range(1, order + 1):
            s = ctx.mp.sin(i * pi / (2 * order)) ** 2
            variants.append(GateVariant(custom_stochastic=s, exec_time_ratio=2))
            amps.append(p + s * lam)
        coefs = richardson_coefficients(amps, ctx)
    else:
        phi = ctx.mpf(spec.phi)
        angles = [phi]
        for i in range(1, order + 1):
            theta = (2 * i - 1) * pi / order
            variants.append(GateVariant(custom_angle=theta, exec_time_ratio=2))
            angles.append(phi + theta)
        coefs = sine_product_coefficients(angles, ctx)
    terms = [Term(c, v.exec_time_ratio, v) for c, v in zip(coefs, variants)]
    return _sync_plan("CSM", spec, terms, order, True, ctx)


def iism_plan(spec: NoiseChannelSpec, order: int, noise_aware: bool, ctx=None) -> MitigationPlan:
    """Identity-insertion synchronous mitigation.

    Variant ``j`` prefixes every gate with ``j`` identity insertions. The
    noise-aware version extrapolates in the exact amplified amplitudes; the
    knowledge-free version uses the ``(2m+1)/(2(m-i))`` products.
    """
    ctx = get_context(ctx)
    if order < 0:
        raise UnsupportedOrder("order must be non-negative")
    m_values = list(range(order + 1))
    if noise_aware:
        spec = _as_sn(spec)
        _check_kind(spec, (NoiseKind.SN, NoiseKind.RE), "IISM:NA")
        coefs = _insertion_coefficients(spec, m_values, ctx)
    else:
        coefs = kf_coefficients(order, ctx)
    terms = [
        Term(c, 2 * m + 1, GateVariant(identity_insertions=m, exec_time_ratio=2 * m + 1))
        for c, m in zip(coefs, m_values)
    ]
    method = "IISM:NA" if noise_aware else "IISM:KF"
    return _sync_plan(method, spec, terms, order, True, ctx)


# IIAM configuration classes: tuple of (insertions, number of gates).
IIAM_CLASSES = (
    ((0, 0),),
    ((1, 1),),
    ((2, 1),),
    ((1, 2),),
    ((3, 1),),
    ((2, 1), (1, 1)),
    ((1, 3),),
    ((4, 1),),
    ((3, 1), (1, 1)),
    ((2, 2),),
    ((2, 1), (1, 2)),
    ((1, 4),),
    ((5, 1),),
    ((4, 1), (1, 1)),
    ((3, 1), (2, 1)),
    ((3, 1), (1, 2)),
    ((2, 2), (1, 1)),
    ((2, 1), (1, 3)),
    ((1, 5),),
)


def _p(n, *shifts):
    out = Fraction(1)
    for s in shifts:
        out *= n + s
    return out


def _iiam_table(n: int, order: int) -> list:
    """Per-circuit class coefficients of the tabulated asynchronous scheme."""
    F = Fraction
    if order == 0:
        return [F(1)]
    if order == 1:
        return [_p(n, 2) / 2, F(-1, 2)]
    if order == 2:
        return [_p(n, 2, 4) / 8, -_p(n, 4) / 4, F(3, 8), F(1, 4)]
    if order == 3:
        return [
            _p(n, 2, 4, 6) / 48, -_p(n, 4, 6) / 16, 3 * _p(n, 6) / 16, _p(n, 6) / 8,
            F(-5, 16), F(-3, 16), F(-1, 8),
        ]
    if order == 4:
        return [
            _p(n, 2, 4, 6, 8) / 384, -_p(n, 4, 6, 8) / 96, 3 * _p(n, 6, 8) / 64, _p(n, 6, 8) / 32,
            -5 * _p(n, 8) / 32, -3 * _p(n, 8) / 32, -_p(n, 8) / 16,
            F(35, 128), F(5, 32), F(9, 64), F(3, 32), F(1, 16),
        ]
    if order == 5:
        return [
            _p(n, 2, 4, 6, 8, 10) / 3840, -_p(n, 4, 6, 8, 10) / 768,
            _p(n, 6, 8, 10) / 128, _p(n, 6, 8, 10) / 192,
            -5 * _p(n, 8, 10) / 128, -3 * _p(n, 8, 10) / 128, -_p(n, 8, 10) / 64,
            35 * _p(n, 10) / 256, 5 * _p(n, 10) / 64, 9 * _p(n, 10) / 128, 3 * _p(n, 10) / 64, _p(n, 10) / 32,
            F(-63, 256), F(-35, 256), F(-15, 128), F(-5, 64), F(-9, 128), F(-3, 64), F(-1, 32),
        ]
    raise UnsupportedOrder("asynchronous coefficients are tabulated for orders 0-5")


def iiam_class_multiplicity(n_gates: int, partition) -> int:
    """Number of distinct circuits in a configuration class."""
    used = sum(count for ins, count in partition if ins > 0)
    if used > n_gates:
        return 0
    out = math.factorial(n_gates) // math.factorial(n_gates - used)
    for ins, count in partition:
        if ins > 0:
            out //= math.factorial(count)
    return out


def iiam_exact_coefficients(n_gates: int, order: int) -> list:
    """``(partition, multiplicity, coefficient)`` triples as exact fractions."""
    coefs = _iiam_table(n_gates, order)
    out = []
    for part, c in zip(IIAM_CLASSES, coefs):
        out.append((part, iiam_class_multiplicity(n_gates, part), c))
    return out


def iiam_plan(n_gates: int, order: int, ctx=None, spec: NoiseChannelSpec | None = None) -> MitigationPlan:
    """Identity-insertion asynchronous mitigation from the tabulated coefficients.

    Class ``(m, j)`` contains every circuit with ``m`` insertions distributed as
    the partition prescribes; its circuits share one coefficient and take
    ``1 + 2m/N`` times the original duration.
    """
    ctx = get_context(ctx)
    if order < 0 or order > 5:
        raise UnsupportedOrder("asynchronous coefficients are tabulated for orders 0-5")
    terms = []
    for part, mult, c in iiam_exact_coefficients(n_gates, order):
        if mult == 0:
            continue
        m = sum(ins * count for ins, count in part)
        tau = 1 + _frac(ctx, Fraction(2 * m, n_gates))
        terms.append(Term(_frac(ctx, c), tau, None, tuple(p for p in part if p[0] > 0), mult))
    return MitigationPlan(
        method="IIAM",
        scope=Scope.ASYNCHRONOUS,
        order=order,
        biased=True,
        circuit_variants=tuple(terms),
        noise=spec,
        params={"n_gates": n_gates},
        digits=ctx.digits,
    )


# ---------------------------------------------------------------------------
# local cancellation


def lc_pretailor(spec: NoiseChannelSpec, phi0=None, phi1=None, ctx=None):
    """Local cancellation of opposing rotational errors.

    Mixes the original gate (error ``phi0``) and its hidden inverse (error
    ``phi1``) with probabilities ``(-sin phi1, sin phi0)/(sin phi0 - sin phi1)``
    so the coherent part cancels. Defaults to the symmetric pair
    ``(phi, -phi)``.

    Returns:
        ``(plan, residual)`` where ``residual`` is the stochastic channel
        ``SN(p_LC, a=1)`` left behind.

    Raises:
        SameSignErrors: unless ``phi0 * phi1 < 0``.
        DegenerateAngles: if ``sin phi0 = sin phi1``.
    """
    ctx = get_context(ctx)
    _check_kind(spec, (NoiseKind.RE,), "LC")
    phi0 = ctx.mpf(spec.phi if phi0 is None else phi0)
    phi1 = -phi0 if phi1 is None else ctx.mpf(phi1)
    if not phi0 * phi1 < 0:
        raise SameSignErrors("local cancellation needs opposing rotational errors")
    s0, s1 = ctx.mp.sin(phi0), ctx.mp.sin(phi1)
    den = s0 - s1
    if abs(den) <= ctx.tol(4):
        raise DegenerateAngles("sin(phi0) = sin(phi1)")
    l0, l1 = -s1 / den, s0 / den
    p_lc = (1 - ctx.mp.sin(phi0 - phi1) / den) / 2
    variants = [
        GateVariant(error_angle=phi0, exec_time_ratio=1),
        GateVariant(hidden_inverse=True, error_angle=phi1, exec_time_ratio=1),
    ]
    terms = [Term(l0, 1, variants[0]), Term(l1, 1, variants[1])]
    plan = _local_plan(
        "LC-", spec, terms, 0, True, ctx, params={"phi0": phi0, "phi1": phi1, "p_lc": p_lc}
    )
    residual = NoiseChannelSpec(NoiseKind.SN, p=p_lc, a_param=1.0)
    return plan, residual


def lc_info(plan: MitigationPlan) -> LCInfo:
    """Pre-tailoring record extracted from a plan built by :func:`lc_pretailor`."""
    terms = plan.terms()
    return LCInfo(tuple(t.coefficient for t in terms), (plan.params["phi0"], plan.params["phi1"]))


def with_pretailor(plan: MitigationPlan, lc_plan: MitigationPlan) -> MitigationPlan:
    """Attach local cancellation to a plan built for the residual channel."""
    return replace(plan, method="LC-" + plan.method, pretailor=lc_info(lc_plan))


# ---------------------------------------------------------------------------
# composition and concatenation


def _compose_variants(va: GateVariant, vb: GateVariant) -> GateVariant:
    if va.tailored or vb.tailored or va.error_angle is not None or vb.error_angle is not None:
        raise ValueError("cannot compose tailored or pre-cancelled variants")
    ca, cb = va.custom_stochastic, vb.custom_stochastic
    # custom flips compose like closed stochastic channels (a = 1 form)
    c = ca + cb - 2 * ca * cb
    return GateVariant(
        custom_angle=va.custom_angle + vb.custom_angle,
        custom_stochastic=c,
        identity_insertions=va.identity_insertions + vb.identity_insertions,
        hidden_inverse=va.hidden_inverse != vb.hidden_inverse,
        exec_time_ratio=va.exec_time_ratio + vb.exec_time_ratio - 1,
    )


def compose_plans(a: MitigationPlan, b: MitigationPlan) -> MitigationPlan:
    """Cartesian-product composition of two plans of the same scope.

    Coefficients multiply and durations add (``tau = tau_a + tau_b - 1``), so
    the sampling cost is the product of costs and the length factor is
    ``F_a + F_b - 1``. The caller asserts that the two plans' variants commute.
    """
    if a.scope != b.scope or a.scope == Scope.ASYNCHRONOUS:
        raise ScopeMismatch("can only compose two local or two synchronous plans")
    terms = []
    for ta, tb in itertools.product(a.terms(), b.terms()):
        v = _compose_variants(ta.variant, tb.variant)
        terms.append(Term(ta.coefficient * tb.coefficient, v.exec_time_ratio, v))
    fields = dict(
        method=f"{a.method}*{b.method}",
        scope=a.scope,
        order=a.order + b.order,
        biased=a.biased and b.biased,
        noise=a.noise or b.noise,
        digits=max(a.digits, b.digits),
    )
    if a.scope == Scope.LOCAL:
        return MitigationPlan(per_gate_variants=(tuple(terms),), **fields)
    return MitigationPlan(circuit_variants=tuple(terms), **fields)


def concatenate_local(plans) -> MitigationPlan:
    """Concatenate one local plan per gate into a single per-gate plan."""
    plans = list(plans)
    if not plans:
        raise ValueError("need at least one plan")
    per_gate = []
    for p in plans:
        if p.scope != Scope.LOCAL or not p.is_uniform:
            raise ScopeMismatch("concatenation takes single-gate local plans")
        per_gate.append(p.per_gate_variants[0])
    return MitigationPlan(
        method="+".join(sorted({p.method for p in plans})),
        scope=Scope.LOCAL,
        order=max(p.order for p in plans),
        biased=any(p.biased for p in plans),
        per_gate_variants=tuple(per_gate),
        noise=plans[0].noise,
        digits=max(p.digits for p in plans),
    )


def concatenation_index(i: int, sizes) -> list:
    """Mixed-radix digits: the variant of each gate used by global variant ``i``.

    ``sizes[n]`` is the number of variants of gate ``n``; gate 0 is the
    fastest-varying digit.
    """
    out = []
    for s in sizes:
        out.append(i % s)
        i //= s
    return out


def expand_local(plan: MitigationPlan, n_gates: int) -> list:
    """Every global circuit variant of a local plan as ``(coefficient, [variant per gate])``."""
    per_gate = [plan.local_terms(g) for g in range(n_gates)]
    sizes = [len(t) for t in per_gate]
    total = math.prod(sizes)
    out = []
    for i in range(total):
        digits = concatenation_index(i, sizes)
        coef = 1
        chosen = []
        for g, d in enumerate(digits):
            coef = coef * per_gate[g][d].coefficient
            chosen.append(per_gate[g][d])
        out.append((coef, chosen))
    return out


# ---------------------------------------------------------------------------
# dispatcher

METHODS = (
    "Unmitigated",
    "CLM",
    "CHILM",
    "CHISM",
    "CIILM",
    "CSM",
    "IIAM",
    "IILM:KF",
    "IILM:NA",
    "IISM:KF",
    "IISM:NA",
    "TIILM",
    "LC-",
    "LC-CLM",
    "LC-CSM",
    "LC-IIAM",
    "LC-IISM",
    "LC-TIILM",
)

_ALIASES = {m.lower().replace(":", "-").replace("_", "-"): m for m in METHODS}
_ALIASES.update({"unmitigated": "Unmitigated", "none": "Unmitigated", "lc": "LC-", "lc-": "LC-"})


def canonical_method(name: str) -> str:
    key = str(name).strip().lower().replace(":", "-").replace("_", "-")
    if key in _ALIASES:
        return _ALIASES[key]
    raise ValueError(f"unknown mitigation method {name!r}")


def full_order(method: str, spec: NoiseChannelSpec, n_gates: int) -> int | None:
    """Order at which a synchronous method becomes unbiased on ``n_gates`` gates."""
    method = canonical_method(method)
    base = method[3:] if method.startswith("LC-") and method != "LC-" else method
    rotational = spec.kind == NoiseKind.RE and not method.startswith("LC-")
    if base == "CSM":
        return 2 * n_gates if rotational else n_gates
    if base == "CHISM":
        return 2 * n_gates
    if base == "IISM:NA" or base == "IISM":
        return 2 * n_gates if rotational else n_gates
    return None


def build_plan(method: str, spec: NoiseChannelSpec, n_gates: int, order=None, ctx=None, **kw) -> MitigationPlan:
    """Build any catalogued plan by name.

    ``order=None`` picks the unbiased configuration for order-parametrised
    synchronous methods and order 1 for the knowledge-free ones. LC methods
    pre-tailor the rotational error with the symmetric hidden-inverse pair and
    build the named method for the residual stochastic channel.
    """
    ctx = get_context(ctx)
    method = canonical_method(method)
    if method.startswith("LC-"):
        lc, residual = lc_pretailor(spec, kw.pop("phi0", None), kw.pop("phi1", None), ctx)
        if method == "LC-":
            return lc
        inner = method[3:]
        if inner == "IISM":
            inner = "IISM:NA"
        plan = build_plan(inner, residual, n_gates, order, ctx, **kw)
        return with_pretailor(plan, lc)
    if method == "Unmitigated":
        return replace(identity_plan(ctx), noise=spec)
    if method == "CLM":
        return clm_plan(spec, kw.get("clifford_timing", False), ctx)
    if method == "CHILM":
        return chilm_plan(spec, ctx)
    if method == "CIILM":
        return ciilm_plan(spec, ctx)
    if method == "CHISM":
        return chism_plan(spec, order or 2 * n_gates, ctx)
    if method == "CSM":
        return csm_plan(spec, order or full_order("CSM", spec, n_gates), ctx)
    if method == "IIAM":
        return iiam_plan(n_gates, 1 if order is None else order, ctx, spec)
    if method == "IILM:KF":
        return iilm_plan(spec, order or 1, False, ctx)
    if method == "IILM:NA":
        return iilm_plan(spec, 2 if spec.kind == NoiseKind.RE else 1, True, ctx)
    if method == "IISM:KF":
        return iism_plan(spec, 1 if order is None else order, False, ctx)
    if method == "IISM:NA":
        return iism_plan(spec, full_order("IISM:NA", spec, n_gates) if order is None else order, True, ctx)
    if method == "TIILM":
        return tiilm_plan(spec, n_gates, kw.get("m_values", "auto"), ctx)
    raise ValueError(f"unknown mitigation method {method!r}")


# ---------------------------------------------------------------------------
# text serialisation


def _num(ctx_digits, x) -> str:
    if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    ctx = get_context(ctx_digits)
    x = ctx.mpf(x)
    if x == ctx.mp.floor(x) and abs(x) < 10**15:
        return str(int(x))
    # enough digits to recover the binary value exactly when parsed back
    exact = int(ctx.mp.prec * math.log10(2)) + 2
    return ctx.mp.nstr(x, exact, min_fixed=-1, max_fixed=-1)


def _parse_num(text: str, digits: int):
    """Floats stay floats when they round-trip; longer digit strings become mpf."""
    value = float(text)
    if repr(value) == text:
        return value
    return get_context(digits).mpf(text)


def _term_line(plan, t: Term) -> str:
    parts = [f"coef={_num(plan.digits, t.coefficient)}", f"tau={_num(plan.digits, t.exec_time_ratio)}"]
    v = t.variant
    if v is not None:
        parts += [
            f"angle={_num(plan.digits, v.custom_angle)}",
            f"stoch={_num(plan.digits, v.custom_stochastic)}",
            f"ins={v.identity_insertions}",
            f"hi={int(v.hidden_inverse)}",
            f"tailored={int(v.tailored)}",
            f"err={'none' if v.error_angle is None else _num(plan.digits, v.error_angle)}",
        ]
    if t.partition or t.multiplicity != 1 or v is None:
        part = ",".join(f"{i}:{c}" for i, c in t.partition) or "-"
        parts += [f"mult={t.multiplicity}", f"part={part}"]
    return "term " + " ".join(parts)


def plan_to_text(plan: MitigationPlan) -> str:
    """Line-oriented text form of a plan.

    ``plan <method> <scope> order=<m> biased=<0|1> digits=<d>`` is followed by
    ``param <key> <value>`` lines, optional ``lc <coef> <angle>`` lines for
    pre-tailoring, and ``term`` lines carrying the coefficient digits and the
    variant fields. Local plans group their terms under ``gate <index>``
    headers (``gate *`` for a plan shared by every gate).
    """
    lines = [
        f"plan {plan.method} {plan.scope.value} order={plan.order} biased={int(plan.biased)} digits={plan.digits}"
    ]
    if plan.noise is not None:
        n = plan.noise
        lines.append(
            f"noise {n.kind.value} p={_num(plan.digits, n.p)} phi={_num(plan.digits, n.phi)} a={_num(plan.digits, n.a_param)}"
        )
    for k in sorted(plan.params):
        lines.append(f"param {k} {plan.params[k] if not hasattr(plan.params[k], '_mpf_') else _num(plan.digits, plan.params[k])}")
    for f in plan.flags:
        lines.append(f"flag {f}")
    if plan.pretailor is not None:
        for c, ang in zip(plan.pretailor.coefficients, plan.pretailor.angles):
            lines.append(f"lc {_num(plan.digits, c)} {_num(plan.digits, ang)}")
    if plan.scope == Scope.LOCAL:
        for g, terms in enumerate(plan.per_gate_variants):
            lines.append("gate *" if plan.is_uniform else f"gate {g}")
            lines.extend(_term_line(plan, t) for t in terms)
    else:
        lines.extend(_term_line(plan, t) for t in plan.circuit_variants)
    return "\n".join(lines) + "\n"


def plan_from_text(text: str) -> MitigationPlan:
    """Parse :func:`plan_to_text` output (params are kept as strings)."""
    header = None
    noise = None
    params, flags, lc = {}, [], []
    groups, current = [], None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "plan":
            kv = dict(t.split("=", 1) for t in tok[3:])
            header = (tok[1], Scope(tok[2]), int(kv["order"]), bool(int(kv["biased"])), int(kv["digits"]))
        elif tok[0] == "noise":
            kv = dict(t.split("=", 1) for t in tok[2:])
            noise = NoiseChannelSpec(
                NoiseKind.parse(tok[1]),
                *(_parse_num(kv[k], header[4]) for k in ("p", "phi", "a")),
            )
        elif tok[0] == "param":
            params[tok[1]] = " ".join(tok[2:])
        elif tok[0] == "flag":
            flags.append(line[5:])
        elif tok[0] == "lc":
            lc.append((tok[1], tok[2]))
        elif tok[0] == "gate":
            current = []
            groups.append(current)
        elif tok[0] == "term":
            if header is None:
                raise ValueError("term before plan header")
            ctx = get_context(header[4])
            kv = dict(t.split("=", 1) for t in tok[1:])
            variant = None
            if "ins" in kv:
                variant = GateVariant(
                    custom_angle=ctx.mpf(kv["angle"]),
                    custom_stochastic=ctx.mpf(kv["stoch"]),
                    identity_insertions=int(kv["ins"]),
                    hidden_inverse=bool(int(kv["hi"])),
                    exec_time_ratio=ctx.mpf(kv["tau"]),
                    tailored=bool(int(kv["tailored"])),
                    error_angle=None if kv["err"] == "none" else ctx.mpf(kv["err"]),
                )
            part = ()
            if kv.get("part", "-") != "-":
                part = tuple(tuple(int(x) for x in p.split(":")) for p in kv["part"].split(","))
            term = Term(ctx.mpf(kv["coef"]), ctx.mpf(kv["tau"]), variant, part, int(kv.get("mult", 1)))
            if current is None:
                current = []
                groups.append(current)
            current.append(term)
        else:
            raise ValueError(f"unknown plan directive {tok[0]!r}")
    if header is None:
        raise ValueError("missing plan header")
    method, scope, order, biased, digits = header
    ctx = get_context(digits)
    pretailor = None
    if lc:
        pretailor = LCInfo(tuple(ctx.mpf(c) for c, _ in lc), tuple(ctx.mpf(a) for _, a in lc))
    common = dict(
        method=method, scope=scope, order=order, biased=biased, noise=noise,
        params=params, pretailor=pretailor, flags=tuple(flags), digits=digits,
    )
    if scope == Scope.LOCAL:
        return MitigationPlan(per_gate_variants=tuple(tuple(g) for g in groups), **common)
    return MitigationPlan(circuit_variants=tuple(t for g in groups for t in g), **common)
