"""Qualitative certification of mitigation methods and robustness analysis.

A method is probed numerically for each criterion:

* scalable: the runtime scaling at a fixed noise level settles as the circuit
  grows;
* efficient: the runtime scaling tends to 1 with the noise level, at least
  linearly;
* precise: the mitigated noise level is zero, or falls to zero with the order;
* unbounded: the noise boundary keeps growing with the tolerated runtime
  scaling (or with the circuit size);
* robust: imperfect variant generation leaves the metrics unchanged to leading
  order (Yes) or changes only their coefficients (Quasi).

The robustness probe works per ingredient of the method's plan. Custom
channels are tested with perturbed CLM coefficients, hidden inverses (and local
cancellation, which is built from them) with perturbed CHILM runtime scaling,
and noise-aware identity insertions with an imperfect inverse-gate channel.
"""

from __future__ import annotations

import enum
import math
from collections import namedtuple
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import InvalidFactors, NoSolution, SingularSystem
from .metrics import (
    MetricsReport,
    NoClosedForm,
    PROBE_ORDERS,
    log_runtime_scaling,
    mitigated_proxy_bias,
    noise_boundary,
    probe_spec,
)
from .mitigation_catalog import (
    Scope,
    build_plan,
    canonical_method,
    richardson_coefficients,
)
from .noise_models import NoiseChannelSpec, NoiseKind, ore
from .pauli_algebra import get_context


class Verdict(str, enum.Enum):
    YES = "Yes"
    QUASI = "Quasi"
    NO = "No"
    NOT_TESTED = "NotTested"


_RANK = {Verdict.NO: 0, Verdict.QUASI: 1, Verdict.YES: 2}


@dataclass(frozen=True)
class Criterion:
    """One verdict together with the probe data behind it."""

    verdict: Verdict
    evidence: dict = field(default_factory=dict)
    note: str = ""


@dataclass(frozen=True)
class CertificationVerdict:
    method: str
    noise_kind: NoiseKind
    scalable: Criterion
    unbounded: Criterion
    precise: Criterion
    efficient: Criterion
    robust: Criterion

    def as_dict(self) -> dict:
        return {name: getattr(self, name).verdict for name in CRITERIA}

    @property
    def label(self) -> str:
        """Compact certification label, e.g. ``SUPER`` or ``SUPEqR``.

        Criteria that fail are dropped; a quasi-robust method gets ``qR``.
        """
        out = ""
        for name, letter in zip(CRITERIA, "SUPER"):
            v = getattr(self, name).verdict
            if v == Verdict.YES:
                out += letter
            elif v == Verdict.QUASI:
                out += "q" + letter
        return out or "-"


CRITERIA = ("scalable", "unbounded", "precise", "efficient", "robust")


@dataclass(frozen=True)
class CertificationProbes:
    """Sweep configuration for :func:`certify`."""

    scaling_noise: float = 0.1
    scaling_sizes: tuple = (18, 180, 1800)
    scaling_tolerance: float = 0.01
    efficiency_sizes: int = 18
    efficiency_noise: tuple = (0.1, 0.01, 0.001)
    precision_noise: float = 0.1
    precision_size: int = 180
    precision_orders: tuple = (1, 2, 3, 4, 5)
    boundary_bias: float = 0.1
    boundary_sizes: tuple = (180, 1800)
    boundary_scalings: tuple = (10.0, 1e3, 1e6)
    robust_size: int = 18
    robust_noise: float = 0.1
    a: float = 1.0
    digits: int = 40


# methods whose tabulated robustness holds in the small-noise regime only
SMALL_NOISE_ROBUST = frozenset({"CSM", "IISM:NA", "LC-CSM", "LC-IISM"})

GOLDEN_METHODS = {
    NoiseKind.SN: ("Unmitigated", "CLM", "CSM", "IIAM", "IILM:KF", "IILM:NA", "IISM:KF", "IISM:NA", "TIILM"),
    NoiseKind.RE: (
        "Unmitigated", "CHILM", "CHISM", "CIILM", "CLM", "CSM", "IIAM", "IILM:KF", "IILM:NA",
        "IISM:KF", "IISM:NA", "LC-", "LC-CLM", "LC-CSM", "LC-IIAM", "LC-IISM", "LC-TIILM", "TIILM",
    ),
}


def _kind(noise_kind) -> NoiseKind:
    kind = NoiseKind.parse(noise_kind)
    return NoiseKind.SN if kind == NoiseKind.DEPHASING else kind


# ---------------------------------------------------------------------------
# individual probes


def probe_scalable(method, kind, probes: CertificationProbes) -> Criterion:
    logs = [
        log_runtime_scaling(method, kind, probes.scaling_noise, n, a=probes.a, digits=probes.digits)
        for n in probes.scaling_sizes
    ]
    rel = math.expm1(min(logs[-1] - logs[-2], 700.0))
    decreasing = all(b <= a for a, b in zip(logs, logs[1:]))
    ok = rel < probes.scaling_tolerance or decreasing
    return Criterion(
        Verdict.YES if ok else Verdict.NO,
        {"sizes": probes.scaling_sizes, "log_runtime_scaling": logs, "relative_change": rel},
    )


def probe_efficient(method, kind, probes: CertificationProbes) -> Criterion:
    n = probes.efficiency_sizes
    excess = [
        math.expm1(log_runtime_scaling(method, kind, e, n, a=probes.a, digits=probes.digits))
        for e in probes.efficiency_noise
    ]
    if all(x < 1e-12 for x in excess):
        ok = True
    else:
        drops = all(b <= a / 3 for a, b in zip(excess, excess[1:]))
        ok = excess[-1] < 0.1 and drops
    return Criterion(
        Verdict.YES if ok else Verdict.NO,
        {"noise_levels": probes.efficiency_noise, "excess_runtime_scaling": excess},
    )


def probe_precise(method, kind, probes: CertificationProbes) -> Criterion:
    spec = probe_spec(kind, probes.precision_noise, probes.precision_size, probes.a)
    n = probes.precision_size
    default = mitigated_proxy_bias(method, spec, n)
    if default is not NoClosedForm and default == 0:
        return Criterion(Verdict.YES, {"default_bias": 0.0})
    levels = [mitigated_proxy_bias(method, spec, n, m) for m in probes.precision_orders]
    if any(x is NoClosedForm for x in levels):
        return Criterion(Verdict.NOT_TESTED, {"orders": probes.precision_orders}, "no closed form")
    levels = [float(x) for x in levels]
    decreasing = all(b < a for a, b in zip(levels, levels[1:]))
    ok = decreasing and levels[-1] / levels[0] < 1e-3
    return Criterion(
        Verdict.YES if ok else Verdict.NO,
        {"orders": probes.precision_orders, "mitigated_noise_level": levels},
    )


def _boundary(method, kind, bias, scaling, n, a):
    concat = (canonical_method(method), kind) in (("CSM", NoiseKind.RE), ("CHISM", NoiseKind.RE))
    try:
        return noise_boundary(method, kind, bias, scaling, n_gates=n, a=a, concatenate=concat)
    except NoSolution:
        # unaffordable at any noise level: the circuit is run unmitigated
        return bias


def probe_unbounded(method, kind, probes: CertificationProbes) -> Criterion:
    b = probes.boundary_bias
    grid = {
        n: [_boundary(method, kind, b, s, n, probes.a) for s in probes.boundary_scalings]
        for n in probes.boundary_sizes
    }
    n_small, n_big = probes.boundary_sizes
    r_n = grid[n_big][-1] / grid[n_small][-1]
    evidence = {"scalings": probes.boundary_scalings, "boundaries": grid, "size_ratio": r_n}
    if r_n >= 2:
        return Criterion(Verdict.YES, evidence, "grows with circuit size")
    if r_n <= 0.5:
        return Criterion(Verdict.NO, evidence, "shrinks with circuit size")
    s = np.log10(probes.boundary_scalings)
    e = grid[n_big]
    if not all(math.isfinite(x) for x in e):
        return Criterion(Verdict.YES, evidence, "no finite boundary")
    s1 = (e[1] - e[0]) / (s[1] - s[0])
    s2 = (e[2] - e[1]) / (s[2] - s[1])
    evidence.update(slope_low=s1, slope_high=s2)
    ok = s1 > 0 and s2 >= 0.5 * s1
    return Criterion(Verdict.YES if ok else Verdict.NO, evidence, "" if ok else "plateaus")


def plan_ingredients(plan) -> set:
    """Variant-generation ingredients a plan relies on.

    ``custom`` (custom channels), ``hidden_inverse`` (hidden inverses or local
    cancellation), ``na_insertions`` (identity insertions with noise-aware
    coefficients) and ``kf_insertions`` (identity insertions whose
    coefficients do not depend on the noise).
    """
    out = set()
    if plan.pretailor is not None or plan.method == "LC-":
        out.add("hidden_inverse")
    if plan.scope == Scope.ASYNCHRONOUS:
        out.add("kf_insertions")
        return out
    groups = plan.per_gate_variants if plan.scope == Scope.LOCAL else (plan.circuit_variants,)
    knowledge_free = plan.method.endswith(":KF")
    for terms in groups:
        for t in terms:
            v = t.variant
            if v.custom_angle or v.custom_stochastic:
                out.add("custom")
            if v.hidden_inverse:
                out.add("hidden_inverse")
            if v.identity_insertions:
                out.add("kf_insertions" if knowledge_free else "na_insertions")
    return out


def _custom_channel_check(p, phi) -> tuple:
    """Largest deviation of perturbed CLM coefficients from their y=1 values."""
    base = perturbed_clm_coefficients(ore(p, phi), PerturbationFactors())
    worst = 0.0
    for y in (0.5, 2.0):
        f = PerturbationFactors(y_S_P=y, y_R_P=y, y_S_S=y, y_R_S=y)
        c = perturbed_clm_coefficients(ore(p, phi), f)
        worst = max(worst, max(abs(float(x - b)) for x, b in zip(c, base)))
    return worst, 10 * (p * p + p * phi + phi * phi)


def _leading_log(fn, e) -> tuple:
    """Leading exponent and coefficient of ``fn(e)`` from the values at ``e`` and ``e/2``."""
    hi, lo = fn(e), fn(e / 2)
    order = math.log2(hi / lo)
    return order, hi / e**order


def _classify(base, perturbed, rtol=1e-3) -> Verdict:
    (o0, k0), (o1, k1) = base, perturbed
    if abs(o1 - o0) > 0.25:
        return Verdict.NO
    if abs(k1 - k0) <= rtol * abs(k0):
        return Verdict.YES
    return Verdict.QUASI


def probe_robust(method, kind, probes: CertificationProbes) -> Criterion:
    n = probes.robust_size
    spec = probe_spec(kind, probes.robust_noise, n, probes.a)
    plan = build_plan(method, spec, n, PROBE_ORDERS.get(canonical_method(method)), get_context(probes.digits))
    ingredients = plan_ingredients(plan)
    evidence = {"ingredients": sorted(ingredients)}
    verdicts = [Verdict.YES]
    p, phi = 1e-4, 2e-4
    if "custom" in ingredients:
        dev, bound = _custom_channel_check(p, phi)
        evidence["custom_deviation"] = (dev, bound)
        verdicts.append(Verdict.YES if dev <= bound else Verdict.QUASI)
    if "hidden_inverse" in ingredients:
        def log_s(factors):
            return lambda e: float(
                mpmath.log(perturbed_chilm_metrics(ore(e / (2 * n), 0.0), factors, n).runtime_scaling)
            )

        base = _leading_log(log_s(PerturbationFactors()), 0.01)
        pert = _leading_log(log_s(PerturbationFactors(y_S_HI=0.5)), 0.01)
        evidence["hidden_inverse_leading"] = (base, pert)
        verdicts.append(_classify(base, pert))
    if "na_insertions" in ingredients:
        # the cost is zeroth order in the noise; only its value can move
        base = (0.0, float(iism_na_robustness(0.01 / (2 * n), 1.0, 1, n).cost))
        pert = (0.0, float(iism_na_robustness(0.01 / (2 * n), 0.5, 1, n).cost))
        evidence["insertion_cost"] = (base[1], pert[1])
        verdicts.append(_classify(base, pert))
    verdict = min(verdicts, key=_RANK.get)
    note = "small-noise" if canonical_method(method) in SMALL_NOISE_ROBUST else ""
    return Criterion(verdict, evidence, note)


def certify(method: str, noise_kind, probes: CertificationProbes | None = None) -> CertificationVerdict:
    """Run every criterion probe for one method and noise kind.

    Pairs outside the reference method sets get ``NotTested`` throughout.
    """
    probes = probes or CertificationProbes()
    method = canonical_method(method)
    kind = _kind(noise_kind)
    if kind not in GOLDEN_METHODS or method not in GOLDEN_METHODS[kind]:
        blank = Criterion(Verdict.NOT_TESTED, {}, "untabulated method and noise kind")
        return CertificationVerdict(method, kind, blank, blank, blank, blank, blank)
    return CertificationVerdict(
        method,
        kind,
        probe_scalable(method, kind, probes),
        probe_unbounded(method, kind, probes),
        probe_precise(method, kind, probes),
        probe_efficient(method, kind, probes),
        probe_robust(method, kind, probes),
    )


# ---------------------------------------------------------------------------
# perturbed variant generation


@dataclass(frozen=True)
class PerturbationFactors:
    """Noise scale factors of the gates used to generate variants.

    ``*_HI`` apply to the hidden-inverse procedure, ``*_P`` to the pi
    rotations, ``*_S`` to the pi/2 rotations (``S`` stochastic, ``R``
    rotational). ``y_dagger`` scales the inverse gate's channel in identity
    insertions.
    """

    y_S_HI: float = 1.0
    y_R_HI: float = 1.0
    y_S_P: float = 1.0
    y_R_P: float = 1.0
    y_S_S: float = 1.0
    y_R_S: float = 1.0
    y_dagger: float = 1.0

    def __post_init__(self):
        for name in ("y_S_HI", "y_R_HI", "y_S_P", "y_R_P", "y_S_S", "y_R_S", "y_dagger"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidFactors(f"{name} must be finite")
            if name != "y_dagger" and v < 0:
                raise InvalidFactors(f"{name} must be non-negative")


def _solve_local(rows, ctx):
    """Solve the 3x3 local system ``sum c = 1``, ``sum c Re z = 1``, ``sum c Im z = 0``."""
    mp = ctx.mp
    a = mp.matrix(rows)
    if abs(mp.det(a)) <= ctx.tol(8):
        raise SingularSystem("variant system is singular")
    return list(mp.lu_solve(a, mp.matrix([1, 1, 0])))


def perturbed_clm_coefficients(spec: NoiseChannelSpec, y: PerturbationFactors, ctx=None) -> list:
    """CLM coefficients when the custom rotations are themselves noisy.

    Variant ``j`` has flip amplitude ``p_j`` and angle ``phi_j``:
    ``(p, phi)``, ``((1+y_S_S)p, (1+y_R_S)phi + pi/2)`` and
    ``((1+y_S_S+y_S_P)p, (1+y_R_S+y_R_P)phi + 3pi/2)``. To first order the
    result is ``(1+2p, -p-phi/2, -p+phi/2)`` whatever the factors.

    Raises:
        SingularSystem: if the variants cannot separate the noise.
    """
    ctx = get_context(ctx)
    mp = ctx.mp
    p, phi = ctx.mpf(spec.p), ctx.mpf(spec.phi)
    half = mp.pi / 2
    amps = [p, (1 + y.y_S_S) * p, (1 + y.y_S_S + y.y_S_P) * p]
    angles = [phi, (1 + y.y_R_S) * phi + half, (1 + y.y_R_S + y.y_R_P) * phi + 3 * half]
    lams = [1 - 2 * x for x in amps]
    rows = [
        [1, 1, 1],
        [l * mp.cos(t) for l, t in zip(lams, angles)],
        [l * mp.sin(t) for l, t in zip(lams, angles)],
    ]
    return _solve_local(rows, ctx)


def clm_leading_coefficients(p, phi) -> tuple:
    """First-order CLM coefficients under ORE noise."""
    return (1 + 2 * p, -p - phi / 2, -p + phi / 2)


def perturbed_chilm_coefficients(spec: NoiseChannelSpec, y: PerturbationFactors, ctx=None) -> list:
    """CHILM coefficients with a noisy pi rotation and an imperfect hidden inverse.

    Variants: ``(p, phi)``, ``((1+y_S_P)p, (1+y_R_P)phi + pi)`` and
    ``(y_S_HI p, -y_R_HI phi)``. At ``phi = 0`` the sine equation is divided
    by ``phi`` so the limit stays well posed.

    Raises:
        InvalidFactors: if ``y_R_HI <= 0``.
        SingularSystem: if the variants cannot separate the noise.
    """
    if not y.y_R_HI > 0:
        raise InvalidFactors("y_R_HI must be positive for the hidden inverse to reverse the error")
    ctx = get_context(ctx)
    mp = ctx.mp
    p, phi = ctx.mpf(spec.p), ctx.mpf(spec.phi)
    amps = [p, (1 + y.y_S_P) * p, y.y_S_HI * p]
    lams = [1 - 2 * x for x in amps]
    ks = [ctx.mpf(1), 1 + ctx.mpf(y.y_R_P), -ctx.mpf(y.y_R_HI)]
    signs = [1, -1, 1]
    cos_row = [s * l * mp.cos(k * phi) for s, l, k in zip(signs, lams, ks)]
    sin_row = [s * l * k * mp.sinc(k * phi) for s, l, k in zip(signs, lams, ks)]
    return _solve_local([[1, 1, 1], cos_row, sin_row], ctx)


def perturbed_chilm_metrics(spec: NoiseChannelSpec, y: PerturbationFactors, n_gates: int, ctx=None) -> MetricsReport:
    """Cost metrics of CHILM with noisy variant generation on ``n_gates`` gates.

    To leading order ``S = exp(2 (y_S_HI + y_R_HI)/(1 + y_R_HI) e_SN)``.
    """
    ctx = get_context(ctx)
    coefs = perturbed_chilm_coefficients(spec, y, ctx)
    taus = (1, 2, 1)
    c_l = sum(abs(c) for c in coefs)
    f_l = sum(abs(c) * t for c, t in zip(coefs, taus)) / c_l
    cost = c_l**n_gates
    return MetricsReport(cost, f_l, 1, f_l, cost**2 * f_l, 0.0, 0.0)


def perturbed_chilm_boundary(y: PerturbationFactors, target_scaling: float) -> float:
    """Large-circuit stochastic noise boundary of CHILM with noisy variant generation."""
    if not y.y_R_HI > 0:
        raise InvalidFactors("y_R_HI must be positive")
    return (1 + y.y_R_HI) / (y.y_S_HI + y.y_R_HI) * math.log(target_scaling) / 2


IISMRobustness = namedtuple("IISMRobustness", "amplitudes coefficients cost length_factor mitigated_noise_level")


def iism_na_robustness(p, y_dagger: float, order: int, n_gates: int, ctx=None) -> IISMRobustness:
    """Noise-aware identity insertion under dephasing with an imperfect inverse gate.

    The inverse gate flips with probability ``y_dagger * p``, so ``i``
    insertions give amplitude
    ``p_i = (1 - (1 - 2(1+y)p + 4yp^2)^i (1 - 2p))/2``. Richardson coefficients
    on these amplitudes give the cost and length factor (execution time
    ``2i+1``); the mitigated noise level is ``e^(m+1) prod_n (1+n(1+y)) / (m+1)!``
    with ``e = 2Np``.
    """
    ctx = get_context(ctx)
    p = ctx.mpf(p)
    y = ctx.mpf(y_dagger)
    pair = 1 - 2 * (1 + y) * p + 4 * y * p * p
    amps = [(1 - pair**i * (1 - 2 * p)) / 2 for i in range(order + 1)]
    if p == 0:
        # zero-noise limit: Lagrange products in the first-order amplitudes
        nodes = [1 + i * (1 + y) for i in range(order + 1)]
        coefs = richardson_coefficients(nodes, ctx)
    else:
        coefs = richardson_coefficients(amps, ctx)
    cost = sum(abs(c) for c in coefs)
    length = sum(abs(c) * (2 * i + 1) for i, c in enumerate(coefs)) / cost
    e = 2 * n_gates * p
    level = e ** (order + 1) * ctx.mp.fprod(1 + n * (1 + y) for n in range(order + 1)) / ctx.mp.factorial(order + 1)
    return IISMRobustness(amps, coefs, cost, length, level)


def iism_na_cost_leading(y_dagger: float, order: int, ctx=None):
    """Zero-noise cost from the hypergeometric closed form."""
    ctx = get_context(ctx)
    mp = ctx.mp
    y = ctx.mpf(y_dagger)
    r = 1 + y
    prod = mp.fprod(1 + m * r for m in range(order + 1))
    return prod * mp.hyp2f1(1 / r, -order, (y + 2) / r, -1) / (r**order * mp.factorial(order))


def iism_na_length_leading(y_dagger: float, order: int, ctx=None):
    """Zero-noise length scale factor from the hypergeometric closed form."""
    ctx = get_context(ctx)
    mp = ctx.mp
    y = ctx.mpf(y_dagger)
    r = 1 + y
    num = mp.hyp2f1((2 + y) / r, 1 - order, (2 * y + 3) / r, -1)
    den = (y + 2) * mp.hyp2f1(1 / r, -order, (y + 2) / r, -1)
    return 1 + 2 * order * num / den
