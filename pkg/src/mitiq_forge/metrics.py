"""Quantitative mitigation metrics.

Sampling cost ``C`` and length factor ``F_L`` come straight from a plan's
coefficients; the runtime scaling is ``S = C^2 F_A`` (long circuits) or
``S = C^2 floor(F_W)`` (initialisation-dominated runs). The module also holds
the leading-order closed forms for the proxy bias after mitigation, the
tabulated large-circuit and small-noise expressions, fast log-domain runtime
scaling for very large circuits, and the noise-boundary solver.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAngles, NoSolution, NotTabulated
from .mitigation_catalog import (
    METHODS,
    MitigationPlan,
    Scope,
    build_plan,
    canonical_method,
    full_order,
)
from .noise_models import NoiseChannelSpec, NoiseKind, noise_level, re, sn
from .pauli_algebra import get_context


class _NoClosedFormType:
    """Marker for quantities without a known closed form."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NoClosedForm"

    def __bool__(self):
        return False


NoClosedForm = _NoClosedFormType()


@dataclass(frozen=True)
class MetricsReport:
    """Cost metrics of one plan on one circuit.

    ``mitigated_noise_level`` is the leading-order closed form (or
    ``NoClosedForm``); ``mitigated_proxy_bias`` is the full proxy bias of the
    mitigated channel when it could be evaluated, otherwise the closed form.
    """

    sampling_cost: object
    length_factor: object
    width_factor: object = 1
    area_factor: object = None
    runtime_scaling: object = None
    mitigated_noise_level: object = NoClosedForm
    mitigated_proxy_bias: object = NoClosedForm

    def __post_init__(self):
        if self.area_factor is None:
            object.__setattr__(self, "area_factor", self.length_factor * math.floor(self.width_factor))


# ---------------------------------------------------------------------------
# cost metrics


def _cost_and_length(terms, weights=None):
    """``C = sum |w c|`` and ``F = sum |w c| tau / C`` for a list of terms."""
    cost = 0
    timed = 0
    for t in terms:
        w = abs(t.weight)
        cost += w
        timed += w * t.exec_time_ratio
    return cost, timed / cost


def metrics(
    plan: MitigationPlan,
    circuit_exec_time=None,
    n_gates: int = 1,
    init_dominated: bool = False,
    gate_exec_times=None,
    proxy: bool = True,
    ctx=None,
) -> MetricsReport:
    """Sampling cost, scale factors and runtime scaling of a plan.

    Args:
        plan: any catalogued plan.
        circuit_exec_time: unmitigated duration of the whole circuit; used to
            weight per-gate length factors of concatenated plans (defaults to
            the sum of ``gate_exec_times``).
        n_gates: number of noisy gates the plan is applied to.
        init_dominated: use the ``S = C^2 floor(F_W)`` branch for runs whose
            duration is dominated by initialisation and measurement.
        gate_exec_times: per-gate unmitigated durations for concatenated plans
            (default 1 each).
        proxy: also evaluate the full mitigated proxy bias where feasible.
        ctx: precision context.
    """
    ctx = get_context(ctx if ctx is not None else plan.digits)
    if n_gates < 1:
        raise ValueError("n_gates must be positive")
    if plan.scope == Scope.LOCAL:
        if plan.is_uniform:
            c_l, f_l = _cost_and_length(plan.per_gate_variants[0])
            cost = c_l**n_gates
            length = f_l
        else:
            if len(plan.per_gate_variants) != n_gates:
                raise ValueError("concatenated plan size does not match n_gates")
            times = [1] * n_gates if gate_exec_times is None else list(gate_exec_times)
            total = sum(times) if circuit_exec_time is None else circuit_exec_time
            cost = 1
            length = 0
            for terms, tau in zip(plan.per_gate_variants, times):
                c_m, f_m = _cost_and_length(terms)
                cost *= c_m
                length += f_m * tau / total
    else:
        cost, length = _cost_and_length(plan.circuit_variants)
    width = 1
    area = length * width
    scaling = cost**2 * (math.floor(width) if init_dominated else area)
    level = plan_noise_level(plan, n_gates)
    bias = level
    if proxy:
        exact = plan_proxy_bias(plan, n_gates, ctx)
        if exact is not NoClosedForm:
            bias = exact
    return MetricsReport(cost, length, width, area, scaling, level, bias)


# ---------------------------------------------------------------------------
# proxy bias


def _double_factorial_odd(m: int) -> int:
    """``(2m+1)!! = prod_{i=0}^{m} (2i+1)``."""
    return math.prod(2 * i + 1 for i in range(m + 1))


def _power_term(x, power, log_factor):
    """``x**power * exp(log_factor)`` without intermediate overflow."""
    if x == 0:
        return 0.0
    return math.exp(power * math.log(x) + log_factor)


def _log_table_dfo(m):
    """``log((2m+1)!!/(m+1)!)``, valid for continuous ``m``."""
    return (m + 1) * math.log(2) + math.lgamma(m + 1.5) - math.lgamma(0.5) - math.lgamma(m + 2)


def _lc_residual(spec: NoiseChannelSpec) -> NoiseChannelSpec:
    """Stochastic channel left by symmetric local cancellation of ``spec``."""
    return sn((1 - math.cos(spec.phi)) / 2, 1.0)


UNBIASED_METHODS = frozenset({"CLM", "CHILM", "CIILM", "IILM:NA", "TIILM", "LC-CLM", "LC-TIILM"})
ORDER_METHODS = frozenset({"IIAM", "IILM:KF", "IISM:KF", "IISM:NA", "LC-IIAM", "LC-IISM"})
FULL_ORDER_METHODS = frozenset({"CSM", "CHISM", "LC-CSM"})


def mitigated_proxy_bias(method: str, spec: NoiseChannelSpec, n_gates: int, order=None):
    """Leading-order proxy bias after mitigation (the mitigated noise level).

    Unbiased configurations give 0. Biased forms, with ``e`` the unmitigated
    noise level and ``m`` the order:

    * IIAM: ``e^(m+1)/(m+1)!``.
    * IISM (KF and NA below full order): ``e^(m+1) (2m+1)!!/(m+1)!``.
    * IILM:KF: ``2 N p^(m+1) (1+a)^m (2m+1)!!/(m+1)!`` for stochastic noise
      and ``N |phi|^(m+1) (2m+1)!!/(m+1)!`` for rotational errors.
    * LC-: ``N (1 - cos phi)``; LC-X applies X's form to the residual
      stochastic channel.

    Returns ``NoClosedForm`` for truncated CSM/CHISM and for unsupported
    noise kinds.
    """
    method = canonical_method(method)
    if method.startswith("LC-"):
        if spec.kind != NoiseKind.RE:
            return NoClosedForm
        residual = _lc_residual(spec)
        if method == "LC-":
            return n_gates * (1 - math.cos(spec.phi))
        inner = method[3:]
        if inner == "IISM":
            inner = "IISM:NA"
        return mitigated_proxy_bias(inner, residual, n_gates, order)
    if method == "Unmitigated":
        return noise_level(spec, n_gates)
    if method in UNBIASED_METHODS:
        return 0.0
    if method in ("CSM", "CHISM"):
        full = full_order(method, spec, n_gates)
        if order is None or order >= full:
            return 0.0
        return NoClosedForm
    m = 1 if order is None else int(order)
    if method == "IISM:NA" and order is None:
        return 0.0
    if spec.kind == NoiseKind.ORE:
        return NoClosedForm
    e = noise_level(spec, n_gates)
    if method == "IIAM":
        return _power_term(e, m + 1, -math.lgamma(m + 2))
    if method in ("IISM:KF", "IISM:NA"):
        if method == "IISM:NA" and m >= full_order(method, spec, n_gates):
            return 0.0
        return _power_term(e, m + 1, _log_table_dfo(m))
    if method == "IILM:KF":
        if spec.kind == NoiseKind.RE:
            return n_gates * _power_term(abs(spec.phi), m + 1, _log_table_dfo(m))
        a = spec.effective_a
        return 2 * n_gates * _power_term(spec.p, m + 1, _log_table_dfo(m) + m * math.log(1 + a))
    return NoClosedForm


def plan_noise_level(plan: MitigationPlan, n_gates: int):
    """Closed-form mitigated noise level of a built plan.

    LC-X plans carry the residual stochastic channel as their noise, so the
    inner method's form is applied to it directly.
    """
    if plan.noise is None:
        return 0.0 if plan.method == "Unmitigated" else NoClosedForm
    method = plan.method
    if method not in METHODS:
        # composed or concatenated plans have no catalogued closed form
        return NoClosedForm
    if method.startswith("LC-") and method != "LC-":
        method = method[3:]
    order = plan.order if method in ORDER_METHODS | FULL_ORDER_METHODS else None
    return mitigated_proxy_bias(method, plan.noise, n_gates, order)


# cap on (configurations x variants) for the exact proxy-bias sum
_PROXY_BUDGET = 400_000


def _variant_multipliers(plan: MitigationPlan, terms, ctx):
    # LC-X plans are evaluated on their residual channel, so the pre-tailoring
    # record is deliberately not applied here
    return [t.variant.multiplier(plan.noise, ctx) for t in terms]


def _components(spec: NoiseChannelSpec, z, ctx):
    """Decomposition coefficients of a variant channel with multiplier ``z``.

    Stochastic noise gives ``(1-q, q)`` with ``q = (1 - z)/(1 + a)``; rotational
    and over-rotational channels give ``((1+Re z)/2, Im z, (1-Re z)/2)``.
    """
    if spec.kind in (NoiseKind.SN, NoiseKind.DEPHASING):
        a = ctx.mpf(spec.effective_a)
        q = (1 - ctx.mp.re(z)) / (1 + a)
        return (1 - q, q)
    x, y = ctx.mp.re(z), ctx.mp.im(z)
    return ((1 + x) / 2, y, (1 - x) / 2)


def _proxy_from_configs(weighted, n_gates, n_comp, ctx):
    """Proxy bias ``|1 - g_0| + sum_{configs != 0} mult |g|`` for a linear combination.

    ``weighted`` is a list of ``(coefficient, components)`` pairs, each
    describing one uniform circuit variant.
    """
    mp = ctx.mp
    total = mp.mpf(0)
    fact = [mp.factorial(k) for k in range(n_gates + 1)]
    if n_comp == 2:
        for l in range(n_gates + 1):
            g = mp.fsum(c * f[0] ** (n_gates - l) * f[1] ** l for c, f in weighted)
            if l == 0:
                total += abs(1 - g)
            else:
                total += fact[n_gates] / (fact[l] * fact[n_gates - l]) * abs(g)
        return total
    for l1 in range(n_gates + 1):
        for l2 in range(n_gates + 1 - l1):
            l0 = n_gates - l1 - l2
            g = mp.fsum(c * f[0] ** l0 * f[1] ** l1 * f[2] ** l2 for c, f in weighted)
            if l1 == 0 and l2 == 0:
                total += abs(1 - g)
            else:
                total += fact[n_gates] / (fact[l0] * fact[l1] * fact[l2]) * abs(g)
    return total


def plan_proxy_bias(plan: MitigationPlan, n_gates: int, ctx=None):
    """Full proxy bias of the mitigated channel, evaluated from the coefficients.

    Supported for uniform local plans (any size) and synchronous plans whose
    configuration sum fits a fixed budget; asynchronous plans and oversized
    sums return ``NoClosedForm``.
    """
    ctx = get_context(ctx if ctx is not None else plan.digits)
    spec = plan.noise
    if spec is None:
        return ctx.mpf(0) if plan.method == "Unmitigated" else NoClosedForm
    if plan.scope == Scope.ASYNCHRONOUS:
        return NoClosedForm
    if plan.scope == Scope.LOCAL:
        if not plan.is_uniform:
            return NoClosedForm
        terms = plan.per_gate_variants[0]
        zs = _variant_multipliers(plan, terms, ctx)
        comps = [_components(spec, z, ctx) for z in zs]
        mixed = [ctx.mp.fsum(t.coefficient * f[k] for t, f in zip(terms, comps)) for k in range(len(comps[0]))]
        f0n = mixed[0] ** n_gates
        return abs(1 - f0n) + ctx.mp.fsum(abs(x) for x in mixed) ** n_gates - abs(mixed[0]) ** n_gates
    terms = plan.circuit_variants
    n_comp = 2 if spec.kind in (NoiseKind.SN, NoiseKind.DEPHASING) else 3
    configs = n_gates + 1 if n_comp == 2 else (n_gates + 1) * (n_gates + 2) // 2
    if configs * len(terms) > _PROXY_BUDGET:
        return NoClosedForm
    zs = _variant_multipliers(plan, terms, ctx)
    weighted = [(t.coefficient, _components(spec, z, ctx)) for t, z in zip(terms, zs)]
    return _proxy_from_configs(weighted, n_gates, n_comp, ctx)


# ---------------------------------------------------------------------------
# tabulated expressions


class Regime(str, enum.Enum):
    SMALL_NOISE = "SmallNoise"
    LARGE_CIRCUIT = "LargeCircuit"

    @classmethod
    def parse(cls, text) -> "Regime":
        if isinstance(text, cls):
            return text
        key = str(text).replace("_", "").replace("-", "").lower()
        for r in cls:
            if r.value.lower() == key:
                return r
        raise ValueError(f"unknown regime {text!r}")


TABULATED = {
    NoiseKind.SN: ("Unmitigated", "CLM", "CSM", "IIAM", "IILM:KF", "IILM:NA", "IISM", "TIILM"),
    NoiseKind.RE: (
        "Unmitigated", "CHILM", "CHISM", "CIILM", "CLM", "CSM", "IIAM", "IILM:KF", "IILM:NA", "IISM",
        "LC-", "LC-CLM", "LC-CSM", "LC-IIAM", "LC-IISM", "LC-TIILM", "TIILM",
    ),
}


def _table_row(method: str, kind) -> tuple:
    kind = NoiseKind.parse(kind)
    if kind == NoiseKind.DEPHASING:
        kind = NoiseKind.SN
    name = canonical_method(method)
    row = "IISM" if name in ("IISM:KF", "IISM:NA") else name
    if kind not in TABULATED or row not in TABULATED[kind]:
        raise NotTabulated(f"{name} has no tabulated {kind.value} entry")
    return row, kind


def _falling_ratio(mp, n, m):
    """``N! / (N^(m+1) (N-m-1)!)``."""
    if m + 1 > n:
        return mp.mpf(0)
    out = mp.mpf(1)
    for i in range(m + 1):
        out *= mp.mpf(n - i) / n
    return out


def table_metrics(method: str, noise_kind, regime, **params) -> dict:
    """Evaluate the tabulated leading-order expressions for one method.

    Keyword parameters: ``e`` (noise level), ``n_gates``, ``order``, ``a``
    (closure parameter, default 1), ``target_scaling`` and ``target_bias``.
    Small-noise entries return ``noise_level`` and ``excess_runtime_scaling``;
    large-circuit entries return ``runtime_scaling`` and, when both targets
    are given, ``noise_boundary``. Quantities whose inputs are missing are
    left out.

    Raises:
        NotTabulated: if the table has no row for the method and noise kind.
    """
    row, kind = _table_row(method, noise_kind)
    regime = Regime.parse(regime)
    mp = get_context(30).mp
    e = params.get("e")
    n = params.get("n_gates")
    m = params.get("order", 1)
    a = mp.mpf(params.get("a", 1.0))
    s_t = params.get("target_scaling")
    b_t = params.get("target_bias")
    e = None if e is None else mp.mpf(e)
    out = {}
    if regime == Regime.SMALL_NOISE:
        level = _table_noise_level(mp, row, kind, e, n, m, a)
        if level is not None:
            out["noise_level"] = level
        excess = _table_excess(mp, row, kind, e, n, m, a)
        if excess is not None:
            out["excess_runtime_scaling"] = excess
        return out
    scaling = _table_scaling(mp, row, kind, e, n, m, a)
    if scaling is not None:
        out["runtime_scaling"] = scaling
    if s_t is not None and b_t is not None:
        bound = _table_boundary(mp, row, kind, mp.mpf(s_t), mp.mpf(b_t), n, a)
        if bound is not None:
            out["noise_boundary"] = bound
    return out


def _table_noise_level(mp, row, kind, e, n, m, a):
    if e is None:
        return None
    dfo = _double_factorial_odd(m)
    if row == "Unmitigated":
        return e
    if row == "IIAM":
        return e ** (m + 1) / mp.factorial(m + 1)
    if row == "LC-":
        return None if n is None else e**2 / (2 * n)
    if row == "LC-IIAM":
        return None if n is None else e ** (2 * (m + 1)) / ((2 * n) ** (m + 1) * mp.factorial(m + 1))
    if n is None:
        return None if row in ("IILM:KF", "IISM", "LC-IISM") else mp.mpf(0)
    if row == "IILM:KF":
        factor = ((1 + a) / 2) ** m if kind == NoiseKind.SN else 1
        return e ** (m + 1) / mp.mpf(n) ** m * factor * dfo / mp.factorial(m + 1)
    if row == "IISM":
        return e ** (m + 1) * _falling_ratio(mp, n, m) * dfo / mp.factorial(m + 1)
    if row == "LC-IISM":
        return (
            e ** (2 * (m + 1)) * _falling_ratio(mp, n, m) * dfo
            / (2 ** (m + 1) * mp.mpf(n) ** (m + 1) * mp.factorial(m + 1))
        )
    return mp.mpf(0)


def _table_excess(mp, row, kind, e, n, m, a):
    if row in ("Unmitigated", "LC-"):
        return mp.mpf(0)
    if row in ("TIILM", "LC-TIILM"):
        return mp.mpf(1)
    if row == "CIILM":
        return mp.mpf(5)
    if row == "IISM" or row == "LC-IISM":
        return mp.mpf(4) ** (m + 1) / mp.pi - 1
    if n is None:
        return None
    if row in ("IIAM", "LC-IIAM"):
        return mp.mpf(n) ** (2 * m) / mp.factorial(m) ** 2 - 1
    if row in ("IILM:KF",) or (row == "IILM:NA" and kind == NoiseKind.SN):
        return 3 * mp.mpf(4) ** n / 2 - 1
    if row == "IILM:NA":
        return mp.mpf(15) / 7 * (mp.mpf(7) / 2) ** (2 * n) - 1
    if e is None:
        return None
    if row == "CLM":
        return (2 + mp.mpf(1) / (2 * n)) * e if kind == NoiseKind.SN else (2 + mp.mpf(1) / n) * e
    if row == "CSM":
        return (mp.mpf(8) / 3 - mp.mpf(1) / (6 * n * n)) * n * e if kind == NoiseKind.SN else 3 * e
    if row in ("CHILM", "LC-CLM"):
        return (1 + mp.mpf(1) / (4 * n)) * e**2 / n
    if row in ("CHISM", "LC-CSM"):
        return (mp.mpf(4) / 3 - mp.mpf(1) / (12 * n * n)) * e**2
    return None


def _table_scaling(mp, row, kind, e, n, m, a):
    if row in ("Unmitigated", "LC-"):
        return mp.mpf(1)
    if row in ("IISM", "LC-IISM"):
        return mp.mpf(4) ** (m + 1) / mp.pi
    if row in ("IIAM", "LC-IIAM"):
        return None if n is None else mp.mpf(n) ** (2 * m) / mp.factorial(m) ** 2
    if row == "IILM:KF":
        return None if n is None else 3 * mp.mpf(4) ** n / 2
    if row == "IILM:NA" and kind == NoiseKind.RE:
        return None if n is None else mp.mpf(15) / 7 * (mp.mpf(7) / 2) ** (2 * n)
    if e is None:
        return None
    if row == "IILM:NA":
        return None if n is None else 3 * mp.mpf(4) ** n / 2 * mp.exp(mp.mpf(3) / 4 * (1 + a) * e)
    if row == "CLM":
        return mp.exp(2 * e)
    if row == "TIILM":
        if kind == NoiseKind.SN:
            return mp.exp(4 * (1 + a) * e) * (1 + 2 * mp.log(2))
        return mp.exp(2 * e) * (1 + mp.pi)
    if row == "CIILM":
        return 6 * mp.exp(4 * mp.sqrt(3) * e)
    if row == "CHISM":
        return 3 / (2 * mp.cos(e) ** 2) - mp.tan(e) / (2 * e)
    if row == "CSM" and kind == NoiseKind.RE:
        return 1 + mp.sin(e) * (3 * mp.cos(e) + mp.sin(e))
    if row == "LC-CSM":
        return (2 - mp.tanh(e) / e) * mp.cosh(e) ** 2
    if n is None:
        return None
    if row == "CSM":
        return 2 * mp.cosh(mp.sqrt(2 * n * e)) ** 2
    if row in ("CHILM", "LC-CLM"):
        return 1 + e**2 / n
    if row == "LC-TIILM":
        return 2 * (1 + mp.sqrt(mp.mpf(2) / n) * e)
    return None


def _table_boundary(mp, row, kind, s, b, n, a):
    if row in ("Unmitigated", "IIAM", "IILM:KF", "IILM:NA", "LC-IIAM"):
        return b
    if row == "CLM":
        return mp.log(s) / 2
    if row == "TIILM":
        if kind == NoiseKind.SN:
            return mp.log(s / (1 + 2 * mp.log(2))) / (4 * (1 + a))
        return mp.log(s / (1 + mp.pi)) / 2
    if row == "IISM":
        base = 2 * b if kind == NoiseKind.SN else b
        return mp.mpf(4) ** (mp.log(base) / mp.log(mp.pi * s)) / 2
    if row == "CIILM":
        return mp.log(s / 6) / (4 * mp.sqrt(3))
    if row == "CHISM":
        return mp.pi / 2 - mp.sqrt(3 / (2 * s))
    if row == "CSM" and kind == NoiseKind.RE:
        return mp.pi / 2
    if row == "LC-CSM":
        return mp.log(2 * s) / 2
    if n is None:
        return None
    if row == "CSM":
        return mp.log(2 * s) ** 2 / (8 * n)
    if row in ("CHILM", "LC-CLM"):
        return mp.sqrt(n * (s - 1))
    if row == "LC-":
        return mp.sqrt(2 * n * b)
    if row == "LC-IISM":
        return mp.sqrt(n * mp.mpf(4) ** (mp.log(b) / mp.log(mp.pi * s)))
    if row == "LC-TIILM":
        return mp.sqrt(mp.mpf(n) / 2) * (s / 2 - 1)
    return None


# ---------------------------------------------------------------------------
# noise boundary


@dataclass(frozen=True)
class _BoundaryModel:
    """Large-circuit leading-order model ``(log S(e, m), bias(e, m))``.

    ``order`` is ``None`` for methods without an order parameter,
    ``"continuous"`` for ``m >= 0`` and ``"integer"`` for ``m >= 1`` (with
    the unmitigated circuit as fallback when no order is affordable).
    ``domain`` caps the noise level a single instance can handle.
    """

    log_scaling: object
    bias: object
    order: str | None = None
    domain: float = math.inf


def _csm_re_envelope(e):
    peak = (math.pi - math.atan(3)) / 2
    x = min(e, peak)
    return 1 + math.sin(x) * (3 * math.cos(x) + math.sin(x))


def _boundary_model(row: str, kind: NoiseKind, n, a: float) -> _BoundaryModel:
    big_n = math.inf if n is None else float(n)
    log = math.log
    zero = lambda e, m: 0.0  # noqa: E731
    if row == "Unmitigated":
        return _BoundaryModel(lambda e, m: 0.0, lambda e, m: e)
    if row == "CLM":
        return _BoundaryModel(lambda e, m: 2 * e, zero)
    if row == "TIILM":
        if kind == NoiseKind.SN:
            return _BoundaryModel(lambda e, m: 4 * (1 + a) * e + log(1 + 2 * log(2)), zero)
        return _BoundaryModel(lambda e, m: 2 * e + log(1 + math.pi), zero)
    if row == "CIILM":
        return _BoundaryModel(lambda e, m: log(6) + 4 * math.sqrt(3) * e, zero)
    if row == "CHISM":
        def chism(e, m):
            if e == 0:
                return 0.0
            return log(1.5 / math.cos(e) ** 2 - math.tan(e) / (2 * e))
        return _BoundaryModel(chism, zero, domain=math.pi / 2)
    if row == "CSM":
        if kind == NoiseKind.RE:
            return _BoundaryModel(lambda e, m: log(_csm_re_envelope(e)), zero, domain=math.pi / 2)
        return _BoundaryModel(lambda e, m: log(2) + 2 * log(math.cosh(math.sqrt(2 * big_n * e))), zero)
    if row == "LC-CSM":
        def lc_csm(e, m):
            if e == 0:
                return 0.0
            return log(2 - math.tanh(e) / e) + 2 * (e + math.log1p(math.exp(-2 * e)) - log(2))
        return _BoundaryModel(lc_csm, zero)
    if row in ("CHILM", "LC-CLM"):
        return _BoundaryModel(lambda e, m: 0.0 if big_n == math.inf else math.log1p(e * e / big_n), zero)
    if row == "LC-TIILM":
        return _BoundaryModel(
            lambda e, m: log(2) + (0.0 if big_n == math.inf else math.log1p(math.sqrt(2 / big_n) * e)), zero
        )
    if row == "LC-":
        return _BoundaryModel(lambda e, m: 0.0, lambda e, m: e * e / (2 * big_n))
    if row == "IILM:NA":
        if kind == NoiseKind.SN:
            return _BoundaryModel(lambda e, m: log(1.5) + big_n * log(4) + 0.75 * (1 + a) * e, zero)
        return _BoundaryModel(lambda e, m: log(15 / 7) + 2 * big_n * log(3.5), zero)
    if row == "IISM":
        half = 0.5 if kind == NoiseKind.SN else 1.0
        return _BoundaryModel(
            lambda e, m: (m + 1) * log(4) - log(math.pi),
            lambda e, m: half * (2 * e) ** (m + 1),
            "continuous",
        )
    if row == "LC-IISM":
        return _BoundaryModel(
            lambda e, m: (m + 1) * log(4) - log(math.pi),
            lambda e, m: (e * e / big_n) ** (m + 1),
            "continuous",
        )
    if row in ("IIAM", "LC-IIAM"):
        log_s = lambda e, m: 2 * m * log(big_n) - 2 * math.lgamma(m + 1)  # noqa: E731
        if row == "IIAM":
            bias = lambda e, m: math.exp((m + 1) * log(e) - math.lgamma(m + 2)) if e > 0 else 0.0  # noqa: E731
        else:
            bias = lambda e, m: (  # noqa: E731
                math.exp(2 * (m + 1) * log(e) - (m + 1) * log(2 * big_n) - math.lgamma(m + 2)) if e > 0 else 0.0
            )
        return _BoundaryModel(log_s, bias, "integer")
    if row == "IILM:KF":
        per = (1 + a) / 2 if kind == NoiseKind.SN else 1.0

        def kf_bias(e, m):
            if e <= 0:
                return 0.0
            return math.exp((m + 1) * log(e) - m * log(big_n) + m * log(per) + _log_table_dfo(m))

        return _BoundaryModel(lambda e, m: log(1.5) + big_n * log(4), kf_bias, "integer")
    raise NotTabulated(f"no boundary model for {row}")


_M_MAX = 400.0


def _min_order(model: _BoundaryModel, e: float, target_bias: float):
    """Smallest order meeting the bias target, or ``None``."""
    # order 0 of the continuous family is the unmitigated circuit
    lo = 0.0 if model.order == "continuous" else 1.0
    if model.bias(e, lo) <= target_bias:
        return lo
    prev = lo
    m = math.floor(lo) + 1.0
    while m <= _M_MAX:
        if model.bias(e, m) <= target_bias:
            if model.order == "integer":
                return m
            a, b = prev, m
            for _ in range(200):
                mid = (a + b) / 2
                if model.bias(e, mid) <= target_bias:
                    b = mid
                else:
                    a = mid
                if b - a <= 1e-15 * max(1.0, abs(b)):
                    break
            return b
        prev = m
        m += 1.0
    return None


def _feasible(model: _BoundaryModel, e: float, log_s: float, target_bias: float) -> bool:
    if e > model.domain:
        return False
    if model.order is None:
        if model.bias(e, 0) > target_bias:
            return False
        return model.log_scaling(e, 0) <= log_s
    m = _min_order(model, e, target_bias)
    if m is None:
        return False
    return model.log_scaling(e, m) <= log_s


def _solve_boundary(model: _BoundaryModel, log_s: float, target_bias: float) -> float:
    tiny = 1e-300
    if not _feasible(model, tiny, log_s, target_bias):
        raise NoSolution("target scaling is below the method's minimum runtime scaling")
    hi = 1.0
    while _feasible(model, hi, log_s, target_bias):
        hi *= 2
        if hi > 1e15:
            return math.inf
    lo = 0.0
    for _ in range(400):
        mid = (lo + hi) / 2
        if _feasible(model, mid, log_s, target_bias):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo


CONCATENABLE = frozenset({("CSM", NoiseKind.RE), ("CHISM", NoiseKind.RE)})


def noise_boundary(
    method: str,
    noise_kind,
    target_bias: float,
    target_scaling: float,
    n_gates=None,
    a: float = 1.0,
    concatenate: bool = False,
    max_blocks: int = 1024,
) -> float:
    """Largest noise level mitigable within a target bias and runtime scaling.

    Uses the large-circuit leading-order models of the runtime scaling and
    mitigated noise level. For each trial noise level the smallest order that
    meets the bias target is found (bisection in a continuous order for the
    synchronous identity-insertion family), and the noise level is accepted if
    that order's runtime scaling is affordable; the boundary itself is found by
    bisection. Methods whose cheapest order is unaffordable fall back to the
    unmitigated boundary ``target_bias``.

    Args:
        method: catalogue name.
        noise_kind: SN (or Dephasing) or RE.
        target_bias: tolerated bias ``eps* > 0``.
        target_scaling: tolerated runtime scaling ``S* > 1``.
        n_gates: number of gates, ``None`` for the large-circuit limit.
        a: closure parameter of stochastic noise.
        concatenate: for CSM and CHISM under rotational errors, also split the
            circuit into ``k`` blocks (``k`` a power of two up to
            ``max_blocks``), each within the single-instance domain, and
            return the best total.

    Raises:
        NoSolution: if even vanishing noise exceeds the tolerated scaling.
    """
    if not target_scaling > 1 or not target_bias > 0:
        raise ValueError("need target_scaling > 1 and target_bias > 0")
    row, kind = _table_row(method, noise_kind)
    model = _boundary_model(row, kind, n_gates, float(a))
    log_s = math.log(target_scaling)
    try:
        best = _solve_boundary(model, log_s, target_bias)
    except NoSolution:
        if model.order == "integer":
            return float(target_bias)
        raise
    if model.order == "integer":
        # running the circuit unmitigated is always an option
        best = max(best, float(target_bias))
    if concatenate and (row, kind) in CONCATENABLE:
        k = 2
        while k <= max_blocks:
            try:
                best = max(best, k * _solve_boundary(model, log_s / k, target_bias))
            except NoSolution:
                pass
            k *= 2
    return best


# ---------------------------------------------------------------------------
# fast log-domain runtime scaling for large circuits


def _logsumexp(x):
    x = np.asarray(x, dtype=float)
    top = np.max(x)
    if not np.isfinite(top):
        return top
    return float(top + np.log(np.sum(np.exp(x - top))))


def _log_abs_sine_product(angles, chunk: int = 512) -> np.ndarray:
    """``log |c_i|`` of the sine-product coefficients in float64."""
    a = np.asarray(angles, dtype=float)
    num = np.log(np.abs(np.sin(a / 2)))
    total = np.sum(num)
    out = np.empty(len(a))
    for start in range(0, len(a), chunk):
        rows = slice(start, min(len(a), start + chunk))
        diff = np.sin((a[None, :] - a[rows, None]) / 2)
        idx = np.arange(rows.start, rows.stop)
        diff[idx - rows.start, idx] = 1.0
        if np.any(diff == 0):
            raise DegenerateAngles("angles coincide modulo 2pi")
        out[rows] = (total - num[rows]) - np.sum(np.log(np.abs(diff)), axis=1)
    return out


def _log_abs_csm_sn(p: float, lam: float, order: int, chunk: int = 512) -> np.ndarray:
    """``log |c_i|`` of Richardson coefficients on ``x_i = p + lam sin^2(i pi / 2M)``.

    Differences use ``sin^2 b_j - sin^2 b_i = sin(b_j - b_i) sin(b_j + b_i)`` so
    nearby amplitudes keep full relative accuracy.
    """
    b = np.arange(order + 1) * math.pi / (2 * order)
    x = p + lam * np.sin(b) ** 2
    num = np.log(np.abs(x))
    total = np.sum(num)
    out = np.empty(order + 1)
    for start in range(0, order + 1, chunk):
        rows = slice(start, min(order + 1, start + chunk))
        br = b[rows, None]
        diff = lam * np.sin(b[None, :] - br) * np.sin(b[None, :] + br)
        idx = np.arange(rows.start, rows.stop)
        diff[idx - rows.start, idx] = 1.0
        out[rows] = (total - num[rows]) - np.sum(np.log(np.abs(diff)), axis=1)
    return out


def _log_scaling_from(logc, taus) -> float:
    log_c = _logsumexp(logc)
    log_f = _logsumexp(logc + np.log(np.asarray(taus, dtype=float))) - log_c
    return 2 * log_c + log_f


def fast_log_runtime_scaling(method: str, spec: NoiseChannelSpec, n_gates: int) -> float:
    """``log S`` of the full-order CSM, CHISM or LC-CSM plan in float64.

    Intended for circuits too large for the arbitrary-precision plan builders.
    """
    method = canonical_method(method)
    if method == "LC-CSM":
        return fast_log_runtime_scaling("CSM", _lc_residual(spec), n_gates)
    if method == "CSM" and spec.kind in (NoiseKind.SN, NoiseKind.DEPHASING):
        a = spec.effective_a
        p = float(spec.p)
        lam = 1 - (1 + a) * p
        logc = _log_abs_csm_sn(p, lam, n_gates)
        taus = np.full(n_gates + 1, 2.0)
        taus[0] = 1.0
        return _log_scaling_from(logc, taus)
    phi = float(spec.phi)
    if method == "CSM":
        order = 2 * n_gates
        angles = [phi] + [phi + (2 * i - 1) * math.pi / order for i in range(1, order + 1)]
        taus = np.full(order + 1, 2.0)
        taus[0] = 1.0
        return _log_scaling_from(_log_abs_sine_product(angles), taus)
    if method == "CHISM":
        nc = 2 * n_gates
        angles = [phi] + [phi + 2 * math.pi * i / nc for i in range(1, nc)] + [-phi]
        taus = np.full(nc + 1, 2.0)
        taus[0] = taus[-1] = 1.0
        return _log_scaling_from(_log_abs_sine_product(angles), taus)
    raise ValueError(f"no fast path for {method}")


def probe_spec(noise_kind, e: float, n_gates: int, a: float = 1.0) -> NoiseChannelSpec:
    """Uniform gate noise with noise level ``e``: ``p = e/(2N)`` or ``phi = e/N``."""
    kind = NoiseKind.parse(noise_kind)
    if kind in (NoiseKind.SN, NoiseKind.DEPHASING):
        return sn(e / (2 * n_gates), a)
    if kind == NoiseKind.RE:
        return re(e / n_gates)
    raise ValueError(f"probes are defined for SN and RE, got {kind.value}")


PROBE_ORDERS = {"IIAM": 1, "IILM:KF": 1, "IISM:KF": 1, "IISM:NA": 1, "LC-IIAM": 1, "LC-IISM": 1}


def log_runtime_scaling(method: str, noise_kind, e: float, n_gates: int, order=None, a: float = 1.0, digits=40):
    """``log S`` of the catalogue plan for a uniform circuit at noise level ``e``.

    ``order=None`` uses the certification configuration: order 1 for the
    order-parametrised methods and the unbiased configuration otherwise. Full
    order CSM/CHISM/LC-CSM switch to the float64 path above 200 gates.
    """
    method = canonical_method(method)
    spec = probe_spec(noise_kind, e, n_gates, a)
    if order is None:
        order = PROBE_ORDERS.get(method)
    if method in FULL_ORDER_METHODS and order is None and n_gates > 200:
        return fast_log_runtime_scaling(method, spec, n_gates)
    ctx = get_context(digits)
    plan = build_plan(method, spec, n_gates, order, ctx)
    rep = metrics(plan, n_gates=n_gates, proxy=False, ctx=ctx)
    return float(ctx.mp.log(rep.runtime_scaling))

