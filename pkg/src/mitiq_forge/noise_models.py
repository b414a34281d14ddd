"""Characterised error channels and their circuit-independent bookkeeping.

Every channel here is generated by the gate's own Pauli generator ``P``. On a
Pauli word that anticommutes with ``P`` the channel acts as multiplication by a
complex number ``z = lam * exp(i phi)`` (real and imaginary parts feeding the
diagonal and partner entries of the transfer matrix); commuting words are left
alone. ``lam`` is the stochastic eigenvalue and ``phi`` the coherent angle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import InvalidPartition, InvalidProbability
from .pauli_algebra import get_context


class NoiseKind(str, enum.Enum):
    SN = "SN"
    RE = "RE"
    ORE = "ORE"
    DEPHASING = "Dephasing"

    @classmethod
    def parse(cls, text: str) -> "NoiseKind":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        if key in ("dephase", "dph"):
            return cls.DEPHASING
        raise ValueError(f"unknown noise kind {text!r}")


@dataclass(frozen=True)
class NoiseChannelSpec:
    """A characterised gate-wise error channel.

    Attributes:
        kind: SN, RE, ORE or Dephasing.
        p: stochastic amplitude (SN, ORE, Dephasing).
        phi: rotational amplitude in radians (RE, ORE).
        a_param: closure parameter of stochastic noise, ``N^2 = aI + (1-a)N``.
        generator: optional Pauli-word index of the generator; ``None`` means
            "the generator of whichever gate carries this noise".
    """

    kind: NoiseKind = NoiseKind.SN
    p: float = 0.0
    phi: float = 0.0
    a_param: float = 1.0
    generator: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind.parse(self.kind))
        if self.p < 0 or self.p > 1:
            raise InvalidProbability(f"p={self.p} outside [0, 1]")
        if self.a_param < 0 or self.a_param > 1:
            raise ValueError("a_param must lie in [0, 1]")
        if self.kind == NoiseKind.RE and self.p != 0:
            raise ValueError("RE channels carry no stochastic amplitude")
        if self.kind in (NoiseKind.SN, NoiseKind.DEPHASING) and self.phi != 0:
            raise ValueError("stochastic channels carry no rotational amplitude")

    @property
    def effective_a(self) -> float:
        """Closure parameter actually used (dephasing and ORE flips are self-inverse)."""
        return self.a_param if self.kind == NoiseKind.SN else 1.0

    def is_zero(self) -> bool:
        return self.p == 0 and self.phi == 0

    def with_amplitudes(self, p=None, phi=None) -> "NoiseChannelSpec":
        return NoiseChannelSpec(
            self.kind,
            self.p if p is None else p,
            self.phi if phi is None else phi,
            self.a_param,
            self.generator,
        )


def sn(p, a=1.0) -> NoiseChannelSpec:
    return NoiseChannelSpec(NoiseKind.SN, p=p, a_param=a)


def re(phi) -> NoiseChannelSpec:
    return NoiseChannelSpec(NoiseKind.RE, phi=phi)


def ore(p, phi) -> NoiseChannelSpec:
    return NoiseChannelSpec(NoiseKind.ORE, p=p, phi=phi)


def dephasing(p) -> NoiseChannelSpec:
    return NoiseChannelSpec(NoiseKind.DEPHASING, p=p)


def gaussian_ore(mu, sigma) -> NoiseChannelSpec:
    """ORE channel equivalent to a Gaussian-distributed over-rotation.

    A rotation angle drawn from ``N(mu, sigma^2)`` averages to a rotation by
    ``mu`` followed by a flip with probability ``(1 - exp(-sigma^2/2))/2``.
    """
    return ore((1 - math.exp(-sigma * sigma / 2)) / 2, mu)


def stochastic_eigenvalue(spec: NoiseChannelSpec, ctx=None):
    """Eigenvalue ``lam`` of the stochastic part on anticommuting words."""
    ctx = get_context(ctx)
    p = ctx.mpf(spec.p)
    if spec.kind == NoiseKind.SN:
        return 1 - (1 + ctx.mpf(spec.a_param)) * p
    if spec.kind in (NoiseKind.ORE, NoiseKind.DEPHASING):
        return 1 - 2 * p
    return ctx.mpf(1)


def multiplier(spec: NoiseChannelSpec, ctx=None, sign: int = 1):
    """Complex multiplier ``lam * exp(i sign phi)`` of the channel.

    ``sign=-1`` gives the channel of a perfect hidden inverse, which reverses
    the coherent part only.
    """
    ctx = get_context(ctx)
    lam = stochastic_eigenvalue(spec, ctx)
    phi = ctx.mpf(spec.phi) * sign
    return ctx.mp.mpc(lam * ctx.mp.cos(phi), lam * ctx.mp.sin(phi))


@dataclass(frozen=True)
class ChannelDecomposition:
    """Coefficients ``f_k`` of ``E = sum_k f_k chi_k`` with ``chi_0`` the identity."""

    coefficients: tuple
    n_components: int


def decomposition(spec: NoiseChannelSpec, ctx=None) -> ChannelDecomposition:
    """Canonical decomposition coefficients evaluated at the spec's amplitudes."""
    ctx = get_context(ctx)
    mp = ctx.mp
    p, phi = ctx.mpf(spec.p), ctx.mpf(spec.phi)
    if spec.kind in (NoiseKind.SN, NoiseKind.DEPHASING):
        f = (1 - p, p)
    elif spec.kind == NoiseKind.RE:
        f = (mp.cos(phi / 2) ** 2, mp.sin(phi), mp.sin(phi / 2) ** 2)
    else:
        f = (
            mp.cos(phi / 2) ** 2 - p * mp.cos(phi),
            (1 - 2 * p) * mp.sin(phi),
            mp.sin(phi / 2) ** 2 + p * mp.cos(phi),
        )
    return ChannelDecomposition(tuple(f), len(f))


def eigenvalues(spec: NoiseChannelSpec, ctx=None) -> list:
    """Distinct-eigenvalue list of the channel on a single generator."""
    ctx = get_context(ctx)
    mp = ctx.mp
    one = mp.mpc(1, 0)
    if spec.kind in (NoiseKind.SN, NoiseKind.DEPHASING):
        return [one, mp.mpc(stochastic_eigenvalue(spec, ctx), 0)]
    lam = stochastic_eigenvalue(spec, ctx)
    phi = ctx.mpf(spec.phi)
    return [one, lam * mp.expj(phi), lam * mp.expj(-phi)]


def noise_level(spec: NoiseChannelSpec, n_gates: int):
    """Leading-order proxy bias: ``2pN`` (stochastic) plus ``N|phi|`` (rotational)."""
    if n_gates < 1:
        raise ValueError("n_gates must be positive")
    return 2 * spec.p * n_gates + n_gates * abs(spec.phi)


def unmitigated_proxy_bias(spec: NoiseChannelSpec, n_gates: int, ctx=None):
    """Circuit-independent bound ``|1 - f0^N| + (sum|f_k|)^N - |f0|^N``."""
    if n_gates < 1:
        raise ValueError("n_gates must be positive")
    ctx = get_context(ctx)
    f = decomposition(spec, ctx).coefficients
    f0n = f[0] ** n_gates
    total = sum(abs(x) for x in f)
    return abs(1 - f0n) + total**n_gates - abs(f[0]) ** n_gates


def multiplicity(kind, n_gates: int, partition) -> int:
    """Number of circuit terms sharing a configuration.

    For the general form ``partition`` lists how many gates take each channel
    component, and the result is the multinomial ``N! / prod(l_j!)``. For the
    rotational form (``kind`` RE) ``partition`` is the total order ``k`` (an int
    or one-element sequence) and the result sums over the ways of reaching
    order ``k`` with the two first-order and one second-order components.

    Raises:
        InvalidPartition: if the general partition does not sum to ``n_gates``.
    """
    kind = NoiseKind.parse(kind) if isinstance(kind, str) else kind
    if kind == NoiseKind.RE and (isinstance(partition, int) or len(partition) == 1):
        k = partition if isinstance(partition, int) else partition[0]
        if k < 0 or k > 2 * n_gates:
            raise InvalidPartition(f"order {k} outside [0, 2N]")
        total = 0
        for l in range(k // 2 + 1):
            rest = n_gates + l - k
            if rest < 0:
                continue
            total += 2 ** (k - 2 * l) * math.factorial(n_gates) // (
                math.factorial(l) * math.factorial(k - 2 * l) * math.factorial(rest)
            )
        return total
    parts = [int(x) for x in partition]
    if any(x < 0 for x in parts) or sum(parts) != n_gates:
        raise InvalidPartition(f"partition {parts} does not sum to {n_gates}")
    out = math.factorial(n_gates)
    for x in parts:
        out //= math.factorial(x)
    return out


def compose_stochastic(p1, p2, a=1.0):
    """Amplitude of two consecutive closed stochastic channels.

    Eigenvalues multiply, ``1-(1+a)p = (1-(1+a)p1)(1-(1+a)p2)``, which for
    ``a = 1`` is ``p1 + p2 (1 - 2 p1)``.
    """
    lam = (1 - (1 + a) * p1) * (1 - (1 + a) * p2)
    return (1 - lam) / (1 + a)


def amplified_stochastic(p, insertions: int, a=1.0):
    """Amplitude after ``insertions`` identity insertions, ``(1-(1-(1+a)p)^(2m+1))/(1+a)``."""
    return (1 - (1 - (1 + a) * p) ** (2 * insertions + 1)) / (1 + a)
