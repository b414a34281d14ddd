import itertools
import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mitiq_forge.errors import InvalidPartition, InvalidProbability
from mitiq_forge.noise_models import (
    NoiseChannelSpec,
    NoiseKind,
    amplified_stochastic,
    compose_stochastic,
    decomposition,
    dephasing,
    eigenvalues,
    gaussian_ore,
    multiplicity,
    multiplier,
    noise_level,
    ore,
    re,
    sn,
    stochastic_eigenvalue,
    unmitigated_proxy_bias,
)
from mitiq_forge.pauli_algebra import get_context

CTX = get_context(40)

probs = st.floats(0.0, 0.4)
angles = st.floats(-1.0, 1.0)


def test_kind_parsing():
    assert NoiseKind.parse("sn") == NoiseKind.SN
    assert NoiseKind.parse("dephasing") == NoiseKind.DEPHASING
    assert NoiseKind.parse("ORE") == NoiseKind.ORE
    with pytest.raises(ValueError):
        NoiseKind.parse("gdn")


def test_spec_validation():
    with pytest.raises(InvalidProbability):
        sn(1.2)
    with pytest.raises(ValueError):
        NoiseChannelSpec(NoiseKind.RE, p=0.1, phi=0.1)
    with pytest.raises(ValueError):
        NoiseChannelSpec(NoiseKind.SN, p=0.1, phi=0.1)
    with pytest.raises(ValueError):
        sn(0.1, a=1.5)


def test_noise_level_convention():
    assert noise_level(sn(0.001), 18) == pytest.approx(0.036)
    assert noise_level(re(-0.01), 18) == pytest.approx(0.18)
    assert noise_level(ore(0.001, 0.01), 10) == pytest.approx(0.02 + 0.1)
    with pytest.raises(ValueError):
        noise_level(sn(0.1), 0)


@given(probs, angles)
def test_decomposition_reproduces_multiplier(p, phi):
    spec = ore(p, phi)
    f = decomposition(spec, CTX).coefficients
    z = multiplier(spec, CTX)
    assert abs((f[0] - f[2]) - z.real) < 1e-30
    assert abs(f[1] - z.imag) < 1e-30
    assert abs(sum(f[k] for k in (0, 2)) - 1) < 1e-30


@given(probs, st.floats(0.0, 1.0))
def test_stochastic_eigenvalue(p, a):
    mp = CTX.mp
    assert abs(stochastic_eigenvalue(sn(p, a), CTX) - (1 - (1 + mp.mpf(a)) * mp.mpf(p))) < 1e-35
    assert abs(stochastic_eigenvalue(dephasing(p), CTX) - (1 - 2 * mp.mpf(p))) < 1e-35


def test_hidden_inverse_multiplier_reverses_angle_only():
    spec = ore(0.01, 0.2)
    z, w = multiplier(spec, CTX), multiplier(spec, CTX, sign=-1)
    assert abs(z - CTX.mp.conj(w)) < 1e-35


def test_eigenvalues():
    ev = eigenvalues(re(0.3), CTX)
    mp = CTX.mp
    assert abs(ev[1] - mp.expj(0.3)) < 1e-35 and abs(ev[2] - mp.expj(-0.3)) < 1e-35
    assert len(eigenvalues(sn(0.1), CTX)) == 2


def test_gaussian_ore_matches_averaged_rotation():
    mu, sigma = 0.1, 0.3
    spec = gaussian_ore(mu, sigma)
    # <exp(i theta)> for theta ~ N(mu, sigma^2) is exp(i mu - sigma^2/2)
    want = mpmath.expj(mu) * math.exp(-sigma * sigma / 2)
    assert abs(multiplier(spec, CTX) - want) < 1e-15


def _brute_general_multiplicity(n, parts):
    labels = [k for k, c in enumerate(parts) for _ in range(c)]
    return len(set(itertools.permutations(labels)))


@settings(max_examples=40)
@given(st.integers(1, 6).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
def test_general_multiplicity_counts_arrangements(args):
    n, k = args
    parts = (n - k, k)
    assert multiplicity(NoiseKind.SN, n, parts) == _brute_general_multiplicity(n, parts)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_rotational_multiplicity_counts_orders(n):
    # components: identity (order 0), two first-order pieces, one second-order piece
    orders = (0, 1, 1, 2)
    counts = {}
    for combo in itertools.product(range(4), repeat=n):
        k = sum(orders[c] for c in combo)
        counts[k] = counts.get(k, 0) + 1
    for k, c in counts.items():
        assert multiplicity(NoiseKind.RE, n, k) == c


def test_multiplicity_errors():
    with pytest.raises(InvalidPartition):
        multiplicity(NoiseKind.SN, 4, (1, 2))
    with pytest.raises(InvalidPartition):
        multiplicity(NoiseKind.RE, 2, 5)


@given(probs, probs, st.floats(0.0, 1.0))
def test_compose_stochastic_multiplies_eigenvalues(p1, p2, a):
    q = compose_stochastic(p1, p2, a)
    assert (1 - (1 + a) * q) == pytest.approx((1 - (1 + a) * p1) * (1 - (1 + a) * p2), abs=1e-12)
    if a == 1.0:
        assert q == pytest.approx(p1 + p2 * (1 - 2 * p1), abs=1e-12)


@given(st.floats(0.0, 0.2), st.integers(0, 6))
def test_amplified_stochastic_is_repeated_composition(p, m):
    q = p
    for _ in range(2 * m):
        q = compose_stochastic(q, p)
    assert amplified_stochastic(p, m) == pytest.approx(q, abs=1e-12)


def _brute_unmitigated_proxy(spec, n):
    f = decomposition(spec, CTX).coefficients
    total = abs(1 - f[0] ** n)
    for combo in itertools.product(range(len(f)), repeat=n):
        if any(combo):
            total += abs(math.prod(f[c] for c in combo))
    return total


@pytest.mark.parametrize("spec", [sn(0.03), re(0.1), ore(0.02, -0.15)])
@pytest.mark.parametrize("n", [1, 3, 5])
def test_unmitigated_proxy_bias_matches_enumeration(spec, n):
    assert abs(unmitigated_proxy_bias(spec, n, CTX) - _brute_unmitigated_proxy(spec, n)) < 1e-30


@given(st.floats(1e-6, 1e-3), st.integers(1, 50))
def test_unmitigated_proxy_leading_order_is_noise_level(p, n):
    ratio = unmitigated_proxy_bias(sn(p), n, CTX) / noise_level(sn(p), n)
    assert abs(ratio - 1) < 2 * n * p + 1e-9
