import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mitiq_forge.certification import (
    PerturbationFactors,
    Verdict,
    certify,
    clm_leading_coefficients,
    iism_na_cost_leading,
    iism_na_length_leading,
    iism_na_robustness,
    perturbed_chilm_boundary,
    perturbed_chilm_coefficients,
    perturbed_chilm_metrics,
    perturbed_clm_coefficients,
)
from mitiq_forge.errors import InvalidFactors
from mitiq_forge.mitigation_catalog import build_plan
from mitiq_forge.noise_models import dephasing, ore
from mitiq_forge.pauli_algebra import get_context

CTX = get_context(40)
TOL = CTX.tol(5)
factor = st.floats(0.5, 2.0)


def test_clm_is_certified_super():
    v = certify("CLM", "SN")
    assert v.label == "SUPER"
    assert all(x == Verdict.YES for x in v.as_dict().values())


def test_iism_kf_stochastic_verdicts():
    v = certify("IISM:KF", "SN").as_dict()
    assert [v[k] for k in ("scalable", "unbounded", "precise", "efficient", "robust")] == [
        Verdict.YES, Verdict.NO, Verdict.YES, Verdict.NO, Verdict.YES,
    ]


def test_iiam_rotational_is_not_scalable():
    assert certify("IIAM", "RE").scalable.verdict == Verdict.NO


def test_untabulated_pairs_are_not_tested():
    v = certify("CHILM", "SN")
    assert set(v.as_dict().values()) == {Verdict.NOT_TESTED}
    assert v.label == "-"


def test_factor_validation():
    with pytest.raises(InvalidFactors):
        PerturbationFactors(y_S_P=-0.1)
    with pytest.raises(InvalidFactors):
        PerturbationFactors(y_dagger=math.nan)
    PerturbationFactors(y_dagger=-0.5)
    with pytest.raises(InvalidFactors):
        perturbed_chilm_coefficients(ore(0.01, 0.02), PerturbationFactors(y_R_HI=0), CTX)
    with pytest.raises(InvalidFactors):
        perturbed_chilm_boundary(PerturbationFactors(y_R_HI=0), 10)


def test_perturbed_clm_example():
    got = perturbed_clm_coefficients(ore(0.01, 0.02), PerturbationFactors(), CTX)
    want = clm_leading_coefficients(0.01, 0.02)
    assert want == pytest.approx((1.02, -0.02, 0.0))
    assert all(abs(float(g) - w) < 2e-3 for g, w in zip(got, want))
    assert abs(sum(got) - 1) < TOL


def test_perturbed_clm_zero_noise():
    got = perturbed_clm_coefficients(ore(0, 0), PerturbationFactors(y_S_S=2, y_R_P=0.5), CTX)
    assert [float(x) for x in got] == pytest.approx([1, 0, 0], abs=1e-30)


@settings(max_examples=30, deadline=None)
@given(factor, factor, factor, factor)
def test_perturbed_clm_leading_order_is_factor_independent(ss, rs, sp, rp):
    p, phi = 1e-4, 2e-4
    y = PerturbationFactors(y_S_S=ss, y_R_S=rs, y_S_P=sp, y_R_P=rp)
    got = perturbed_clm_coefficients(ore(p, phi), y, CTX)
    want = clm_leading_coefficients(p, phi)
    # second-order terms are bounded by a small multiple of (p + phi)^2 for these factors
    assert all(abs(float(g) - w) < 50 * (p + phi) ** 2 for g, w in zip(got, want))


@settings(max_examples=20, deadline=None)
@given(factor, factor, factor)
def test_perturbed_chilm_coefficients_normalise(s_hi, r_hi, rp):
    y = PerturbationFactors(y_S_HI=s_hi, y_R_HI=r_hi, y_R_P=rp)
    spec = ore(1e-3, 3e-3)
    c = perturbed_chilm_coefficients(spec, y, CTX)
    assert abs(sum(c) - 1) < TOL


@pytest.mark.parametrize("s_hi, want", [(1.0, 2.0), (0.5, 1.5)])
def test_perturbed_chilm_runtime_exponent(s_hi, want):
    n, p, phi = 200, 2e-6, 1e-4
    e_sn = 2 * n * p
    rep = perturbed_chilm_metrics(ore(p, phi), PerturbationFactors(y_S_HI=s_hi), n, CTX)
    assert float(CTX.mp.log(rep.runtime_scaling)) / e_sn == pytest.approx(want, rel=2e-2)


def test_perturbed_chilm_boundary_example():
    assert perturbed_chilm_boundary(PerturbationFactors(), math.e**2) == pytest.approx(1.0)
    assert perturbed_chilm_boundary(PerturbationFactors(y_S_HI=0.5), math.e**2) == pytest.approx(2 / 1.5)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_iism_na_robustness_reduces_to_standard_plan(order):
    p, n = 1e-3, 4
    rob = iism_na_robustness(p, 1.0, order, n, CTX)
    plan = build_plan("IISM:NA", dephasing(p), n, order, CTX)
    for a, b in zip(rob.coefficients, plan.coefficients()):
        assert abs(a - b) < CTX.tol(10)


def test_iism_na_robustness_examples():
    assert abs(iism_na_robustness(0, 1.0, 1, 10, CTX).cost - 2) < TOL
    rob = iism_na_robustness(1e-8, 0.0, 1, 10, CTX)
    assert float(rob.amplitudes[1] / rob.amplitudes[0]) == pytest.approx(2, rel=1e-6)


@pytest.mark.parametrize("y", [0.0, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("order", [1, 2, 4])
def test_hypergeometric_closed_forms_match_richardson(y, order):
    rob = iism_na_robustness(0, y, order, 1, CTX)
    assert abs(iism_na_cost_leading(y, order, CTX) - rob.cost) < CTX.tol(10)
    assert abs(iism_na_length_leading(y, order, CTX) - rob.length_factor) < CTX.tol(10)
