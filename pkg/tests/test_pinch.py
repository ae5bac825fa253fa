import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hidden_dynamics import (
    HypothesisError, PreconditionError, SmoothSystem, complete_extrinsic, extrinsic_pinch, intrinsic_pinch,
    kappa_coefficients, manifold_dynamics, sliding_field, sliding_set, verify_completion,
)
from hidden_dynamics.pinch import complete_intrinsic, fit_order, kappa_numeric
from hidden_dynamics.expressions import parse
from hidden_dynamics.scenarios import get_scenario

HILL = "2*(x1/alpha)^b/(1+(x1/alpha)^b)-1"


@pytest.fixture
def s2():
    return SmoothSystem.from_strings(["x1^2", "-x2"])


@pytest.fixture
def proto5():
    return SmoothSystem.from_strings(["x1-mu", "mu*x2"], mu_of_eps="eps", M=2, manifolds=["eps"])


@pytest.fixture
def proto6():
    return SmoothSystem.from_strings(["x1^2-mu", "mu*x2"], mu_of_eps="eps^2", M=2, manifolds=["eps", "-eps"])


def test_extrinsic_pinch_fields(s2):
    P = extrinsic_pinch(s2, 0.1)
    assert np.allclose(P.system.f_plus_at([0.0, 0.5]), [0.01, -0.5])
    assert np.allclose(P.system.f_minus_at([0.0, 0.5]), [0.01, -0.5])
    assert P.at(0.2).system.f_plus_at([0.0, 0.5])[0] == pytest.approx(0.04)


def test_s2_has_only_crossing_without_G(s2):
    P = extrinsic_pinch(s2, 0.1)
    for eps in (0.1, 0.05, 1e-3):
        for y in (-1.0, 0.0, 2.0):
            assert sliding_set(P.at(eps).system, [0.0, y]) == []


def test_s2_quadratic_completion(s2):
    c = complete_extrinsic(s2, 0.1)
    assert c.rationale == "case_b_quadratic"
    for eps in (0.1, 0.01):
        system = c.pinched.at(eps).system
        for y in (-1.0, 0.3, 2.0):
            roots = sliding_set(system, [0.0, y])
            assert len(roots) == 1 and abs(roots[0].value) <= 1e-12 and roots[0].tangential
            assert np.array_equal(sliding_field(system, [0.0, y], roots[0].value), [0.0, -y])


def test_s2_kappa_coefficients(s2):
    c = complete_extrinsic(s2, 0.1)
    assert np.allclose(kappa_coefficients(c.pinched, [0.0, 0.3], 0.5, 3), [0.0, 0.5, 0.0], atol=1e-15)
    assert np.allclose(kappa_coefficients(c.pinched.incomplete(), [0.0, 0.3], 0.5, 3), [0.0, 2.0, 0.0],
                       atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(-1, 1), y=st.floats(-1, 1), a=st.floats(-2, 2), b=st.floats(-2, 2))
def test_property_kappa_symbolic_matches_numeric(lam, y, a, b):
    sm = SmoothSystem.from_strings([f"x1^2*({a}+x2)+({b})*x1^3+x1*sin(x2)", "-x2"])
    P = extrinsic_pinch(sm, 0.1, check=False)
    exact = kappa_coefficients(P, [0.0, y], lam, 3)
    approx = kappa_numeric(P, [0.0, y], lam, 3)
    assert np.allclose(approx, exact, rtol=1e-6, atol=1e-6)


def test_cubic_leaves_pinch_incomplete():
    c = complete_extrinsic(SmoothSystem.from_strings(["x1^3", "-x2"]), 0.1)
    assert c.rationale == "incomplete" and c.G is None


def test_linear_normal_part_needs_no_G():
    c = complete_extrinsic(SmoothSystem.from_strings(["-x1", "1"]), 0.1)
    assert c.rationale == "case_a_zero" and c.G is None
    roots = sliding_set(c.pinched.system, [0.0, 0.0])
    assert [r.value for r in roots] == [0.0]


def test_extrinsic_hypothesis_errors():
    with pytest.raises(HypothesisError) as info:
        complete_extrinsic(SmoothSystem.from_strings(["x1*x2", "-x2"]), 0.1)
    assert info.value.quantity == "a1"
    with pytest.raises(HypothesisError, match="indeterminate"):
        complete_extrinsic(SmoothSystem.from_strings(["1e-7*x1", "-x2"]), 0.1)
    with pytest.raises(PreconditionError):
        complete_extrinsic(SmoothSystem.from_strings(["x1+1", "-x2"]), 0.1)


def test_hill_extrinsic():
    sm = SmoothSystem.from_strings(["-x1", HILL], params={"alpha": 1.0, "b": 10.0})
    c = complete_extrinsic(sm, 0.01)
    assert c.rationale == "case_a_zero"
    roots = sliding_set(c.pinched.system, [0.0, 0.0])
    assert len(roots) == 1
    assert sliding_field(c.pinched.system, [0.0, 0.0], roots[0].value)[1] == pytest.approx(-1.0, abs=1e-10)


def test_hill_intrinsic_given_completion():
    cfg = get_scenario("hill-intrinsic")
    eps = 0.1 * math.sqrt(2)
    P = intrinsic_pinch(cfg.smooth, eps).with_G([parse("0"), parse("2*(l^2-1)")], "given")
    roots = sliding_set(P.system, [0.0, 0.0])
    assert [r.value for r in roots] == [pytest.approx(0.0, abs=1e-12)]
    f = sliding_field(P.system, [0.0, 0.0], roots[0].value)
    assert f[1] == pytest.approx(2 * 32 / 33 - 1 - 2, abs=1e-9)
    assert abs(f[1] - (-1.0)) <= 0.061


def test_single_manifold_prototype(proto5):
    c = complete_intrinsic(proto5, 0.1, "single")
    assert c.rationale == "intrinsic_single_zero"
    for eps in (0.1, 0.01):
        roots = sliding_set(c.pinched.at(eps).system, [0.0, 0.7])
        assert [r.value for r in roots] == [pytest.approx(0.5, abs=1e-12)]
    rep = verify_completion(c.pinched, [0.1, 0.05, 0.025])
    assert rep.exact and rep.order >= 2.5
    assert max(rep.residuals) <= 1e-13


def test_double_manifold_prototype(proto6):
    c = complete_intrinsic(proto6, 0.1, "double")
    assert c.rationale == "intrinsic_double_quadratic"
    roots = sliding_set(c.pinched.system, [0.0, -0.4])
    assert [r.value for r in roots] == [pytest.approx(-0.5, abs=1e-12), pytest.approx(0.5, abs=1e-12)]
    rep = verify_completion(c.pinched, [0.1, 0.05, 0.025])
    assert rep.order >= 2.5
    assert max(rep.root_offsets) <= 1e-12


def test_non_trivial_residual_orders():
    # F_y = mu (x2 + x1^2) makes the completed sliding field differ from the manifold dynamics
    p5 = SmoothSystem.from_strings(["x1-mu", "mu*(x2+x1^2)"], mu_of_eps="eps", M=2, manifolds=["eps"])
    rep = verify_completion(complete_intrinsic(p5, 0.1, "single").pinched, [0.1, 0.05, 0.025])
    assert not rep.exact and 2.5 <= rep.order <= 3.5
    p6 = SmoothSystem.from_strings(["x1^2-mu", "mu*(x2+x1^2)"], mu_of_eps="eps^2", M=2, manifolds=["eps", "-eps"])
    rep = verify_completion(complete_intrinsic(p6, 0.1, "double").pinched, [0.1, 0.05, 0.025])
    assert not rep.exact and 3.5 <= rep.order <= 4.5


def test_intrinsic_hypothesis_errors(proto5, proto6):
    with pytest.raises(HypothesisError) as info:
        complete_intrinsic(proto5, 0.1, "double")
    assert info.value.quantity == "mu'(0)"
    flat = SmoothSystem.from_strings(["x1^2-mu", "mu*x2"], mu_of_eps="eps", M=2, manifolds=[])
    with pytest.raises(HypothesisError):
        complete_intrinsic(flat, 0.1, "single")
    with pytest.raises(ValueError):
        complete_intrinsic(proto6, 0.1, "triple")


def test_intrinsic_preconditions():
    with pytest.raises(PreconditionError):
        intrinsic_pinch(SmoothSystem.from_strings(["x1", "x2"]), 0.1)
    with pytest.raises(PreconditionError):
        intrinsic_pinch(SmoothSystem.from_strings(["x1-mu", "mu*x2"], mu_of_eps="eps+1", M=2), 0.1)
    with pytest.raises(PreconditionError):
        intrinsic_pinch(SmoothSystem.from_strings(["x1-mu", "mu*x2"], mu_of_eps="eps", M=0.5,
                                                  manifolds=["eps"]), 0.1)


def test_manifold_dynamics_checks_invariance(proto5):
    md = manifold_dynamics(proto5, "eps", 0.1)
    assert md.max_residual == 0.0
    assert np.allclose(md([0.5]), [0.05])
    with pytest.raises(PreconditionError):
        manifold_dynamics(proto5, "eps^2", 0.1)


def test_fit_order():
    assert fit_order([0.1, 0.05, 0.025], [1e-3, 2.5e-4, 6.25e-5])[0] == pytest.approx(2.0)
    assert fit_order([0.1, 0.05], [0.0, 1e-15]) == (8, True)


def test_report_serializes(proto6):
    rep = verify_completion(complete_intrinsic(proto6, 0.1, "double").pinched, [0.1, 0.05])
    d = rep.to_dict()
    assert d["kind"] == "intrinsic" and d["rationale"] == "intrinsic_double_quadratic"
    assert len(d["roots"]) == 2 and len(d["residuals"]) == 2
