import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from generators import random_affine
from hidden_dynamics import (
    PreconditionError, SlidingBranch, SwitchingSystem, TransitionFunction, builtin_transition, conjugacy_H,
    G_to_psi, integrate_hybrid, integrate_smooth, layer_problem, phi_regularize, psi_regularize, psi_to_G,
    reduced_problem, slow_manifold_distance, sliding_set, validate,
)
from hidden_dynamics.expressions import parse
from hidden_dynamics.integrator import IntegratorOptions
from hidden_dynamics.regularize import BUILTIN_TRANSITIONS, function_table

R2 = 1 / math.sqrt(2)
POLY = builtin_transition("poly_c1")
CLIP = builtin_transition("linear_clip")
SINE = builtin_transition("nonmono_sine")


@pytest.mark.parametrize("name", sorted(BUILTIN_TRANSITIONS))
def test_builtin_transitions_pass_their_checks(name):
    t = builtin_transition(name)
    c = t.check()
    assert c.passed
    assert c.sign_error == 0.0
    for s in (1.0, 1.3, 50.0):
        assert t(s) == 1.0 and t(-s) == -1.0


def test_transition_values():
    assert POLY(0.5) == 0.6875
    assert POLY.inverse(0.6875) == pytest.approx(0.5, abs=1e-15)
    assert POLY.inverse(1.0) == 1.0 and POLY.inverse(-1.0) == -1.0
    assert SINE(0.5) == pytest.approx(1.0)
    assert SINE(0.0) == 0.0
    assert not SINE.monotonic and POLY.monotonic and CLIP.monotonic
    with pytest.raises(PreconditionError):
        SINE.inverse(0.2)
    with pytest.raises(ValueError):
        builtin_transition("no_such")


def test_gluing_smoothness():
    # poly_c1 is C1 at +-1; linear_clip only C0
    assert POLY.prime(1.0 - 1e-9) == pytest.approx(0.0, abs=1e-8)
    assert POLY.prime(1.0) == 0.0
    assert CLIP.prime(1.0 - 1e-9) == 1.0 and CLIP.prime(1.0) == 0.0
    for t in (POLY, CLIP, SINE):
        assert abs(t(1.0 - 1e-12) - 1.0) <= 1e-11


def test_transition_from_expression():
    t = TransitionFunction.from_expression("cubic", "s*(3-s^2)/2")
    assert t.monotonic and t.check().passed
    assert t(0.5) == POLY(0.5)
    bumpy = TransitionFunction.from_expression("bumpy", "s+0.5*sin(3.141592653589793*s)")
    assert not bumpy.monotonic
    with pytest.raises(ValueError):
        TransitionFunction.from_expression("bad", "s+x")


def test_phi_regularize_requires_monotonic(fil_system):
    with pytest.raises(PreconditionError):
        phi_regularize(fil_system, SINE, 0.1)
    with pytest.raises(ValueError):
        phi_regularize(fil_system, POLY, 0.0)


def test_regularized_field_outside_layer_is_one_sided(fil_system):
    reg = phi_regularize(fil_system, POLY, 0.1)
    assert np.array_equal(reg([0.5, 0.3]), fil_system.f_plus_at([0.5, 0.3]))
    assert np.array_equal(reg([-0.5, 0.3]), fil_system.f_minus_at([-0.5, 0.3]))
    u = 0.4
    lam = POLY(u)
    assert np.allclose(reg([0.1 * u, 0.0]), fil_system.field([0.0, 0.0], lam), rtol=0, atol=1e-15)


def test_psi_regularization_examples(fil_system):
    z = psi_regularize(["1", "1"], ["1", "-2"], SINE, 0.1)
    assert np.allclose(z([0.05, 0.0]), [1.0, 1.0], atol=1e-15)
    assert np.allclose(z([0.0, 0.0]), [1.0, -0.5], atol=1e-15)
    # linear_clip is the classical regularization: the matching G vanishes
    assert all(g.evaluate({"l": 0.3}) == 0.0 for g in psi_to_G(CLIP, CLIP, ["1", "1"], ["1", "-2"]))


def test_psi_to_G_vanishes_at_endpoints():
    G = psi_to_G(POLY, SINE, ["1", "1"], ["1", "-2"])
    s = SwitchingSystem.from_strings(["1", "1"], ["1", "-2"]).with_G(G)
    assert validate(s).passed
    for lam in (-1.0, 1.0):
        assert np.all(s.G_at([0.0, 0.0], lam) == 0.0)
    # at l = phi(0.5) = 0.6875: (psi(0.5) - l) * (f+ - f-)/2 = (1 - 0.6875) * 1.5
    assert s.G_at([0.0, 0.0], 0.6875)[1] == pytest.approx(0.46875, abs=1e-14)


def identity_error(fp, fm, delta, rng, samples=100):
    G = psi_to_G(POLY, SINE, fp, fm)
    base = SwitchingSystem.from_strings(fp, fm)
    z = psi_regularize(fp, fm, SINE, delta)
    f = phi_regularize(base.with_G(G), POLY, delta)
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-1, 1, 2)
        x[0] = rng.uniform(-delta, delta)
        worst = max(worst, float(np.max(np.abs(z(x) - f(x)))))
    return worst


def test_psi_phi_identity_on_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(5):
        assert identity_error(random_affine(rng), random_affine(rng), 0.1, rng) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), delta=st.floats(1e-3, 1.0))
def test_property_psi_phi_identity(seed, delta):
    rng = np.random.default_rng(seed)
    assert identity_error(random_affine(rng), random_affine(rng), delta, rng, samples=30) <= 1e-12


def test_G_to_psi_round_trip():
    G = psi_to_G(POLY, SINE, ["1", "x2"], ["1-x2", "-2"])
    s = SwitchingSystem.from_strings(["1", "x2"], ["1-x2", "-2"]).with_G(G)
    back = G_to_psi(s, POLY)
    assert back is not None and not back.monotonic
    for u in np.linspace(-1, 1, 41):
        assert back(u) == pytest.approx(SINE(u), abs=1e-12)


def test_G_to_psi_rejects_unaligned_G(fil_system):
    # the two-branch system's G acts on x1 while f+ - f- = (0, 3)
    assert G_to_psi(fil_system, POLY) is None


def test_G_to_psi_without_G_returns_phi():
    s = SwitchingSystem.from_strings(["1", "1"], ["1", "-2"])
    assert G_to_psi(s, POLY) is POLY


def test_exported_field_reparses(reg_system):
    reg = phi_regularize(reg_system.with_G(psi_to_G(POLY, SINE, ["1", "-2"], ["1", "1"])), POLY, 0.1)
    exprs = [parse(e, function_table()) for e in reg.to_dict()["smooth"]["field"]]
    a = integrate_smooth(reg, [-0.05, 0.0], (0.0, 0.5)).final_state
    b = integrate_smooth(exprs, [-0.05, 0.0], (0.0, 0.5)).final_state
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_layer_problem_equilibria_match_sliding_set(fil_system):
    p = [0.0, 0.2]
    lp = layer_problem(fil_system, POLY, p)
    roots = sliding_set(fil_system, p)
    assert [e.lam for e in lp.equilibria] == [r.value for r in roots]
    for e, r in zip(lp.equilibria, roots):
        assert POLY(e.u) == pytest.approx(r.value, abs=1e-14)
        assert e.stability == np.sign(r.slope)
        assert lp.rhs(e.u) == pytest.approx(0.0, abs=1e-12)


def test_reduced_problem_and_conjugacy(reg_system):
    for seed, lam in ((-0.7, -R2), (0.7, R2)):
        branch = SlidingBranch.from_seed(reg_system, [0.0, 0.0], seed)
        red = reduced_problem(reg_system, POLY, branch)
        H = conjugacy_H(reg_system, POLY, branch)
        w = H([0.0, 0.3])
        assert POLY(w[0]) == pytest.approx(lam, abs=1e-14) and w[1] == 0.3
        assert np.array_equal(H.inverse(w), [0.0, 0.3])
        assert red.rhs([0.3])[0] == pytest.approx((-1 - 3 * lam) / 2, abs=1e-12)
        times = np.linspace(0.0, 1.0, 11)
        v = red.integrate([0.0], times)
        assert np.allclose(v[:, 0], times * (-1 - 3 * lam) / 2, atol=1e-12)


def test_conjugacy_singular_at_edge():
    # l* = 1 exactly: phi^-1 has infinite slope there
    s = SwitchingSystem.from_strings(["0", "1"], ["2", "1"])
    branch = SlidingBranch.from_seed(s, [0.0, 0.0], 1.0)
    with pytest.raises(PreconditionError):
        conjugacy_H(s, POLY, branch)([0.0, 0.0])


def test_slow_fast_needs_graph_coordinates():
    s = SwitchingSystem.from_strings(["-1", "1"], ["1", "1"], "x1+x2")
    branch = SlidingBranch.from_seed(s, [0.0, 0.0], 0.0)
    with pytest.raises(PreconditionError):
        reduced_problem(s, POLY, branch)


def test_crossing_system_has_no_branch():
    s = SwitchingSystem.from_strings(["1", "1"], ["1", "0"])
    with pytest.raises(PreconditionError):
        SlidingBranch.from_seed(s, [0.0, 0.0], 0.0)


def test_slow_manifold_distance_halves(reg_system):
    branch = SlidingBranch.from_seed(reg_system, [0.0, 0.0], -0.7)
    reps = [slow_manifold_distance(phi_regularize(reg_system, POLY, d), branch, [[0.0, 0.0], [0.0, 1.0]], 0.1)
            for d in (1e-2, 5e-3)]
    assert 0.4 <= reps[1].distance / reps[0].distance <= 0.6
    assert reps[0].u_discrepancy <= 1e-6


def test_slow_manifold_distance_preconditions(reg_system):
    repelling = SlidingBranch.from_seed(reg_system, [0.0, 0.0], 0.7)
    with pytest.raises(PreconditionError):
        slow_manifold_distance(phi_regularize(reg_system, POLY, 0.01), repelling, [[0.0, 0.0]])
    attracting = SlidingBranch.from_seed(reg_system, [0.0, 0.0], -0.7)
    z = psi_regularize(reg_system, None, SINE, 0.01)
    with pytest.raises(PreconditionError):
        slow_manifold_distance(z, attracting, [[0.0, 0.0]])


def test_regularized_orbit_is_close_to_sliding(reg_system):
    xh = integrate_hybrid(reg_system, [-0.5, 0.0], (0.0, 2.0)).final_state
    reg = phi_regularize(reg_system, POLY, 1e-2)
    xr = integrate_smooth(reg, [-0.5, 0.0], (0.0, 2.0), IntegratorOptions(max_step=1e-2)).final_state
    assert abs(xr[1] - xh[1]) <= 5e-3
    assert abs(xr[0]) <= 1e-2
