from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.calculus.connection import area_form, hyperbolic_metric, omega_contraction
from src.calculus.fields import CohClass, equivariance_residual, fd_jacobian
from src.calculus.periods import period
from src.geometry.fuchsian import loop_refine
from src.geometry.lie2 import disc_to_half_plane, sl2_exp_matrix
from src.symplectic.fields import (
    Bump,
    axis_generator,
    bump_hamiltonian,
    bump_profile,
    closed_form_from_class,
    collar_form,
    collar_period_matrix,
    hamiltonian_field,
    random_bumps,
    symplectic_field_from_class,
)
from src.symplectic.flows import FlowMap, flux

BUMPS = [Bump(1j, 0.6, 0.3), Bump(0.2 + 1.1j, 0.4, -0.2)]


def contract(h, X, z):
    return np.einsum("...i,...ij->...j", X(z), area_form(h)(z))


@pytest.fixture(scope="module")
def H(group):
    return bump_hamiltonian(BUMPS, group)


def test_bump_profile_is_a_smooth_step():
    beta, d1, _ = bump_profile(np.array([0.0, 0.5, 1.0, 2.0]))
    assert beta[0] == pytest.approx(1.0)
    assert beta[2] == beta[3] == 0.0
    assert d1[1] < 0 and d1[3] == 0.0
    u = np.array([0.2, 0.6])
    h = 1e-6
    np.testing.assert_allclose(bump_profile(u)[1], (bump_profile(u + h)[0] - bump_profile(u - h)[0]) / (2 * h), rtol=1e-6)
    np.testing.assert_allclose(bump_profile(u)[2], (bump_profile(u + h)[1] - bump_profile(u - h)[1]) / (2 * h), rtol=1e-5)


def test_bumps_must_stay_inside_the_octagon():
    with pytest.raises(ValueError):
        Bump(1j, 0.0, 1.0)
    with pytest.raises(ValueError):
        Bump(1j, 1.5, 1.0)
    with pytest.raises(ValueError):
        Bump(0.9 + 1j, 0.5, 1.0)


def test_bump_peak_value(group):
    H = bump_hamiltonian([Bump(1j, 0.5, 0.25)], group)
    assert float(H(np.array([1j]))[0]) == pytest.approx(0.25)
    outside = disc_to_half_plane(np.array([0.45]))
    assert float(H(outside)[0]) == 0.0


def test_bump_hamiltonian_is_invariant(H, group, points):
    assert equivariance_residual(H, group, points) < 1e-9


def test_bump_derivatives_are_analytic(H, points):
    np.testing.assert_allclose(H.jacobian(points), fd_jacobian(H, points), atol=1e-7)
    np.testing.assert_allclose(H.hessian(points), fd_jacobian(H.jacobian, points), atol=1e-6)


def test_hamiltonian_field_is_omega_dual_to_dh(H, h, points):
    X = hamiltonian_field(H, h)
    np.testing.assert_allclose(contract(h, X, points), H.jacobian(points), atol=1e-12)
    with pytest.raises(ValueError):
        hamiltonian_field(H.differential(), h)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_random_bumps_are_seeded_and_valid(seed):
    a = random_bumps(np.random.default_rng(seed), count=3)
    b = random_bumps(np.random.default_rng(seed), count=3)
    assert a == b
    assert len(a) == 3
    assert all(0.35 <= bump.radius <= 0.6 and abs(bump.amplitude) <= 0.3 for bump in a)


def test_axis_generator_exponentiates_to_the_generator(group):
    for g in group.generators[:4]:
        u = axis_generator(g.m)
        assert np.linalg.det(u) == pytest.approx(-1.0, abs=1e-12)
        length = 2.0 * math.acosh(g.trace / 2.0)
        e = sl2_exp_matrix(0.5 * length * u)
        assert min(np.abs(e - g.m).max(), np.abs(e + g.m).max()) < 1e-9


def test_collar_period_matrix_is_unimodular():
    P = collar_period_matrix()
    assert np.array_equal(P, np.rint(P))
    assert abs(round(np.linalg.det(P))) == 1


def test_collar_form_is_invariant_with_analytic_derivatives(group, points):
    alpha = collar_form([1.0, -0.5, 0.25, 2.0], group)
    assert equivariance_residual(alpha, group, points) < 1e-8
    np.testing.assert_allclose(alpha.jacobian(points), fd_jacobian(alpha, points), atol=1e-6)
    jac = alpha.jacobian(points)
    np.testing.assert_allclose(jac[:, 0, 1], jac[:, 1, 0])


def test_closed_form_from_class_realizes_the_periods(group, loops):
    c = CohClass([0.3, -0.2, 0.1, 0.25])
    alpha = closed_form_from_class(c, group, representative="collar")
    got = period(alpha, loop_refine(loops, 16), check_closed=False)
    np.testing.assert_allclose(got.periods, c.periods, atol=1e-5)


def test_closed_form_rejects_non_finite_classes(group):
    with pytest.raises(ValueError):
        closed_form_from_class(CohClass([math.nan, 0, 0, 0]), group)


def test_symplectic_field_from_class_contracts_to_the_form(group, domain, h, points):
    c = CohClass([0.3, 0.0, -0.1, 0.0])
    X = symplectic_field_from_class(c, group, domain, h, representative="collar")
    alpha = closed_form_from_class(c, group, representative="collar")
    np.testing.assert_allclose(contract(h, X, points), alpha(points), atol=1e-10)


def test_omega_contraction_of_a_dual_returns_its_form(H, h, points):
    X = hamiltonian_field(H, h)
    assert omega_contraction(h, X) is X.dual_of[1]
    other = hyperbolic_metric()
    form = omega_contraction(other, X)
    assert form is not X.dual_of[1]
    np.testing.assert_allclose(form(points), H.jacobian(points), atol=1e-12)


def test_class_field_defaults_to_the_harmonic_representative(group, domain, h, loops):
    c = CohClass([0.2, -0.1, 0.0, 0.15])
    X = symplectic_field_from_class(c, group, domain, h, mesh_n=10)
    assert X.dual_of[1].name == "harmonic"
    psi = FlowMap.autonomous(X, group, time=1.0, steps=8)
    np.testing.assert_allclose(flux(psi, loops, h).periods, c.periods, atol=1e-6)


def test_zero_class_gives_a_vanishing_harmonic_field(group, domain, h, points):
    X = symplectic_field_from_class(CohClass.zero(), group, domain, h, mesh_n=8)
    np.testing.assert_allclose(X(points), 0.0, atol=1e-12)
