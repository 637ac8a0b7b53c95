from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.calculus.connection import (
    almost_complex,
    area_form,
    brioschi_curvature,
    canonical_frame,
    check_frame,
    connection_form,
    covariant_jacobian,
    exterior_derivative,
    rotate_frame,
    symplectic_dual,
)
from src.calculus.fields import (
    CohClass,
    CohClassMod2Pi,
    EquivField,
    FieldKind,
    MetricField,
    equivariance_residual,
    fd_jacobian,
    identity_endomorphism,
    zero_field,
)
from src.errors import FrameError


def _quadratic() -> EquivField:
    return EquivField(
        kind=FieldKind.SCALAR,
        fn=lambda z: z.real**2 * z.imag + 3.0 * z.imag,
        name="q",
        equivariant=False,
    )


def test_fd_jacobian_matches_polynomial_derivatives(points):
    jac = fd_jacobian(lambda w: w.real**2 * w.imag, points)
    np.testing.assert_allclose(jac[:, 0], 2 * points.real * points.imag, atol=1e-8)
    np.testing.assert_allclose(jac[:, 1], points.real**2, atol=1e-8)


def test_field_arithmetic_keeps_kind_and_values(points):
    q = _quadratic()
    total = q + q.scaled(2.0)
    assert total.kind is FieldKind.SCALAR
    np.testing.assert_allclose(total(points), 3.0 * q(points))
    np.testing.assert_allclose((q - q)(points), 0.0)
    np.testing.assert_allclose(q.differential()(points)[:, 1], points.real**2 + 3.0, atol=1e-8)
    with pytest.raises(ValueError):
        q + zero_field(FieldKind.VECTOR)
    with pytest.raises(ValueError):
        identity_endomorphism().hessian(points)


def test_field_needs_an_evaluator():
    with pytest.raises(ValueError):
        EquivField(kind=FieldKind.SCALAR)


def test_values_keep_the_input_shape():
    z = np.array([[1j, 1 + 2j], [0.5 + 1j, 2j]])
    assert identity_endomorphism()(z).shape == (2, 2, 2, 2)
    assert zero_field(FieldKind.ONE_FORM).jacobian(z).shape == (2, 2, 2, 2)


def test_hyperbolic_metric_christoffel_symbols(h, points):
    gamma = h.christoffel(points)
    y = points.imag
    np.testing.assert_allclose(gamma[:, 1, 0, 0], 1 / y)
    np.testing.assert_allclose(gamma[:, 1, 1, 1], -1 / y)
    np.testing.assert_allclose(gamma[:, 0, 0, 1], -1 / y)
    np.testing.assert_allclose(gamma[:, 0, 1, 0], -1 / y)
    np.testing.assert_allclose(gamma[:, 0, 0, 0], 0.0, atol=1e-15)


def test_hyperbolic_metric_is_invariant(h, group, points):
    assert equivariance_residual(h, group, points) < 1e-9


def test_brioschi_curvature_of_the_hyperbolic_metric(h, points):
    np.testing.assert_allclose(brioschi_curvature(h, points), -1.0, atol=1e-9)


def test_brioschi_curvature_with_numerical_derivatives(points):
    fd_metric = MetricField(fn=lambda z: np.eye(2) / (z.imag**2)[..., None, None], name="h_fd", step=1e-3)
    np.testing.assert_allclose(brioschi_curvature(fd_metric, points), -1.0, atol=1e-4)


def test_almost_complex_structure_squares_to_minus_one(h, points):
    J = almost_complex(h)(points)
    np.testing.assert_allclose(J @ J, -np.broadcast_to(np.eye(2), J.shape), atol=1e-14)
    omega = area_form(h)(points)
    np.testing.assert_allclose(omega[:, 0, 1], 1 / points.imag**2)


def test_generic_metric_formulas_agree_with_closed_forms(h, points):
    generic = MetricField(fn=h.fn, deriv_fn=h.deriv_fn, name="h_generic")
    np.testing.assert_allclose(almost_complex(generic)(points), almost_complex(h)(points), atol=1e-12)
    for a, b in zip(canonical_frame(generic), canonical_frame(h)):
        np.testing.assert_allclose(a(points), b(points), atol=1e-12)


def test_canonical_frame_is_orthonormal(h, points):
    frame = canonical_frame(h)
    check_frame(h, frame, points)
    check_frame(h, canonical_frame(h, -1), points, orientation=-1)
    with pytest.raises(FrameError):
        check_frame(h, (frame[1], frame[0]), points)


def test_connection_form_of_the_canonical_frame(h, points):
    omega = connection_form(h, canonical_frame(h))(points)
    np.testing.assert_allclose(omega[:, 0], 1 / points.imag, atol=1e-12)
    np.testing.assert_allclose(omega[:, 1], 0.0, atol=1e-12)


@pytest.mark.parametrize("orientation", [1, -1])
def test_d_omega_is_the_area_form(h, points, orientation):
    d_omega = exterior_derivative(connection_form(h, canonical_frame(h, orientation), orientation))(points)
    np.testing.assert_allclose(d_omega, orientation * h.sqrt_det(points), rtol=1e-6)


def test_reversed_connection_form_has_negative_curvature(h, points):
    omega_bar = -connection_form(h, canonical_frame(h))
    np.testing.assert_allclose(exterior_derivative(omega_bar)(points), -h.sqrt_det(points), rtol=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=-math.pi, max_value=math.pi))
def test_rotating_the_frame_shifts_omega_by_d_theta(h, angle):
    z = np.array([1j, 0.2 + 1.3j, -0.4 + 0.8j])
    theta = EquivField(
        kind=FieldKind.SCALAR,
        fn=lambda w: angle * w.real,
        deriv_fn=lambda w: np.stack([np.full(w.shape, angle), np.zeros(w.shape)], axis=-1),
        name="theta",
        equivariant=False,
    )
    base = connection_form(h, canonical_frame(h))(z)
    turned = connection_form(h, rotate_frame(canonical_frame(h), theta))(z)
    np.testing.assert_allclose(turned - base, np.stack([np.full(3, angle), np.zeros(3)], axis=-1), atol=1e-6)


def test_symplectic_dual_contracts_back(h, points):
    alpha = EquivField(
        kind=FieldKind.ONE_FORM,
        fn=lambda w: np.stack([np.cos(w.real), w.imag], axis=-1),
        name="alpha",
        equivariant=False,
    )
    X = symplectic_dual(h, alpha)
    omega = area_form(h)(points)
    contracted = np.einsum("...i,...ij->...j", X(points), omega)
    np.testing.assert_allclose(contracted, alpha(points), atol=1e-12)
    generic = MetricField(fn=h.fn, name="h_generic")
    np.testing.assert_allclose(symplectic_dual(generic, alpha)(points), X(points), atol=1e-10)
    np.testing.assert_allclose(X.jacobian(points), fd_jacobian(X, points), atol=1e-6)


def test_covariant_jacobian_of_a_killing_field_is_skew(h, points):
    # d/dx generates translations, an isometry
    killing = EquivField(
        kind=FieldKind.VECTOR,
        fn=lambda w: np.stack([np.ones(w.shape), np.zeros(w.shape)], axis=-1),
        deriv_fn=lambda w: np.zeros(w.shape + (2, 2)),
        name="d/dx",
    )
    lowered = h(points) @ covariant_jacobian(h, killing, points)
    np.testing.assert_allclose(lowered + np.swapaxes(lowered, -1, -2), 0.0, atol=1e-12)


def test_cohomology_classes_reduce_mod_two_pi():
    c = CohClass([2 * math.pi + 0.1, -0.1, 4 * math.pi, 0.0])
    assert c.mod2pi() == CohClassMod2Pi([0.1, 2 * math.pi - 0.1, 0.0, 0.0])
    assert c.mod2pi().distance(CohClass([0.1, -0.1, 0.0, 0.0])) < 1e-12
    assert c.integer_part().tolist() == [1.0, 0.0, 2.0, 0.0]
    assert c.lattice_residual() == pytest.approx(0.1)
    assert (2 * c - c).norm() == pytest.approx(c.norm())
    assert CohClassMod2Pi([2 * math.pi - 1e-13, 0, 0, 0]).distance(CohClass.zero()) < 1e-12
