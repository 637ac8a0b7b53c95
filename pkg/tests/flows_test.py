from __future__ import annotations

import numpy as np
import pytest

from src.calculus.fields import CohClass, fd_jacobian
from src.geometry.lie2 import random_moebius
from src.symplectic.fields import Bump, bump_hamiltonian, hamiltonian_field, symplectic_field_from_class
from src.symplectic.flows import (
    ComposedMap,
    FlowMap,
    IdentityMap,
    MoebiusMap,
    SurfaceMap,
    flux,
    map_flux,
    map_second_jacobian,
    pullback_metric,
)
from src.symplectic.sections import symplecticity_defect

STEPS = 128


@pytest.fixture(scope="module")
def X(group, h):
    H = bump_hamiltonian([Bump(1j, 0.6, 0.3), Bump(0.2 + 1.1j, 0.4, -0.2)], group)
    return hamiltonian_field(H, h)


@pytest.fixture(scope="module")
def psi(X, group):
    return FlowMap.autonomous(X, group, steps=STEPS)


def test_identity_flow_fixes_points(group, points):
    z, jac = FlowMap.identity(group).apply(points)
    np.testing.assert_array_equal(z, points)
    np.testing.assert_array_equal(jac, np.broadcast_to(np.eye(2), jac.shape))


def test_maps_satisfy_the_surface_map_protocol(psi):
    for f in (psi, IdentityMap(), MoebiusMap(np.eye(2)), ComposedMap(IdentityMap(), IdentityMap())):
        assert isinstance(f, SurfaceMap)


def test_hamiltonian_flow_preserves_area(psi, h, points):
    assert symplecticity_defect(psi, points, h) < 1e-6


def test_flow_jacobian_matches_finite_differences(psi, points):
    fd = fd_jacobian(lambda w: np.stack([psi(w).real, psi(w).imag], axis=-1), points, 1e-4)
    np.testing.assert_allclose(psi.jacobian(points), fd, atol=1e-5)


def test_flow_then_inverse_returns_home(psi, points):
    back = psi.then(psi.inverse())
    np.testing.assert_allclose(back(points), points, atol=1e-6)
    assert back.name.endswith(psi.name)


def test_truncated_flows(psi, points):
    np.testing.assert_array_equal(psi.at(0.0)(points), points)
    np.testing.assert_allclose(psi.at(1.0)(points), psi(points))
    half = psi.at(0.5)
    np.testing.assert_allclose(half.then(half)(points), psi(points), atol=1e-6)
    with pytest.raises(ValueError):
        psi.at(1.5)


def test_with_steps_converges(psi, points):
    fine = psi.with_steps(2 * STEPS)
    assert float(np.abs(fine(points) - psi(points)).max()) < 1e-6


def test_flow_is_equivariant(psi, group, points):
    g = group.generators[2]
    moved = MoebiusMap(g.m)
    np.testing.assert_allclose(psi(moved.apply(points)[0]), moved.apply(psi(points))[0], atol=1e-7)


def test_moebius_map_second_jacobian_is_symmetric(points):
    f = MoebiusMap(random_moebius(np.random.default_rng(5), 0.5).m)
    d2 = map_second_jacobian(f, points)
    np.testing.assert_allclose(d2, np.swapaxes(d2, -1, -2), atol=1e-6)


def test_pullback_by_an_isometry_is_the_hyperbolic_metric(h, points):
    f = MoebiusMap(random_moebius(np.random.default_rng(9), 0.5).m)
    pulled = pullback_metric(f)
    np.testing.assert_allclose(pulled(points), h(points), rtol=1e-9)
    assert pulled.developing is f
    np.testing.assert_allclose(pullback_metric(IdentityMap())(points), h(points))


def test_hamiltonian_flows_have_zero_flux(psi, loops, h):
    assert flux(psi, loops, h).norm() < 1e-5
    assert map_flux(psi, loops).norm() < 5e-4


def test_identity_has_zero_swept_flux(loops):
    assert map_flux(IdentityMap(), loops).norm() < 1e-12


def test_class_flow_flux_is_its_class(group, domain, loops, h):
    c = CohClass([0.3, -0.2, 0.1, 0.0])
    Y = symplectic_field_from_class(c, group, domain, h, representative="collar")
    flow = FlowMap.autonomous(Y, group, steps=STEPS, name="class")
    np.testing.assert_allclose(flux(flow, loops, h).periods, c.periods, atol=1e-4)
    reverse = flux(flow.inverse(), loops, h)
    np.testing.assert_allclose(reverse.periods, -c.periods, atol=1e-4)


def test_composed_flux_adds(psi, group, domain, loops, h):
    c = CohClass([0.0, 0.2, 0.0, -0.1])
    Y = symplectic_field_from_class(c, group, domain, h, representative="collar")
    both = psi.then(FlowMap.autonomous(Y, group, steps=STEPS))
    np.testing.assert_allclose(flux(both, loops, h).periods, c.periods, atol=1e-4)
