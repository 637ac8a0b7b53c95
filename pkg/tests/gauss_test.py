from __future__ import annotations

import numpy as np
import pytest

from src.ads.gauss import (
    ExtractedMap,
    MinimalLagrangianReport,
    ProjectionMap,
    TensorReport,
    btilde,
    btilde_report,
    extract_phi,
    gauss_map,
    orthogonality_check,
    rotation_discrepancy,
    verify_minimal_lagrangian,
    verify_tensor_b,
)
from src.ads.surface import induced_geometry, reconstruct_sigma
from src.calculus.connection import grad
from src.calculus.fields import identity_endomorphism
from src.geometry.lie2 import hyperbolic_distance
from src.symplectic.fields import Bump, bump_hamiltonian, hamiltonian_field
from src.symplectic.flows import FlowMap, IdentityMap, MoebiusMap, pullback_metric
from src.symplectic.sections import identity_section, polar_section, rotate_section, trivialized_section

BUMPS = [Bump(1j, 0.6, 0.3), Bump(0.2 + 1.1j, 0.4, -0.2)]


@pytest.fixture(scope="module")
def gauss_id(group, h):
    s = reconstruct_sigma(IdentityMap(), identity_section(h), group, name="sigma_id")
    return gauss_map(s, induced_geometry(s))


def test_gauss_map_of_the_identity_surface_is_the_diagonal(gauss_id, points):
    left, right = gauss_id.points(points)
    np.testing.assert_allclose(left, points, atol=1e-10)
    np.testing.assert_allclose(right, points, atol=1e-10)
    assert gauss_id.equivariance_residual(points) < 1e-8


def test_projections_are_surface_maps(gauss_id, points):
    z, jac = ProjectionMap(gauss=gauss_id, side=1).apply(points[:2])
    np.testing.assert_allclose(z, points[:2], atol=1e-10)
    np.testing.assert_allclose(jac, np.broadcast_to(np.eye(2), jac.shape), atol=1e-6)


def test_extracted_map_of_the_identity_surface(gauss_id, points):
    phi = extract_phi(gauss_id)
    assert isinstance(phi, ExtractedMap)
    z, jac = phi.apply(points[:3])
    np.testing.assert_allclose(z, points[:3], atol=1e-9)
    np.testing.assert_allclose(jac, np.broadcast_to(np.eye(2), jac.shape), atol=1e-6)


def test_btilde_of_a_totally_geodesic_surface_is_the_identity(gauss_id, points):
    values = btilde(gauss_id.geometry)(points)
    np.testing.assert_allclose(values, np.broadcast_to(np.eye(2), values.shape), atol=1e-4)


def test_btilde_report_on_the_identity_surface(gauss_id):
    report = btilde_report(gauss_id, np.array([1j, 0.1 + 1.2j]))
    assert report.isometry < 1e-2
    assert report.determinant < 1e-2
    assert report.trace_margin > 3.9


def test_orthogonality_of_the_identity_surface(gauss_id, points):
    assert orthogonality_check(gauss_id.immersion, points) < 1e-9


def test_tensor_b_conditions_for_the_identity(points):
    report = verify_tensor_b(identity_endomorphism(), IdentityMap(), z=points)
    assert report.passes(1e-9, self_adjoint=True)
    assert report.trace_margin == pytest.approx(4.0)
    assert set(report.as_dict()) == {"isometry", "determinant", "codazzi", "trace_margin", "self_adjoint"}


def test_isometries_are_minimal_lagrangian(group, points):
    report = verify_minimal_lagrangian(MoebiusMap(group.generators[3].m), identity_endomorphism(), z=points)
    assert report.passes(1e-9, self_adjoint=True)


def test_failing_conditions_are_reported():
    report = TensorReport(isometry=0.0, determinant=0.0, codazzi=0.5, trace_margin=4.0, self_adjoint=0.0)
    assert not report.passes(1e-3)
    skew = TensorReport(isometry=0.0, determinant=0.0, codazzi=0.0, trace_margin=4.0, self_adjoint=0.5)
    assert skew.passes(1e-3)
    assert not skew.passes(1e-3, self_adjoint=True)


def test_rotation_discrepancy_reads_off_the_angle(h, points):
    turned = rotate_section(identity_section(h), 0.4)
    mean, spread, off = rotation_discrepancy(turned, identity_section(h), points)
    assert mean == pytest.approx(0.4)
    assert spread < 1e-12
    assert off < 1e-12


def test_identity_is_minimal_lagrangian_for_a_pulled_back_target(group, h, points):
    H = bump_hamiltonian(BUMPS, group)
    f = FlowMap.autonomous(grad(h, H), group, time=0.3, steps=16)
    h_r = pullback_metric(f, h, name="f*h")
    report = verify_minimal_lagrangian(f.inverse(), identity_endomorphism(), h, h_r, z=points)
    assert isinstance(report, MinimalLagrangianReport)
    assert report.passes(1e-4)


def test_polar_section_of_a_hamiltonian_flow_fails_codazzi(group, h):
    z = np.array([0.3 + 1.3j, -0.2 + 0.8j, 0.25 + 0.9j])
    psi = FlowMap.autonomous(hamiltonian_field(bump_hamiltonian(BUMPS, group), h), group, steps=32)
    report = verify_minimal_lagrangian(psi, polar_section(psi, h), h, z=z)
    assert report.self_adjoint < 1e-8
    assert report.determinant < 1e-8
    assert report.isometry < 1e-3
    assert report.codazzi > 1e-3
    assert not report.passes(1e-4)
    assert report.worst() >= report.codazzi


def test_minimal_lagrangian_verdict_always_includes_self_adjointness():
    skew = MinimalLagrangianReport(isometry=0.0, determinant=0.0, codazzi=0.0, trace_margin=4.0, self_adjoint=0.5)
    assert not skew.passes(1e-3)
    assert not skew.passes(1e-3, self_adjoint=False)
    assert skew.worst() == 0.5
    assert TensorReport(**skew.as_dict()).worst() == 0.0
    assert TensorReport(isometry=0.0, determinant=0.0, codazzi=0.0, trace_margin=-1.0, self_adjoint=0.0).worst() == float("inf")


def test_extracted_map_recovers_a_hamiltonian_flow(group, h, loops):
    z = np.array([1j, 0.15 + 1.1j])
    psi = FlowMap.autonomous(hamiltonian_field(bump_hamiltonian(BUMPS[:1], group), h), group, steps=32, name="psi")
    rotated, theta = trivialized_section(psi, polar_section(psi, h), loops=loops, group=group)
    assert theta.winding.tolist() == [0.0, 0.0, 0.0, 0.0]
    s = reconstruct_sigma(psi, rotated, group, check_points=z)
    assert s.reconstruction_residual(z) < 1e-5
    gm = gauss_map(s, induced_geometry(s, z), z)
    recovered = extract_phi(gm)(z)
    assert float(hyperbolic_distance(recovered, psi(z)).max()) < 1e-3
    assert float(hyperbolic_distance(recovered, z).max()) > 1e-2
