from __future__ import annotations

import csv

import numpy as np
import pytest

from src.calculus.fields import CohClass, EquivField, FieldKind
from src.calculus.mesh import (
    build_octagon_mesh,
    closed_cochain,
    disc_to_klein,
    export_field_csv,
    harmonic_oneform,
    harmonic_projection,
    klein_to_disc,
)
from src.calculus.periods import gauss_legendre, line_integrals, period
from src.geometry.fuchsian import loop_refine
from src.symplectic.fields import Bump, bump_hamiltonian

MESH_N = 8
TARGET = CohClass([1.0, 0.5, -0.3, 0.2])


@pytest.fixture(scope="module")
def mesh():
    return build_octagon_mesh(MESH_N)


def test_gauss_legendre_integrates_polynomials_on_the_unit_interval():
    t, w = gauss_legendre(5)
    assert w.sum() == pytest.approx(1.0)
    assert float(w @ t**9) == pytest.approx(0.1)
    assert np.all((t > 0) & (t < 1))


def test_line_integral_of_an_exact_form(points):
    f = EquivField(kind=FieldKind.SCALAR, fn=lambda z: z.real * z.imag**2, name="f", equivariant=False)
    df = f.differential()
    p, q = points[:3], points[3:]
    got = line_integrals(df, p, q, pieces=4)
    np.testing.assert_allclose(got, f(q) - f(p), atol=1e-8)


def test_period_of_an_exact_invariant_form_vanishes(group, loops):
    H = bump_hamiltonian([Bump(1j, 0.6, 0.3), Bump(0.2 + 1.1j, 0.4, -0.2)], group)
    c = period(H.differential(), loop_refine(loops, 32))
    assert c.norm() < 1e-5


def test_period_rejects_non_forms(loops):
    H = EquivField(kind=FieldKind.SCALAR, fn=lambda z: z.real, name="x")
    with pytest.raises(ValueError):
        period(H, loops)


def test_mesh_glues_into_a_genus_two_surface(mesh):
    assert mesh.euler_characteristic == -2
    assert np.abs((mesh.d1 @ mesh.d0).toarray()).max() == 0
    assert np.all(np.isfinite(mesh.star1))


def test_mesh_rejects_tiny_resolution():
    with pytest.raises(ValueError):
        build_octagon_mesh(2)


def test_klein_chart_round_trip():
    w = np.array([0.0, 0.3 + 0.1j, -0.5j])
    k = disc_to_klein(w)
    np.testing.assert_allclose(klein_to_disc(k), w, atol=1e-12)


def test_closed_cochain_is_closed(mesh):
    a0 = closed_cochain(mesh, TARGET)
    assert np.abs(mesh.d1 @ a0).max() < 1e-12


def test_harmonic_projection_is_closed_and_coclosed(mesh):
    a = harmonic_projection(mesh, closed_cochain(mesh, TARGET))
    assert np.abs(mesh.d1 @ a).max() < 1e-10
    assert np.abs(mesh.d0.T @ (mesh.star1 * a)).max() < 1e-8


def test_harmonic_representative_has_the_requested_periods(group, domain, loops):
    form = harmonic_oneform(TARGET, group, domain, mesh_n=MESH_N)
    assert form.exterior_residual() < 1e-10
    assert form.coclosed_residual() < 1e-8
    np.testing.assert_allclose(period(form, loops).periods, TARGET.periods, atol=1e-6)


def test_zero_class_has_a_zero_representative(group, domain, points):
    form = harmonic_oneform(CohClass.zero(), group, domain, mesh_n=MESH_N)
    np.testing.assert_allclose(form(points), 0.0, atol=1e-14)


def test_field_snapshot_csv(tmp_path, points):
    f = EquivField(kind=FieldKind.ONE_FORM, fn=lambda z: np.stack([z.real, z.imag], axis=-1), name="f")
    path = tmp_path / "out" / "field.csv"
    export_field_csv(f, points, path)
    with path.open("r", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["x", "y", "v0", "v1"]
    assert len(rows) == points.size + 1
    assert float(rows[1][2]) == pytest.approx(points[0].real)
