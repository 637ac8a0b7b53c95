from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from src.errors import InvalidFrameError, NotTimelikeError
from src.geometry.lie2 import (
    H2Point,
    MoebiusElt,
    Sl2Vec,
    TimelikeGeodesic,
    ads_inner,
    circle_curvature,
    complex_multiplier,
    disc_to_half_plane,
    elliptic_fixed_point,
    elliptic_generators,
    elliptic_rotation_angle,
    fixed_points,
    geodesic_membership,
    geodesic_points,
    half_plane_to_disc,
    hyperbolic_distance,
    inner,
    isom_action,
    isometry_from_frame,
    loop_length,
    mobius,
    mobius_derivative,
    random_moebius,
    sectional_curvature,
    sl2_exp_matrix,
    sl2_inverse,
)

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def _point(rng: np.random.Generator) -> complex:
    return complex(rng.normal(), math.exp(rng.normal(scale=0.5)))


def _traceless(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a, b, c = rng.normal(scale=scale, size=3)
    return np.array([[a, b], [c, -a]])


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(min_value=0.1, max_value=10.0))
def test_canonical_representative_is_sign_and_scale_free(seed, scale):
    g = random_moebius(np.random.default_rng(seed))
    assert MoebiusElt(-g.m) == g
    scaled = MoebiusElt(scale * g.m)
    assert np.linalg.det(scaled.m) == pytest.approx(1.0, abs=1e-12)
    assert scaled.trace >= 0.0
    assert scaled == g


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_moebius_action_is_a_group_action(seed):
    rng = np.random.default_rng(seed)
    a, b = random_moebius(rng, 0.5), random_moebius(rng, 0.5)
    z = np.array([_point(rng) for _ in range(4)])
    np.testing.assert_allclose(mobius((a @ b).m, z), mobius(a.m, mobius(b.m, z)), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(mobius(a.inverse().m, mobius(a.m, z)), z, rtol=1e-9, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_isometry_from_frame_round_trip(seed):
    rng = np.random.default_rng(seed)
    p, q = _point(rng), _point(rng)
    alpha = rng.uniform(-math.pi, math.pi)
    lam = q.imag / p.imag * complex(math.cos(alpha), math.sin(alpha))
    g = isometry_from_frame(H2Point(p), H2Point(q), lam)
    assert complex(mobius(g.m, np.asarray(p))) == pytest.approx(q, abs=1e-9)
    assert complex(mobius_derivative(g.m, np.asarray(p))) == pytest.approx(lam, abs=1e-9)


def test_non_isometric_frame_is_rejected():
    with pytest.raises(InvalidFrameError):
        complex_multiplier(np.array([[2.0, 0.0], [0.0, 1.0]]), 1.0, 1.0)
    with pytest.raises(InvalidFrameError):
        complex_multiplier(np.array([[1.0, 0.0], [0.0, -1.0]]), 1.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_closed_form_exponential_matches_expm(seed):
    u = _traceless(np.random.default_rng(seed))
    np.testing.assert_allclose(sl2_exp_matrix(u), expm(u), rtol=1e-9, atol=1e-9)


def test_exponential_near_nilpotent():
    u = np.array([[0.0, 1.0], [1e-16, 0.0]])
    np.testing.assert_allclose(sl2_exp_matrix(u), expm(u), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_sectional_curvature_is_minus_one(seed):
    rng = np.random.default_rng(seed)
    u, v = Sl2Vec(_traceless(rng)), Sl2Vec(_traceless(rng))
    area2 = ads_inner(u, u) * ads_inner(v, v) - ads_inner(u, v) ** 2
    if abs(area2) < 1e-3:
        return
    assert sectional_curvature(u, v) == pytest.approx(-1.0, abs=1e-9)


def test_geodesic_circle_curvature():
    u = Sl2Vec(np.array([[1.0, 0.0], [0.0, -1.0]]))
    v = Sl2Vec(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert circle_curvature(u, v) == pytest.approx(-1.0, abs=1e-5)


def test_closed_timelike_geodesic_has_length_pi():
    u = Sl2Vec(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert ads_inner(u, u) == pytest.approx(-1.0)
    assert loop_length(u, t_max=math.pi) == pytest.approx(math.pi, abs=1e-9)
    np.testing.assert_allclose(sl2_exp_matrix(math.pi * u.u), -np.eye(2), atol=1e-12)
    assert elliptic_rotation_angle(u, t_max=math.pi) == pytest.approx(2 * math.pi, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(min_value=0.3, max_value=3.0))
def test_loop_length_is_half_the_turning_angle(seed, k):
    g = random_moebius(np.random.default_rng(seed), 0.5)
    u = Sl2Vec(k * sl2_inverse(g.m) @ np.array([[0.0, 1.0], [-1.0, 0.0]]) @ g.m)
    t_max = float(np.random.default_rng(seed).uniform(0.5, math.pi))
    assert loop_length(u, t_max) == pytest.approx(0.5 * elliptic_rotation_angle(u, t_max), rel=1e-8)


def test_geodesic_points_trace_a_loop_of_length_pi():
    geo = TimelikeGeodesic(H2Point(1j), H2Point(1j))
    t = np.linspace(0.0, 2 * math.pi, 4001)
    g = geodesic_points(geo, t)
    w = sl2_inverse(g[:-1]) @ np.diff(g, axis=0) / (t[1] - t[0])
    speed = np.sqrt(np.abs(inner(w, w)))
    assert float(np.sum(speed) * (t[1] - t[0])) == pytest.approx(math.pi, abs=1e-4)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_isom_action_moves_timelike_geodesics(seed):
    rng = np.random.default_rng(seed)
    x, y = H2Point(_point(rng)), H2Point(_point(rng))
    a, b = random_moebius(rng, 0.5), random_moebius(rng, 0.5)
    g = MoebiusElt(geodesic_points(TimelikeGeodesic(x, y), np.array(rng.uniform(0, 2 * math.pi))))
    assert geodesic_membership(TimelikeGeodesic(x, y), g)
    moved = TimelikeGeodesic(H2Point(complex(mobius(a.m, np.asarray(x.z)))), H2Point(complex(mobius(b.m, np.asarray(y.z)))))
    assert geodesic_membership(moved, isom_action(a, b, g), tol=1e-7)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_elliptic_generators_are_future_unit_timelike(seed):
    rng = np.random.default_rng(seed)
    p = np.array([_point(rng) for _ in range(3)])
    u = elliptic_generators(p)
    np.testing.assert_allclose(inner(u, u), -1.0, atol=1e-9)
    assert np.all(u[..., 1, 0] < 0)
    np.testing.assert_allclose(fixed_points(u), p, rtol=1e-9, atol=1e-9)


def test_fixed_point_requires_elliptic():
    assert elliptic_fixed_point(Sl2Vec(np.array([[0.0, 1.0], [-1.0, 0.0]]))).z == pytest.approx(1j)
    with pytest.raises(NotTimelikeError):
        elliptic_fixed_point(Sl2Vec(np.array([[1.0, 0.0], [0.0, -1.0]])))


def test_sl2_vec_must_be_traceless():
    with pytest.raises(ValueError):
        Sl2Vec(np.eye(2))


def test_h2_point_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        H2Point(1 - 1j)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_distance_is_invariant_and_cayley_maps_are_inverse(seed):
    rng = np.random.default_rng(seed)
    z1, z2 = _point(rng), _point(rng)
    g = random_moebius(rng, 0.5)
    d = hyperbolic_distance(z1, z2)
    assert float(hyperbolic_distance(mobius(g.m, np.asarray(z1)), mobius(g.m, np.asarray(z2)))) == pytest.approx(float(d), rel=1e-7, abs=1e-9)
    assert complex(disc_to_half_plane(half_plane_to_disc(z1))) == pytest.approx(z1, abs=1e-9)
    assert abs(complex(half_plane_to_disc(z1))) < 1.0
