from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import ReductionError
from src.geometry.fuchsian import (
    CONSTRUCTION_TOL,
    domain_area,
    euler_characteristic,
    expected_generator_trace,
    in_domain,
    intersection_matrix,
    load_group,
    loop_refine,
    random_domain_points,
    reduce_points,
    save_group,
    side_pairing_residual,
)
from src.geometry.lie2 import MoebiusElt, disc_to_half_plane, hyperbolic_distance, mobius

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def test_relation_and_pairing(group, domain):
    assert group.relation_residual() < CONSTRUCTION_TOL
    assert len(group.relation_word) == 8
    assert side_pairing_residual(group, domain) < 1e-9
    for k, g in enumerate(group.generators):
        assert (g @ group.generators[group.pairing[k]]) == MoebiusElt.identity()


def test_generators_are_hyperbolic_with_expected_trace(group):
    for g in group.generators:
        assert g.trace == pytest.approx(expected_generator_trace(), abs=1e-9)
        assert g.trace > 2.0


def test_octagon_is_a_genus_two_domain(domain):
    np.testing.assert_allclose(domain.interior_angles(), np.full(8, math.pi / 4), atol=1e-9)
    assert domain_area() == pytest.approx(4 * math.pi, abs=1e-8)


def test_euler_characteristic(group):
    assert euler_characteristic(group) == -2


def test_loop_basis_has_standard_intersections(loops):
    expected = np.array([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]])
    assert np.array_equal(intersection_matrix(loops), expected)


def test_loops_close_up(loops):
    for loop in loops:
        assert loop.start == pytest.approx(1j)
        assert loop.end == pytest.approx(complex(mobius(loop.closing.m, np.asarray(loop.start))), abs=1e-9)
    for coarse, fine, loop in zip(loop_refine(loops, 16), loop_refine(loops, 64), loops):
        assert coarse.discrete_length() == pytest.approx(loop.length, rel=1e-2)
        assert fine.discrete_length() == pytest.approx(loop.length, rel=1e-3)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_reduction_is_idempotent_and_equivariant(group, seed):
    rng = np.random.default_rng(seed)
    z = random_domain_points(rng, 16, radius=0.95)
    z0, g = reduce_points(z, group)
    assert np.all(in_domain(z0, group))
    assert float(hyperbolic_distance(mobius(g, z0), z).max()) < 1e-8
    z1, g1 = reduce_points(z0, group)
    np.testing.assert_allclose(z1, z0, atol=1e-12)
    np.testing.assert_allclose(g1, np.broadcast_to(np.eye(2), g1.shape), atol=1e-12)

    k = int(rng.integers(0, 8))
    moved, _ = reduce_points(mobius(group.generators[k].m, z0), group)
    assert float(hyperbolic_distance(moved, z0).max()) < 1e-7


def test_points_inside_are_fixed(group):
    z = disc_to_half_plane(np.array([0.0, 0.2 + 0.1j, -0.3j]))
    z0, g = reduce_points(z, group)
    np.testing.assert_allclose(z0, z)
    np.testing.assert_allclose(g, np.broadcast_to(np.eye(2), g.shape))


def test_reduction_word_cap(group):
    far = disc_to_half_plane(np.array([0.999999]))
    with pytest.raises(ReductionError):
        reduce_points(far, group, cap=1)


def test_group_json_round_trip(tmp_path, group, domain):
    path = tmp_path / "group.json"
    save_group(group, domain, path)
    loaded, loaded_domain, basis = load_group(path)
    for a, b in zip(loaded.generators, group.generators):
        assert a == b
    np.testing.assert_allclose(loaded_domain.vertices_disc, domain.vertices_disc)
    assert len(basis) == 4


def test_load_group_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_group(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": "fuchsian/v0"}', encoding="utf-8")
    with pytest.raises(ValueError):
        load_group(bad)
