#!/usr/bin/env python
"""
Genus-2 Fuchsian group of the regular octagon with angles pi/4.

The octagon is built in the Poincare disc, centred at the origin, with
vertex k at angle (2k-1) pi/8 and side k (from vertex k to vertex k+1)
having its midpoint at angle k pi/4. Sides are paired following the
surface word a1 b1 a1^-1 b1^-1 a2 b2 a2^-1 b2^-1, i.e. 0<->2, 1<->3,
4<->6, 5<->7. Generator g_k maps side p(k) onto side k and sends the
octagon to its neighbour across side k, so g_{p(k)} = g_k^-1.

Everything exposed to the rest of the package lives in the upper
half-plane through the Cayley map z = i (1 + w) / (1 - w), which sends
the disc origin to the basepoint x0 = i.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from src.errors import ConsistencyError, ReductionError
from src.geometry.lie2 import (
    H2Point,
    MoebiusElt,
    disc_to_half_plane,
    frame_matrices,
    half_plane_to_disc,
    mobius,
    mobius_derivative,
    rotation_matrices,
    sl2_inverse,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "fuchsian/v1"
PAIRING: Tuple[int, ...] = (2, 3, 0, 1, 6, 7, 4, 5)
LOOP_GENERATORS: Tuple[Tuple[str, int], ...] = (("a1", 0), ("b1", 1), ("a2", 4), ("b2", 5))
CONSTRUCTION_TOL = 1e-10
REDUCTION_TOL = 1e-12
DEFAULT_WORD_CAP = 40

# cosh(inradius) = cot(pi/8), cosh(circumradius) = cot(pi/8)^2
INRADIUS = math.acosh(1.0 / math.tan(math.pi / 8))
CIRCUMRADIUS = math.acosh(1.0 / math.tan(math.pi / 8) ** 2)
_CAYLEY = np.array([[1j, 1j], [-1.0, 1.0]])
_CAYLEY_INV = np.linalg.inv(_CAYLEY)


@dataclass(frozen=True, eq=False)
class FuchsianGroup:
    """Side-pairing generators of the octagon group.

    `generators[k]` is g_k (upper half-plane), `disc_generators[k]` the
    same element in SU(1,1), `centers[k] = g_k(0)` in the disc.
    """
    generators: Tuple[MoebiusElt, ...]
    relation_word: Tuple[int, ...]
    pairing: Tuple[int, ...]
    disc_generators: np.ndarray
    centers: np.ndarray

    @property
    def matrices(self) -> np.ndarray:
        return np.stack([g.m for g in self.generators])

    def word(self, indices: Sequence[int]) -> MoebiusElt:
        out = MoebiusElt.identity()
        for k in indices:
            out = out @ self.generators[k]
        return out

    def relation_residual(self) -> float:
        return self.word(self.relation_word).distance(MoebiusElt.identity())


@dataclass(frozen=True, eq=False)
class FundamentalDomain:
    vertices_disc: np.ndarray
    side_pairings: Dict[int, Tuple[int, int]]

    @property
    def vertices(self) -> np.ndarray:
        return disc_to_half_plane(self.vertices_disc)

    def interior_angles(self) -> np.ndarray:
        v = self.vertices_disc
        angles = []
        for k in range(8):
            here = v[k]
            fwd = _disc_recentre(here, v[(k + 1) % 8])
            back = _disc_recentre(here, v[(k - 1) % 8])
            diff = abs(np.angle(fwd) - np.angle(back)) % (2 * math.pi)
            angles.append(min(diff, 2 * math.pi - diff))
        return np.array(angles)


@dataclass(frozen=True, eq=False)
class Loop:
    """A geodesic loop from `start` to closing(start), split into sub-arcs.

    The path is s -> frame(i e^s), s in [0, length]; `breaks` holds the
    arclength parameters of the sub-arc endpoints.
    """
    name: str
    generator_index: int
    closing: MoebiusElt
    start: complex
    frame: np.ndarray
    length: float
    breaks: np.ndarray

    @property
    def end(self) -> complex:
        return complex(self.points(np.array([self.length]))[0])

    def points(self, s: np.ndarray) -> np.ndarray:
        return mobius(self.frame, 1j * np.exp(np.asarray(s, dtype=float)))

    def velocities(self, s: np.ndarray) -> np.ndarray:
        w = 1j * np.exp(np.asarray(s, dtype=float))
        return mobius_derivative(self.frame, w) * w

    def discrete_length(self) -> float:
        """Sum of |dz| / Im(midpoint) over sub-arcs (midpoint rule)."""
        pts = self.points(self.breaks)
        mids = self.points(0.5 * (self.breaks[1:] + self.breaks[:-1]))
        return float(np.sum(np.abs(np.diff(pts)) / mids.imag))


@dataclass(frozen=True, eq=False)
class LoopBasis:
    loops: Tuple[Loop, ...]
    basepoint: complex

    def __iter__(self):
        return iter(self.loops)

    def __len__(self) -> int:
        return len(self.loops)


def _su11_rotation(theta: float) -> np.ndarray:
    return np.diag([np.exp(0.5j * theta), np.exp(-0.5j * theta)])


def _su11_half_turn(m: float) -> np.ndarray:
    return (1j / (1 - m * m)) * np.array([[1 + m * m, -2 * m], [2 * m, -(1 + m * m)]])


def _disc_apply(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    return (a[..., 0, 0] * w + a[..., 0, 1]) / (a[..., 1, 0] * w + a[..., 1, 1])


def _disc_recentre(centre: complex, w: complex) -> complex:
    return (w - centre) / (1 - np.conj(centre) * w)


def _disc_to_sl2r(a: np.ndarray) -> MoebiusElt:
    m = _CAYLEY @ a @ _CAYLEY_INV
    m = m / np.sqrt(np.linalg.det(m))
    if np.abs(m.imag).max() > 1e-9:
        raise ConsistencyError(f"Cayley conjugate is not real: {m}")
    return MoebiusElt(m.real)


def _build_generators() -> Tuple[np.ndarray, List[MoebiusElt]]:
    m = math.tanh(INRADIUS / 2)
    half = _su11_half_turn(m)
    disc = []
    for k in range(8):
        theta_k = k * math.pi / 4
        theta_p = PAIRING[k] * math.pi / 4
        disc.append(_su11_rotation(theta_k) @ half @ _su11_rotation(-theta_p))
    disc_arr = np.stack(disc)
    return disc_arr, [_disc_to_sl2r(a) for a in disc_arr]


def _vertex_cycle(disc_gens: np.ndarray, vertices: np.ndarray) -> Tuple[int, ...]:
    """Word obtained by walking the tiles around vertex 0 back to the octagon."""
    word: List[int] = []
    product = np.eye(2, dtype=complex)
    j, side = 0, 0
    for _ in range(16):
        word.append(side)
        a = disc_gens[side]
        product = product @ a
        q = _disc_apply(np.linalg.inv(a), vertices[j])
        j_next = int(np.argmin(np.abs(vertices - q)))
        if abs(vertices[j_next] - q) > 1e-8:
            raise ConsistencyError(f"vertex image {q} is not a vertex")
        entered = PAIRING[side]
        side = (j_next - 1) % 8 if entered == j_next else j_next
        j = j_next
        scale = product / np.sqrt(np.linalg.det(product))
        if min(np.abs(scale - np.eye(2)).max(), np.abs(scale + np.eye(2)).max()) < 1e-8:
            return tuple(word)
    raise ConsistencyError("vertex cycle did not close")


def _intersection_sign(out_i: float, in_i: float, out_j: float, in_j: float) -> int:
    def in_arc(lo: float, hi: float, x: float) -> bool:
        return 0.0 < (x - lo) % (2 * math.pi) < (hi - lo) % (2 * math.pi)

    hit_out = in_arc(out_i, in_i, out_j)
    hit_in = in_arc(out_i, in_i, in_j)
    if hit_out == hit_in:
        return 0
    return 1 if hit_out else -1


def intersection_matrix(basis: LoopBasis) -> np.ndarray:
    """Algebraic intersection numbers of the loops, read off at the basepoint.

    All loops pass through x0, so the count is decided by the cyclic order
    of the outgoing and incoming directions there.
    """
    dirs = []
    for loop in basis.loops:
        v_out = loop.velocities(np.array([0.0]))[0]
        v_end = loop.velocities(np.array([loop.length]))[0]
        back = loop.closing.inverse().m
        v_in = v_end * mobius_derivative(back, np.asarray(loop.end))
        dirs.append((float(np.angle(v_out)), float(np.angle(-v_in))))
    n = len(dirs)
    out = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            if i != j:
                out[i, j] = _intersection_sign(*dirs[i], *dirs[j])
    return out


def make_loop(name: str, index: int, g: MoebiusElt, start: complex, n: int = 2) -> Loop:
    end = complex(mobius(g.m, np.asarray(start)))
    a_p = frame_matrices(np.asarray(start))
    target = complex(half_plane_to_disc(mobius(sl2_inverse(a_p), np.asarray(end))))
    alpha = math.atan2(target.imag, target.real)
    length = 2.0 * math.atanh(abs(target))
    frame = a_p @ rotation_matrices(np.asarray(alpha))
    return Loop(
        name=name,
        generator_index=index,
        closing=g,
        start=start,
        frame=frame,
        length=length,
        breaks=np.linspace(0.0, length, n + 1),
    )


def loop_refine(basis: LoopBasis, n: int) -> LoopBasis:
    """Resample each loop to n geodesic sub-arcs of equal arclength."""
    if n < 2:
        raise ValueError("loop_refine needs n >= 2")
    loops = tuple(replace(loop, breaks=np.linspace(0.0, loop.length, n + 1)) for loop in basis.loops)
    return LoopBasis(loops=loops, basepoint=basis.basepoint)


def build_group(generators: Sequence[MoebiusElt], disc_generators: np.ndarray) -> FuchsianGroup:
    vertices = _octagon_vertices()
    word = _vertex_cycle(disc_generators, vertices)
    centers = _disc_apply(disc_generators, np.zeros(8, dtype=complex))
    group = FuchsianGroup(
        generators=tuple(generators),
        relation_word=word,
        pairing=PAIRING,
        disc_generators=disc_generators,
        centers=centers,
    )
    _validate(group, vertices)
    return group


def _octagon_vertices() -> np.ndarray:
    r = math.tanh(CIRCUMRADIUS / 2)
    k = np.arange(8)
    return r * np.exp(1j * (2 * k - 1) * math.pi / 8)


def _validate(group: FuchsianGroup, vertices: np.ndarray) -> None:
    residual = group.relation_residual()
    if residual > CONSTRUCTION_TOL:
        raise ConsistencyError(f"relation residual {residual:.3e} above {CONSTRUCTION_TOL}")
    if len(group.relation_word) != 8:
        raise ConsistencyError(f"vertex cycle has length {len(group.relation_word)}, expected 8")
    for k, g in enumerate(group.generators):
        if abs(g.trace) <= 2.0:
            raise ConsistencyError(f"generator {k} is not hyperbolic (trace {g.trace})")
        inv = group.generators[PAIRING[k]]
        if (g @ inv).distance(MoebiusElt.identity()) > CONSTRUCTION_TOL:
            raise ConsistencyError(f"g_{k} g_{PAIRING[k]} is not the identity")


def side_points(vertices_disc: np.ndarray, side: int, t: np.ndarray) -> np.ndarray:
    """Points on side `side` at hyperbolic-fraction t in [0, 1] from its first vertex."""
    start = vertices_disc[side]
    end = vertices_disc[(side + 1) % 8]
    far = _disc_recentre(start, end)
    length = 2.0 * math.atanh(abs(far))
    local = np.tanh(t * length / 2.0) * far / abs(far)
    return (local + start) / (1 + np.conj(start) * local)


def side_pairing_residual(group: FuchsianGroup, domain: FundamentalDomain, n: int = 17) -> float:
    t = np.linspace(0.0, 1.0, n)
    worst = 0.0
    for k in range(8):
        src = side_points(domain.vertices_disc, PAIRING[k], t)
        img = _disc_apply(group.disc_generators[k], src)
        expected = side_points(domain.vertices_disc, k, 1.0 - t)
        worst = max(worst, float(np.abs(img - expected).max()))
    return worst


def euler_characteristic(group: FuchsianGroup) -> int:
    """V - E + F of the octagon with sides identified."""
    parent = list(range(8))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k in range(8):
        p = group.pairing[k]
        for a, b in ((p, (k + 1) % 8), ((p + 1) % 8, k)):
            parent[find(a)] = find(b)
    n_vertices = len({find(i) for i in range(8)})
    return n_vertices - 4 + 1


def domain_area() -> float:
    """Hyperbolic area of the octagon by quadrature over its 8 sectors."""
    klein_mid = math.tanh(INRADIUS)

    def integrand(theta: float) -> float:
        rho = klein_mid / math.cos(theta)
        r = rho / (1.0 + math.sqrt(1.0 - rho * rho))
        return 2.0 * r * r / (1.0 - r * r)

    value, _ = quad(integrand, -math.pi / 8, math.pi / 8, epsabs=1e-13, epsrel=1e-13)
    return 8.0 * value


def expected_generator_trace() -> float:
    """2 cosh(l/2) from the right-angle hyperbolic trigonometry of the octagon."""
    alpha, beta = math.pi / 4, math.pi / 2
    return 2.0 * abs(math.sin(alpha) * math.sin(beta) * math.cosh(INRADIUS) - math.cos(alpha) * math.cos(beta))


@lru_cache(maxsize=1)
def standard_genus2() -> Tuple[FuchsianGroup, FundamentalDomain, LoopBasis]:
    disc, gens = _build_generators()
    group = build_group(gens, disc)
    domain = _domain_for(group)
    residual = side_pairing_residual(group, domain)
    if residual > CONSTRUCTION_TOL:
        raise ConsistencyError(f"side pairing residual {residual:.3e}")
    basis = _loop_basis(group)
    logger.debug("genus-2 group built, relation word %s", group.relation_word)
    return group, domain, basis


def _domain_for(group: FuchsianGroup) -> FundamentalDomain:
    pairings = {s: (group.pairing[s], group.pairing[s]) for s in range(8)}
    return FundamentalDomain(vertices_disc=_octagon_vertices(), side_pairings=pairings)


def _loop_basis(group: FuchsianGroup) -> LoopBasis:
    loops = tuple(make_loop(name, k, group.generators[k], 1j) for name, k in LOOP_GENERATORS)
    basis = LoopBasis(loops=loops, basepoint=1j)
    form = intersection_matrix(basis)
    standard = np.array([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]])
    if not np.array_equal(form, standard):
        raise ConsistencyError(f"loop intersection matrix is not standard: {form.tolist()}")
    return basis


def reduce_points(
    z: np.ndarray,
    group: FuchsianGroup,
    cap: int = DEFAULT_WORD_CAP,
) -> Tuple[np.ndarray, np.ndarray]:
    """Batch reduction: returns (z0, g) with z = g(z0) and z0 in the closed octagon.

    Greedy Dirichlet descent: while some side's neighbour centre g_k(0) is
    strictly closer to the point than the origin, step through the side
    giving the largest decrease (smallest index on ties).
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    w = half_plane_to_disc(z.ravel())
    g = np.broadcast_to(np.eye(2), (w.size, 2, 2)).copy()
    mats = group.matrices
    inv_disc = np.linalg.inv(group.disc_generators)
    c = group.centers
    c_norm = 1.0 - np.abs(c) ** 2
    active = np.arange(w.size)
    steps = 0
    while active.size:
        wa = w[active]
        margin = (np.abs(wa) ** 2)[:, None] * c_norm[None, :] - np.abs(wa[:, None] - c[None, :]) ** 2
        best = np.argmax(margin, axis=1)
        step = margin[np.arange(active.size), best] > REDUCTION_TOL
        active, k = active[step], best[step]
        if not active.size:
            break
        if steps == cap:
            raise ReductionError(f"{active.size} point(s) not reduced within {cap} steps")
        w[active] = _disc_apply(inv_disc[k], w[active])
        g[active] = g[active] @ mats[k]
        steps += 1
    return disc_to_half_plane(w).reshape(shape), g.reshape(shape + (2, 2))


def reduce_to_domain(z: H2Point, group: FuchsianGroup, cap: int = DEFAULT_WORD_CAP) -> Tuple[H2Point, MoebiusElt]:
    z0, g = reduce_points(np.array([z.z]), group, cap=cap)
    return H2Point(complex(z0[0])), MoebiusElt(g[0])


def in_domain(z: np.ndarray, group: FuchsianGroup, tol: float = 1e-9) -> np.ndarray:
    w = half_plane_to_disc(z)
    c = group.centers
    margin = (np.abs(w) ** 2)[..., None] * (1.0 - np.abs(c) ** 2) - np.abs(w[..., None] - c) ** 2
    return np.all(margin <= tol, axis=-1)


def random_domain_points(rng: np.random.Generator, n: int, radius: float = 0.6) -> np.ndarray:
    """Uniform-in-disc samples of Euclidean radius < `radius`, in the half-plane."""
    r = radius * np.sqrt(rng.uniform(size=n))
    a = rng.uniform(0.0, 2 * math.pi, size=n)
    return disc_to_half_plane(r * np.exp(1j * a))


def save_group(group: FuchsianGroup, domain: FundamentalDomain, path: Path) -> None:
    payload = {
        "schema": SCHEMA_VERSION,
        "generators": [g.m.tolist() for g in group.generators],
        "disc_generators": [[[[e.real, e.imag] for e in row] for row in a] for a in group.disc_generators],
        "relation_word": list(group.relation_word),
        "pairing": list(group.pairing),
        "vertices_disc": [[v.real, v.imag] for v in domain.vertices_disc],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2)


def load_group(path: Path) -> Tuple[FuchsianGroup, FundamentalDomain, LoopBasis]:
    if not path.exists():
        raise FileNotFoundError(f"Group file not found: {path}")
    with path.open("r", encoding="utf-8") as f:
        raw = json.load(f)
    if raw.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"Unsupported group schema {raw.get('schema')!r}, expected {SCHEMA_VERSION}")
    try:
        gens = [MoebiusElt(np.array(m, dtype=float)) for m in raw["generators"]]
        disc = np.array([[[complex(*e) for e in row] for row in a] for a in raw["disc_generators"]])
        vertices = np.array([complex(*v) for v in raw["vertices_disc"]])
    except KeyError as e:
        raise ValueError(f"Invalid group file: missing {e}") from e
    group = build_group(gens, disc)
    domain = FundamentalDomain(vertices_disc=vertices, side_pairings=_domain_for(group).side_pairings)
    return group, domain, _loop_basis(group)
