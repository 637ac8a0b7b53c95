#!/usr/bin/env python
"""
Hamiltonians and closed one-forms on the genus-2 surface, and the
symplectic vector fields they generate.

Two sources of closed forms are used:

- bump Hamiltonians: sums of hyperbolic-radial bumps centred inside the
  octagon, so dH is exact and the generated flow is Hamiltonian;
- collar forms: d(rho(s)) summed over all lifts of the closed geodesic of
  a loop generator, where s is the signed distance to the lift and rho
  steps from 0 to 1 across a collar. They are smooth, closed and have
  integer periods (intersection numbers), so a combination of the four
  realises any cohomology class.

The class fields default to the harmonic representative of the mesh;
collar forms are the smooth alternative.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from src.calculus.connection import hyperbolic_metric, symplectic_dual
from src.calculus.fields import CohClass, EquivField, FieldKind, MetricField
from src.calculus.mesh import DEFAULT_MESH_N, harmonic_oneform
from src.calculus.periods import period
from src.errors import ConsistencyError
from src.geometry.fuchsian import (
    CIRCUMRADIUS,
    INRADIUS,
    LOOP_GENERATORS,
    FuchsianGroup,
    FundamentalDomain,
    loop_refine,
    reduce_points,
    standard_genus2,
)
from src.geometry.lie2 import hyperbolic_distance, mobius, sl2_inverse

logger = logging.getLogger(__name__)

COLLAR_WIDTH = 0.7
PERIOD_ARCS = 16
Representative = Literal["collar", "harmonic"]


def bump_profile(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """beta(u) = exp(1 - 1/(1-u)) on [0, 1), zero beyond; with beta', beta''."""
    u = np.asarray(u, dtype=float)
    inside = u < 1.0
    v = np.where(inside, 1.0 - u, 1.0)
    beta = np.where(inside, np.exp(1.0 - 1.0 / v), 0.0)
    d1 = -beta / v**2
    d2 = beta / v**4 - 2.0 * beta / v**3
    return beta, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


@dataclass(frozen=True)
class Bump:
    """A radial bump A beta(Q / Q0) of hyperbolic radius `radius` about `centre`."""
    centre: complex
    radius: float
    amplitude: float

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")
        reach = self.radius + float(hyperbolic_distance(self.centre, 1j))
        if reach >= INRADIUS:
            raise ValueError(
                f"bump at {self.centre} with radius {self.radius} leaves the octagon (reach {reach:.3f})"
            )

    @property
    def q0(self) -> float:
        return 2.0 * (math.cosh(self.radius) - 1.0)


def bump_hamiltonian(bumps: Sequence[Bump], group: FuchsianGroup, name: str = "H") -> EquivField:
    """Invariant scalar with analytic first and second derivatives.

    Supports sit strictly inside the octagon, so at a point z = g(z0) only
    the translate g(c) of each centre contributes.
    """
    centres = np.array([b.centre for b in bumps], dtype=complex)
    radii_q0 = np.array([b.q0 for b in bumps])
    amps = np.array([b.amplitude for b in bumps])

    def evaluate(z: np.ndarray, order: int):
        z = np.asarray(z, dtype=complex)
        _, g = reduce_points(z, group)
        c = mobius(g[:, None], centres[None, :])
        x, y = z.real[:, None], z.imag[:, None]
        a, b = c.real, c.imag
        q = np.abs(z[:, None] - c) ** 2 / (y * b)
        beta, d1, d2 = bump_profile(q / radii_q0)
        if order == 0:
            return beta @ amps
        qx = 2 * (x - a) / (y * b)
        qy = 2 * (y - b) / (y * b) - q / y
        if order == 1:
            w = amps * d1 / radii_q0
            return np.stack([np.sum(w * qx, axis=1), np.sum(w * qy, axis=1)], axis=-1)
        qxx = 2 / (y * b)
        qxy = -qx / y
        qyy = 2 / (y * b) - 2 * (y - b) / (y * y * b) - qy / y + q / (y * y)
        w1 = amps * d1 / radii_q0
        w2 = amps * d2 / radii_q0**2
        out = np.empty(z.shape + (2, 2))
        out[:, 0, 0] = np.sum(w2 * qx * qx + w1 * qxx, axis=1)
        out[:, 0, 1] = out[:, 1, 0] = np.sum(w2 * qx * qy + w1 * qxy, axis=1)
        out[:, 1, 1] = np.sum(w2 * qy * qy + w1 * qyy, axis=1)
        return out

    return EquivField(
        kind=FieldKind.SCALAR,
        fn=lambda z: evaluate(z, 0),
        deriv_fn=lambda z: evaluate(z, 1),
        hessian_fn=lambda z: evaluate(z, 2),
        name=name,
    )


def random_bumps(
    rng: np.random.Generator,
    count: int = 3,
    amplitude: float = 0.3,
    radius: Tuple[float, float] = (0.35, 0.6),
) -> List[Bump]:
    """Seeded bumps with centres spread over the octagon interior."""
    bumps: List[Bump] = []
    while len(bumps) < count:
        r = float(rng.uniform(*radius))
        reach = rng.uniform(0.0, INRADIUS - r - 0.05)
        angle = rng.uniform(0.0, 2 * math.pi)
        w = math.tanh(reach / 2) * complex(math.cos(angle), math.sin(angle))
        centre = complex(1j * (1 + w) / (1 - w))
        amp = float(rng.uniform(-amplitude, amplitude))
        bumps.append(Bump(centre=centre, radius=r, amplitude=amp))
    return bumps


def hamiltonian_field(H: EquivField, h: Optional[MetricField] = None, orientation: int = 1) -> EquivField:
    """X with Omega_h(X, .) = dH."""
    if H.kind is not FieldKind.SCALAR:
        raise ValueError("hamiltonian_field needs a scalar field")
    h = h or hyperbolic_metric()
    X = symplectic_dual(h, H.differential(), orientation)
    return X


# Collar forms


def _collar_profile(width: float) -> Tuple[float, Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]]:
    norm, _ = quad(lambda s: float(bump_profile((s / width) ** 2)[0]), -width, width, epsabs=1e-14, epsrel=1e-13)

    def rho(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u = (s / width) ** 2
        beta, d1, _ = bump_profile(u)
        return beta / norm, d1 * 2.0 * s / (width * width) / norm

    return norm, rho


def axis_generator(m: np.ndarray) -> np.ndarray:
    """Unit spacelike u (det u = -1) with exp(l u / 2) = m for hyperbolic m."""
    tr = m[0, 0] + m[1, 1]
    if tr < 0:
        m, tr = -m, -tr
    half = math.acosh(tr / 2.0)
    u = (m - 0.5 * tr * np.eye(2)) / math.sinh(half)
    return u


def _group_ball(group: FuchsianGroup, radius: float) -> np.ndarray:
    """Elements h (as matrices) with d(i, h(i)) <= radius, by breadth-first search."""
    limit = math.cosh(radius)
    mats = group.matrices
    seen: Dict[Tuple[float, ...], None] = {}
    out: List[np.ndarray] = []
    queue = deque([np.eye(2)])
    while queue:
        m = queue.popleft()
        if m[0, 0] + m[1, 1] < 0 or (abs(m[0, 0] + m[1, 1]) < 1e-12 and m[0, 1] < 0):
            m = -m
        key = tuple(np.round(m, 7).ravel())
        if key in seen:
            continue
        seen[key] = None
        if 0.5 * float(np.sum(m * m)) > limit:
            continue
        out.append(m)
        for g in mats:
            queue.append(m @ g)
    return np.stack(out)


@lru_cache(maxsize=4)
def collar_lifts(width: float = COLLAR_WIDTH) -> Tuple[np.ndarray, np.ndarray]:
    """Lifts of the four loop-generator axes that meet the width-collar of the octagon.

    Returns (axes (L, 2, 2), owner (L,)) where owner is the loop index 0..3.
    """
    group, _, _ = standard_genus2()
    reach = CIRCUMRADIUS + width
    axes, dists, lengths = [], [], []
    for _, k in LOOP_GENERATORS:
        u = axis_generator(group.generators[k].m)
        axes.append(u)
        dists.append(math.asinh(abs(u[0, 1] - u[1, 0]) / 2.0))
        lengths.append(2.0 * math.acosh(abs(group.generators[k].trace) / 2.0))
    search = reach + max(l / 2 + d for l, d in zip(lengths, dists))
    ball = _group_ball(group, search + CIRCUMRADIUS)
    lifts: Dict[Tuple[float, ...], Tuple[np.ndarray, int]] = {}
    for owner, u in enumerate(axes):
        conj = ball @ u @ sl2_inverse(ball)
        near = np.abs(conj[:, 0, 1] - conj[:, 1, 0]) / 2.0 < math.sinh(reach)
        for v in conj[near]:
            lifts.setdefault(tuple(np.round(v, 7).ravel()), (v, owner))
    ordered = sorted(lifts.values(), key=lambda item: (item[1], tuple(item[0].ravel())))
    logger.debug("collar lifts: %d within %.3f of the basepoint", len(ordered), reach)
    return np.stack([v for v, _ in ordered]), np.array([o for _, o in ordered])


def collar_form(
    coefficients: Sequence[float],
    group: FuchsianGroup,
    width: float = COLLAR_WIDTH,
    name: str = "collar",
) -> EquivField:
    """sum_k c_k d(rho(s_k)) over all lifts of the axis of loop generator k."""
    coeffs = np.asarray(coefficients, dtype=float)
    axes, owner = collar_lifts(width)
    keep = coeffs[owner] != 0.0
    axes, weights = axes[keep], coeffs[owner][keep]
    _, rho = _collar_profile(width)

    def joint(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        val = np.zeros(z.shape + (2,))
        jac = np.zeros(z.shape + (2, 2))
        if not axes.size:
            return val, jac
        _, g = reduce_points(z, group)
        u = g[:, None] @ axes[None] @ sl2_inverse(g)[:, None]
        p, r, s = u[..., 0, 0], u[..., 0, 1], u[..., 1, 0]
        x, y = z.real[:, None], z.imag[:, None]
        q = (2 * p * x + r - s * (x * x + y * y)) / (2 * y)
        qx = (p - s * x) / y
        qy = -s - q / y
        qxx = -s / y
        qxy = -(p - s * x) / (y * y)
        qyy = s / y + 2 * q / (y * y)
        root = np.sqrt(1.0 + q * q)
        r1, r2 = rho(np.arcsinh(q))
        f = weights * r1 / root
        fp = weights * (r2 / (1.0 + q * q) - r1 * q / root**3)
        val[:, 0] = np.sum(f * qx, axis=1)
        val[:, 1] = np.sum(f * qy, axis=1)
        jac[:, 0, 0] = np.sum(fp * qx * qx + f * qxx, axis=1)
        jac[:, 0, 1] = jac[:, 1, 0] = np.sum(fp * qx * qy + f * qxy, axis=1)
        jac[:, 1, 1] = np.sum(fp * qy * qy + f * qyy, axis=1)
        return val, jac

    return EquivField(kind=FieldKind.ONE_FORM, joint_fn=joint, name=name)


@lru_cache(maxsize=4)
def collar_period_matrix(width: float = COLLAR_WIDTH) -> np.ndarray:
    """P[k, j] = period of the unit collar form of generator k on loop j (integers)."""
    group, _, loops = standard_genus2()
    refined = loop_refine(loops, PERIOD_ARCS)
    rows = []
    for k in range(4):
        e = np.zeros(4)
        e[k] = 1.0
        rows.append(period(collar_form(e, group, width), refined, check_closed=False).periods)
    raw = np.array(rows)
    rounded = np.rint(raw)
    if np.abs(raw - rounded).max() > 1e-6:
        raise ConsistencyError(f"collar periods are not integral: {raw.tolist()}")
    if abs(round(np.linalg.det(rounded))) != 1:
        raise ConsistencyError(f"collar period matrix is not unimodular: {rounded.tolist()}")
    return rounded


def closed_form_from_class(
    c: CohClass,
    group: FuchsianGroup,
    domain: Optional[FundamentalDomain] = None,
    representative: Representative = "harmonic",
    mesh_n: int = DEFAULT_MESH_N,
) -> EquivField:
    """A closed one-form whose loop periods are c.

    The harmonic representative is a Whitney form on the octagon mesh: exact
    periods, but only piecewise linear. Use representative="collar" where
    the flow Jacobian feeds a section or a reconstruction.
    """
    if not np.all(np.isfinite(c.periods)):
        raise ValueError("class periods must be finite")
    if representative == "harmonic":
        if domain is None:
            _, domain, _ = standard_genus2()
        return harmonic_oneform(c, group, domain, mesh_n)
    P = collar_period_matrix()
    coeffs = np.linalg.solve(P.T, c.periods)
    return collar_form(coeffs, group, name="collar[" + ",".join(f"{p:.3g}" for p in c.periods) + "]")


def symplectic_field_from_class(
    c: CohClass,
    group: Optional[FuchsianGroup] = None,
    domain: Optional[FundamentalDomain] = None,
    h: Optional[MetricField] = None,
    orientation: int = 1,
    representative: Representative = "harmonic",
    mesh_n: int = DEFAULT_MESH_N,
) -> EquivField:
    """Omega_h-dual of a closed form with periods c: locally Hamiltonian with flux class c."""
    if group is None:
        group, domain, _ = standard_genus2()
    alpha = closed_form_from_class(c, group, domain, representative, mesh_n)
    return symplectic_dual(h or hyperbolic_metric(group), alpha, orientation)
