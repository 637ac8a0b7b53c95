#!/usr/bin/env python
"""
Small-matrix algebra for PSL(2,R) seen both as the isometry group of the
upper half-plane and as the Anti-de Sitter space AdS3.

Conventions used throughout the package:

- Points of H2 are complex numbers with positive imaginary part and the
  metric is |dz|^2 / Im(z)^2.
- The AdS3 metric on sl2 is <u, v> = tr(uv) / 2. For traceless u this
  gives <u, u> = -det(u), so elliptic directions (det > 0) are timelike.
- A unit timelike u = [[a, b], [c, -a]] is future directed when c < 0,
  which is the counter-clockwise rotation sense at its fixed point.

Scalar value types (MoebiusElt, Sl2Vec, H2Point, ...) carry the checked
invariants; the array helpers at the bottom of the module work on stacks
of matrices of shape (..., 2, 2) and complex arrays of points and are what
the field and flow code calls in bulk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from src.errors import InvalidFrameError, NotTimelikeError, NumericOverflowError

DET_TOL = 1e-12
TRACE_TOL = 1e-12
EQ_TOL = 1e-10

ROTATION_GENERATOR = 0.5 * np.array([[0.0, 1.0], [-1.0, 0.0]])


def _canonical(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=float).reshape(2, 2)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if not np.isfinite(det) or det <= 0.0:
        raise NumericOverflowError(f"matrix with det={det} is not in SL(2,R) up to scale")
    if abs(det - 1.0) >= DET_TOL:
        m = m / math.sqrt(det)
    tr = m[0, 0] + m[1, 1]
    if tr < -TRACE_TOL:
        m = -m
    elif abs(tr) <= TRACE_TOL:
        flat = m.ravel()
        nonzero = flat[np.abs(flat) > TRACE_TOL]
        if nonzero.size and nonzero[0] < 0:
            m = -m
    return m


@dataclass(frozen=True, eq=False)
class MoebiusElt:
    """An element of PSL(2,R), stored as a canonical SL(2,R) representative.

    The determinant is renormalized to 1 and the sign is fixed by
    trace >= 0 (row-major first nonzero entry > 0 when the trace vanishes),
    so two representatives of the same projective element compare equal.
    """
    m: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "m", _canonical(self.m))

    @classmethod
    def identity(cls) -> MoebiusElt:
        return cls(np.eye(2))

    @property
    def trace(self) -> float:
        return float(self.m[0, 0] + self.m[1, 1])

    def inverse(self) -> MoebiusElt:
        a, b, c, d = self.m.ravel()
        return MoebiusElt(np.array([[d, -b], [-c, a]]))

    def __matmul__(self, other: MoebiusElt) -> MoebiusElt:
        return MoebiusElt(self.m @ other.m)

    def distance(self, other: MoebiusElt) -> float:
        """Entrywise distance between projective classes."""
        return float(min(np.abs(self.m - other.m).max(), np.abs(self.m + other.m).max()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MoebiusElt):
            return NotImplemented
        return self.distance(other) < EQ_TOL

    def __hash__(self) -> int:
        return hash(tuple(np.round(self.m, 8).ravel()))

    def __repr__(self) -> str:
        return f"MoebiusElt({self.m.tolist()})"


@dataclass(frozen=True, eq=False)
class Sl2Vec:
    """A traceless 2x2 matrix: a left-trivialized tangent vector to AdS3."""
    u: np.ndarray

    def __post_init__(self) -> None:
        u = np.array(self.u, dtype=float).reshape(2, 2)
        if abs(u[0, 0] + u[1, 1]) >= TRACE_TOL:
            raise ValueError(f"Sl2Vec must be traceless, got trace {u[0, 0] + u[1, 1]}")
        object.__setattr__(self, "u", u)

    @property
    def det(self) -> float:
        return float(self.u[0, 0] * self.u[1, 1] - self.u[0, 1] * self.u[1, 0])

    def __add__(self, other: Sl2Vec) -> Sl2Vec:
        return Sl2Vec(self.u + other.u)

    def __mul__(self, s: float) -> Sl2Vec:
        return Sl2Vec(self.u * s)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sl2Vec):
            return NotImplemented
        return bool(np.abs(self.u - other.u).max() < EQ_TOL)

    def __hash__(self) -> int:
        return hash(tuple(np.round(self.u, 8).ravel()))


@dataclass(frozen=True)
class H2Point:
    z: complex

    def __post_init__(self) -> None:
        z = complex(self.z)
        if not (np.isfinite(z.real) and np.isfinite(z.imag)):
            raise NumericOverflowError(f"non-finite point {z}")
        if z.imag <= 0.0:
            raise ValueError(f"H2Point requires Im(z) > 0, got {z}")
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class H2Tangent:
    """A tangent vector v (complex coordinates) based at a point of H2."""
    base: H2Point
    v: complex


@dataclass(frozen=True)
class TimelikeGeodesic:
    """L_{x,y}: the isometries sending y to x."""
    x: H2Point
    y: H2Point


def moebius_apply(g: MoebiusElt, z: H2Point) -> H2Point:
    return H2Point(complex(mobius(g.m, np.asarray(z.z))))


def moebius_deriv(g: MoebiusElt, t: H2Tangent) -> H2Tangent:
    dz = complex(mobius_derivative(g.m, np.asarray(t.base.z)))
    return H2Tangent(base=moebius_apply(g, t.base), v=t.v * dz)


def ads_inner(u: Sl2Vec, v: Sl2Vec) -> float:
    """Bi-invariant AdS3 metric, tr(uv)/2 (one eighth of the Killing form)."""
    return float(0.5 * np.trace(u.u @ v.u))


def sl2_exp(u: Sl2Vec) -> MoebiusElt:
    return MoebiusElt(sl2_exp_matrix(u.u))


def elliptic_fixed_point(u: Sl2Vec) -> H2Point:
    """Fixed point in H2 of the one-parameter group exp(t u).

    Requires det(u) > 0, i.e. <u, u> = -det(u) < 0 (u timelike).
    """
    if u.det <= 0.0:
        raise NotTimelikeError(f"det(u)={u.det} <= 0, u is not elliptic")
    return H2Point(complex(fixed_points(u.u)))


def geodesic_membership(geo: TimelikeGeodesic, g: MoebiusElt, tol: float = 1e-9) -> bool:
    image = mobius(g.m, np.asarray(geo.y.z))
    return bool(hyperbolic_distance(image, np.asarray(geo.x.z)) < tol)


def geodesic_points(geo: TimelikeGeodesic, t: np.ndarray) -> np.ndarray:
    """Points of L_{x,y} parametrized by the rotation angle t at y."""
    a_x = frame_matrices(np.asarray(geo.x.z))
    a_y_inv = sl2_inverse(frame_matrices(np.asarray(geo.y.z)))
    rot = rotation_matrices(np.asarray(t, dtype=float))
    return a_x @ rot @ a_y_inv


def isom_action(a: MoebiusElt, b: MoebiusElt, g: MoebiusElt) -> MoebiusElt:
    """(a, b) . g = a g b^-1."""
    return a @ g @ b.inverse()


def isometry_from_frame(p: H2Point, q: H2Point, L: np.ndarray | complex) -> MoebiusElt:
    """The unique isometry g with g(p) = q and dg_p = L.

    L is either a complex multiplier or a real 2x2 matrix acting on
    (dx, dy) components; it must be an orientation-preserving isometry
    from (T_p, h) to (T_q, h).
    """
    lam = complex_multiplier(L, p.z.imag, q.z.imag)
    return MoebiusElt(isometries_from_frames(np.asarray(p.z), np.asarray(q.z), np.asarray(lam)))


def complex_multiplier(L: np.ndarray | complex, y_p: float, y_q: float, tol: float = 1e-8) -> complex:
    if np.isscalar(L):
        lam = complex(L)
        if abs(abs(lam) * y_p / y_q - 1.0) > tol:
            raise InvalidFrameError(f"multiplier {lam} is not an isometry between heights {y_p}, {y_q}")
        return lam
    L = np.asarray(L, dtype=float).reshape(2, 2)
    mu = y_q / y_p
    gram = L.T @ L / mu**2
    if np.abs(gram - np.eye(2)).max() > tol or np.linalg.det(L) <= 0.0:
        raise InvalidFrameError(f"frame map {L.tolist()} is not an orientation-preserving isometry")
    return complex(L[0, 0], L[1, 0])


def sectional_curvature(u: Sl2Vec, v: Sl2Vec) -> float:
    """Sectional curvature of the bi-invariant metric on the plane span(u, v)."""
    br = Sl2Vec(u.u @ v.u - v.u @ u.u)
    area2 = ads_inner(u, u) * ads_inner(v, v) - ads_inner(u, v) ** 2
    return 0.25 * ads_inner(br, br) / area2


def circle_curvature(u: Sl2Vec, v: Sl2Vec, radius: float = 0.5, n_angles: int = 128) -> float:
    """Curvature of a spacelike plane measured from the circumference of a geodesic circle.

    u, v must be orthonormal and spacelike. The circumference of
    {exp(r (cos a u + sin a v))} is matched against 2 pi sinh(r s) / s
    with K = -s^2 (or the spherical formula for K > 0).
    """
    h = 1e-5

    def speed(a: float) -> float:
        p_plus = sl2_exp_matrix(radius * (math.cos(a + h) * u.u + math.sin(a + h) * v.u))
        p_minus = sl2_exp_matrix(radius * (math.cos(a - h) * u.u + math.sin(a - h) * v.u))
        p0 = sl2_exp_matrix(radius * (math.cos(a) * u.u + math.sin(a) * v.u))
        w = sl2_inverse(p0) @ (p_plus - p_minus) / (2 * h)
        return math.sqrt(0.5 * np.trace(w @ w))

    angles = np.linspace(0.0, 2 * math.pi, n_angles, endpoint=False)
    circumference = float(np.mean([speed(a) for a in angles])) * 2 * math.pi

    def model(k: float) -> float:
        if abs(k) < 1e-12:
            return 2 * math.pi * radius - circumference
        s = math.sqrt(abs(k))
        if k < 0:
            return 2 * math.pi * math.sinh(radius * s) / s - circumference
        return 2 * math.pi * math.sin(radius * s) / s - circumference

    return float(brentq(model, -4.0, 4.0, xtol=1e-14))


def loop_length(u: Sl2Vec, t_max: float = 2 * math.pi) -> float:
    """Length of t -> exp(t u), t in [0, t_max], for timelike u."""
    speed = math.sqrt(abs(ads_inner(u, u)))
    return float(quad(lambda _t: speed, 0.0, t_max)[0])


def elliptic_rotation_angle(u: Sl2Vec, t_max: float = 2 * math.pi, samples: int = 64) -> float:
    """Total turning of exp(t u), t in [0, t_max], about its fixed point (unwrapped)."""
    p = np.asarray(elliptic_fixed_point(u).z)
    t = np.linspace(0.0, t_max, samples + 1)
    turns = np.angle(mobius_derivative(np.stack([sl2_exp_matrix(s * u.u) for s in t]), p))
    return float(abs(np.unwrap(turns)[-1]))


def random_moebius(rng: np.random.Generator, scale: float = 1.0) -> MoebiusElt:
    """A random element exp(u) g with entries of moderate size."""
    x = rng.normal(scale=scale, size=3)
    u = np.array([[x[0], x[1]], [x[2], -x[0]]])
    return MoebiusElt(sl2_exp_matrix(u))


# Array helpers: m has shape (..., 2, 2), z is a complex array broadcast against m[..., 0, 0].


def mobius(m: np.ndarray, z: np.ndarray) -> np.ndarray:
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        w = (a * z + b) / (c * z + d)
    if not np.all(np.isfinite(w)):
        raise NumericOverflowError("Moebius image is not finite")
    return w


def mobius_derivative(m: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Complex derivative 1/(cz+d)^2 for determinant-one matrices."""
    c, d = m[..., 1, 0], m[..., 1, 1]
    return 1.0 / (c * z + d) ** 2


def mobius_second_derivative(m: np.ndarray, z: np.ndarray) -> np.ndarray:
    c, d = m[..., 1, 0], m[..., 1, 1]
    return -2.0 * c / (c * z + d) ** 3


def complex_to_real_jacobian(dz: np.ndarray) -> np.ndarray:
    """Real 2x2 matrix of multiplication by the complex number dz."""
    out = np.empty(np.shape(dz) + (2, 2))
    out[..., 0, 0] = dz.real
    out[..., 0, 1] = -dz.imag
    out[..., 1, 0] = dz.imag
    out[..., 1, 1] = dz.real
    return out


def sl2_inverse(m: np.ndarray) -> np.ndarray:
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out


def sl2_exp_matrix(u: np.ndarray) -> np.ndarray:
    """Closed-form exponential of traceless matrices of shape (..., 2, 2)."""
    u = np.asarray(u, dtype=float)
    det = u[..., 0, 0] * u[..., 1, 1] - u[..., 0, 1] * u[..., 1, 0]
    root = np.sqrt(np.abs(det))
    small = root < 1e-7
    safe = np.where(small, 1.0, root)
    cos_part = np.where(det > 0, np.cos(root), np.cosh(root))
    sin_part = np.where(det > 0, np.sin(safe) / safe, np.sinh(safe) / safe)
    # Taylor terms for |det| ~ 0 (u^2 = -det I)
    cos_part = np.where(small, 1.0 - det / 2.0, cos_part)
    sin_part = np.where(small, 1.0 - det / 6.0, sin_part)
    eye = np.broadcast_to(np.eye(2), u.shape)
    return cos_part[..., None, None] * eye + sin_part[..., None, None] * u


def fixed_points(u: np.ndarray) -> np.ndarray:
    """Upper half-plane root of c z^2 + (d - a) z - b = 0 (elliptic u)."""
    a, b, c, d = u[..., 0, 0], u[..., 0, 1], u[..., 1, 0], u[..., 1, 1]
    disc = (d - a) ** 2 + 4.0 * b * c
    root = np.sqrt(disc.astype(complex))
    z = (-(d - a) + root) / (2.0 * c)
    return np.where(z.imag > 0, z, (-(d - a) - root) / (2.0 * c))


def rotation_matrices(angle: np.ndarray) -> np.ndarray:
    """Counter-clockwise rotation by `angle` about i."""
    half = np.asarray(angle, dtype=float) / 2.0
    out = np.empty(half.shape + (2, 2))
    out[..., 0, 0] = np.cos(half)
    out[..., 0, 1] = np.sin(half)
    out[..., 1, 0] = -np.sin(half)
    out[..., 1, 1] = np.cos(half)
    return out


def frame_matrices(p: np.ndarray) -> np.ndarray:
    """The affine map z -> Im(p) z + Re(p), sending i to p."""
    p = np.asarray(p, dtype=complex)
    s = np.sqrt(p.imag)
    out = np.zeros(p.shape + (2, 2))
    out[..., 0, 0] = s
    out[..., 0, 1] = p.real / s
    out[..., 1, 1] = 1.0 / s
    return out


def isometries_from_frames(p: np.ndarray, q: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Batch isometries with g(p) = q and complex derivative lam at p."""
    phase = lam * p.imag / q.imag
    phi = np.angle(phase)
    return frame_matrices(q) @ rotation_matrices(phi) @ sl2_inverse(frame_matrices(p))


def elliptic_generators(p: np.ndarray) -> np.ndarray:
    """Future unit timelike generators of the rotations about p."""
    a = frame_matrices(p)
    return a @ ROTATION_GENERATOR @ sl2_inverse(a) * 2.0


def hyperbolic_distance(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    arg = 1.0 + np.abs(z1 - z2) ** 2 / (2.0 * z1.imag * z2.imag)
    return np.arccosh(np.maximum(arg, 1.0))


def half_plane_to_disc(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return (z - 1j) / (z + 1j)


def disc_to_half_plane(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    return 1j * (1.0 + w) / (1.0 - w)


def commutator(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u @ v - v @ u


def inner(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Batch tr(uv)/2."""
    return 0.5 * np.einsum("...ij,...ji->...", u, v)


def canonical_stack(ms: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    return np.stack([_canonical(m) for m in np.asarray(ms).reshape(-1, 2, 2)])
