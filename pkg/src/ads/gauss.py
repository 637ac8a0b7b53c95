#!/usr/bin/env python
"""
Gauss map of a spacelike surface, the map phi_Sigma it induces, the tensor
b~ = (id + J B)^-1 (id - J B), and report-only verifiers for the tensor-b
and minimal Lagrangian conditions.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from src.ads.surface import DEFAULT_SAMPLES, OUTER_STEP, AdSImmersion, SurfaceGeometry, unit_normal
from src.calculus.connection import hodge_dual_dnabla, hyperbolic_metric
from src.calculus.fields import EquivField, FieldKind, MetricField, fd_jacobian
from src.errors import NotTimelikeError, ProjectionDegenerateError, TrConditionError
from src.geometry.lie2 import elliptic_generators, fixed_points, hyperbolic_distance, inner, mobius
from src.symplectic.flows import SurfaceMap, pullback_metric
from src.symplectic.sections import pulled_back, spd_sqrt

logger = logging.getLogger(__name__)

MAX_NEWTON = 50
NEWTON_TOL = 1e-12
NEWTON_ACCEPT = 1e-9
TR_TOL = 1e-8
JET_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class GaussMapResult:
    """x -> (left(x), right(x)) in H2 x H2."""
    geometry: SurfaceGeometry

    @property
    def immersion(self) -> AdSImmersion:
        return self.geometry.immersion

    def points(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        sigma, xi, _ = self.immersion.frames(flat)
        n = unit_normal(xi, flat)
        det = np.linalg.det(n)
        if np.any(det <= 0):
            raise NotTimelikeError(f"normal is not timelike (min det {float(det.min()):.3e})")
        right = fixed_points(n)
        left = mobius(sigma, right)
        return left.reshape(z.shape), right.reshape(z.shape)

    def left(self, z: np.ndarray) -> np.ndarray:
        return self.points(z)[0]

    def right(self, z: np.ndarray) -> np.ndarray:
        return self.points(z)[1]

    def jet(self, z: np.ndarray, step: float = JET_STEP) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """left, right and their real Jacobians at z."""

        def stacked(w: np.ndarray) -> np.ndarray:
            l, r = self.points(w)
            return np.stack([l.real, l.imag, r.real, r.imag], axis=-1)

        z = np.asarray(z, dtype=complex).ravel()
        left, right = self.points(z)
        jac = fd_jacobian(stacked, z, step)
        return left, right, jac[..., :2, :], jac[..., 2:, :]

    def equivariance_residual(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=complex).ravel()
        left, right = self.points(z)
        worst = 0.0
        for g in self.immersion.group.generators:
            gl, gr = self.points(mobius(g.m, z))
            worst = max(
                worst,
                float(hyperbolic_distance(gl, mobius(g.m, left)).max()),
                float(hyperbolic_distance(gr, mobius(g.m, right)).max()),
            )
        return worst


def gauss_map(s: AdSImmersion, geo: SurfaceGeometry, check_points: Optional[np.ndarray] = None) -> GaussMapResult:
    gm = GaussMapResult(geometry=geo)
    gm.points(DEFAULT_SAMPLES if check_points is None else check_points)
    return gm


@dataclass(frozen=True)
class ProjectionMap:
    """One side of the Gauss map as a SurfaceMap."""
    gauss: GaussMapResult
    side: int
    step: float = OUTER_STEP

    def apply(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        left, right, dl, dr = self.gauss.jet(z, self.step)
        pts = left if self.side == 0 else right
        jac = dl if self.side == 0 else dr
        return pts.reshape(z.shape), jac.reshape(z.shape + (2, 2))


@dataclass(frozen=True)
class ExtractedMap:
    """phi_Sigma = right o left^-1, inverted pointwise by Newton's method."""
    gauss: GaussMapResult
    name: str = "phi_Sigma"

    def solve(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        w = np.asarray(w, dtype=complex).ravel()
        x = w.copy()
        for it in range(MAX_NEWTON):
            left, right, dl, dr = self.gauss.jet(x)
            res = left - w
            if np.abs(res).max() < NEWTON_TOL:
                break
            det = np.linalg.det(dl)
            if np.any(np.abs(det) < 1e-12):
                raise ProjectionDegenerateError("left projection is singular", complex(x[np.argmin(np.abs(det))]))
            step = np.linalg.solve(dl, np.stack([res.real, res.imag], axis=-1)[..., None])[..., 0]
            x = x - (step[..., 0] + 1j * step[..., 1])
            if np.any(x.imag <= 0):
                raise ProjectionDegenerateError("Newton iterate left the half-plane", complex(w[np.argmin(x.imag)]))
            if np.abs(step).max() < NEWTON_TOL:
                left, right, dl, dr = self.gauss.jet(x)
                break
        worst = np.abs(left - w)
        if worst.max() > NEWTON_ACCEPT:
            raise ProjectionDegenerateError(
                f"Newton did not converge (residual {float(worst.max()):.3e})", complex(w[np.argmax(worst)])
            )
        logger.debug("left projection inverted in %d iteration(s)", it + 1)
        return x, right, dl, dr

    def apply(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        _, right, dl, dr = self.solve(z)
        return right.reshape(z.shape), (dr @ np.linalg.inv(dl)).reshape(z.shape + (2, 2))

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.apply(z)[0]


def extract_phi(gm: GaussMapResult) -> ExtractedMap:
    return ExtractedMap(gauss=gm)


def btilde(geo: SurfaceGeometry) -> EquivField:
    """(id + J B)^-1 (id - J B) with J the complex structure of I."""
    J = geo.almost_complex()

    def value(z: np.ndarray) -> np.ndarray:
        jb = J(z) @ geo.shape_operator(z)
        plus = np.eye(2) + jb
        det = np.linalg.det(plus)
        if np.any(np.abs(det) < TR_TOL):
            raise TrConditionError(f"id + J B is singular (|det| {float(np.abs(det).min()):.2e}): tr b = -2")
        return np.linalg.solve(plus, np.eye(2) - jb)

    return EquivField(kind=FieldKind.ENDOMORPHISM, fn=value, name="b~", step=geo.step)


@dataclass(frozen=True)
class TensorReport:
    """Residuals of the tensor-b conditions; trace_margin is min(tr b + 2)."""
    isometry: float
    determinant: float
    codazzi: float
    trace_margin: float
    self_adjoint: float

    def passes(self, tol: float, self_adjoint: bool = False) -> bool:
        ok = self.isometry < tol and self.determinant < tol and self.codazzi < tol and self.trace_margin > tol
        return ok and (self.self_adjoint < tol or not self_adjoint)

    def worst(self, self_adjoint: bool = False) -> float:
        """Largest residual, or inf when tr b + 2 is not bounded away from zero."""
        if self.trace_margin <= 0:
            return float("inf")
        parts = [self.isometry, self.determinant, self.codazzi] + ([self.self_adjoint] if self_adjoint else [])
        return max(parts)

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class MinimalLagrangianReport(TensorReport):
    """Tensor-b residuals where self-adjointness of b is always part of the verdict."""

    def passes(self, tol: float, self_adjoint: bool = True) -> bool:
        return super().passes(tol, self_adjoint=True)

    def worst(self, self_adjoint: bool = True) -> float:
        return super().worst(self_adjoint=True)


def verify_tensor_b(
    b: EquivField,
    phi: SurfaceMap,
    h_l: Optional[MetricField] = None,
    h_r: Optional[MetricField] = None,
    z: Optional[np.ndarray] = None,
) -> TensorReport:
    """h_l(b., b.) = phi*h_r, det b = 1, d^nabla b = 0 for nabla of h_l, tr b != -2."""
    h_l = h_l or hyperbolic_metric()
    h_r = h_r or h_l
    z = DEFAULT_SAMPLES if z is None else np.asarray(z, dtype=complex).ravel()
    bv = b(z)
    g = h_l(z)
    lhs = np.swapaxes(bv, -1, -2) @ g @ bv
    rhs = pulled_back(phi, h_r, z)
    iso = np.abs(lhs - rhs).max(axis=(-2, -1)) / np.abs(rhs).max(axis=(-2, -1))
    star = hodge_dual_dnabla(b, h_l)(z)
    codazzi = np.sqrt(np.einsum("...i,...ij,...j->...", star, g, star))
    lowered = g @ bv
    adj = np.abs(lowered - np.swapaxes(lowered, -1, -2)).max(axis=(-2, -1)) / np.abs(lowered).max(axis=(-2, -1))
    return TensorReport(
        isometry=float(iso.max()),
        determinant=float(np.abs(np.linalg.det(bv) - 1.0).max()),
        codazzi=float(codazzi.max()),
        trace_margin=float((np.trace(bv, axis1=-2, axis2=-1) + 2.0).min()),
        self_adjoint=float(adj.max()),
    )


def verify_minimal_lagrangian(
    phi: SurfaceMap,
    b_L: EquivField,
    h_l: Optional[MetricField] = None,
    h_r: Optional[MetricField] = None,
    z: Optional[np.ndarray] = None,
) -> MinimalLagrangianReport:
    """Tensor-b conditions plus h_l-self-adjointness of the Labourie operator b_L.

    phi is minimal Lagrangian exactly when b_L is a Codazzi tensor with
    h_l(b_L ., b_L .) = phi*h_r, det b_L = 1 and h_l(b_L u, v) = h_l(u, b_L v).
    """
    report = MinimalLagrangianReport(**verify_tensor_b(b_L, phi, h_l, h_r, z).as_dict())
    logger.debug("minimal Lagrangian residuals: %s", report.as_dict())
    return report


def btilde_report(gm: GaussMapResult, z: Optional[np.ndarray] = None) -> TensorReport:
    """b~ checked on the surface: left*h and right*h play h_l and phi*h_r."""
    left = ProjectionMap(gauss=gm, side=0)
    right = ProjectionMap(gauss=gm, side=1)
    h_left = pullback_metric(left, hyperbolic_metric(), name="left*h", step=OUTER_STEP)
    return verify_tensor_b(btilde(gm.geometry), right, h_left, hyperbolic_metric(), z)


def orthogonality_check(s: AdSImmersion, z: Optional[np.ndarray] = None) -> float:
    """max |<xi_j / |xi_j|, u>| with u generating the rotations about phi(x)."""
    z = DEFAULT_SAMPLES if z is None else np.asarray(z, dtype=complex).ravel()
    _, xi, p = s.frames(z)
    u = elliptic_generators(p)
    lengths = np.sqrt(inner(xi, xi))
    return float(np.abs(inner(xi, u[..., None, :, :]) / lengths).max())


def rotation_discrepancy(
    b1: EquivField, b2: EquivField, z: Optional[np.ndarray] = None, h: Optional[MetricField] = None
) -> Tuple[float, float, float]:
    """Angle of b1 b2^-1 as an h-rotation: (mean angle, spread, non-rotation residual)."""
    h = h or hyperbolic_metric()
    z = DEFAULT_SAMPLES if z is None else np.asarray(z, dtype=complex).ravel()
    s = spd_sqrt(h(z))
    m = s @ b1(z) @ np.linalg.inv(b2(z)) @ np.linalg.inv(s)
    angle = np.arctan2(m[..., 1, 0] - m[..., 0, 1], m[..., 0, 0] + m[..., 1, 1])
    off = np.abs(m - _rotation(angle)).max()
    spread = np.angle(np.exp(1j * (angle - angle[0])))
    return float(np.angle(np.mean(np.exp(1j * angle)))), float(np.abs(spread).max()), float(off)


def _rotation(angle: np.ndarray) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)
