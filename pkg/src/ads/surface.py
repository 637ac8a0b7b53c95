#!/usr/bin/env python
"""
Equivariant spacelike surfaces in AdS3 = PSL(2,R).

Given a map phi and a section b in Isom(TS, phi*h_r, h_l), the immersion
sigma(x) is the isometry of H2 sending phi(x) to x whose differential at
phi(x) is -b_x o (d phi_x)^-1. Derivatives of sigma are closed-form per
point; they are returned left-trivialized, xi_i = sigma^-1 d_i sigma in sl2.
When h_r is the pullback f*h of the standard metric, every formula runs in
standard coordinates through the developed map f o phi.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from src.calculus.connection import almost_complex, brioschi_curvature
from src.calculus.fields import EquivField, FieldKind, MetricField, fd_jacobian
from src.calculus.mesh import write_csv
from src.errors import InvalidSectionError, NotSpacelikeError
from src.geometry.fuchsian import FuchsianGroup, standard_genus2
from src.geometry.lie2 import (
    commutator,
    complex_to_real_jacobian,
    disc_to_half_plane,
    elliptic_generators,
    frame_matrices,
    hyperbolic_distance,
    inner,
    isometries_from_frames,
    mobius,
    mobius_derivative,
    sl2_inverse,
)
from src.symplectic.flows import ComposedMap, SurfaceMap, map_second_jacobian
from src.symplectic.sections import SectionB

logger = logging.getLogger(__name__)

FRAME_TOL = 1e-6
OUTER_STEP = 1e-3
IMMERSION_THRESHOLD = 1e-6

_radii = np.repeat([0.0, 0.2, 0.4], [1, 4, 6])
_angles = np.concatenate([[0.0], np.arange(4) * np.pi / 2 + 0.3, np.arange(6) * np.pi / 3 + 0.1])
DEFAULT_SAMPLES = disc_to_half_plane(_radii * np.exp(1j * _angles))


def frame_matrix_derivatives(p: np.ndarray) -> np.ndarray:
    """d/dx and d/dy of frame_matrices(p), stacked on a trailing axis."""
    p = np.asarray(p, dtype=complex)
    x, y = p.real, p.imag
    s = np.sqrt(y)
    out = np.zeros(p.shape + (2, 2, 2))
    out[..., 0, 1, 0] = 1.0 / s
    out[..., 0, 0, 1] = 0.5 / s
    out[..., 0, 1, 1] = -0.5 * x / (y * s)
    out[..., 1, 1, 1] = -0.5 / (y * s)
    return out


def _log_derivatives(p: np.ndarray) -> np.ndarray:
    """(dA) A^-1 for A = frame_matrices(p), direction axis first."""
    return np.einsum("...abk,...bc->...kac", frame_matrix_derivatives(p), sl2_inverse(frame_matrices(p)))


def _same_projective(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.minimum(np.abs(a - b).max(axis=(-2, -1)), np.abs(a + b).max(axis=(-2, -1)))


@dataclass(frozen=True, eq=False)
class AdSImmersion:
    """sigma_{phi,b}; equivariant for (rho_l, rho_r) = (rho_0, rho_0)."""
    phi: SurfaceMap
    b: SectionB
    developed: SurfaceMap
    group: FuchsianGroup
    name: str = "sigma"

    def _multiplier(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Target points, frame maps L = -b (dF)^-1 and their complex multipliers."""
        p, dF = self.developed.apply(z)
        L = -self.b(z) @ np.linalg.inv(dF)
        mu = (z.imag / p.imag)[..., None, None]
        gram = np.swapaxes(L, -1, -2) @ L / mu**2
        bad = (np.abs(gram - np.eye(2)).max(axis=(-2, -1)) > FRAME_TOL) | (np.linalg.det(L) <= 0)
        if np.any(bad):
            worst = complex(z[np.argmax(bad)])
            raise InvalidSectionError(f"-b (d phi)^-1 is not an oriented isometry near z={worst:.6g}")
        return p, L, L[..., 0, 0] + 1j * L[..., 1, 0]

    def sigma(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        p, _, lam = self._multiplier(flat)
        return isometries_from_frames(p, flat, lam).reshape(z.shape + (2, 2))

    def frames(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(sigma, xi, F(z)) with xi[..., i] = sigma^-1 d_i sigma."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        p, L, lam = self._multiplier(flat)
        _, dF = self.developed.apply(flat)
        d2F = map_second_jacobian(self.developed, flat)
        bv, db = self.b.value_and_jacobian(flat)
        dF_inv = np.linalg.inv(dF)
        dL = -np.einsum("...kmi,...mj->...ikj", db, dF_inv) + np.einsum(
            "...km,...mni,...nj->...ikj", bv @ dF_inv, d2F, dF_inv
        )
        dlam = dL[..., 0, 0] + 1j * dL[..., 1, 0]
        dalpha = (dlam / lam[..., None]).imag

        sigma = isometries_from_frames(p, flat, lam)
        lq = _log_derivatives(flat)
        lp = np.einsum("...kac,...ki->...iac", _log_derivatives(p), dF)
        xi = (
            np.einsum("...ab,...ibc,...cd->...iad", sl2_inverse(sigma), lq, sigma)
            + 0.5 * dalpha[..., :, None, None] * elliptic_generators(p)[..., None, :, :]
            - lp
        )
        return sigma.reshape(z.shape + (2, 2)), xi.reshape(z.shape + (2, 2, 2)), p.reshape(z.shape)

    def reconstruction_residual(self, z: np.ndarray) -> float:
        """max over z of the gaps in sigma(x)(F(x)) = x and d sigma o dF = -b (relative)."""
        z = np.asarray(z, dtype=complex).ravel()
        sigma = self.sigma(z)
        p, dF = self.developed.apply(z)
        bv = self.b(z)
        moved = float(hyperbolic_distance(mobius(sigma, p), z).max())
        dsigma = complex_to_real_jacobian(mobius_derivative(sigma, p))
        gap = np.abs(dsigma @ dF + bv).max(axis=(-2, -1)) / np.abs(bv).max(axis=(-2, -1))
        return max(moved, float(gap.max()))

    def tangent_vectors(self, z: np.ndarray) -> np.ndarray:
        return self.frames(z)[1]

    def equivariance_residual(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=complex).ravel()
        base = self.sigma(z)
        worst = 0.0
        for g in self.group.generators:
            moved = self.sigma(mobius(g.m, z))
            expected = g.m @ base @ sl2_inverse(g.m)
            worst = max(worst, float(_same_projective(moved, expected).max()))
        return worst

    def immersion_margin(self, z: np.ndarray) -> np.ndarray:
        """Smallest singular value of d sigma on h-unit vectors, per point."""
        z = np.asarray(z, dtype=complex)
        xi = self.tangent_vectors(z)
        coords = np.stack(
            [xi[..., 0, 0], 0.5 * (xi[..., 0, 1] + xi[..., 1, 0]), 0.5 * (xi[..., 0, 1] - xi[..., 1, 0])], axis=-1
        )
        mat = np.swapaxes(coords, -1, -2) * z.imag[..., None, None]
        return np.linalg.svd(mat, compute_uv=False)[..., -1]

    def immersion_flag(self, z: np.ndarray, threshold: float = IMMERSION_THRESHOLD) -> np.ndarray:
        return self.immersion_margin(z) > threshold


def reconstruct_sigma(
    phi: SurfaceMap,
    b: SectionB,
    group: Optional[FuchsianGroup] = None,
    check_points: Optional[np.ndarray] = None,
    name: str = "sigma",
) -> AdSImmersion:
    """sigma with sigma(x)(phi(x)) = x and d sigma o d phi = -b."""
    if b.psi is not None and b.psi is not phi:
        raise InvalidSectionError(f"section {b.name} belongs to a different map")
    target = b.target_metric
    if target.hyperbolic:
        developed = phi
    elif target.developing is not None:
        developed = ComposedMap(outer=target.developing, inner=phi)
    else:
        raise InvalidSectionError("target metric must be hyperbolic or carry a developing map")
    group = group or getattr(phi, "group", None) or standard_genus2()[0]
    s = AdSImmersion(phi=phi, b=b, developed=developed, group=group, name=name)
    s.sigma(DEFAULT_SAMPLES if check_points is None else np.asarray(check_points, dtype=complex))
    return s


@dataclass(frozen=True, eq=False)
class SurfaceGeometry:
    """Induced metric I, future unit normal N, shape operator B, curvature K.

    N is left-trivialized; B solves dN + [xi, N] / 2 = xi o B.
    """
    immersion: AdSImmersion
    metric: MetricField
    step: float = OUTER_STEP

    def normal(self, z: np.ndarray) -> np.ndarray:
        return unit_normal(self.immersion.tangent_vectors(z), np.asarray(z, dtype=complex))

    def shape_operator(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        xi = self.immersion.tangent_vectors(flat)
        n = unit_normal(xi, flat)
        dn = fd_jacobian(self.normal, flat, self.step)
        w = np.moveaxis(dn, -1, -3) + 0.5 * commutator(xi, n[..., None, :, :])
        second = inner(xi[..., :, None, :, :], w[..., None, :, :, :])
        first = inner(xi[..., :, None, :, :], xi[..., None, :, :, :])
        return (np.linalg.inv(first) @ second).reshape(z.shape + (2, 2))

    def shape_field(self) -> EquivField:
        return EquivField(kind=FieldKind.ENDOMORPHISM, fn=self.shape_operator, name="B", step=self.step)

    def curvature(self, z: np.ndarray) -> np.ndarray:
        """Brioschi curvature of I."""
        return brioschi_curvature(self.metric, z)

    def gauss_curvature(self, z: np.ndarray) -> np.ndarray:
        """-1 - det B."""
        return -1.0 - np.linalg.det(self.shape_operator(z))

    def mean_curvature(self, z: np.ndarray) -> np.ndarray:
        return np.trace(self.shape_operator(z), axis1=-2, axis2=-1)

    def almost_complex(self) -> EquivField:
        return almost_complex(self.metric)

    def self_adjoint_residual(self, z: np.ndarray) -> float:
        lowered = self.metric(z) @ self.shape_operator(z)
        return float(np.abs(lowered - np.swapaxes(lowered, -1, -2)).max())


def unit_normal(xi: np.ndarray, z: np.ndarray) -> np.ndarray:
    c = commutator(xi[..., 0, :, :], xi[..., 1, :, :])
    norm2 = -inner(c, c)
    if np.any(norm2 <= 0):
        worst = complex(np.ravel(z)[np.argmin(np.ravel(norm2))])
        raise NotSpacelikeError("tangent plane is not spacelike", worst)
    n = c / np.sqrt(norm2)[..., None, None]
    return np.where((n[..., 1, 0] > 0)[..., None, None], -n, n)


def induced_geometry(s: AdSImmersion, z: Optional[np.ndarray] = None) -> SurfaceGeometry:
    """Induced geometry of s; raises NotSpacelikeError if I is indefinite at the samples."""

    def first(w: np.ndarray) -> np.ndarray:
        xi = s.tangent_vectors(w)
        return inner(xi[..., :, None, :, :], xi[..., None, :, :, :])

    metric = MetricField(fn=first, name=f"I[{s.name}]", step=OUTER_STEP)
    z = DEFAULT_SAMPLES if z is None else np.asarray(z, dtype=complex).ravel()
    values = metric(z)
    det = np.linalg.det(values)
    bad = (values[..., 0, 0] <= 0) | (det <= 0)
    if np.any(bad):
        worst = complex(z[np.argmin(np.where(bad, det, np.inf))])
        raise NotSpacelikeError(f"induced metric of {s.name} is not positive definite", worst)
    logger.debug("induced geometry of %s: min det I %.3e", s.name, float(det.min()))
    return SurfaceGeometry(immersion=s, metric=metric)


def export_surface_csv(geo: SurfaceGeometry, z: np.ndarray, path: Path) -> None:
    """Snapshot x, y, sigma entries, K and tr B per sample."""
    z = np.asarray(z, dtype=complex).ravel()
    sigma = geo.immersion.sigma(z)
    rows = np.column_stack(
        [
            z.real,
            z.imag,
            sigma.reshape(-1, 4),
            geo.curvature(z),
            geo.mean_curvature(z),
        ]
    )
    write_csv(path, ["x", "y", "sigma_a", "sigma_b", "sigma_c", "sigma_d", "K", "trB"], rows)
    logger.info("wrote %d surface samples to %s", z.size, path)
