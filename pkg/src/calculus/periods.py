#!/usr/bin/env python
"""
Line integrals of one-forms along geodesic segments and their periods
over the loop basis, by composite Gauss-Legendre quadrature. Mesh forms
that know how to integrate themselves along a geodesic are integrated
exactly.
"""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from src.calculus.connection import exterior_derivative
from src.calculus.fields import CohClass, EquivField, FieldKind
from src.errors import NumericOverflowError
from src.geometry.fuchsian import LoopBasis
from src.geometry.lie2 import (
    frame_matrices,
    half_plane_to_disc,
    mobius,
    mobius_derivative,
    rotation_matrices,
    sl2_inverse,
)

logger = logging.getLogger(__name__)

DEFAULT_NODES = 8
CLOSED_TOL = 1e-6


def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def geodesic_frames(p: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Moebius frames M and lengths L with M(i) = p and M(i e^L) = q."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    a_p = frame_matrices(p)
    target = half_plane_to_disc(mobius(sl2_inverse(a_p), q))
    alpha = np.angle(target)
    length = 2.0 * np.arctanh(np.abs(target))
    return a_p @ rotation_matrices(alpha), length


def line_integrals(a: EquivField, p: np.ndarray, q: np.ndarray, nodes: int = DEFAULT_NODES, pieces: int = 1) -> np.ndarray:
    """Integrals of the one-form a along the geodesic segments [p, q] (vectorized)."""
    if hasattr(a, "integrate_geodesic"):
        return np.array([a.integrate_geodesic(complex(s), complex(e)) for s, e in zip(np.ravel(p), np.ravel(q))])
    frames, length = geodesic_frames(np.ravel(p), np.ravel(q))
    t, w = gauss_legendre(nodes)
    edges = np.linspace(0.0, 1.0, pieces + 1)
    u = (edges[:-1, None] + np.diff(edges)[:, None] * t[None, :]).ravel()
    wu = (np.diff(edges)[:, None] * w[None, :]).ravel()
    s = length[:, None] * u[None, :]
    zeta = 1j * np.exp(s)
    pts = mobius(frames[:, None], zeta)
    vel = mobius_derivative(frames[:, None], zeta) * zeta * length[:, None]
    vals = a(pts)
    integrand = vals[..., 0] * vel.real + vals[..., 1] * vel.imag
    if not np.all(np.isfinite(integrand)):
        raise NumericOverflowError("non-finite integrand in line integral")
    return integrand @ wu


def period(
    a: EquivField,
    loops: LoopBasis,
    nodes: int = DEFAULT_NODES,
    check_closed: bool = True,
) -> CohClass:
    """Integrals of a closed one-form over the loop basis.

    Composite Gauss-Legendre on every sub-arc of every loop; mesh forms
    with an exact geodesic integrator use it instead.
    """
    if a.kind is not FieldKind.ONE_FORM:
        raise ValueError(f"period needs a one-form, got {a.kind.value}")
    if hasattr(a, "integrate_geodesic"):
        return CohClass(np.array([a.integrate_geodesic(loop.start, loop.end) for loop in loops]))

    t, w = gauss_legendre(nodes)
    all_s, all_w, owner = [], [], []
    for idx, loop in enumerate(loops):
        lo, hi = loop.breaks[:-1], loop.breaks[1:]
        s = (lo[:, None] + (hi - lo)[:, None] * t[None, :]).ravel()
        all_s.append(s)
        all_w.append(((hi - lo)[:, None] * w[None, :]).ravel())
        owner.append(np.full(s.size, idx))
    pts = np.concatenate([loop.points(s) for loop, s in zip(loops, all_s)])
    vel = np.concatenate([loop.velocities(s) for loop, s in zip(loops, all_s)])
    vals = a(pts)
    integrand = (vals[:, 0] * vel.real + vals[:, 1] * vel.imag) * np.concatenate(all_w)
    if not np.all(np.isfinite(integrand)):
        raise NumericOverflowError("non-finite integrand in period")
    periods = np.bincount(np.concatenate(owner), weights=integrand, minlength=len(loops))

    if check_closed:
        mid = np.array([loop.points(np.array([0.5 * loop.length]))[0] for loop in loops])
        residual = float(np.abs(exterior_derivative(a)(mid)).max())
        if residual > CLOSED_TOL:
            logger.warning("period of %s: form is not closed (d residual %.2e)", a.name or "one-form", residual)
    return CohClass(periods)
