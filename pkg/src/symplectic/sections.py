#!/usr/bin/env python
"""
Sections b in Isom(TS, psi*h', h), the closed one-form eta_{psi,b} and the
invariant C_{h,h'}(psi) = [eta] mod 2 pi.

eta is the difference of connection forms omega' - omega, where omega is
taken in an h-orthonormal frame {v1, v2} and omega' in the psi*h'-
orthonormal frame {b^-1 v1, b^-1 v2}. It is evaluated through the closed
form eta(v) = h(*d^nabla b, b v); the connection-form route is kept as a
cross-check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.calculus.connection import (
    DNabla,
    almost_complex,
    canonical_frame,
    connection_form,
    covariant_jacobian,
    exterior_derivative,
    hyperbolic_metric,
)
from src.calculus.fields import (
    DEFAULT_STEP,
    TWO_PI,
    CohClass,
    CohClassMod2Pi,
    EquivField,
    FieldKind,
    MetricField,
    fd_jacobian,
)
from src.calculus.periods import line_integrals, period
from src.errors import ConsistencyError, DegeneracyError, InvalidSectionError, ObstructionError
from src.geometry.fuchsian import FuchsianGroup, LoopBasis, loop_refine, reduce_points, standard_genus2
from src.geometry.lie2 import disc_to_half_plane, half_plane_to_disc, mobius
from src.symplectic.flows import FlowMap, SurfaceMap

logger = logging.getLogger(__name__)

PERIOD_ARCS = 16
ETA_AGREE_TOL = 1e-4
ETA_WARN_TOL = 1e-5
LATTICE_TOL = 1e-3
ANCHOR_GRID = 0.05
BASEPOINT = 1j

_CHECK_POINTS = disc_to_half_plane(np.array([0.0, 0.3, 0.25j, -0.2 + 0.15j, 0.35 - 0.1j, -0.1 - 0.3j]))


@dataclass(frozen=True, eq=False)
class SectionB(EquivField):
    """An endomorphism field b with h(b., b.) = psi*h'."""
    kind: FieldKind = FieldKind.ENDOMORPHISM
    psi: Optional[SurfaceMap] = None
    h: Optional[MetricField] = None
    h_target: Optional[MetricField] = None
    orientation: int = 1

    @property
    def source_metric(self) -> MetricField:
        return self.h or hyperbolic_metric()

    @property
    def target_metric(self) -> MetricField:
        return self.h_target or self.source_metric


def spd_sqrt(m: np.ndarray) -> np.ndarray:
    """Square root of symmetric positive 2x2 matrices."""
    d = np.sqrt(np.linalg.det(m))[..., None, None]
    tr = np.trace(m, axis1=-2, axis2=-1)[..., None, None]
    return (m + d * np.eye(2)) / np.sqrt(tr + 2.0 * d)


def pulled_back(psi: SurfaceMap, h_target: MetricField, z: np.ndarray) -> np.ndarray:
    """Components of psi*h' at z."""
    p, dp = psi.apply(z)
    return np.swapaxes(dp, -1, -2) @ h_target(p) @ dp


def symplecticity_defect(psi: SurfaceMap, z: np.ndarray, h: Optional[MetricField] = None, h_target: Optional[MetricField] = None) -> float:
    """max |det_Omega(d psi) - 1| over the sample points."""
    h = h or hyperbolic_metric()
    g = pulled_back(psi, h_target or h, z)
    return float(np.abs(np.sqrt(np.linalg.det(g) / np.linalg.det(h(z))) - 1.0).max())


def section_from_field(
    b: EquivField,
    psi: Optional[SurfaceMap] = None,
    h: Optional[MetricField] = None,
    h_target: Optional[MetricField] = None,
    orientation: int = 1,
    name: str = "",
) -> SectionB:
    if b.kind is not FieldKind.ENDOMORPHISM:
        raise ValueError(f"a section is an endomorphism field, got {b.kind.value}")
    return SectionB(
        joint_fn=b.value_and_jacobian,
        psi=psi,
        h=h,
        h_target=h_target,
        orientation=orientation,
        name=name or b.name,
        equivariant=b.equivariant,
        step=b.step,
    )


def identity_section(h: Optional[MetricField] = None) -> SectionB:
    return SectionB(
        fn=lambda z: np.broadcast_to(np.eye(2), z.shape + (2, 2)).copy(),
        deriv_fn=lambda z: np.zeros(z.shape + (2, 2, 2)),
        h=h,
        name="id",
    )


def polar_section(
    psi: SurfaceMap,
    h: Optional[MetricField] = None,
    h_target: Optional[MetricField] = None,
    orientation: int = 1,
    step: float = DEFAULT_STEP,
    name: str = "b",
) -> SectionB:
    """The h-self-adjoint positive square root of h^-1 psi*h'.

    The square root is normalized to determinant one; the departure of psi
    from area preservation is left to `symplecticity_defect`.
    """
    h = h or hyperbolic_metric()
    h_target = h_target or h

    def value(z: np.ndarray) -> np.ndarray:
        pulled = pulled_back(psi, h_target, z)
        if h.hyperbolic:
            s_inv = z.imag[..., None, None] * np.eye(2)
            s = np.eye(2) / z.imag[..., None, None]
        else:
            s = spd_sqrt(h(z))
            s_inv = np.linalg.inv(s)
        a = s_inv @ pulled @ s_inv
        det = np.linalg.det(a)
        tr = np.trace(a, axis1=-2, axis2=-1)
        bad = ~(np.isfinite(det) & (det > 0) & (tr > 0))
        if np.any(bad):
            worst = complex(np.ravel(z)[np.argmax(np.ravel(bad))])
            raise DegeneracyError(f"psi*h' is not positive definite near z={worst:.6g}")
        a = a / np.sqrt(det)[..., None, None]
        return s_inv @ spd_sqrt(a) @ s

    def joint(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return value(z), fd_jacobian(value, z, step)

    return SectionB(joint_fn=joint, psi=psi, h=h, h_target=h_target, orientation=orientation, name=name, step=step)


def isometry_residual(b: SectionB, z: np.ndarray) -> float:
    """max |h(b., b.) - psi*h'| relative to |psi*h'|."""
    if b.psi is None:
        raise InvalidSectionError("section carries no map")
    h = b.source_metric
    bv = b(z)
    lhs = np.swapaxes(bv, -1, -2) @ h(z) @ bv
    rhs = pulled_back(b.psi, b.target_metric, z)
    return float((np.abs(lhs - rhs).max(axis=(-2, -1)) / np.abs(rhs).max(axis=(-2, -1))).max())


def rotate_section(b: SectionB, theta: Union[float, EquivField]) -> SectionB:
    """R_theta o b with R_theta = cos(theta) id + sin(theta) J_h."""
    h = b.source_metric
    J = almost_complex(h, b.orientation)
    constant = not isinstance(theta, EquivField)

    def joint(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        bv, db = b.value_and_jacobian(z)
        j, dj = J.value_and_jacobian(z)
        if constant:
            t = np.full(z.shape, float(theta))
            dt = np.zeros(z.shape + (2,))
        else:
            t, dt = theta.value_and_jacobian(z)
        c, s = np.cos(t)[..., None, None], np.sin(t)[..., None, None]
        rot = c * np.eye(2) + s * j
        drot = (-s * np.eye(2) + c * j)[..., None] * dt[..., None, None, :] + s[..., None] * dj
        jac = np.einsum("...km,...mji->...kji", rot, db) + np.einsum("...kmi,...mj->...kji", drot, bv)
        return rot @ bv, jac

    label = f"{theta:g}" if constant else theta.name
    return SectionB(
        joint_fn=joint,
        psi=b.psi,
        h=b.h,
        h_target=b.h_target,
        orientation=b.orientation,
        name=f"R[{label}]{b.name}",
        step=b.step,
    )


def eta_codazzi(b: SectionB) -> EquivField:
    """eta(v) = h(*d^nabla b, b v)."""
    h = b.source_metric
    form = DNabla(b=b, h=h)

    def value(z: np.ndarray) -> np.ndarray:
        bv, db = b.value_and_jacobian(z)
        g = h(z)
        star = b.orientation * form.coordinate(z, (bv, db)) / np.sqrt(np.linalg.det(g))[..., None]
        return np.einsum("...k,...kl,...lj->...j", star, g, bv)

    return EquivField(kind=FieldKind.ONE_FORM, fn=value, name=f"eta[{b.name}]", equivariant=b.equivariant, step=max(b.step, 1e-4))


def eta_connection(b: SectionB) -> EquivField:
    """omega' - omega from the two connection forms."""
    h = b.source_metric
    frame = canonical_frame(h, b.orientation)

    def metric_joint(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        bv, db = b.value_and_jacobian(z)
        g0, dg0 = h.value_and_jacobian(z)
        g = np.swapaxes(bv, -1, -2) @ g0 @ bv
        dg = (
            np.einsum("...mki,...mn,...nj->...kji", db, g0, bv)
            + np.einsum("...mk,...mni,...nj->...kji", bv, dg0, bv)
            + np.einsum("...mk,...mn,...nji->...kji", bv, g0, db)
        )
        return g, dg

    def frame_joint(z: np.ndarray, index: int) -> Tuple[np.ndarray, np.ndarray]:
        bv, db = b.value_and_jacobian(z)
        v, dv = frame[index].value_and_jacobian(z)
        binv = np.linalg.inv(bv)
        w = np.einsum("...km,...m->...k", binv, v)
        dw = -np.einsum("...km,...mji,...j->...ki", binv, db, w) + np.einsum("...km,...mi->...ki", binv, dv)
        return w, dw

    pulled = MetricField(joint_fn=metric_joint, name=f"{b.name}^T h {b.name}")
    moved = (
        EquivField(kind=FieldKind.VECTOR, joint_fn=lambda z: frame_joint(z, 0), name="w1", equivariant=False),
        EquivField(kind=FieldKind.VECTOR, joint_fn=lambda z: frame_joint(z, 1), name="w2", equivariant=False),
    )
    omega_new = connection_form(pulled, moved, b.orientation)
    omega = connection_form(h, frame, b.orientation)
    return EquivField(
        kind=FieldKind.ONE_FORM,
        fn=lambda z: omega_new(z) - omega(z),
        name=f"eta'[{b.name}]",
    )


def eta(psi: Optional[SurfaceMap], b: SectionB, check: bool = True, check_points: Optional[np.ndarray] = None) -> EquivField:
    """The closed one-form eta_{psi,b}, cross-checked against omega' - omega."""
    if psi is not None and b.psi is not None and b.psi is not psi:
        raise InvalidSectionError(f"section {b.name} belongs to a different map")
    form = eta_codazzi(b)
    if check:
        z = _CHECK_POINTS if check_points is None else np.asarray(check_points, dtype=complex)
        gap = float(np.abs(form(z) - eta_connection(b)(z)).max())
        if gap > ETA_AGREE_TOL:
            raise ConsistencyError(f"eta disagrees between connection forms and *d^nabla b: {gap:.3e}")
        if gap > ETA_WARN_TOL:
            logger.warning("eta of %s: the two evaluations differ by %.2e", b.name, gap)
        logger.debug("eta of %s: cross-check gap %.2e", b.name, gap)
    return form


def _default_loops(loops: Optional[LoopBasis]) -> LoopBasis:
    if loops is not None:
        return loops
    return standard_genus2()[2]


def eta_periods(
    psi: Optional[SurfaceMap],
    b: SectionB,
    loops: Optional[LoopBasis] = None,
    arcs: int = PERIOD_ARCS,
    check: bool = True,
) -> CohClass:
    """Unreduced periods of eta_{psi,b}."""
    refined = loop_refine(_default_loops(loops), arcs)
    return period(eta(psi, b, check=check), refined, check_closed=False)


def c_invariant(
    psi: SurfaceMap,
    h: Optional[MetricField] = None,
    h_target: Optional[MetricField] = None,
    loops: Optional[LoopBasis] = None,
    orientation: int = 1,
    arcs: int = PERIOD_ARCS,
) -> CohClassMod2Pi:
    """C_{h,h'}(psi): periods of eta for the polar section, mod 2 pi."""
    b = polar_section(psi, h, h_target, orientation)
    return eta_periods(psi, b, loops, arcs).mod2pi()


@dataclass(frozen=True, eq=False)
class TrivializingAngle(EquivField):
    """A circle-valued angle theta with d theta = eta, cut along the octagon sides."""
    kind: FieldKind = FieldKind.SCALAR
    winding: np.ndarray = field(default_factory=lambda: np.zeros(4))
    periods: Optional[CohClass] = None
    form: Optional[EquivField] = None


def angle_from_form(
    form: EquivField,
    periods: CohClass,
    group: FuchsianGroup,
    tol: float = LATTICE_TOL,
) -> TrivializingAngle:
    """A primitive of the closed invariant one-form `form` taken mod 2 pi.

    theta(z) is the integral of the form from i to the representative of z
    in the octagon, along geodesics through a grid of cached anchors. Two
    lifts of a point differ by a period, so with periods in 2 pi Z the
    value mod 2 pi does not depend on the cut.
    """
    winding = periods.integer_part()
    off = float(np.abs(periods.periods - TWO_PI * winding).max())
    if off > tol:
        raise ObstructionError(f"eta periods are not in 2 pi Z (off by {off:.3e})", periods.tolist())
    logger.info("trivializing angle: winding %s", winding.astype(int).tolist())
    cache: Dict[Tuple[int, int], float] = {}

    def value(z: np.ndarray) -> np.ndarray:
        z0, _ = reduce_points(z, group)
        w = half_plane_to_disc(z0)
        kx = np.rint(w.real / ANCHOR_GRID).astype(int)
        ky = np.rint(w.imag / ANCHOR_GRID).astype(int)
        anchors = disc_to_half_plane(ANCHOR_GRID * (kx + 1j * ky))
        keys = list(zip(kx.tolist(), ky.tolist()))
        missing = {key: a for key, a in zip(keys, anchors) if key not in cache}
        if missing:
            targets = np.array(list(missing.values()))
            long = line_integrals(form, np.full(targets.shape, BASEPOINT), targets, pieces=4)
            cache.update(zip(missing.keys(), long.tolist()))
        base = np.array([cache[key] for key in keys])
        return base + line_integrals(form, anchors, z0, nodes=4)

    return TrivializingAngle(fn=value, deriv_fn=form, name="theta", winding=winding, periods=periods, form=form)


def trivializing_angle(
    psi: Optional[SurfaceMap],
    b: SectionB,
    loops: Optional[LoopBasis] = None,
    group: Optional[FuchsianGroup] = None,
    arcs: int = PERIOD_ARCS,
    tol: float = LATTICE_TOL,
) -> TrivializingAngle:
    """theta with eta_{psi, R_theta b} = 0, or ObstructionError off the lattice."""
    form = eta(psi, b)
    periods = period(form, loop_refine(_default_loops(loops), arcs), check_closed=False)
    group = group or getattr(psi, "group", None) or standard_genus2()[0]
    return angle_from_form(form, periods, group, tol)


def _circle_gap(x: np.ndarray) -> np.ndarray:
    return np.abs(x - TWO_PI * np.rint(x / TWO_PI))


def monodromy_residual(theta: TrivializingAngle, z: np.ndarray, group: FuchsianGroup, pieces: int = 16) -> float:
    """How far theta is from a single-valued primitive of its form.

    Compares theta(z) with the direct integral from i to z, and the direct
    integrals to z and g z for every side pairing g (their difference is a
    period); all gaps are taken mod 2 pi.
    """
    z = np.asarray(z, dtype=complex).ravel()
    start = np.full(z.shape, BASEPOINT)
    direct = line_integrals(theta.form, start, z, pieces=pieces)
    worst = float(_circle_gap(theta(z) - direct).max())
    for g in group.generators:
        gz = mobius(g.m, z)
        moved = line_integrals(theta.form, start, gz, pieces=pieces)
        worst = max(worst, float(_circle_gap(moved - direct).max()), float(_circle_gap(theta(gz) - theta(z)).max()))
    return worst


def trivialized_section(psi: Optional[SurfaceMap], b: SectionB, **kwargs) -> Tuple[SectionB, TrivializingAngle]:
    theta = trivializing_angle(psi, b, **kwargs)
    return rotate_section(b, theta), theta


def section_velocity(X: EquivField, group: FuchsianGroup, dt: float = 1e-3, steps: int = 8) -> EquivField:
    """d/dt of the polar section of exp(tX) at t = 0, by central differences."""
    plus = polar_section(FlowMap.autonomous(X, group, time=dt, steps=steps))
    minus = polar_section(FlowMap.autonomous(X, group, time=-dt, steps=steps))

    def joint(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        bp, dbp = plus.value_and_jacobian(z)
        bm, dbm = minus.value_and_jacobian(z)
        return (bp - bm) / (2 * dt), (dbp - dbm) / (2 * dt)

    return EquivField(kind=FieldKind.ENDOMORPHISM, joint_fn=joint, name=f"d/dt b[{X.name}]")


def infinitesimal_residuals(X: EquivField, group: FuchsianGroup, z: np.ndarray, dt: float = 1e-3) -> Tuple[float, float]:
    """Residuals of nabla X = bdot + f J and of *d^nabla bdot = J X + grad f.

    The first is the self-adjoint part of nabla X - bdot; the second is the
    curl of (*d^nabla bdot - J X), which vanishes exactly when the
    difference is a gradient.
    """
    h = hyperbolic_metric(group)
    bdot = section_velocity(X, group, dt)
    z = np.asarray(z, dtype=complex)
    diff = covariant_jacobian(h, X, z) - bdot(z)
    sym = 0.5 * (diff + np.swapaxes(diff, -1, -2))
    first = float(np.abs(sym).max() / max(1.0, float(np.abs(diff).max())))

    form = DNabla(b=bdot, h=h)
    J = almost_complex(h)

    def lowered(w: np.ndarray) -> np.ndarray:
        g = h(w)
        star = form.coordinate(w) / np.sqrt(np.linalg.det(g))[..., None]
        rest = star - np.einsum("...ij,...j->...i", J(w), X(w))
        return np.einsum("...ij,...j->...i", g, rest)

    curl = exterior_derivative(EquivField(kind=FieldKind.ONE_FORM, fn=lowered, name="rest"), step=1e-3)
    second = float(np.abs(curl(z)).max())
    return first, second
