#!/usr/bin/env python
"""
Metric calculus on the chart: the hyperbolic metric, J_h, Omega_h,
gradient and divergence, the Levi-Civita connection, connection forms of
orthonormal frames, d^nabla of endomorphism fields and its Hodge dual.

Orientation convention: J_h is the counter-clockwise quarter turn and
Omega_h(u, v) = h(J_h u, v). Passing orientation=-1 flips J_h, Omega_h
and the orientation of frames together.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.calculus.fields import EquivField, FieldKind, MetricField, fd_jacobian
from src.errors import FrameError
from src.geometry.fuchsian import FuchsianGroup

Frame = Tuple[EquivField, EquivField]

FRAME_TOL = 1e-8
_E = np.array([[0.0, -1.0], [1.0, 0.0]])


def hyperbolic_metric(group: Optional[FuchsianGroup] = None) -> MetricField:
    """|dz|^2 / Im(z)^2. Invariant under all of PSL(2,R), so `group` is only informative."""

    def value(z: np.ndarray) -> np.ndarray:
        return np.eye(2) / (z.imag**2)[..., None, None]

    def deriv(z: np.ndarray) -> np.ndarray:
        out = np.zeros(z.shape + (2, 2, 2))
        out[..., 0, 0, 1] = out[..., 1, 1, 1] = -2.0 / z.imag**3
        return out

    def second(z: np.ndarray) -> np.ndarray:
        out = np.zeros(z.shape + (2, 2, 2, 2))
        out[..., 0, 0, 1, 1] = out[..., 1, 1, 1, 1] = 6.0 / z.imag**4
        return out

    return MetricField(fn=value, deriv_fn=deriv, second_fn=second, name="h", hyperbolic=True)


def almost_complex(h: MetricField, orientation: int = 1) -> EquivField:
    if h.hyperbolic:
        return EquivField(
            kind=FieldKind.ENDOMORPHISM,
            fn=lambda z: np.broadcast_to(orientation * _E, z.shape + (2, 2)).copy(),
            deriv_fn=lambda z: np.zeros(z.shape + (2, 2, 2)),
            name="J",
        )

    def value(z: np.ndarray) -> np.ndarray:
        g = h(z)
        return orientation * np.sqrt(np.linalg.det(g))[..., None, None] * np.linalg.inv(g) @ _E

    return EquivField(kind=FieldKind.ENDOMORPHISM, fn=value, name="J", step=h.step)


def area_form(h: MetricField, orientation: int = 1) -> EquivField:
    """Omega_h as an antisymmetric matrix, Omega[i, j] = Omega_h(e_i, e_j)."""

    def value(z: np.ndarray) -> np.ndarray:
        s = orientation * h.sqrt_det(z)
        out = np.zeros(z.shape + (2, 2))
        out[..., 0, 1] = s
        out[..., 1, 0] = -s
        return out

    return EquivField(kind=FieldKind.TWO_FORM, fn=value, name="Omega", step=h.step)


def grad(h: MetricField, f: EquivField) -> EquivField:
    return EquivField(
        kind=FieldKind.VECTOR,
        fn=lambda z: np.einsum("...ij,...j->...i", h.inverse(z), f.jacobian(z)),
        name=f"grad {f.name}",
        equivariant=f.equivariant,
        step=f.step,
    )


def div(h: MetricField, X: EquivField) -> EquivField:
    """(1/sqrt det h) d_i (sqrt det h X^i)."""

    def value(z: np.ndarray) -> np.ndarray:
        x, dx = X.value_and_jacobian(z)
        g, dg = h.value_and_jacobian(z)
        ginv = np.linalg.inv(g)
        dlog = 0.5 * np.einsum("...ab,...bai->...i", ginv, dg)
        return np.trace(dx, axis1=-2, axis2=-1) + np.einsum("...i,...i->...", x, dlog)

    return EquivField(kind=FieldKind.SCALAR, fn=value, name=f"div {X.name}", equivariant=X.equivariant)


def symplectic_dual(h: MetricField, alpha: EquivField, orientation: int = 1) -> EquivField:
    """The vector field X with Omega_h(X, .) = alpha, i.e. X = -J_h h^-1 alpha."""
    if h.hyperbolic:

        def joint(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            a, da = alpha.value_and_jacobian(z)
            y = z.imag
            y2 = y * y
            x = np.empty(z.shape + (2,))
            x[..., 0] = y2 * a[..., 1]
            x[..., 1] = -y2 * a[..., 0]
            dx = np.empty(z.shape + (2, 2))
            dx[..., 0, 0] = y2 * da[..., 1, 0]
            dx[..., 0, 1] = 2 * y * a[..., 1] + y2 * da[..., 1, 1]
            dx[..., 1, 0] = -y2 * da[..., 0, 0]
            dx[..., 1, 1] = -2 * y * a[..., 0] - y2 * da[..., 0, 1]
            return orientation * x, orientation * dx

        return EquivField(
            kind=FieldKind.VECTOR,
            joint_fn=joint,
            name=f"X[{alpha.name}]",
            equivariant=alpha.equivariant,
            dual_of=(h, alpha, orientation),
        )

    J = almost_complex(h, orientation)

    def value(z: np.ndarray) -> np.ndarray:
        sharp = np.einsum("...ij,...j->...i", h.inverse(z), alpha(z))
        return -np.einsum("...ij,...j->...i", J(z), sharp)

    return EquivField(
        kind=FieldKind.VECTOR, fn=value, name=f"X[{alpha.name}]", equivariant=alpha.equivariant, dual_of=(h, alpha, orientation)
    )


def omega_contraction(h: MetricField, X: EquivField, orientation: int = 1) -> EquivField:
    """The one-form Omega_h(X, .); returns alpha itself when X is the dual of alpha."""
    if X.dual_of is not None and X.dual_of[0] is h and X.dual_of[2] == orientation:
        return X.dual_of[1]
    omega = area_form(h, orientation)
    return EquivField(
        kind=FieldKind.ONE_FORM,
        fn=lambda z: np.einsum("...i,...ij->...j", X(z), omega(z)),
        name=f"Omega({X.name},.)",
        equivariant=X.equivariant,
    )


def canonical_frame(h: MetricField, orientation: int = 1) -> Frame:
    """(y d/dx, y d/dy) for the hyperbolic metric, Gram-Schmidt on d/dx otherwise."""
    if h.hyperbolic:

        def v1(z: np.ndarray) -> np.ndarray:
            out = np.zeros(z.shape + (2,))
            out[..., 0] = z.imag
            return out

        def dv1(z: np.ndarray) -> np.ndarray:
            out = np.zeros(z.shape + (2, 2))
            out[..., 0, 1] = 1.0
            return out

        return (
            EquivField(kind=FieldKind.VECTOR, fn=v1, deriv_fn=dv1, name="v1", equivariant=False),
            EquivField(
                kind=FieldKind.VECTOR,
                fn=lambda z: orientation * np.roll(v1(z), 1, axis=-1),
                deriv_fn=lambda z: orientation * np.roll(dv1(z), 1, axis=-2),
                name="v2",
                equivariant=False,
            ),
        )

    J = almost_complex(h, orientation)

    def w1(z: np.ndarray) -> np.ndarray:
        g = h(z)
        out = np.zeros(z.shape + (2,))
        out[..., 0] = 1.0 / np.sqrt(g[..., 0, 0])
        return out

    return (
        EquivField(kind=FieldKind.VECTOR, fn=w1, name="v1", equivariant=False, step=h.step),
        EquivField(
            kind=FieldKind.VECTOR,
            fn=lambda z: np.einsum("...ij,...j->...i", J(z), w1(z)),
            name="v2",
            equivariant=False,
            step=h.step,
        ),
    )


def rotate_frame(frame: Frame, theta: EquivField) -> Frame:
    """(cos t v1 + sin t v2, -sin t v1 + cos t v2)."""
    v1, v2 = frame

    def joint(z: np.ndarray, first: bool) -> Tuple[np.ndarray, np.ndarray]:
        a, da = v1.value_and_jacobian(z)
        b, db = v2.value_and_jacobian(z)
        t, dt = theta.value_and_jacobian(z)
        c, s = np.cos(t)[..., None], np.sin(t)[..., None]
        if first:
            val = c * a + s * b
            turned = -s * a + c * b
            jac = c[..., None] * da + s[..., None] * db
        else:
            val = -s * a + c * b
            turned = -c * a - s * b
            jac = -s[..., None] * da + c[..., None] * db
        jac = jac + turned[..., :, None] * dt[..., None, :]
        return val, jac

    return (
        EquivField(kind=FieldKind.VECTOR, joint_fn=lambda z: joint(z, True), name="R v1", equivariant=False),
        EquivField(kind=FieldKind.VECTOR, joint_fn=lambda z: joint(z, False), name="R v2", equivariant=False),
    )


def check_frame(h: MetricField, frame: Frame, z: np.ndarray, orientation: int = 1, tol: float = FRAME_TOL) -> None:
    g = h(z)
    a, b = frame[0](z), frame[1](z)
    gram = np.stack(
        [
            np.einsum("...i,...ij,...j->...", a, g, a) - 1.0,
            np.einsum("...i,...ij,...j->...", a, g, b),
            np.einsum("...i,...ij,...j->...", b, g, b) - 1.0,
        ]
    )
    if np.abs(gram).max() > tol:
        raise FrameError(f"frame is not orthonormal (residual {np.abs(gram).max():.3e})")
    det = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    if np.any(orientation * det <= 0):
        raise FrameError("frame is not positively oriented")


def covariant_jacobian(h: MetricField, X: EquivField, z: np.ndarray) -> np.ndarray:
    """(nabla X)[..., k, i] = nabla_i X^k."""
    x, dx = X.value_and_jacobian(z)
    gamma = h.christoffel(z)
    return dx + np.einsum("...kij,...j->...ki", gamma, x)


def connection_form(h: MetricField, frame: Frame, orientation: int = 1) -> EquivField:
    """omega(v) = h(nabla_v v1, v2) for an oriented orthonormal frame."""
    v1, v2 = frame

    def value(z: np.ndarray) -> np.ndarray:
        check_frame(h, frame, z, orientation)
        nab = covariant_jacobian(h, v1, z)
        return np.einsum("...ki,...kl,...l->...i", nab, h(z), v2(z))

    return EquivField(kind=FieldKind.ONE_FORM, fn=value, name="omega", equivariant=False)


def exterior_derivative(alpha: EquivField, step: Optional[float] = None) -> EquivField:
    """d alpha as the coefficient of dx ^ dy."""

    def value(z: np.ndarray) -> np.ndarray:
        jac = alpha.jacobian(z) if step is None else fd_jacobian(alpha, z, step)
        return jac[..., 1, 0] - jac[..., 0, 1]

    return EquivField(kind=FieldKind.SCALAR, fn=value, name=f"d{alpha.name}", equivariant=alpha.equivariant)


@dataclass(frozen=True, eq=False)
class DNabla:
    """The TS-valued 2-form d^nabla b."""
    b: EquivField
    h: MetricField

    def coordinate(self, z: np.ndarray, jet: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> np.ndarray:
        """d^nabla b (d/dx, d/dy); `jet` passes precomputed (b, db)."""
        z = np.asarray(z, dtype=complex)
        bv, db = jet if jet is not None else self.b.value_and_jacobian(z)
        gamma = self.h.christoffel(z)
        out = db[..., :, 1, 0] - db[..., :, 0, 1]
        out = out + np.einsum("...kj,...j->...k", gamma[..., :, 0, :], bv[..., :, 1])
        out = out - np.einsum("...kj,...j->...k", gamma[..., :, 1, :], bv[..., :, 0])
        return out

    def __call__(self, z: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        area = v[..., 0] * w[..., 1] - v[..., 1] * w[..., 0]
        return self.coordinate(z) * area[..., None]

    def on_frame(self, z: np.ndarray, frame: Frame) -> np.ndarray:
        return self(z, frame[0](z), frame[1](z))


def dnabla(b: EquivField, h: MetricField) -> DNabla:
    return DNabla(b=b, h=h)


def hodge_dual_dnabla(b: EquivField, h: MetricField, orientation: int = 1) -> EquivField:
    """*d^nabla b = d^nabla b (v1, v2) on any oriented orthonormal frame."""
    form = DNabla(b=b, h=h)
    return EquivField(
        kind=FieldKind.VECTOR,
        fn=lambda z: orientation * form.coordinate(z) / h.sqrt_det(z)[..., None],
        name=f"*dnabla {b.name}",
        equivariant=b.equivariant,
        step=b.step,
    )


def brioschi_curvature(h: MetricField, z: np.ndarray) -> np.ndarray:
    """Gaussian curvature of h from E, F, G and their derivatives."""
    z = np.asarray(z, dtype=complex)
    g, dg = h.value_and_jacobian(z)
    sec = h.second_jacobian(z)
    E, F, G = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
    E_u, E_v = dg[..., 0, 0, 0], dg[..., 0, 0, 1]
    F_u, F_v = dg[..., 0, 1, 0], dg[..., 0, 1, 1]
    G_u, G_v = dg[..., 1, 1, 0], dg[..., 1, 1, 1]
    E_vv = sec[..., 0, 0, 1, 1]
    F_uv = sec[..., 0, 1, 0, 1]
    G_uu = sec[..., 1, 1, 0, 0]
    a = np.stack(
        [
            np.stack([-0.5 * E_vv + F_uv - 0.5 * G_uu, 0.5 * E_u, F_u - 0.5 * E_v], axis=-1),
            np.stack([F_v - 0.5 * G_u, E, F], axis=-1),
            np.stack([0.5 * G_v, F, G], axis=-1),
        ],
        axis=-2,
    )
    zero = np.zeros_like(E)
    b = np.stack(
        [
            np.stack([zero, 0.5 * E_v, 0.5 * G_u], axis=-1),
            np.stack([0.5 * E_v, E, F], axis=-1),
            np.stack([0.5 * G_u, F, G], axis=-1),
        ],
        axis=-2,
    )
    return (np.linalg.det(a) - np.linalg.det(b)) / (E * G - F * F) ** 2
