#!/usr/bin/env python
"""
Equivariant tensor fields on the upper half-plane chart.

A field is a vectorized function of complex points. Values have shape
(N,) for scalars, (N, 2) for vectors and one-forms (components along
d/dx, d/dy resp. dx, dy), (N, 2, 2) for endomorphisms, metrics and
two-forms. Jacobians append a trailing axis of length 2 holding the
x and y partial derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from src.geometry.fuchsian import FuchsianGroup
from src.geometry.lie2 import complex_to_real_jacobian, mobius, mobius_derivative

ArrayFn = Callable[[np.ndarray], np.ndarray]
JointFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]

DEFAULT_STEP = 1e-4
TWO_PI = 2.0 * math.pi


class FieldKind(str, Enum):
    SCALAR = "scalar"
    VECTOR = "vector"
    ONE_FORM = "one_form"
    ENDOMORPHISM = "endomorphism"
    METRIC = "metric"
    TWO_FORM = "two_form"


VALUE_SHAPES: Dict[FieldKind, Tuple[int, ...]] = {
    FieldKind.SCALAR: (),
    FieldKind.VECTOR: (2,),
    FieldKind.ONE_FORM: (2,),
    FieldKind.ENDOMORPHISM: (2, 2),
    FieldKind.METRIC: (2, 2),
    FieldKind.TWO_FORM: (2, 2),
}


def fd_jacobian(fn: ArrayFn, z: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central differences in x and y with one Richardson step.

    fn maps (M,) complex points to (M, ...) values; the result has shape
    (N, ..., 2).
    """
    z = np.asarray(z, dtype=complex).ravel()
    offsets = np.array([step, -step, 2 * step, -2 * step])
    stencil = np.concatenate([z[None, :] + offsets[:, None], z[None, :] + 1j * offsets[:, None]])
    values = np.asarray(fn(stencil.ravel()))
    values = values.reshape((8, z.size) + values.shape[1:])
    out = []
    for base in (0, 4):
        d1 = (values[base] - values[base + 1]) / (2 * step)
        d2 = (values[base + 2] - values[base + 3]) / (4 * step)
        out.append((4.0 * d1 - d2) / 3.0)
    return np.stack(out, axis=-1)


@dataclass(frozen=True, eq=False)
class EquivField:
    """A field on H2 with pointwise first derivatives.

    `fn` gives values, `deriv_fn` analytic first derivatives (falls back to
    `fd_jacobian`), `joint_fn` returns both at once for fields whose
    evaluation shares work (domain reduction, flows). Scalars may carry an
    analytic `hessian_fn`. `equivariant=False` marks chart-local fields such
    as coordinate frames and their connection forms.
    Symplectic duals keep `dual_of = (h, alpha, orientation)`.
    """
    kind: FieldKind
    fn: Optional[ArrayFn] = None
    deriv_fn: Optional[ArrayFn] = None
    joint_fn: Optional[JointFn] = None
    hessian_fn: Optional[ArrayFn] = None
    name: str = ""
    equivariant: bool = True
    step: float = DEFAULT_STEP
    dual_of: Optional[Tuple[object, "EquivField", int]] = None

    def __post_init__(self) -> None:
        if self.fn is None and self.joint_fn is None:
            raise ValueError("EquivField needs fn or joint_fn")

    def _prep(self, z: np.ndarray) -> Tuple[np.ndarray, Tuple[int, ...]]:
        z = np.asarray(z, dtype=complex)
        return z.ravel(), z.shape

    def __call__(self, z: np.ndarray) -> np.ndarray:
        flat, shape = self._prep(z)
        if self.fn is not None:
            values = self.fn(flat)
        else:
            values = self.joint_fn(flat)[0]
        return np.asarray(values).reshape(shape + VALUE_SHAPES[self.kind])

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        flat, shape = self._prep(z)
        if self.deriv_fn is not None:
            jac = self.deriv_fn(flat)
        elif self.joint_fn is not None:
            jac = self.joint_fn(flat)[1]
        else:
            jac = fd_jacobian(self.fn, flat, self.step)
        return np.asarray(jac).reshape(shape + VALUE_SHAPES[self.kind] + (2,))

    def value_and_jacobian(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self.joint_fn is not None:
            flat, shape = self._prep(z)
            values, jac = self.joint_fn(flat)
            vshape = VALUE_SHAPES[self.kind]
            return np.asarray(values).reshape(shape + vshape), np.asarray(jac).reshape(shape + vshape + (2,))
        return self(z), self.jacobian(z)

    @property
    def analytic(self) -> bool:
        return self.deriv_fn is not None or self.joint_fn is not None

    def hessian(self, z: np.ndarray) -> np.ndarray:
        if self.kind is not FieldKind.SCALAR:
            raise ValueError("hessian is defined for scalar fields only")
        flat, shape = self._prep(z)
        if self.hessian_fn is not None:
            hess = self.hessian_fn(flat)
        else:
            hess = fd_jacobian(lambda w: self.jacobian(w), flat, self.step)
        return np.asarray(hess).reshape(shape + (2, 2))

    def differential(self) -> EquivField:
        """dH for a scalar H, as a one-form field."""
        if self.kind is not FieldKind.SCALAR:
            raise ValueError("differential is defined for scalar fields only")
        return EquivField(
            kind=FieldKind.ONE_FORM,
            fn=self.jacobian,
            deriv_fn=self.hessian if self.hessian_fn is not None else None,
            name=f"d{self.name}",
            equivariant=self.equivariant,
            step=self.step,
        )

    def scaled(self, c: float) -> EquivField:
        return EquivField(
            kind=self.kind,
            fn=lambda z: c * self(z),
            deriv_fn=(lambda z: c * self.jacobian(z)) if self.analytic else None,
            hessian_fn=(lambda z: c * self.hessian(z)) if self.hessian_fn is not None else None,
            name=f"{c:g}*{self.name}",
            equivariant=self.equivariant,
            step=self.step,
        )

    def __neg__(self) -> EquivField:
        return self.scaled(-1.0)

    def __add__(self, other: EquivField) -> EquivField:
        if other.kind is not self.kind:
            raise ValueError(f"cannot add {self.kind.value} and {other.kind.value} fields")
        both_analytic = self.analytic and other.analytic
        both_hess = self.hessian_fn is not None and other.hessian_fn is not None
        return EquivField(
            kind=self.kind,
            fn=lambda z: self(z) + other(z),
            deriv_fn=(lambda z: self.jacobian(z) + other.jacobian(z)) if both_analytic else None,
            hessian_fn=(lambda z: self.hessian(z) + other.hessian(z)) if both_hess else None,
            name=f"{self.name}+{other.name}",
            equivariant=self.equivariant and other.equivariant,
            step=min(self.step, other.step),
        )

    def __sub__(self, other: EquivField) -> EquivField:
        return self + (-other)


def zero_field(kind: FieldKind) -> EquivField:
    shape = VALUE_SHAPES[kind]
    return EquivField(
        kind=kind,
        fn=lambda z: np.zeros(np.shape(z) + shape),
        deriv_fn=lambda z: np.zeros(np.shape(z) + shape + (2,)),
        hessian_fn=(lambda z: np.zeros(np.shape(z) + (2, 2))) if kind is FieldKind.SCALAR else None,
        name="0",
    )


def identity_endomorphism() -> EquivField:
    return EquivField(
        kind=FieldKind.ENDOMORPHISM,
        fn=lambda z: np.broadcast_to(np.eye(2), np.shape(z) + (2, 2)).copy(),
        deriv_fn=lambda z: np.zeros(np.shape(z) + (2, 2, 2)),
        name="id",
    )


def real_jacobians(m: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Real 2x2 derivative of the Moebius maps m at z."""
    return complex_to_real_jacobian(mobius_derivative(m, z))


def transform_values(kind: FieldKind, values: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Push values at z forward along g, given the real Jacobians dg of g at z."""
    if kind is FieldKind.SCALAR:
        return values
    inv = np.linalg.inv(dg)
    if kind is FieldKind.VECTOR:
        return np.einsum("...ij,...j->...i", dg, values)
    if kind is FieldKind.ONE_FORM:
        return np.einsum("...j,...ji->...i", values, inv)
    if kind is FieldKind.ENDOMORPHISM:
        return dg @ values @ inv
    return np.swapaxes(inv, -1, -2) @ values @ inv


def equivariance_residual(f: EquivField, group: FuchsianGroup, z: np.ndarray) -> float:
    """Max over generators of |f(g z) - g_* f(z)|, relative to the value scale."""
    z = np.asarray(z, dtype=complex).ravel()
    base = f(z)
    worst = 0.0
    for g in group.generators:
        gz = mobius(g.m, z)
        expected = transform_values(f.kind, base, real_jacobians(g.m, z))
        got = f(gz)
        scale = max(1.0, float(np.abs(expected).max()))
        worst = max(worst, float(np.abs(got - expected).max()) / scale)
    return worst


@dataclass(frozen=True, eq=False)
class MetricField(EquivField):
    """A Riemannian metric in chart components.

    `developing` optionally carries a map f with metric = f*h_std, so
    geometric formulas can move to standard coordinates. `hyperbolic` marks
    the standard metric, for which several operators have closed forms.
    """
    kind: FieldKind = FieldKind.METRIC
    second_fn: Optional[ArrayFn] = None
    developing: Optional[object] = None
    hyperbolic: bool = False

    def second_jacobian(self, z: np.ndarray) -> np.ndarray:
        flat, shape = self._prep(z)
        if self.second_fn is not None:
            sec = self.second_fn(flat)
        else:
            sec = fd_jacobian(lambda w: self.jacobian(w), flat, max(self.step, 1e-3))
        return np.asarray(sec).reshape(shape + (2, 2, 2, 2))

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.linalg.inv(self(z))

    def sqrt_det(self, z: np.ndarray) -> np.ndarray:
        return np.sqrt(np.linalg.det(self(z)))

    def christoffel(self, z: np.ndarray) -> np.ndarray:
        """Gamma[..., k, i, j] = Gamma^k_{ij}."""
        g, dg = self.value_and_jacobian(z)
        ginv = np.linalg.inv(g)
        # dg[..., l, j, i] = d_i g_{lj}
        term = (
            np.einsum("...lji->...lij", dg)
            + np.einsum("...lij->...lij", dg)
            - np.einsum("...ijl->...lij", dg)
        )
        return 0.5 * np.einsum("...kl,...lij->...kij", ginv, term)

    def is_positive(self, z: np.ndarray) -> np.ndarray:
        g = self(z)
        return (g[..., 0, 0] > 0) & (np.linalg.det(g) > 0)


@dataclass(frozen=True, eq=False)
class CohClass:
    """A de Rham class given by its 4 periods on the loop basis."""
    periods: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "periods", np.asarray(self.periods, dtype=float).reshape(-1))

    @classmethod
    def zero(cls, n: int = 4) -> CohClass:
        return cls(np.zeros(n))

    def __add__(self, other: CohClass) -> CohClass:
        return CohClass(self.periods + other.periods)

    def __sub__(self, other: CohClass) -> CohClass:
        return CohClass(self.periods - other.periods)

    def __neg__(self) -> CohClass:
        return CohClass(-self.periods)

    def __mul__(self, s: float) -> CohClass:
        return CohClass(self.periods * s)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.abs(self.periods).max())

    def mod2pi(self) -> CohClassMod2Pi:
        return CohClassMod2Pi(self.periods)

    def integer_part(self) -> np.ndarray:
        return np.rint(self.periods / TWO_PI)

    def lattice_residual(self) -> float:
        """Distance of the periods from (2 pi Z)^4."""
        return float(np.abs(self.periods - TWO_PI * self.integer_part()).max())

    def tolist(self) -> list:
        return [float(p) for p in self.periods]


@dataclass(frozen=True, eq=False)
class CohClassMod2Pi:
    """Periods reduced componentwise to [0, 2 pi)."""
    periods: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self) -> None:
        p = np.mod(np.asarray(self.periods, dtype=float).reshape(-1), TWO_PI)
        p = np.where(p >= TWO_PI, 0.0, p)
        object.__setattr__(self, "periods", p)

    def __add__(self, other: CohClassMod2Pi) -> CohClassMod2Pi:
        return CohClassMod2Pi(self.periods + other.periods)

    def distance(self, other: CohClassMod2Pi | CohClass) -> float:
        diff = np.abs(self.periods - np.mod(np.asarray(other.periods, dtype=float), TWO_PI))
        return float(np.minimum(diff, TWO_PI - diff).max())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, (CohClassMod2Pi, CohClass)):
            return NotImplemented
        return self.distance(other) < 1e-6

    def tolist(self) -> list:
        return [float(p) for p in self.periods]
