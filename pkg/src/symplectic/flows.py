#!/usr/bin/env python
"""
Symplectic isotopies integrated pointwise.

A FlowMap is a list of segments, each a time-dependent vector field
integrated over [t_start, t_end] with fixed-step RK4. The variational
equation dD/dt = DX(psi_t) D is integrated alongside, so every query
returns both psi(z) and d psi(z). Trajectories are pulled back into the
octagon after each step; the accumulated group element restores the
unreduced image at the end.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Optional, Protocol, Tuple, runtime_checkable

import numpy as np

from src.calculus.connection import hyperbolic_metric, omega_contraction
from src.calculus.fields import DEFAULT_STEP, CohClass, EquivField, MetricField, fd_jacobian, real_jacobians
from src.calculus.periods import gauss_legendre, geodesic_frames, period
from src.errors import NumericOverflowError
from src.geometry.fuchsian import FuchsianGroup, LoopBasis, loop_refine, reduce_points
from src.geometry.lie2 import mobius, mobius_derivative, sl2_inverse

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 256
FLUX_TIME_NODES = 64
FLUX_ARCS = 24
CACHE_SIZE = 64

TimeField = Callable[[float], EquivField]


@runtime_checkable
class SurfaceMap(Protocol):
    """A map of the chart with its real Jacobian."""

    def apply(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]: ...


def constant_field(X: EquivField) -> TimeField:
    return lambda t: X


@dataclass(frozen=True)
class FlowSegment:
    field: TimeField
    t_start: float = 0.0
    t_end: float = 1.0
    steps: int = DEFAULT_STEPS
    label: str = ""

    @property
    def duration(self) -> float:
        return abs(self.t_end - self.t_start)

    def reversed(self) -> FlowSegment:
        return replace(self, t_start=self.t_end, t_end=self.t_start, label=f"{self.label}^-1")

    def truncated(self, fraction: float) -> FlowSegment:
        end = self.t_start + fraction * (self.t_end - self.t_start)
        return replace(self, t_end=end, steps=max(1, int(round(self.steps * fraction))))


@dataclass(frozen=True, eq=False)
class FlowMap:
    """psi = (last segment) o ... o (first segment)."""
    segments: Tuple[FlowSegment, ...]
    group: FuchsianGroup
    name: str = "psi"
    reduce: bool = True
    _cache: "OrderedDict[Tuple[Tuple[int, ...], bytes], Tuple[np.ndarray, np.ndarray]]" = field(
        default_factory=OrderedDict, repr=False, compare=False
    )

    @classmethod
    def autonomous(cls, X: EquivField, group: FuchsianGroup, time: float = 1.0, steps: int = DEFAULT_STEPS, name: str = "") -> FlowMap:
        seg = FlowSegment(field=constant_field(X), t_start=0.0, t_end=time, steps=steps, label=X.name)
        return cls(segments=(seg,), group=group, name=name or f"exp({time:g} {X.name})")

    @classmethod
    def from_time_field(cls, Xt: TimeField, group: FuchsianGroup, steps: int = DEFAULT_STEPS, name: str = "psi") -> FlowMap:
        return cls(segments=(FlowSegment(field=Xt, steps=steps, label=name),), group=group, name=name)

    @classmethod
    def identity(cls, group: FuchsianGroup) -> FlowMap:
        return cls(segments=(), group=group, name="id")

    def apply(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        key = (z.shape, z.tobytes())
        if key in self._cache:
            self._cache.move_to_end(key)
            pts, jac = self._cache[key]
            return pts.copy(), jac.copy()
        flat = z.ravel()
        logger.debug("integrating %s at %d point(s), %d segment(s)", self.name, flat.size, len(self.segments))
        w = flat.copy()
        G = np.broadcast_to(np.eye(2), (w.size, 2, 2)).copy()
        D = np.broadcast_to(np.eye(2), (w.size, 2, 2)).copy()
        for seg in self.segments:
            w, G, D = self._integrate(seg, w, G, D)
        pts = mobius(G, w)
        jac = real_jacobians(G, w) @ D
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(jac))):
            raise NumericOverflowError(f"flow {self.name} produced non-finite values")
        pts, jac = pts.reshape(z.shape), jac.reshape(z.shape + (2, 2))
        self._cache[key] = (pts, jac)
        if len(self._cache) > CACHE_SIZE:
            self._cache.popitem(last=False)
        return pts.copy(), jac.copy()

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.apply(z)[0]

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        return self.apply(z)[1]

    def _integrate(
        self, seg: FlowSegment, w: np.ndarray, G: np.ndarray, D: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        dt = (seg.t_end - seg.t_start) / seg.steps

        def rhs(t: float, pts: np.ndarray, jac: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            v, dv = seg.field(t).value_and_jacobian(pts)
            return v[..., 0] + 1j * v[..., 1], dv @ jac

        for n in range(seg.steps):
            t = seg.t_start + n * dt
            k1, l1 = rhs(t, w, D)
            k2, l2 = rhs(t + dt / 2, w + dt / 2 * k1, D + dt / 2 * l1)
            k3, l3 = rhs(t + dt / 2, w + dt / 2 * k2, D + dt / 2 * l2)
            k4, l4 = rhs(t + dt, w + dt * k3, D + dt * l3)
            w = w + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            D = D + dt / 6 * (l1 + 2 * l2 + 2 * l3 + l4)
            if np.any(w.imag <= 0):
                raise NumericOverflowError(f"flow {self.name} left the upper half-plane")
            if self.reduce:
                w0, g = reduce_points(w, self.group)
                moved = np.abs(g - np.eye(2)).max(axis=(-2, -1)) > 0
                if np.any(moved):
                    D[moved] = real_jacobians(sl2_inverse(g[moved]), w[moved]) @ D[moved]
                    G[moved] = G[moved] @ g[moved]
                    w = np.where(moved, w0, w)
        return w, G, D

    def then(self, other: FlowMap) -> FlowMap:
        """other o self."""
        return FlowMap(segments=self.segments + other.segments, group=self.group, name=f"{other.name}o{self.name}")

    def inverse(self) -> FlowMap:
        segs = tuple(seg.reversed() for seg in reversed(self.segments))
        return FlowMap(segments=segs, group=self.group, name=f"{self.name}^-1")

    def at(self, fraction: float) -> FlowMap:
        """The isotopy stopped after `fraction` of its total duration."""
        if not 0.0 <= fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        total = sum(seg.duration for seg in self.segments)
        budget = fraction * total
        segs = []
        for seg in self.segments:
            if budget <= 0:
                break
            if seg.duration <= budget:
                segs.append(seg)
                budget -= seg.duration
            else:
                segs.append(seg.truncated(budget / seg.duration))
                budget = 0.0
        return FlowMap(segments=tuple(segs), group=self.group, name=f"{self.name}_{fraction:g}")

    def with_steps(self, steps: int) -> FlowMap:
        segs = tuple(replace(seg, steps=steps) for seg in self.segments)
        return FlowMap(segments=segs, group=self.group, name=self.name)

    def generators(self) -> Iterator[FlowSegment]:
        return iter(self.segments)


@dataclass(frozen=True)
class ComposedMap:
    """outer o inner."""
    outer: SurfaceMap
    inner: SurfaceMap

    def apply(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p, dp = self.inner.apply(z)
        q, dq = self.outer.apply(p)
        return q, dq @ dp


@dataclass(frozen=True)
class IdentityMap:
    def apply(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        return z.copy(), np.broadcast_to(np.eye(2), z.shape + (2, 2)).copy()


@dataclass(frozen=True)
class MoebiusMap:
    m: np.ndarray

    def apply(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        return mobius(self.m, z), real_jacobians(np.broadcast_to(self.m, z.shape + (2, 2)), z)


def map_second_jacobian(f: SurfaceMap, z: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """d^2 f as an array (..., 2, 2, 2): [k, j, i] = d_i (df)^k_j."""
    z = np.asarray(z, dtype=complex)
    return fd_jacobian(lambda w: f.apply(w)[1], z.ravel(), step).reshape(z.shape + (2, 2, 2))


def pullback_metric(f: SurfaceMap, base: Optional[MetricField] = None, name: str = "", step: float = DEFAULT_STEP) -> MetricField:
    """f*base with chart components df^T base(f) df; `developing` records f."""
    base = base or hyperbolic_metric()

    def value(z: np.ndarray) -> np.ndarray:
        p, dp = f.apply(z)
        return np.swapaxes(dp, -1, -2) @ base(p) @ dp

    return MetricField(fn=value, developing=f, name=name or f"pullback {base.name}", step=step)


def flux(
    flow: FlowMap,
    loops: LoopBasis,
    h: Optional[MetricField] = None,
    orientation: int = 1,
    time_nodes: int = FLUX_TIME_NODES,
    arcs: int = FLUX_ARCS,
) -> CohClass:
    """Integral over the isotopy of the periods of Omega_h(X_t, .)."""
    h = h or hyperbolic_metric(flow.group)
    refined = loop_refine(loops, arcs)
    t, w = gauss_legendre(time_nodes)
    total = np.zeros(len(loops))
    for seg in flow.segments:
        span = seg.t_end - seg.t_start
        if seg.field(seg.t_start) is seg.field(seg.t_end):
            form = omega_contraction(h, seg.field(seg.t_start), orientation)
            total += span * period(form, refined, check_closed=False).periods
            continue
        for ti, wi in zip(seg.t_start + span * t, w):
            form = omega_contraction(h, seg.field(float(ti)), orientation)
            total += wi * span * period(form, refined, check_closed=False).periods
    return CohClass(total)


def _geodesic_primitive_integral(p: np.ndarray, q: np.ndarray, nodes: int) -> np.ndarray:
    """Integral of dx/y along the geodesic segments [p, q]."""
    frames, length = geodesic_frames(p, q)
    t, w = gauss_legendre(nodes)
    zeta = 1j * np.exp(length[:, None] * t[None, :])
    pts = mobius(frames[:, None], zeta)
    vel = mobius_derivative(frames[:, None], zeta) * zeta * length[:, None]
    return (vel.real / pts.imag) @ w


def map_flux(f: SurfaceMap, loops: LoopBasis, arcs: int = FLUX_ARCS, nodes: int = 8) -> CohClass:
    """Flux of a map close to the identity, as the area swept by each loop.

    The loop arc x0 -> g x0 is pushed to its image along geodesics and the
    swept area is evaluated through the primitive dx/y of Omega_h; the
    side contributions are kept explicitly because dx/y is not invariant.
    """
    t, w = gauss_legendre(nodes)
    out = []
    for loop in loop_refine(loops, arcs):
        lo, hi = loop.breaks[:-1], loop.breaks[1:]
        s = (lo[:, None] + (hi - lo)[:, None] * t[None, :]).ravel()
        ws = ((hi - lo)[:, None] * w[None, :]).ravel()
        base = loop.points(s)
        vel = loop.velocities(s)
        img, jac = f.apply(base)
        img_vel = jac @ np.stack([vel.real, vel.imag], axis=-1)[..., None]
        moved = float(np.sum(ws * img_vel[:, 0, 0] / img.imag))
        fixed = float(np.sum(ws * vel.real / base.imag))
        ends = np.array([loop.start, loop.end])
        ends_img = f.apply(ends)[0]
        sides = _geodesic_primitive_integral(ends, ends_img, 16)
        out.append(sides[0] + moved - sides[1] - fixed)
    return CohClass(np.array(out))
