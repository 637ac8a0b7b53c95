#!/usr/bin/env python
"""
Triangulated octagon with identified sides and discrete exterior calculus.

The mesh lives in the Klein model, where the octagon is a Euclidean
polygon and the side pairings restrict to affine maps of the sides
(t -> 1 - t), so a uniform lattice on each of the 8 sectors
(origin, vertex k, vertex k+1) glues into a triangulation of the closed
surface. Cotangent weights are taken in the conformal Poincare chart.

One-forms are cochains on the quotient edges; they are evaluated by
Whitney interpolation in Klein coordinates and integrated exactly along
geodesics, which are straight lines there.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from src.calculus.fields import CohClass, EquivField, FieldKind, transform_values, real_jacobians
from src.errors import ConsistencyError, SolverError
from src.geometry.fuchsian import (
    CIRCUMRADIUS,
    INRADIUS,
    PAIRING,
    FuchsianGroup,
    FundamentalDomain,
    reduce_points,
)
from src.geometry.lie2 import complex_to_real_jacobian, disc_to_half_plane, half_plane_to_disc, mobius

logger = logging.getLogger(__name__)

DEFAULT_MESH_N = 50
KLEIN_VERTEX = math.tanh(CIRCUMRADIUS)
KLEIN_SIDE = math.tanh(INRADIUS)
LOOP_PERIOD_INDEX = {0: 0, 1: 1, 4: 2, 5: 3}


def klein_to_disc(k: np.ndarray) -> np.ndarray:
    r2 = np.sum(k * k, axis=-1)
    scale = 1.0 / (1.0 + np.sqrt(np.maximum(1.0 - r2, 0.0)))
    return (k[..., 0] + 1j * k[..., 1]) * scale


def disc_to_klein(w: np.ndarray) -> np.ndarray:
    factor = 2.0 / (1.0 + np.abs(w) ** 2)
    return np.stack([w.real * factor, w.imag * factor], axis=-1)


def klein_chart_jacobian(z: np.ndarray) -> np.ndarray:
    """d(Klein coordinates)/d(x, y) at half-plane points z."""
    w = half_plane_to_disc(z)
    r2 = np.abs(w) ** 2
    wv = np.stack([w.real, w.imag], axis=-1)
    dk = (2.0 / (1.0 + r2))[..., None, None] * np.eye(2) - (4.0 / (1.0 + r2) ** 2)[..., None, None] * (
        wv[..., :, None] * wv[..., None, :]
    )
    dw = complex_to_real_jacobian(2j / (z + 1j) ** 2)
    return dk @ dw


@dataclass(frozen=True, eq=False)
class OctagonMesh:
    """Sector lattice triangulation of the octagon, sides glued.

    Raw vertices carry Klein positions; `vclass` maps them to vertices of
    the closed surface. Edges and faces are indexed on the quotient.
    """
    n: int
    klein: np.ndarray
    vclass: np.ndarray
    n_classes: int
    triangles: np.ndarray
    edges: np.ndarray
    edge_raw: np.ndarray
    face_edges: np.ndarray
    face_signs: np.ndarray
    d0: sp.csr_matrix
    d1: sp.csr_matrix
    star1: np.ndarray
    grads: np.ndarray
    lookup_up: np.ndarray
    lookup_down: np.ndarray
    side_vertices: np.ndarray

    @property
    def euler_characteristic(self) -> int:
        return self.n_classes - self.edges.shape[0] + self.triangles.shape[0]

    def locate(self, k: np.ndarray) -> np.ndarray:
        """Triangle index of Klein points inside the octagon."""
        ang = np.mod(np.arctan2(k[..., 1], k[..., 0]) + math.pi / 8, 2 * math.pi)
        sector = np.minimum((ang // (math.pi / 4)).astype(int), 7)
        a = _corner(sector)
        b = _corner(sector + 1)
        det = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
        i = self.n * (k[..., 0] * b[..., 1] - k[..., 1] * b[..., 0]) / det
        j = self.n * (a[..., 0] * k[..., 1] - a[..., 1] * k[..., 0]) / det
        i = np.clip(i, 0.0, self.n)
        j = np.clip(j, 0.0, self.n)
        over = i + j > self.n
        excess = np.where(over, (i + j - self.n) / 2.0, 0.0)
        i, j = i - excess, j - excess
        i0 = np.clip(np.floor(i).astype(int), 0, self.n - 1)
        j0 = np.clip(np.floor(j).astype(int), 0, self.n - 1)
        i0 = np.where(i0 + j0 > self.n - 1, self.n - 1 - j0, i0)
        up = (i - i0) + (j - j0) <= 1.0
        up = up | (i0 + j0 == self.n - 1)
        return np.where(up, self.lookup_up[sector, i0, j0], self.lookup_down[sector, i0, j0])


def _corner(k: np.ndarray | int) -> np.ndarray:
    ang = (2 * np.asarray(k) - 1) * math.pi / 8
    return KLEIN_VERTEX * np.stack([np.cos(ang), np.sin(ang)], axis=-1)


@lru_cache(maxsize=4)
def build_octagon_mesh(n: int = DEFAULT_MESH_N) -> OctagonMesh:
    if n < 3:
        raise ValueError("mesh resolution must be >= 3")
    index: Dict[Tuple[float, float], int] = {}
    positions: List[np.ndarray] = []

    def vertex(p: np.ndarray) -> int:
        key = (round(float(p[0]), 11), round(float(p[1]), 11))
        if key not in index:
            index[key] = len(positions)
            positions.append(p)
        return index[key]

    lattice = np.full((8, n + 1, n + 1), -1, dtype=int)
    for k in range(8):
        a, b = _corner(k), _corner(k + 1)
        for i in range(n + 1):
            for j in range(n + 1 - i):
                lattice[k, i, j] = vertex((i * a + j * b) / n)

    tris: List[Tuple[int, int, int]] = []
    lookup_up = np.full((8, n, n), -1, dtype=int)
    lookup_down = np.full((8, n, n), -1, dtype=int)
    for k in range(8):
        for i in range(n):
            for j in range(n - i):
                lookup_up[k, i, j] = len(tris)
                tris.append((lattice[k, i, j], lattice[k, i + 1, j], lattice[k, i, j + 1]))
                if i + j <= n - 2:
                    lookup_down[k, i, j] = len(tris)
                    tris.append((lattice[k, i + 1, j], lattice[k, i + 1, j + 1], lattice[k, i, j + 1]))
    triangles = np.array(tris, dtype=int)
    klein = np.array(positions)

    # side k point at parameter t = j/n from vertex k is lattice[k, n - j, j]
    side_vertices = np.array([[lattice[k, n - j, j] for j in range(n + 1)] for k in range(8)])
    parent = np.arange(len(positions))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k in range(8):
        p = PAIRING[k]
        for j in range(n + 1):
            ra, rb = find(side_vertices[p, j]), find(side_vertices[k, n - j])
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(v) for v in range(len(positions))])
    _, vclass = np.unique(roots, return_inverse=True)
    n_classes = int(vclass.max()) + 1

    edge_index: Dict[Tuple[int, int], int] = {}
    edge_list: List[Tuple[int, int]] = []
    edge_raw: List[Tuple[int, int]] = []
    face_edges = np.zeros((len(triangles), 3), dtype=int)
    face_signs = np.zeros((len(triangles), 3))
    for f, tri in enumerate(triangles):
        for c in range(3):
            u, v = tri[c], tri[(c + 1) % 3]
            cu, cv = vclass[u], vclass[v]
            if cu == cv:
                raise ConsistencyError(f"degenerate quotient edge at face {f}")
            key = (min(cu, cv), max(cu, cv))
            if key not in edge_index:
                edge_index[key] = len(edge_list)
                edge_list.append(key)
                edge_raw.append((u, v) if cu < cv else (v, u))
            face_edges[f, c] = edge_index[key]
            face_signs[f, c] = 1.0 if cu < cv else -1.0
    edges = np.array(edge_list, dtype=int)
    n_edges = len(edges)

    rows = np.repeat(np.arange(n_edges), 2)
    cols = edges.ravel()
    vals = np.tile([-1.0, 1.0], n_edges)
    d0 = sp.csr_matrix((vals, (rows, cols)), shape=(n_edges, n_classes))
    d1 = sp.csr_matrix(
        (face_signs.ravel(), (np.repeat(np.arange(len(triangles)), 3), face_edges.ravel())),
        shape=(len(triangles), n_edges),
    )
    if abs(d1 @ d0).max() > 0:
        raise ConsistencyError("d1 d0 != 0 on the octagon mesh")

    disc = klein_to_disc(klein)
    pos = np.stack([disc.real, disc.imag], axis=-1)
    star1 = np.zeros(n_edges)
    for c in range(3):
        p0 = pos[triangles[:, c]]
        u = pos[triangles[:, (c + 1) % 3]] - p0
        v = pos[triangles[:, (c + 2) % 3]] - p0
        cross = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        cot = np.sum(u * v, axis=1) / cross
        # the angle at corner c is opposite the edge (c+1, c+2)
        np.add.at(star1, face_edges[:, (c + 1) % 3], 0.5 * cot)

    p0, p1, p2 = klein[triangles[:, 0]], klein[triangles[:, 1]], klein[triangles[:, 2]]
    t_mat = np.stack([p1 - p0, p2 - p0], axis=-1)
    inv = np.linalg.inv(t_mat)
    g1, g2 = inv[:, 0, :], inv[:, 1, :]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)

    mesh = OctagonMesh(
        n=n,
        klein=klein,
        vclass=vclass,
        n_classes=n_classes,
        triangles=triangles,
        edges=edges,
        edge_raw=np.array(edge_raw, dtype=int),
        face_edges=face_edges,
        face_signs=face_signs,
        d0=d0,
        d1=d1,
        star1=star1,
        grads=grads,
        lookup_up=lookup_up,
        lookup_down=lookup_down,
        side_vertices=side_vertices,
    )
    chi = mesh.euler_characteristic
    if chi != -2:
        raise ConsistencyError(f"mesh Euler characteristic {chi}, expected -2")
    logger.info("octagon mesh n=%d: %d vertices, %d edges, %d faces", n, n_classes, n_edges, len(triangles))
    return mesh


def closed_cochain(mesh: OctagonMesh, target: CohClass) -> np.ndarray:
    """A closed cochain with the given loop periods.

    Built from a function F on raw vertices that is 0 inside and jumps by
    c_k across side k, where c_k is the period attached to generator k.
    """
    jumps = np.zeros(8)
    for k, idx in LOOP_PERIOD_INDEX.items():
        jumps[k] = target.periods[idx]
        jumps[PAIRING[k]] = -target.periods[idx]

    corner = np.full(8, np.nan)
    corner[0] = 0.0
    relations = []
    for k in range(8):
        p = PAIRING[k]
        relations.append(((k + 1) % 8, p, jumps[k]))
        relations.append((k, (p + 1) % 8, jumps[k]))
    for _ in range(8):
        for dst, src, c in relations:
            if np.isnan(corner[dst]) and not np.isnan(corner[src]):
                corner[dst] = corner[src] + c
            elif np.isnan(corner[src]) and not np.isnan(corner[dst]):
                corner[src] = corner[dst] - c
    for dst, src, c in relations:
        if abs(corner[dst] - corner[src] - c) > 1e-9:
            raise ConsistencyError("corner jumps are inconsistent with the surface relation")

    n = mesh.n
    F = np.zeros(mesh.klein.shape[0])
    for k in (0, 1, 4, 5):
        p = PAIRING[k]
        for j in range(1, n):
            F[mesh.side_vertices[p, j]] = 0.0
            F[mesh.side_vertices[k, n - j]] = jumps[k]
    for k in range(8):
        F[mesh.side_vertices[k, 0]] = corner[k]
    tail, head = mesh.edge_raw[:, 0], mesh.edge_raw[:, 1]
    return F[head] - F[tail]


def harmonic_projection(mesh: OctagonMesh, a0: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """a0 - d0 u with u minimizing the star1-weighted norm (co-closed part)."""
    w = sp.diags(mesh.star1)
    lap = (mesh.d0.T @ w @ mesh.d0).tocsr()
    rhs = mesh.d0.T @ (mesh.star1 * a0)
    if not np.any(rhs):
        return a0.copy()
    keep = np.arange(1, mesh.n_classes)
    lap_r = lap[keep][:, keep]
    rhs_r = rhs[keep]
    diag = lap_r.diagonal()
    precond = sp.diags(1.0 / diag)
    u_r, info = cg(lap_r, rhs_r, rtol=rtol, maxiter=20 * mesh.n_classes, M=precond)
    residual = float(np.linalg.norm(lap_r @ u_r - rhs_r) / max(np.linalg.norm(rhs_r), 1e-300))
    if info != 0:
        raise SolverError(f"harmonic projection did not converge (info={info})", residual)
    u = np.zeros(mesh.n_classes)
    u[keep] = u_r
    logger.debug("harmonic projection residual %.2e", residual)
    return a0 - mesh.d0 @ u


@dataclass(frozen=True, eq=False)
class MeshOneForm(EquivField):
    """Whitney one-form of a cochain on the octagon mesh, extended equivariantly."""
    kind: FieldKind = FieldKind.ONE_FORM
    mesh: Optional[OctagonMesh] = None
    cochain: Optional[np.ndarray] = None
    group: Optional[FuchsianGroup] = None

    def klein_values(self, k: np.ndarray) -> np.ndarray:
        """Whitney form in Klein components at Klein points inside the octagon."""
        mesh = self.mesh
        tri = mesh.locate(k)
        verts = mesh.klein[mesh.triangles[tri]]
        grads = mesh.grads[tri]
        rel = k - verts[:, 0]
        lam12 = np.einsum("fij,fj->fi", np.stack([grads[:, 1], grads[:, 2]], axis=1), rel)
        lam = np.stack([1.0 - lam12.sum(axis=1), lam12[:, 0], lam12[:, 1]], axis=1)
        vals = self.cochain[mesh.face_edges[tri]] * mesh.face_signs[tri]
        out = np.zeros(k.shape)
        for c in range(3):
            p, q = c, (c + 1) % 3
            out += vals[:, c, None] * (lam[:, p, None] * grads[:, q] - lam[:, q, None] * grads[:, p])
        return out

    def local_values(self, z0: np.ndarray) -> np.ndarray:
        k = disc_to_klein(half_plane_to_disc(z0))
        return np.einsum("...i,...ij->...j", self.klein_values(k), klein_chart_jacobian(z0))

    def exterior_residual(self) -> float:
        return float(np.abs(self.mesh.d1 @ self.cochain).max()) if self.cochain.size else 0.0

    def coclosed_residual(self) -> float:
        return float(np.abs(self.mesh.d0.T @ (self.mesh.star1 * self.cochain)).max())

    def _integrate_klein(self, a: np.ndarray, b: np.ndarray) -> float:
        """Exact integral along the straight Klein segment [a, b] inside the octagon."""
        n = self.mesh.n
        ts = [np.array([0.0, 1.0])]
        for sector in range(8):
            ca, cb = _corner(sector), _corner(sector + 1)
            det = ca[0] * cb[1] - ca[1] * cb[0]
            coords = []
            for p in (a, b):
                coords.append(
                    np.array(
                        [
                            n * (p[0] * cb[1] - p[1] * cb[0]) / det,
                            n * (ca[0] * p[1] - ca[1] * p[0]) / det,
                        ]
                    )
                )
            c0, c1 = coords
            for fam0, fam1 in ((c0[0], c1[0]), (c0[1], c1[1]), (c0.sum(), c1.sum())):
                if abs(fam1 - fam0) < 1e-15:
                    continue
                lo, hi = sorted((fam0, fam1))
                levels = np.arange(math.ceil(lo), math.floor(hi) + 1)
                t = (levels - fam0) / (fam1 - fam0)
                ts.append(t[(t > 0) & (t < 1)])
        t = np.unique(np.concatenate(ts))
        mids = 0.5 * (t[1:] + t[:-1])
        pts = a[None, :] + mids[:, None] * (b - a)[None, :]
        vals = self.klein_values(pts)
        return float(np.sum(np.diff(t) * (vals @ (b - a))))

    def integrate_geodesic(self, p: complex, q: complex, max_crossings: int = 64) -> float:
        """Exact integral along the hyperbolic geodesic from p to q."""
        z0, g = reduce_points(np.array([p]), self.group)
        g_inv = np.linalg.inv(g[0])
        start = disc_to_klein(half_plane_to_disc(z0))[0]
        end = disc_to_klein(half_plane_to_disc(mobius(g_inv, np.array([q]))))[0]
        normals = np.stack([np.cos(np.arange(8) * math.pi / 4), np.sin(np.arange(8) * math.pi / 4)], axis=-1)
        total = 0.0
        for _ in range(max_crossings):
            direction = end - start
            rate = normals @ direction
            slack = KLEIN_SIDE - normals @ start
            exits = np.where(rate > 1e-15, slack / np.where(rate > 1e-15, rate, 1.0), np.inf)
            side = int(np.argmin(exits))
            t_exit = exits[side]
            if t_exit >= 1.0:
                return total + self._integrate_klein(start, end)
            cross = start + t_exit * direction
            total += self._integrate_klein(start, cross)
            back = np.linalg.inv(self.group.matrices[side])
            start = _klein_apply(back, cross)
            end = _klein_apply(back, end)
        raise ConsistencyError("geodesic integration crossed too many sides")

    def export_csv(self, path: Path) -> None:
        """Triangle barycentres (half-plane) and form components."""
        mesh = self.mesh
        bary = mesh.klein[mesh.triangles].mean(axis=1)
        z = disc_to_half_plane(klein_to_disc(bary))
        vals = self.local_values(z)
        write_csv(path, ["x", "y", "alpha_x", "alpha_y"], np.column_stack([z.real, z.imag, vals]))


def _klein_apply(m: np.ndarray, k: np.ndarray) -> np.ndarray:
    z = disc_to_half_plane(klein_to_disc(k))
    return disc_to_klein(half_plane_to_disc(mobius(m, z)))


def mesh_one_form(mesh: OctagonMesh, cochain: np.ndarray, group: FuchsianGroup, name: str = "alpha") -> MeshOneForm:
    holder: Dict[str, MeshOneForm] = {}

    def value(z: np.ndarray) -> np.ndarray:
        z0, g = reduce_points(z, group)
        local = holder["form"].local_values(z0)
        return transform_values(FieldKind.ONE_FORM, local, real_jacobians(g, z0))

    form = MeshOneForm(fn=value, name=name, mesh=mesh, cochain=cochain, group=group, step=1e-6)
    holder["form"] = form
    return form


def harmonic_oneform(
    target: CohClass,
    group: FuchsianGroup,
    domain: FundamentalDomain,
    mesh_n: int = DEFAULT_MESH_N,
) -> MeshOneForm:
    """Discrete harmonic representative of the class with the given loop periods."""
    mesh = build_octagon_mesh(mesh_n)
    a0 = closed_cochain(mesh, target)
    a = harmonic_projection(mesh, a0)
    return mesh_one_form(mesh, a, group, name="harmonic")


def write_csv(path: Path, header: List[str], rows: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in np.atleast_2d(rows):
            writer.writerow([repr(float(v)) for v in row])


def export_field_csv(field: EquivField, z: np.ndarray, path: Path) -> None:
    """Snapshot of a field at points z: x, y, then flattened value components."""
    z = np.asarray(z, dtype=complex).ravel()
    vals = np.asarray(field(z)).reshape(z.size, -1)
    header = ["x", "y"] + [f"v{i}" for i in range(vals.shape[1])]
    write_csv(path, header, np.column_stack([z.real, z.imag, vals]))
