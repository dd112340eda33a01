"""Steady Stokes flow with Taylor-Hood (P2 velocity / P1 pressure) elements.

Boundary conditions, with dimensionless viscosity 1:

* INLET: ``u = (inlet_normal_speed, 0)`` (normal inflow, no tangential velocity)
* SURFACE: no-slip ``u = 0``
* SYMMETRY: ``u . n = 0``; the walls are horizontal so this pins ``u2``.
  Zero tangential stress is natural.
* OUTLET: do-nothing traction ``grad(u) n - p n = -outlet_pressure n``.

The global unknown ordering is ``[u1 (P2), u2 (P2), p (P1)]``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _fem
from .exceptions import FormatError, LinearSolveError, MeshMismatchError, SingularSystemError
from .geometry import Mesh, Tag

__all__ = [
    "FlowBCs",
    "TaylorHoodSpace",
    "SaddlePointSystem",
    "FlowField",
    "assemble_stokes",
    "solve_stokes",
    "flux_through",
    "sample_along_line",
    "sample_scalar_along_line",
    "midline_table",
    "write_flow",
    "read_flow",
]


@dataclass(frozen=True)
class FlowBCs:
    inlet_normal_speed: float = 1.0
    outlet_pressure: float = 0.0

    def __post_init__(self):
        if not self.inlet_normal_speed > 0:
            raise ValueError("inlet_normal_speed must be positive")


class TaylorHoodSpace:
    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.dofmap = _fem.p2_dofmap(mesh)
        self.n_velocity = mesh.n_vertices + mesh.n_edges  # per component
        self.n_pressure = mesh.n_vertices

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_velocity + self.n_pressure

    def dof_coordinates(self) -> np.ndarray:
        m = self.mesh
        mid = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
        return np.vstack([m.vertices, mid])

    def facet_dofs(self, tag: Tag) -> np.ndarray:
        """Scalar P2 dofs lying on facets with the given tag."""
        m = self.mesh
        sel = m.facet_labels == int(tag)
        return np.unique(np.concatenate([m.facets[sel].ravel(), m.n_vertices + m.facet_edges[sel]]))


@dataclass
class SaddlePointSystem:
    space: TaylorHoodSpace
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray
    velocity_block: sp.csr_matrix
    divergence: sp.csr_matrix  # (n_pressure, 2 * n_velocity), rows are b(., q_i)

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.space.n_dofs, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)


def _local_blocks(mesh: Mesh):
    area, glam = _fem.geometry(mesh.vertices, mesh.triangles)
    G = _fem.p2_gradients(_fem.QUAD_BARY, glam)  # (nt, nq, 6, 2)
    wq = _fem.QUAD_W[None, :] * area[:, None]  # (nt, nq)
    A = np.einsum("eq,eqid,eqjd->eij", wq, G, G)
    psi = _fem.QUAD_BARY  # P1 values at quadrature points (nq, 3)
    Bx = np.einsum("eq,qk,eqj->ekj", wq, psi, G[..., 0])
    By = np.einsum("eq,qk,eqj->ekj", wq, psi, G[..., 1])
    return A, Bx, By


def assemble_stokes(mesh: Mesh, bcs: FlowBCs = FlowBCs()) -> SaddlePointSystem:
    for tag in Tag:
        if tag is Tag.SURFACE:
            continue
        if not np.any(mesh.facet_labels == int(tag)):
            if tag is Tag.OUTLET:
                raise SingularSystemError("no OUTLET facets: pressure would be undetermined")
            raise SingularSystemError(f"mesh has no {tag.name} facets")
    space = TaylorHoodSpace(mesh)
    nu, npr = space.n_velocity, space.n_pressure
    dm = space.dofmap
    Ae, Bxe, Bye = _local_blocks(mesh)

    r, c = _fem.coo_pattern(dm)
    A = sp.csr_matrix((Ae.ravel(), (r, c)), shape=(nu, nu))
    pr = np.repeat(mesh.triangles, 6, axis=1).ravel()
    pc = np.tile(dm, (1, 3)).ravel()
    Bx = sp.csr_matrix((Bxe.ravel(), (pr, pc)), shape=(npr, nu))
    By = sp.csr_matrix((Bye.ravel(), (pr, pc)), shape=(npr, nu))
    B = sp.hstack([Bx, By]).tocsr()

    # a(u,v) - b(v,p) = <traction, v>;  -b(u,q) = 0 keeps the block matrix symmetric
    K = sp.bmat([[sp.block_diag([A, A]), -B.T], [-B, None]], format="csr")

    rhs = np.zeros(space.n_dofs)
    if bcs.outlet_pressure != 0.0:
        sel = mesh.facet_labels == int(Tag.OUTLET)
        f = mesh.facets[sel]
        ln = mesh.facet_lengths[sel]
        n = mesh.facet_normals[sel]
        mid = mesh.n_vertices + mesh.facet_edges[sel]
        for comp in range(2):
            off = comp * nu
            val = -bcs.outlet_pressure * n[:, comp] * ln
            np.add.at(rhs, off + f[:, 0], val / 6.0)
            np.add.at(rhs, off + f[:, 1], val / 6.0)
            np.add.at(rhs, off + mid, 2.0 * val / 3.0)

    inlet = space.facet_dofs(Tag.INLET)
    surf = space.facet_dofs(Tag.SURFACE)
    sym = space.facet_dofs(Tag.SYMMETRY)
    u1_vals = np.full(nu, np.nan)
    u2_vals = np.full(nu, np.nan)
    u2_vals[sym] = 0.0
    u1_vals[inlet] = bcs.inlet_normal_speed
    u2_vals[inlet] = 0.0
    u1_vals[surf] = 0.0
    u2_vals[surf] = 0.0
    d1 = np.flatnonzero(~np.isnan(u1_vals))
    d2 = np.flatnonzero(~np.isnan(u2_vals))
    ddofs = np.concatenate([d1, nu + d2])
    dvals = np.concatenate([u1_vals[d1], u2_vals[d2]])
    return SaddlePointSystem(space, K, rhs, ddofs, dvals, A, B)


@dataclass(eq=False)
class FlowField:
    space: TaylorHoodSpace
    u: np.ndarray  # (n_velocity, 2)
    p: np.ndarray  # (n_pressure,)
    solver_residual: float
    mesh_checksum: str = ""
    bcs: FlowBCs = field(default_factory=FlowBCs)

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    def divergence_residual(self) -> np.ndarray:
        """b(u_h, q_i) for every pressure basis function."""
        sysm = assemble_stokes(self.mesh, self.bcs)
        return sysm.divergence @ np.concatenate([self.u[:, 0], self.u[:, 1]])

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self.mesh_checksum.encode())
        h.update(np.ascontiguousarray(self.u).tobytes())
        h.update(np.ascontiguousarray(self.p).tobytes())
        return h.hexdigest()


def solve_stokes(mesh: Mesh, bcs: FlowBCs = FlowBCs()) -> FlowField:
    sysm = assemble_stokes(mesh, bcs)
    K = sysm.matrix
    free = sysm.free_dofs
    x = np.zeros(sysm.space.n_dofs)
    x[sysm.dirichlet_dofs] = sysm.dirichlet_values
    Kf = K[free][:, free].tocsc()
    b = sysm.rhs[free] - K[free][:, sysm.dirichlet_dofs] @ sysm.dirichlet_values
    try:
        lu = spla.splu(Kf, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise LinearSolveError(f"factorization failed: {exc}") from exc
    xf = lu.solve(b)
    scale = max(np.linalg.norm(b), 1e-300)
    res = np.linalg.norm(Kf @ xf - b) / scale
    for _ in range(3):
        if res <= 1e-12:
            break
        xf += lu.solve(b - Kf @ xf)
        res = np.linalg.norm(Kf @ xf - b) / scale
    if not np.isfinite(res) or res > 1e-10:
        raise LinearSolveError(f"Stokes solve residual {res:.3e} exceeds 1e-10", residual=res)
    x[free] = xf
    nu = sysm.space.n_velocity
    u = np.column_stack([x[:nu], x[nu : 2 * nu]])
    p = x[2 * nu :].copy()
    return FlowField(sysm.space, u, p, float(res), mesh.checksum(), bcs)


def flux_through(field: FlowField, tag: Tag) -> float:
    """Signed flux of u . n over facets with ``tag`` (Simpson rule, exact for P2)."""
    m = field.mesh
    sel = m.facet_labels == int(tag)
    f = m.facets[sel]
    n = m.facet_normals[sel]
    ln = m.facet_lengths[sel]
    un = lambda dof: np.einsum("ij,ij->i", field.u[dof], n)  # noqa: E731
    mid = m.n_vertices + m.facet_edges[sel]
    return float(np.sum(ln / 6.0 * (un(f[:, 0]) + 4.0 * un(mid) + un(f[:, 1]))))


def _line_points(mesh: Mesh, x2, n_samples):
    x = mesh.vertices[:, 0]
    x1 = np.linspace(x.min(), x.max(), n_samples)
    return x1, np.column_stack([x1, np.full(n_samples, float(x2))])


def sample_scalar_along_line(mesh: Mesh, values, x2=None, n_samples=701, degree=1):
    """Interpolate a P1 (or P2) scalar on the horizontal line ``x2``.

    Returns ``(x1, vals)``; samples outside the mesh are NaN.
    """
    if x2 is None:
        x2 = 0.5 * (mesh.vertices[:, 1].min() + mesh.vertices[:, 1].max())
    x1, pts = _line_points(mesh, x2, n_samples)
    tri, lam = _fem.PointLocator(mesh.vertices, mesh.triangles).locate(pts)
    out = np.full(n_samples, np.nan)
    ok = tri >= 0
    values = np.asarray(values)
    if degree == 1:
        out[ok] = np.einsum("ij,ij->i", lam[ok], values[mesh.triangles[tri[ok]]])
    else:
        dm = _fem.p2_dofmap(mesh)
        out[ok] = np.einsum("ij,ij->i", _fem.p2_values(lam[ok]), values[dm[tri[ok]]])
    return x1, out


def sample_along_line(field: FlowField, x2=None, n_samples=701):
    """Table with columns x1, u1, u2, p along a horizontal line (NaN where absent)."""
    m = field.mesh
    if x2 is None:
        x2 = 0.5 * (m.vertices[:, 1].min() + m.vertices[:, 1].max())
    x1, pts = _line_points(m, x2, n_samples)
    tri, lam = _fem.PointLocator(m.vertices, m.triangles).locate(pts)
    ok = tri >= 0
    table = np.full((n_samples, 4), np.nan)
    table[:, 0] = x1
    phi = _fem.p2_values(lam[ok])
    dofs = field.space.dofmap[tri[ok]]
    table[ok, 1] = np.einsum("ij,ij->i", phi, field.u[dofs, 0])
    table[ok, 2] = np.einsum("ij,ij->i", phi, field.u[dofs, 1])
    table[ok, 3] = np.einsum("ij,ij->i", lam[ok], field.p[m.triangles[tri[ok]]])
    return table


midline_table = sample_along_line


def write_flow(field: FlowField, path) -> None:
    fmt = lambda v: format(float(v), ".17g")  # noqa: E731
    lines = [
        "FLOWFIELD 1",
        f"MESH_CHECKSUM {field.mesh_checksum}",
        f"BCS {fmt(field.bcs.inlet_normal_speed)} {fmt(field.bcs.outlet_pressure)}",
        f"SOLVER_RESIDUAL {fmt(field.solver_residual)}",
        f"VELOCITY {len(field.u)}",
    ]
    lines += [f"{fmt(a)} {fmt(b)}" for a, b in field.u]
    lines.append(f"PRESSURE {len(field.p)}")
    lines += [fmt(v) for v in field.p]
    lines.append("END")
    Path(path).write_text("\n".join(lines) + "\n")


def read_flow(path, mesh: Mesh) -> FlowField:
    """Read a flow dump; the header checksum must match ``mesh``."""
    lines = Path(path).read_text().splitlines()
    try:
        if lines[0] != "FLOWFIELD 1":
            raise FormatError("missing FLOWFIELD header")
        checksum = lines[1].split()[1]
        _, s, pbar = lines[2].split()
        res = float(lines[3].split()[1])
        nu = int(lines[4].split()[1])
        u = np.array([[float(a) for a in ln.split()] for ln in lines[5 : 5 + nu]]).reshape(-1, 2)
        pos = 5 + nu
        npr = int(lines[pos].split()[1])
        p = np.array([float(v) for v in lines[pos + 1 : pos + 1 + npr]])
        if lines[pos + 1 + npr] != "END":
            raise FormatError("missing END marker")
    except (IndexError, ValueError) as exc:
        raise FormatError(f"malformed flow file: {exc}") from None

    if checksum != mesh.checksum():
        raise MeshMismatchError("flow file was computed on a different mesh")
    space = TaylorHoodSpace(mesh)
    if len(u) != space.n_velocity or len(p) != space.n_pressure:
        raise FormatError("dof counts do not match the mesh")
    return FlowField(space, u, p, res, checksum, FlowBCs(float(s), float(pbar)))
