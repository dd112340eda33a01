"""Channel geometry with wall-attached half-disk obstacles and its triangulation.

The fluid domain is the rectangle ``[0, length] x [0, height]`` with half-disks
cut out of the bottom and top walls in alternation. The outline is a single
counter-clockwise polygon, so no hole markers are needed when meshing.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path

import numpy as np
import triangle

from .exceptions import FormatError, MeshQualityError, OutOfDomainError, OverlapError

__all__ = [
    "Tag",
    "GeometryConfig",
    "PlanarDomain",
    "Mesh",
    "RefinementLadder",
    "build_geometry",
    "min_obstacle_gap",
    "triangulate",
    "refine",
    "build_ladder",
    "write_mesh",
    "read_mesh",
    "mesh_to_text",
]

MIN_ANGLE_DEG = 15.0
# angle handed to the quality mesher; comfortably above the acceptance floor
_TRIANGLE_QUALITY_DEG = 28.0


class Tag(IntEnum):
    INLET = 1
    OUTLET = 2
    SYMMETRY = 3
    SURFACE = 4


@dataclass(frozen=True)
class GeometryConfig:
    length: float = 17.5
    height: float = 1.0
    obstacle_radius: float = 0.4
    obstacle_pitch: float = 1.5
    obstacle_count: int = 10
    first_center_x1: float = 2.0
    boundary_arc_segments: int = 48
    first_wall: str = "bottom"

    def obstacle_centers(self) -> np.ndarray:
        """Centers of the half-disks, alternating between the two walls."""
        k = np.arange(self.obstacle_count)
        x = self.first_center_x1 + k * self.obstacle_pitch
        on_first = k % 2 == 0
        first_y, other_y = (0.0, self.height) if self.first_wall == "bottom" else (self.height, 0.0)
        y = np.where(on_first, first_y, other_y)
        return np.column_stack([x, y]).astype(float)

    def validate(self) -> None:
        if not (self.length > 0 and self.height > 0):
            raise OverlapError("length and height must be positive")
        if self.obstacle_count < 0:
            raise OverlapError("obstacle_count must be non-negative")
        if self.first_wall not in ("bottom", "top"):
            raise OverlapError(f"first_wall must be 'bottom' or 'top', got {self.first_wall!r}")
        if self.obstacle_count == 0:
            return
        r = self.obstacle_radius
        if not r > 0:
            raise OverlapError("obstacle_radius must be positive")
        if not self.obstacle_pitch > 0:
            raise OverlapError("obstacle_pitch must be positive")
        if self.boundary_arc_segments < 2:
            raise OverlapError("boundary_arc_segments must be >= 2")
        if r >= self.height:
            raise OverlapError(
                f"obstacle_radius {r} reaches the opposite wall (height {self.height})"
            )
        gap = min_obstacle_gap(self)
        if gap <= 0:
            raise OverlapError(f"adjacent obstacles intersect (gap {gap:.6g})")
        cx = self.obstacle_centers()[:, 0]
        if cx.min() - r <= 0 or cx.max() + r >= self.length:
            raise OutOfDomainError("an obstacle extends past the inlet or outlet")

    @property
    def area(self) -> float:
        """Exact fluid area (circular arcs, not chords)."""
        return self.length * self.height - self.obstacle_count * 0.5 * math.pi * self.obstacle_radius**2


def min_obstacle_gap(config: GeometryConfig) -> float:
    """Smallest distance between two obstacle surfaces (inf with < 2 obstacles)."""
    c = config.obstacle_centers()
    if len(c) < 2:
        return math.inf
    d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min() - 2.0 * config.obstacle_radius)


@dataclass(eq=False)
class PlanarDomain:
    """Closed CCW polygon; segment ``i`` joins vertex ``i`` to ``i + 1`` (cyclic)."""

    vertices: np.ndarray
    labels: np.ndarray
    circle_ids: np.ndarray  # -1 for straight segments
    circles: np.ndarray  # (k, 3): cx, cy, r
    config: GeometryConfig

    @property
    def segments(self) -> np.ndarray:
        n = len(self.vertices)
        i = np.arange(n)
        return np.column_stack([i, (i + 1) % n])

    @property
    def n_arcs(self) -> int:
        return len(self.circles)

    def signed_area(self) -> float:
        x, y = self.vertices.T
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def turning_number(self) -> int:
        """Total turning of the tangent divided by 2*pi; +1 for a simple CCW outline."""
        d = np.roll(self.vertices, -1, axis=0) - self.vertices
        ang = np.arctan2(d[:, 1], d[:, 0])
        turn = np.angle(np.exp(1j * (np.roll(ang, -1) - ang)))
        return int(round(turn.sum() / (2 * math.pi)))

    def label_length(self, tag: Tag) -> float:
        d = np.roll(self.vertices, -1, axis=0) - self.vertices
        return float(np.linalg.norm(d[self.labels == tag], axis=1).sum())


def build_geometry(config: GeometryConfig) -> PlanarDomain:
    config.validate()
    L, H, r = config.length, config.height, config.obstacle_radius
    n_arc = config.boundary_arc_segments
    centers = config.obstacle_centers()
    pts: list[tuple[float, float]] = []
    labels: list[int] = []
    cids: list[int] = []

    def add(p, label, cid=-1):
        # segment starting at p
        pts.append((float(p[0]), float(p[1])))
        labels.append(int(label))
        cids.append(cid)

    circles = []
    bottom = [i for i in np.argsort(centers[:, 0], kind="stable") if centers[i, 1] == 0.0]
    top = [i for i in np.argsort(-centers[:, 0], kind="stable") if centers[i, 1] != 0.0]

    add((0.0, 0.0), Tag.SYMMETRY)
    for i in bottom:
        cx = centers[i, 0]
        cid = len(circles)
        circles.append((cx, 0.0, r))
        add((cx - r, 0.0), Tag.SURFACE, cid)
        for th in np.linspace(math.pi, 0.0, n_arc + 1)[1:-1]:
            add((cx + r * math.cos(th), r * math.sin(th)), Tag.SURFACE, cid)
        add((cx + r, 0.0), Tag.SYMMETRY)
    add((L, 0.0), Tag.OUTLET)
    add((L, H), Tag.SYMMETRY)
    for i in top:
        cx = centers[i, 0]
        cid = len(circles)
        circles.append((cx, H, r))
        add((cx + r, H), Tag.SURFACE, cid)
        for th in np.linspace(0.0, -math.pi, n_arc + 1)[1:-1]:
            add((cx + r * math.cos(th), H + r * math.sin(th)), Tag.SURFACE, cid)
        add((cx - r, H), Tag.SYMMETRY)
    add((0.0, H), Tag.INLET)

    return PlanarDomain(
        vertices=np.array(pts, dtype=float),
        labels=np.array(labels, dtype=np.int8),
        circle_ids=np.array(cids, dtype=np.int64),
        circles=np.array(circles, dtype=float).reshape(-1, 3),
        config=config,
    )


@dataclass(eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    facets: np.ndarray
    facet_labels: np.ndarray
    h_target: float
    circles: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.facets = np.ascontiguousarray(self.facets, dtype=np.int64).reshape(-1, 2)
        self.facet_labels = np.ascontiguousarray(self.facet_labels, dtype=np.int8)
        self.circles = np.asarray(self.circles, dtype=float).reshape(-1, 3)
        self.h_target = float(self.h_target)

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            self.h_target == other.h_target
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.facets, other.facets)
            and np.array_equal(self.facet_labels, other.facet_labels)
            and np.array_equal(self.circles, other.circles)
        )

    __hash__ = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def facet_tags(self) -> dict[tuple[int, int], Tag]:
        return {
            (int(min(a, b)), int(max(a, b))): Tag(int(t))
            for (a, b), t in zip(self.facets, self.facet_labels)
        }

    @cached_property
    def _edge_data(self):
        t = self.triangles
        local = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1).reshape(-1, 2)
        local.sort(axis=1)
        key = local[:, 0] * self.n_vertices + local[:, 1]
        uniq, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
        edges = np.column_stack([uniq // self.n_vertices, uniq % self.n_vertices])
        return edges, inverse.reshape(-1, 3), counts

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs."""
        return self._edge_data[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """Edge ids of local edges (v0,v1), (v1,v2), (v2,v0)."""
        return self._edge_data[1]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def facet_edges(self) -> np.ndarray:
        """Edge id of every boundary facet."""
        f = np.sort(self.facets, axis=1)
        key = f[:, 0] * self.n_vertices + f[:, 1]
        edges = self.edges
        ekey = edges[:, 0] * self.n_vertices + edges[:, 1]
        idx = np.searchsorted(ekey, key)
        idx = np.minimum(idx, len(ekey) - 1)
        if not np.array_equal(ekey[idx], key):
            raise FormatError("a tagged facet is not an edge of the triangulation")
        return idx

    @cached_property
    def facet_normals(self) -> np.ndarray:
        """Unit outward normals of the boundary facets."""
        owner = np.empty(self.n_edges, dtype=np.int64)
        owner[self.triangle_edges.ravel()] = np.repeat(np.arange(self.n_triangles), 3)
        tri = self.triangles[owner[self.facet_edges]]
        a = self.vertices[self.facets[:, 0]]
        b = self.vertices[self.facets[:, 1]]
        d = b - a
        n = np.column_stack([d[:, 1], -d[:, 0]]) / np.linalg.norm(d, axis=1, keepdims=True)
        # flip toward the side away from the owning triangle's centroid
        c = self.vertices[tri].mean(axis=1)
        s = np.sign(np.einsum("ij,ij->i", n, a - c))
        return n * s[:, None]

    @property
    def facet_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.vertices[self.facets[:, 1]] - self.vertices[self.facets[:, 0]], axis=1)

    def facets_with(self, tag: Tag) -> np.ndarray:
        return self.facets[self.facet_labels == int(tag)]

    def nodes_with(self, tag: Tag) -> np.ndarray:
        return np.unique(self.facets_with(tag))

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        a = p[:, 1] - p[:, 0]
        b = p[:, 2] - p[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def boundary_length(self, tag: Tag) -> float:
        f = self.facets_with(tag)
        return float(np.linalg.norm(self.vertices[f[:, 1]] - self.vertices[f[:, 0]], axis=1).sum())

    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    def min_angle_deg(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
        return float(np.min(angles))

    def surface_radial_error(self) -> float:
        """Max | |x - c| - r | over SURFACE facet endpoints (nearest circle)."""
        nodes = self.nodes_with(Tag.SURFACE)
        if len(nodes) == 0:
            return 0.0
        return float(np.abs(_circle_residual(self.vertices[nodes], self.circles)).max())

    def quality_report(self) -> dict:
        return {
            "vertices": self.n_vertices,
            "triangles": self.n_triangles,
            "edges": self.n_edges,
            "min_angle_deg": self.min_angle_deg(),
            "max_edge_length": float(self.edge_lengths().max()),
            "h_target": self.h_target,
            "area": self.area(),
        }

    def check(self) -> None:
        """Raise ``MeshQualityError`` if any structural invariant fails."""
        if self.n_triangles == 0:
            raise MeshQualityError("mesh has no triangles")
        if np.any(self.signed_areas() <= 0):
            raise MeshQualityError("triangle with non-positive signed area")
        edges, _, counts = self._edge_data
        if np.any(counts > 2):
            raise MeshQualityError("edge shared by more than two triangles")
        bnd = edges[counts == 1]
        bkey = set(map(tuple, bnd.tolist()))
        fkey = [tuple(sorted(f)) for f in self.facets.tolist()]
        if len(set(fkey)) != len(fkey):
            raise MeshQualityError("duplicate boundary facet")
        if set(fkey) != bkey:
            raise MeshQualityError("tagged facets do not exactly cover the boundary")
        if not set(np.unique(self.facet_labels).tolist()) <= {int(t) for t in Tag}:
            raise MeshQualityError("unknown facet label")

    def checksum(self) -> str:
        # meshes are treated as immutable once built
        if getattr(self, "_checksum", None) is None:
            self._checksum = hashlib.sha256(mesh_to_text(self).encode()).hexdigest()
        return self._checksum


@dataclass
class RefinementLadder:
    meshes: list

    def __post_init__(self):
        counts = [m.n_vertices for m in self.meshes]
        if any(b <= a for a, b in zip(counts, counts[1:])):
            raise ValueError("vertex count must strictly increase along the ladder")

    def __len__(self):
        return len(self.meshes)

    def __getitem__(self, i):
        return self.meshes[i]


def _circle_residual(points: np.ndarray, circles: np.ndarray) -> np.ndarray:
    """Signed distance of each point to its nearest circle."""
    d = np.linalg.norm(points[:, None, :] - circles[None, :, :2], axis=-1) - circles[None, :, 2]
    j = np.argmin(np.abs(d), axis=1)
    return d[np.arange(len(points)), j]


def _project_to_circles(points: np.ndarray, circles: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(points[:, None, :] - circles[None, :, :2], axis=-1) - circles[None, :, 2]
    j = np.argmin(np.abs(d), axis=1)
    c = circles[j]
    v = points - c[:, :2]
    return c[:, :2] + c[:, 2:3] * v / np.linalg.norm(v, axis=1, keepdims=True)


GRADING = 0.25  # boundary spacing may grow by this fraction of the distance walked


def _graded_positions(length: float, s0: float, s1: float, h: float) -> np.ndarray:
    """Interior split points of a straight segment with spacing s0 -> h -> s1.

    The spacing function min(h, s0 + g x, s1 + g (L - x)) is equidistributed.
    """
    x = np.linspace(0.0, length, 2001)
    size = np.minimum(h, np.minimum(s0 + GRADING * x, s1 + GRADING * (length - x)))
    inv = 1.0 / size
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(x))])
    k = max(1, math.ceil(cum[-1] - 1e-9))
    return np.interp(np.arange(1, k) * cum[-1] / k, cum, x)


def _resample_outline(domain: PlanarDomain, h: float):
    """Split every boundary segment into pieces no longer than ``h``.

    Pieces of arc chords are placed on the exact circle. Straight pieces next
    to an arc start at the arc's chord length and grow towards ``h``.
    """
    v = domain.vertices
    n = len(v)
    seg_len = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
    is_arc = domain.circle_ids >= 0
    pts, labels = [], []
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        lab = domain.labels[i]
        cid = domain.circle_ids[i]
        if cid < 0:
            prev, nxt = (i - 1) % n, (i + 1) % n
            s0 = min(h, seg_len[prev]) if is_arc[prev] else h
            s1 = min(h, seg_len[nxt]) if is_arc[nxt] else h
            t = _graded_positions(seg_len[i], s0, s1, h) / seg_len[i]
            seg = a + np.concatenate([[0.0], t])[:, None] * (b - a)
        else:
            k = max(1, math.ceil(seg_len[i] / h - 1e-9))
            cx, cy, r = domain.circles[cid]
            ta = math.atan2(a[1] - cy, a[0] - cx)
            tb = math.atan2(b[1] - cy, b[0] - cx)
            dt = math.remainder(tb - ta, 2 * math.pi)
            th = ta + dt * np.arange(k) / k
            seg = np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])
            seg[0] = a
        pts.append(seg)
        labels.append(np.full(len(seg), lab, dtype=np.int8))
    return np.vstack(pts), np.concatenate(labels)


def triangulate(domain: PlanarDomain, h_target: float) -> Mesh:
    """Quality constrained-Delaunay triangulation with target edge length ``h_target``."""
    if not h_target > 0:
        raise ValueError("h_target must be positive")
    if domain.config.obstacle_count > 0 and not h_target < domain.config.obstacle_radius:
        raise ValueError("h_target must be smaller than the obstacle radius")
    pts, labels = _resample_outline(domain, h_target)
    n = len(pts)
    seg = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    max_area = math.sqrt(3.0) / 4.0 * h_target**2
    # Y: no Steiner points on the boundary, so surface vertices stay on the circles
    opts = f"pq{_TRIANGLE_QUALITY_DEG:g}a{max_area:.17g}YQ"
    out = triangle.triangulate(
        {"vertices": pts, "segments": seg, "segment_markers": labels.astype(np.int32)[:, None]}, opts
    )
    out_seg = out["segments"]
    out_lab = out["segment_markers"].ravel()
    mesh = Mesh(
        vertices=out["vertices"],
        triangles=out["triangles"],
        facets=out_seg,
        facet_labels=out_lab,
        h_target=h_target,
        circles=domain.circles,
    )
    # Triangle returns CCW triangles; normalize defensively
    neg = mesh.signed_areas() < 0
    if np.any(neg):
        mesh.triangles[neg] = mesh.triangles[neg][:, [0, 2, 1]]
    mesh.check()
    ang = mesh.min_angle_deg()
    if ang < MIN_ANGLE_DEG:
        raise MeshQualityError(f"minimum angle {ang:.2f} deg below {MIN_ANGLE_DEG} deg")
    return mesh


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement; new SURFACE vertices are pushed onto their circle."""
    nv = mesh.n_vertices
    edges = mesh.edges
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    fe = mesh.facet_edges
    surf = fe[mesh.facet_labels == Tag.SURFACE]
    if len(surf) and len(mesh.circles):
        mids[surf] = _project_to_circles(mids[surf], mesh.circles)
    te = mesh.triangle_edges + nv
    t = mesh.triangles
    v0, v1, v2 = t[:, 0], t[:, 1], t[:, 2]
    m01, m12, m20 = te[:, 0], te[:, 1], te[:, 2]
    tris = np.stack(
        [
            np.column_stack([v0, m01, m20]),
            np.column_stack([m01, v1, m12]),
            np.column_stack([m20, m12, v2]),
            np.column_stack([m01, m12, m20]),
        ],
        axis=1,
    ).reshape(-1, 3)
    fm = fe + nv
    facets = np.stack(
        [np.column_stack([mesh.facets[:, 0], fm]), np.column_stack([fm, mesh.facets[:, 1]])], axis=1
    ).reshape(-1, 2)
    labels = np.repeat(mesh.facet_labels, 2)
    return Mesh(
        vertices=np.vstack([mesh.vertices, mids]),
        triangles=tris,
        facets=facets,
        facet_labels=labels,
        h_target=mesh.h_target / 2.0,
        circles=mesh.circles,
    )


def build_ladder(config: GeometryConfig, h_coarse: float, levels: int = 3) -> RefinementLadder:
    """Coarse triangulation followed by ``levels - 1`` uniform refinements."""
    meshes = [triangulate(build_geometry(config), h_coarse)]
    for _ in range(levels - 1):
        meshes.append(refine(meshes[-1]))
    return RefinementLadder(meshes)


# --- text I/O ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def mesh_to_text(mesh: Mesh) -> str:
    lines = ["MESH 1", f"H_TARGET {_fmt(mesh.h_target)}", f"CIRCLES {len(mesh.circles)}"]
    lines += [" ".join(_fmt(v) for v in c) for c in mesh.circles]
    lines.append(f"VERTICES {mesh.n_vertices}")
    lines += [f"{_fmt(x)} {_fmt(y)}" for x, y in mesh.vertices]
    lines.append(f"TRIANGLES {mesh.n_triangles}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"FACETS {len(mesh.facets)}")
    lines += [
        f"{a} {b} {Tag(int(t)).name}" for (a, b), t in zip(mesh.facets.tolist(), mesh.facet_labels)
    ]
    lines.append("END")
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, path) -> None:
    Path(path).write_text(mesh_to_text(mesh))


def _section(lines, pos, name):
    try:
        head, count = lines[pos].split()
        count = int(count)
    except (IndexError, ValueError):
        raise FormatError(f"expected '{name} <count>' at line {pos + 1}") from None
    if head != name:
        raise FormatError(f"expected section {name} at line {pos + 1}, got {head!r}")
    body = lines[pos + 1 : pos + 1 + count]
    if len(body) != count:
        raise FormatError(f"section {name} truncated")
    return body, pos + 1 + count


def read_mesh(path) -> Mesh:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "MESH 1":
        raise FormatError("missing 'MESH 1' header")
    try:
        key, h = lines[1].split()
        if key != "H_TARGET":
            raise ValueError
        h = float(h)
    except (IndexError, ValueError):
        raise FormatError("missing H_TARGET line") from None
    pos = 2
    try:
        body, pos = _section(lines, pos, "CIRCLES")
        circles = np.array([[float(v) for v in ln.split()] for ln in body], dtype=float).reshape(-1, 3)
        body, pos = _section(lines, pos, "VERTICES")
        verts = np.array([[float(v) for v in ln.split()] for ln in body], dtype=float).reshape(-1, 2)
        body, pos = _section(lines, pos, "TRIANGLES")
        tris = np.array([[int(v) for v in ln.split()] for ln in body], dtype=np.int64).reshape(-1, 3)
        body, pos = _section(lines, pos, "FACETS")
        facets, labels = [], []
        for ln in body:
            a, b, name = ln.split()
            if name not in Tag.__members__:
                raise FormatError(f"unknown facet label {name!r}")
            facets.append((int(a), int(b)))
            labels.append(int(Tag[name]))
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(f"malformed record: {exc}") from None
    if pos >= len(lines) or lines[pos].strip() != "END":
        raise FormatError("missing END marker")
    if len(tris) == 0:
        raise FormatError("mesh has no triangles")
    if len(verts) == 0 or tris.min() < 0 or tris.max() >= len(verts):
        raise FormatError("triangle references a missing vertex")
    if facets and (np.min(facets) < 0 or np.max(facets) >= len(verts)):
        raise FormatError("facet references a missing vertex")
    return Mesh(verts, tris, np.array(facets, dtype=np.int64).reshape(-1, 2), np.array(labels), h, circles)
