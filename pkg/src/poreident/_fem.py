"""Shared finite-element kernels for affine triangles.

Local P2 numbering: vertices 0, 1, 2 then midpoints of edges (0,1), (1,2), (2,0),
matching ``Mesh.triangle_edges``.
"""

import numpy as np
from scipy.spatial import cKDTree

# Dunavant degree-4 rule, barycentric coordinates; weights sum to one
_A, _B = 0.445948490915965, 0.091576213509771
_WA, _WB = 0.223381589678011, 0.109951743655322
QUAD_BARY = np.array(
    [
        [1 - 2 * _A, _A, _A],
        [_A, 1 - 2 * _A, _A],
        [_A, _A, 1 - 2 * _A],
        [1 - 2 * _B, _B, _B],
        [_B, 1 - 2 * _B, _B],
        [_B, _B, 1 - 2 * _B],
    ]
)
QUAD_W = np.array([_WA] * 3 + [_WB] * 3)

# 3-point Gauss-Legendre on [0, 1]
GAUSS_S = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0

_EDGE_PAIRS = ((0, 1), (1, 2), (2, 0))


def geometry(vertices, triangles):
    """Areas ``(nt,)`` and barycentric gradients ``(nt, 3, 2)``."""
    p = vertices[triangles]
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    grad = np.empty((len(triangles), 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grad[:, i, 0] = (y[:, j] - y[:, k]) / det
        grad[:, i, 1] = (x[:, k] - x[:, j]) / det
    return 0.5 * det, grad


def p2_values(lam):
    """P2 basis values at barycentric points ``lam`` (..., 3) -> (..., 6)."""
    out = [lam[..., i] * (2 * lam[..., i] - 1) for i in range(3)]
    out += [4 * lam[..., i] * lam[..., j] for i, j in _EDGE_PAIRS]
    return np.stack(out, axis=-1)


def p2_gradients(lam, glam):
    """P2 basis gradients.

    lam: (nq, 3) quadrature barycentrics; glam: (nt, 3, 2).
    Returns (nt, nq, 6, 2).
    """
    nt = glam.shape[0]
    nq = lam.shape[0]
    g = np.empty((nt, nq, 6, 2))
    for i in range(3):
        g[:, :, i, :] = (4 * lam[:, i] - 1)[None, :, None] * glam[:, None, i, :]
    for k, (i, j) in enumerate(_EDGE_PAIRS):
        g[:, :, 3 + k, :] = 4 * (
            lam[None, :, j, None] * glam[:, None, i, :] + lam[None, :, i, None] * glam[:, None, j, :]
        )
    return g


def p2_dofmap(mesh):
    return np.hstack([mesh.triangles, mesh.n_vertices + mesh.triangle_edges])


def coo_pattern(dofmap):
    n = dofmap.shape[1]
    rows = np.repeat(dofmap, n, axis=1).ravel()
    cols = np.tile(dofmap, (1, n)).ravel()
    return rows, cols


class PointLocator:
    """Find the containing triangle and barycentric coordinates of query points."""

    def __init__(self, vertices, triangles):
        self.vertices = vertices
        self.triangles = triangles
        self._tree = cKDTree(vertices[triangles].mean(axis=1))

    def locate(self, points, k=16, tol=1e-12):
        points = np.atleast_2d(points)
        k = min(k, len(self.triangles))
        _, cand = self._tree.query(points, k=k)
        cand = cand.reshape(len(points), k)
        tri = np.full(len(points), -1, dtype=np.int64)
        bary = np.full((len(points), 3), np.nan)
        for j in range(k):
            todo = tri < 0
            if not todo.any():
                break
            t = cand[todo, j]
            lam = self._bary(points[todo], t)
            inside = np.all(lam >= -tol, axis=1)
            idx = np.flatnonzero(todo)[inside]
            tri[idx] = t[inside]
            bary[idx] = lam[inside]
        return tri, bary

    def _bary(self, pts, t):
        p = self.vertices[self.triangles[t]]
        v0 = p[:, 1] - p[:, 0]
        v1 = p[:, 2] - p[:, 0]
        v2 = pts - p[:, 0]
        det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
        l1 = (v2[:, 0] * v1[:, 1] - v2[:, 1] * v1[:, 0]) / det
        l2 = (v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]) / det
        return np.column_stack([1 - l1 - l2, l1, l2])
