"""Uniform nested triangulations of the unit square.

Level ``l`` splits (0, 1)^2 into ``2^l x 2^l`` square cells, each cut into
two right triangles along the lower-left to upper-right diagonal.  All
triangles are congruent, so the family is quasi-uniform with
level-independent shape constants, and meshes of different levels are
nested: piecewise linear interpolation from a coarse level to a finer one
is exact.

Nodes are ordered lexicographically in (y, x); triangles are oriented
counterclockwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MAX_LEVEL = 12


class MeshSizeError(ValueError):
    """Requested refinement level exceeds the memory guard."""


class NestingError(ValueError):
    """Meshes are not nested the way the operation requires."""


@dataclass(frozen=True)
class Mesh:
    """Triangulation of the unit square at one refinement level.

    Attributes
    ----------
    level : int
        Refinement level; the square is split into ``2**level`` cells per side.
    nodes : ndarray, shape (n_nodes, 2)
        Vertex coordinates.
    triangles : ndarray, shape (n_triangles, 3)
        Vertex indices of each triangle, counterclockwise.
    boundary_mask : ndarray of bool, shape (n_nodes,)
        True at nodes lying on the boundary of the square.
    cell_size : float
        Side length of one square cell, ``1 / 2**level``.
    h : float
        Mesh size, the largest triangle diameter (``sqrt(2) * cell_size``).
    """

    level: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray
    cell_size: float
    h: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def interior(self) -> np.ndarray:
        """Indices of interior nodes, in node order."""
        return np.flatnonzero(~self.boundary_mask)


def build_unit_square_mesh(level: int) -> Mesh:
    """Build the level-``level`` uniform triangulation of the unit square.

    The mesh has ``(2**level + 1)**2`` nodes and ``2 * 4**level`` triangles.
    Raises :class:`MeshSizeError` for levels above ``MAX_LEVEL``.
    """
    if not isinstance(level, (int, np.integer)):
        raise TypeError(f"level must be an integer, got {level!r}")
    if level < 0:
        raise ValueError(f"level must be nonnegative, got {level}")
    if level > MAX_LEVEL:
        raise MeshSizeError(
            f"level {level} exceeds the guard MAX_LEVEL={MAX_LEVEL} "
            f"({(2 ** level + 1) ** 2} nodes)"
        )
    n = 2**level
    cell = 1.0 / n
    side = np.arange(n + 1) * cell
    xs, ys = np.meshgrid(side, side, indexing="xy")
    nodes = np.column_stack([xs.ravel(), ys.ravel()])

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    a = (jj * (n + 1) + ii).ravel()
    b = a + 1
    c = a + n + 2
    d = a + n + 1
    # two triangles per cell, split along the a-c diagonal, both CCW
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    ig, jg = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    boundary = (ig == 0) | (ig == n) | (jg == 0) | (jg == n)

    return Mesh(
        level=int(level),
        nodes=nodes,
        triangles=triangles,
        boundary_mask=boundary.ravel(),
        cell_size=cell,
        h=float(np.sqrt(2.0) * cell),
    )


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Signed areas of all triangles (positive for counterclockwise)."""
    p = mesh.nodes[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def quasi_uniformity_report(mesh: Mesh) -> tuple[float, float]:
    """Shape constants of the triangulation, computed geometrically.

    Returns ``(kappa, tau_bar)`` where ``kappa`` is the largest ratio of
    triangle diameter to inscribed-circle diameter and ``tau_bar`` the
    largest ratio of mesh size to triangle diameter.  Both are level
    independent for this mesh family.
    """
    p = mesh.nodes[mesh.triangles]
    edges = np.stack(
        [p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1
    )
    lengths = np.linalg.norm(edges, axis=2)
    diam = lengths.max(axis=1)
    perim = lengths.sum(axis=1)
    area = np.abs(triangle_areas(mesh))
    incircle_diam = 4.0 * area / perim
    kappa = float((diam / incircle_diam).max())
    tau_bar = float((mesh.h / diam).max())
    return kappa, tau_bar


def prolongate_nodal(coarse: Mesh, fine: Mesh, values: np.ndarray) -> np.ndarray:
    """Evaluate a coarse piecewise linear function at the fine mesh nodes.

    ``values`` holds nodal values on ``coarse`` (full node set).  Because the
    meshes are nested the result represents the same function; the operation
    reproduces linear functions exactly and is the identity when
    ``fine.level == coarse.level``.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (coarse.n_nodes,):
        raise ValueError(
            f"values has shape {values.shape}, expected ({coarse.n_nodes},)"
        )
    if fine.level < coarse.level:
        raise NestingError(
            f"fine level {fine.level} is below coarse level {coarse.level}"
        )
    if fine.level == coarse.level:
        return values.copy()

    nc = 2**coarse.level
    r = 2 ** (fine.level - coarse.level)
    nf = 2**fine.level

    idx = np.arange((nf + 1) ** 2)
    i = idx % (nf + 1)
    j = idx // (nf + 1)
    qi, si = np.divmod(i, r)
    qj, sj = np.divmod(j, r)
    xi = si / r
    eta = sj / r
    # clamp the +1 cell indices at the far edge; weights there are zero
    qi1 = np.minimum(qi + 1, nc)
    qj1 = np.minimum(qj + 1, nc)

    va = values[qj * (nc + 1) + qi]
    vb = values[qj * (nc + 1) + qi1]
    vc = values[qj1 * (nc + 1) + qi1]
    vd = values[qj1 * (nc + 1) + qi]

    on_lower = xi >= eta
    out = np.where(
        on_lower,
        va * (1.0 - xi) + vb * (xi - eta) + vc * eta,
        va * (1.0 - eta) + vc * xi + vd * (eta - xi),
    )
    return out


def mesh_to_dict(mesh: Mesh) -> dict:
    """JSON-ready description of the mesh."""
    return {
        "level": mesh.level,
        "nodes": [[float(x), float(y)] for x, y in mesh.nodes],
        "triangles": [[int(v) for v in t] for t in mesh.triangles],
        "boundary": [int(b) for b in mesh.boundary_mask],
    }


def dump_mesh(mesh: Mesh, path) -> None:
    """Write the mesh as JSON to ``path``."""
    with open(path, "w") as fh:
        json.dump(mesh_to_dict(mesh), fh, sort_keys=True)
        fh.write("\n")
