"""Periodic crossed triangulations of a rectangular torus.

Every square cell of a uniform grid is split into four triangles through
the cell center.  This keeps all elements congruent (right isosceles for
square cells) and gives two logical node families: one node per cell
corner and one per cell center.  Periodicity is realised purely through
the logical node numbering; per-triangle vertex coordinates are stored
unwrapped so element geometry stays correct across the seam.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = ["Mesh", "build_torus_mesh", "node_coordinates", "mesh_to_csv"]


@dataclass(frozen=True)
class Mesh:
    """Immutable triangulation of the torus (-lx/2, lx/2) x (-ly/2, ly/2).

    ``nodes`` holds one canonical coordinate per logical node: grid nodes
    first (row-major, x fastest), then cell centers (row-major).
    ``triangles`` references that numbering; ``tri_coords`` carries the
    unwrapped vertex coordinates of each triangle for assembly.
    """

    lx: float
    ly: float
    n_cells_x: int
    n_cells_y: int
    nodes: np.ndarray  # (node_count, 2)
    triangles: np.ndarray  # (4 * n_cells, 3) logical node indices, CCW
    tri_coords: np.ndarray  # (4 * n_cells, 3, 2) unwrapped coordinates
    h: float  # largest triangle diameter

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    @property
    def area(self) -> float:
        return self.lx * self.ly


def build_torus_mesh(lx: float, ly: float, n_cells_x: int, n_cells_y: int) -> Mesh:
    """Build the crossed triangulation of a periodic rectangle.

    The grid has ``n_cells_x * n_cells_y`` square cells; each contributes
    four triangles and one center node, so the mesh carries
    ``2 * n_cells_x * n_cells_y`` logical nodes in total.
    """
    if not (lx > 0 and ly > 0):
        raise ValueError(f"domain side lengths must be positive, got {lx} x {ly}")
    if n_cells_x < 2 or n_cells_y < 2:
        raise ValueError(
            f"need at least 2 cells per direction, got {n_cells_x} x {n_cells_y}"
        )

    nx, ny = n_cells_x, n_cells_y
    sx, sy = lx / nx, ly / ny
    xs = -0.5 * lx + sx * np.arange(nx)
    ys = -0.5 * ly + sy * np.arange(ny)

    gx, gy = np.meshgrid(xs, ys)  # row-major over j (rows = y levels)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    centers = grid + np.array([0.5 * sx, 0.5 * sy])
    nodes = np.vstack([grid, centers])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, jj = ii.ravel(), jj.ravel()
    ip, jp = (ii + 1) % nx, (jj + 1) % ny

    n00 = jj * nx + ii
    n10 = jj * nx + ip
    n11 = jp * nx + ip
    n01 = jp * nx + ii
    ctr = nx * ny + jj * nx + ii

    # four CCW triangles per cell, fanning around the center node
    tris = np.empty((nx * ny, 4, 3), dtype=np.int64)
    tris[:, 0] = np.column_stack([n00, n10, ctr])
    tris[:, 1] = np.column_stack([n10, n11, ctr])
    tris[:, 2] = np.column_stack([n11, n01, ctr])
    tris[:, 3] = np.column_stack([n01, n00, ctr])
    triangles = tris.reshape(-1, 3)

    # unwrapped corner coordinates: the +1 neighbours keep their nominal
    # position even when the logical index wraps around the seam
    x0, y0 = xs[ii], ys[jj]
    p00 = np.column_stack([x0, y0])
    p10 = np.column_stack([x0 + sx, y0])
    p11 = np.column_stack([x0 + sx, y0 + sy])
    p01 = np.column_stack([x0, y0 + sy])
    pc = np.column_stack([x0 + 0.5 * sx, y0 + 0.5 * sy])

    coords = np.empty((nx * ny, 4, 3, 2))
    coords[:, 0] = np.stack([p00, p10, pc], axis=1)
    coords[:, 1] = np.stack([p10, p11, pc], axis=1)
    coords[:, 2] = np.stack([p11, p01, pc], axis=1)
    coords[:, 3] = np.stack([p01, p00, pc], axis=1)
    tri_coords = coords.reshape(-1, 3, 2)

    diag = 0.5 * float(np.hypot(sx, sy))
    h = max(sx, sy, diag)

    nodes.setflags(write=False)
    triangles.setflags(write=False)
    tri_coords.setflags(write=False)
    return Mesh(lx, ly, nx, ny, nodes, triangles, tri_coords, h)


def node_coordinates(mesh: Mesh, node: int) -> np.ndarray:
    """Canonical coordinates of a logical node (inside the fundamental domain)."""
    if not 0 <= node < mesh.node_count:
        raise IndexError(f"node {node} out of range [0, {mesh.node_count})")
    return mesh.nodes[node]


def mesh_to_csv(mesh: Mesh, path) -> None:
    """Dump node coordinates as CSV rows ``node,x,y``."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["node", "x", "y"])
        for k, (x, y) in enumerate(mesh.nodes):
            writer.writerow([k, f"{x:.17g}", f"{y:.17g}"])
