"""Lumped P1 finite element operators on a periodic triangulation.

Nodal fields are plain float arrays of length ``node_count``.  All inner
products use the lumped (mass-diagonal) quadrature, so the discrete L2
product is a weighted dot product and interpolation of a nonlinearity is
just a component-wise function application.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import Mesh

__all__ = [
    "FemOperators",
    "assemble",
    "discrete_laplacian",
    "inner_h",
    "norm_h",
    "norm_grad",
    "nodal_apply",
]


@dataclass(frozen=True)
class FemOperators:
    """Assembled operators: diagonal lumped mass and sparse stiffness."""

    lumped_mass: np.ndarray  # (n,) strictly positive
    stiffness: sparse.csr_matrix  # (n, n) symmetric positive semi-definite
    node_count: int
    area: float


def assemble(mesh: Mesh) -> FemOperators:
    """Assemble lumped mass vector and stiffness matrix for P1 elements."""
    pts = mesh.tri_coords
    e1 = pts[:, 1] - pts[:, 0]
    e2 = pts[:, 2] - pts[:, 0]
    two_area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(two_area <= 0):
        raise ValueError("degenerate or misoriented triangle in mesh")
    area = 0.5 * two_area

    # barycentric gradients: grad(lambda_i) = (b_i, c_i)
    x, y = pts[..., 0], pts[..., 1]
    b = np.stack(
        [y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1
    ) / two_area[:, None]
    c = np.stack(
        [x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1
    ) / two_area[:, None]

    local = area[:, None, None] * (
        b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]
    )
    rows = np.repeat(mesh.triangles, 3, axis=1).reshape(-1)
    cols = np.tile(mesh.triangles, (1, 3)).reshape(-1)
    n = mesh.node_count
    stiffness = sparse.coo_matrix(
        (local.reshape(-1), (rows, cols)), shape=(n, n)
    ).tocsr()
    stiffness.sum_duplicates()

    lumped = np.zeros(n)
    np.add.at(lumped, mesh.triangles.reshape(-1), np.repeat(area / 3.0, 3))

    lumped.setflags(write=False)
    return FemOperators(lumped, stiffness, n, float(mesh.lx * mesh.ly))


def _check_field(ops: FemOperators, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (ops.node_count,):
        raise ValueError(
            f"field has shape {values.shape}, expected ({ops.node_count},)"
        )
    return values


def discrete_laplacian(ops: FemOperators, values: np.ndarray) -> np.ndarray:
    """Mass-lumped discrete Laplacian: -M^{-1} K applied to a nodal field."""
    values = _check_field(ops, values)
    return -(ops.stiffness @ values) / ops.lumped_mass


def inner_h(ops: FemOperators, u: np.ndarray, v: np.ndarray) -> float:
    """Lumped L2 inner product (u, v)_h = sum_i m_i u_i v_i."""
    return float(np.dot(ops.lumped_mass * _check_field(ops, u), _check_field(ops, v)))


def norm_h(ops: FemOperators, values: np.ndarray) -> float:
    values = _check_field(ops, values)
    return float(np.sqrt(np.dot(ops.lumped_mass, values * values)))


def norm_grad(ops: FemOperators, values: np.ndarray) -> float:
    """H1 seminorm sqrt(v' K v); tiny negative roundoff is clipped to zero."""
    values = _check_field(ops, values)
    quad = float(values @ (ops.stiffness @ values))
    return float(np.sqrt(max(quad, 0.0)))


def nodal_apply(func, values: np.ndarray) -> np.ndarray:
    """Nodal interpolation of a pointwise function: apply component-wise."""
    values = np.asarray(values, dtype=float)
    out = np.asarray(func(values), dtype=float)
    if out.shape != values.shape:
        raise ValueError("function did not apply component-wise")
    return out
