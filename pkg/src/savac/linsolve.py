"""Deterministic iterative solvers for the per-step linear systems.

Each implicit step reduces to a symmetric positive definite matrix
``M + tau * epsilon * K`` plus a rank-one coupling from the auxiliary
variable.  The base system is solved with diagonally preconditioned
conjugate gradients; the rank-one update goes through the
Sherman-Morrison identity, costing two base solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .fem import FemOperators

__all__ = ["SolverError", "SpdSystem", "build_sav_system", "spd_solve", "rank_one_solve"]


class SolverError(RuntimeError):
    """Raised when an iterative solve fails its residual contract."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SpdSystem:
    """A fixed SPD matrix with its Jacobi preconditioner and solve policy."""

    matrix: sparse.csr_matrix
    diag: np.ndarray
    tol: float = 1e-10
    max_iter: int = 0  # 0 means the size-based default

    def __post_init__(self) -> None:
        if np.any(self.diag <= 0):
            raise ValueError("system diagonal must be strictly positive")
        if self.max_iter == 0:
            n = self.matrix.shape[0]
            object.__setattr__(self, "max_iter", max(50, 10 * math.isqrt(n) + 10))


def build_sav_system(
    ops: FemOperators, epsilon: float, tau: float, tol: float = 1e-10
) -> SpdSystem:
    """Assemble M + tau*epsilon*K once per time-step size."""
    if tau <= 0 or epsilon <= 0:
        raise ValueError(f"tau and epsilon must be positive, got {tau}, {epsilon}")
    matrix = (
        sparse.diags(ops.lumped_mass) + (tau * epsilon) * ops.stiffness
    ).tocsr()
    return SpdSystem(matrix, matrix.diagonal(), tol=tol)


def spd_solve(system: SpdSystem, b: np.ndarray) -> np.ndarray:
    """Preconditioned CG with a verified true-residual exit.

    Guarantees ||b - A x||_2 <= tol * ||b||_2 on return, or raises
    SolverError carrying the relative residual reached.
    """
    A = system.matrix
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise SolverError("non-finite right-hand side")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    limit = system.tol * bnorm

    x = np.zeros_like(b)
    r = b.copy()
    z = r / system.diag
    p = z.copy()
    rz = float(r @ z)
    for _ in range(system.max_iter):
        Ap = A @ p
        curv = float(p @ Ap)
        if curv <= 0.0:
            raise SolverError("matrix is not positive definite along search direction")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= limit:
            # recurrence residual can drift; accept only the true residual
            r = b - A @ x
            if np.linalg.norm(r) <= limit:
                return x
            z = r / system.diag
            p = z.copy()
            rz = float(r @ z)
            continue
        z = r / system.diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    rel = float(np.linalg.norm(b - A @ x)) / bnorm
    raise SolverError(
        f"CG stalled at relative residual {rel:.3e} after {system.max_iter} iterations",
        residual=rel,
    )


def rank_one_solve(
    system: SpdSystem,
    u: np.ndarray,
    a: np.ndarray,
    scale: float,
    b: np.ndarray,
) -> np.ndarray:
    """Solve (A + scale * u a^T) x = b via Sherman-Morrison.

    Falls back to the plain solve automatically when ``u``, ``a`` or
    ``scale`` vanish; raises SolverError when the update is singular.
    """
    x0 = spd_solve(system, b)
    x1 = spd_solve(system, u)
    denom = 1.0 + scale * float(a @ x1)
    if abs(denom) < 1e-14:
        raise SolverError(
            f"rank-one update is numerically singular (denominator {denom:.3e})"
        )
    return x0 - (scale * float(a @ x0) / denom) * x1
