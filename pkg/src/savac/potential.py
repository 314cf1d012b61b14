"""Shifted double-well potential and the discrete free energy.

The well is shifted by a small ``gamma > 0`` so the nodal energy stays
strictly positive, which keeps the square root in the auxiliary-variable
update well defined.  ``epsilon`` scales the potential part of the
energy as F/epsilon (the gradient part carries the matching factor
epsilon in the schemes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import FemOperators, _check_field, norm_grad

__all__ = [
    "PotentialParams",
    "double_well",
    "double_well_dphi",
    "double_well_d2phi",
    "discrete_energy",
    "total_energy",
]


@dataclass(frozen=True)
class PotentialParams:
    gamma: float = 1e-5
    epsilon: float = 1.0

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def double_well(params: PotentialParams, x):
    """F(x) = (x^2 - 1)^2 / 4 + gamma."""
    sq = np.square(x)
    return 0.25 * np.square(sq - 1.0) + params.gamma


def double_well_dphi(params: PotentialParams, x):
    """F'(x) = x^3 - x."""
    return x * x * x - x


def double_well_d2phi(params: PotentialParams, x):
    """F''(x) = 3 x^2 - 1."""
    return 3.0 * np.square(x) - 1.0


def discrete_energy(params: PotentialParams, ops: FemOperators, phi: np.ndarray) -> float:
    """Lumped potential energy (1/epsilon) sum_i m_i F(phi_i).

    Bounded below by gamma * area / epsilon > 0 for every nodal field.
    """
    phi = _check_field(ops, phi)
    return float(np.dot(ops.lumped_mass, double_well(params, phi))) / params.epsilon


def total_energy(params: PotentialParams, ops: FemOperators, phi: np.ndarray) -> float:
    """Full discrete energy (epsilon/2) |phi|_1^2 + discrete potential energy."""
    grad = norm_grad(ops, phi)
    return 0.5 * params.epsilon * grad * grad + discrete_energy(params, ops, phi)
