"""Time-stepping schemes for the stochastic Allen-Cahn equation.

Three one-step maps act on a nodal field ``phi`` and an auxiliary scalar
``r`` that tracks the square root of the discrete potential energy:

* ``augmented_sav_step``: linearly implicit scalar-auxiliary-variable
  update whose auxiliary equation carries two extra noise-coupling terms
  (one quadratic correction and one curvature term).  Both corrections
  vanish at zero noise.
* ``standard_sav_step``: the same update without the two corrections.
* ``implicit_step``: fully implicit reference discretisation with a
  midpoint-type treatment of the cubic nonlinearity, solved by damped
  Newton iterations.

Both SAV steps cost two conjugate-gradient solves with the same matrix
``M + tau*epsilon*K``: the auxiliary scalar is eliminated, leaving a
rank-one perturbed system handled by the Sherman-Morrison identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .fem import (
    FemOperators,
    _check_field,
    discrete_laplacian,
    norm_grad,
    norm_h,
)
from .linsolve import SolverError, SpdSystem, rank_one_solve, spd_solve
from .mesh import Mesh
from .noise import NoiseField
from .potential import (
    PotentialParams,
    discrete_energy,
    double_well_d2phi,
    double_well_dphi,
)

__all__ = [
    "SchemeKind",
    "SchemeError",
    "SavState",
    "StepDiagnostics",
    "NewtonConfig",
    "droplet_profile",
    "initial_state",
    "augmented_sav_step",
    "standard_sav_step",
    "implicit_step",
    "chemical_potential",
]


class SchemeKind(Enum):
    AUGMENTED_SAV = "augmented_sav"
    STANDARD_SAV = "standard_sav"
    IMPLICIT_NONLINEAR = "implicit_nonlinear"


class SchemeError(RuntimeError):
    """A time step could not be completed (divergence or invalid state)."""


@dataclass
class SavState:
    """Field and auxiliary scalar after ``time_index`` completed steps."""

    phi: np.ndarray
    r: float
    time_index: int = 0


@dataclass
class StepDiagnostics:
    """Per-step observables shared by all schemes.

    ``xi_term`` is the extra noise-coupling part of the chemical
    potential (identically zero for the standard SAV and implicit maps);
    ``compact_residual`` is the relative defect of the one-line update
    identity (increment + tau * mu = forcing) and stays at solver
    tolerance for the SAV schemes and Newton tolerance for the implicit
    one.  ``sav_tracking_error`` is |r - sqrt(discrete energy)|.
    """

    mu: np.ndarray
    xi_term: np.ndarray
    modified_energy: float
    total_energy: float
    sav_tracking_error: float
    compact_residual: float
    newton_iterations: int = 0


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 25
    max_damping: int = 4


def droplet_profile(
    x: np.ndarray, y: np.ndarray, a: float, b: float, epsilon: float
) -> np.ndarray:
    """Elliptical droplet with a tanh interface of width ~epsilon.

    The signed-distance proxy min(a, b) * (1 - rho) with the elliptical
    level function rho = sqrt((x/a)^2 + (y/b)^2) is exact along the minor
    axis and smooth enough elsewhere; the profile is +1 well inside the
    ellipse and -1 well outside.
    """
    rho = np.sqrt(np.square(x / a) + np.square(y / b))
    return np.tanh((1.0 - rho) * min(a, b) / (np.sqrt(2.0) * epsilon))


def initial_state(
    mesh: Mesh,
    ops: FemOperators,
    params: PotentialParams,
    a: float = 0.75,
    b: float = 0.5,
) -> SavState:
    """Interpolate the droplet and initialise r = sqrt(discrete energy)."""
    phi = droplet_profile(mesh.nodes[:, 0], mesh.nodes[:, 1], a, b, params.epsilon)
    return SavState(phi, float(np.sqrt(discrete_energy(params, ops, phi))), 0)


def _sqrt_energy(params: PotentialParams, ops: FemOperators, phi: np.ndarray) -> float:
    energy = discrete_energy(params, ops, phi)
    if not energy > 0.0:
        raise SchemeError(f"discrete energy {energy} is not positive")
    return float(np.sqrt(energy))


def _sav_coefficients(
    ops: FemOperators,
    params: PotentialParams,
    phi_prev: np.ndarray,
    noise: NoiseField,
    augmented: bool,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Shared linearisation data (s, f1, base) about the previous state.

    ``base`` collects every r-coefficient of the field update; the
    auxiliary update uses exactly base / 2, which is what makes the
    zero-noise energy identity exact.
    """
    s = _sqrt_energy(params, ops, phi_prev)
    f1 = double_well_dphi(params, phi_prev) / params.epsilon
    base = f1 / s
    if augmented:
        g = noise.forcing
        ifg = float(np.dot(ops.lumped_mass * f1, g))
        f2g = (double_well_d2phi(params, phi_prev) / params.epsilon) * g
        base = base - (ifg / (4.0 * s**3)) * f1 + f2g / (2.0 * s)
    return s, f1, base


def _sav_step(
    ops: FemOperators,
    params: PotentialParams,
    state: SavState,
    noise: NoiseField,
    tau: float,
    system: SpdSystem,
    augmented: bool,
) -> tuple[SavState, StepDiagnostics]:
    phi0 = _check_field(ops, state.phi)
    g = _check_field(ops, noise.forcing)
    if not (np.all(np.isfinite(phi0)) and np.isfinite(state.r)):
        raise SchemeError("non-finite state entering SAV step")
    if not np.all(np.isfinite(g)):
        raise SchemeError("non-finite noise forcing entering SAV step")

    _, _, base = _sav_coefficients(ops, params, phi0, noise, augmented)
    m = ops.lumped_mass
    u = m * (tau * base)
    v = m * (0.5 * base)

    rhs = m * (phi0 + g) - (state.r - float(v @ phi0)) * u
    try:
        phi1 = rank_one_solve(system, u, v, 1.0, rhs)
    except SolverError as err:
        raise SchemeError(f"SAV linear solve failed: {err}") from err
    r1 = state.r + float(v @ (phi1 - phi0))

    mu, xi = chemical_potential(ops, params, state, phi1, r1, noise, augmented)
    diag = _diagnostics(ops, params, phi0, phi1, r1, g, tau, mu, xi)
    return SavState(phi1, r1, state.time_index + 1), diag


def augmented_sav_step(
    ops: FemOperators,
    params: PotentialParams,
    state: SavState,
    noise: NoiseField,
    tau: float,
    system: SpdSystem,
) -> tuple[SavState, StepDiagnostics]:
    """One step of the noise-augmented SAV scheme."""
    return _sav_step(ops, params, state, noise, tau, system, augmented=True)


def standard_sav_step(
    ops: FemOperators,
    params: PotentialParams,
    state: SavState,
    noise: NoiseField,
    tau: float,
    system: SpdSystem,
) -> tuple[SavState, StepDiagnostics]:
    """One step of the standard SAV scheme (no noise-coupling corrections)."""
    return _sav_step(ops, params, state, noise, tau, system, augmented=False)


def chemical_potential(
    ops: FemOperators,
    params: PotentialParams,
    state_prev: SavState,
    phi_new: np.ndarray,
    r_new: float,
    noise: NoiseField,
    augmented: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Discrete chemical potential of a completed SAV step and its noise part.

    Returns ``(mu, xi_term)`` with
    ``mu = -epsilon * lap_h(phi_new) + r_new * base`` where ``base`` is the
    linearisation used by the step, and ``xi_term = r_new * (base - f1/s)``
    the part contributed by the noise corrections (zero for the standard
    scheme and at zero noise).
    """
    s, f1, base = _sav_coefficients(ops, params, state_prev.phi, noise, augmented)
    mu = -params.epsilon * discrete_laplacian(ops, phi_new) + r_new * base
    xi = r_new * (base - f1 / s)
    return mu, xi


def _diagnostics(
    ops: FemOperators,
    params: PotentialParams,
    phi0: np.ndarray,
    phi1: np.ndarray,
    r1: float,
    g: np.ndarray,
    tau: float,
    mu: np.ndarray,
    xi: np.ndarray,
    newton_iterations: int = 0,
) -> StepDiagnostics:
    delta = phi1 - phi0
    defect = norm_h(ops, delta + tau * mu - g)
    scale = norm_h(ops, delta) + tau * norm_h(ops, mu) + norm_h(ops, g) + 1e-300
    grad = norm_grad(ops, phi1)
    energy = discrete_energy(params, ops, phi1)
    return StepDiagnostics(
        mu=mu,
        xi_term=xi,
        modified_energy=0.5 * params.epsilon * grad * grad + r1 * r1,
        total_energy=0.5 * params.epsilon * grad * grad + energy,
        sav_tracking_error=abs(r1 - float(np.sqrt(energy))),
        compact_residual=defect / scale,
        newton_iterations=newton_iterations,
    )


def implicit_step(
    ops: FemOperators,
    params: PotentialParams,
    state: SavState,
    noise: NoiseField,
    tau: float,
    newton: NewtonConfig = NewtonConfig(),
) -> tuple[SavState, StepDiagnostics]:
    """One step of the fully implicit reference scheme.

    The cubic term is discretised as (phi^2 - 1)(phi + phi_prev)/2 at the
    nodes.  Newton iterations use the analytic Jacobian and halve the
    update on residual increase; the auxiliary scalar is bookkept as
    sqrt(discrete energy) so the diagnostics stay comparable.
    """
    phi0 = _check_field(ops, state.phi)
    g = _check_field(ops, noise.forcing)
    if not np.all(np.isfinite(phi0)):
        raise SchemeError("non-finite state entering implicit step")
    if not np.all(np.isfinite(g)):
        raise SchemeError("non-finite noise forcing entering implicit step")

    m = ops.lumped_mass
    K = ops.stiffness
    eps = params.epsilon

    def residual(phi: np.ndarray) -> np.ndarray:
        cubic = 0.5 * (phi * phi - 1.0) * (phi + phi0) / eps
        return m * (phi - phi0) + tau * eps * (K @ phi) + tau * m * cubic - m * g

    def res_norm(res: np.ndarray) -> float:
        # ||M^{-1} res||_h, the lumped norm of the Riesz representative
        return float(np.sqrt(np.dot(res, res / m)))

    phi = phi0.copy()
    res = residual(phi)
    rnorm = res_norm(res)
    iterations = 0
    while rnorm > newton.tol:
        if iterations >= newton.max_iter:
            raise SchemeError(
                f"Newton did not converge: residual {rnorm:.3e} "
                f"after {newton.max_iter} iterations"
            )
        slope = phi * (phi + phi0) + 0.5 * (phi * phi - 1.0)
        jac = (
            sparse.diags(m * (1.0 + tau * slope / eps)) + (tau * eps) * K
        ).tocsr()
        try:
            system = SpdSystem(jac, jac.diagonal(), tol=1e-12)
            delta = spd_solve(system, -res)
        except (SolverError, ValueError):
            delta = splu(jac.tocsc()).solve(-res)
        if not np.all(np.isfinite(delta)):
            raise SchemeError("non-finite Newton update")

        step = 1.0
        accepted = False
        for _ in range(newton.max_damping + 1):
            trial = phi + step * delta
            trial_res = residual(trial)
            trial_norm = res_norm(trial_res)
            if trial_norm < rnorm or trial_norm <= newton.tol:
                phi, res, rnorm = trial, trial_res, trial_norm
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise SchemeError(
                f"Newton stalled: residual {rnorm:.3e} not reduced "
                f"after {newton.max_damping} halvings"
            )
        iterations += 1

    r1 = _sqrt_energy(params, ops, phi)
    mu = -eps * discrete_laplacian(ops, phi) + 0.5 * (phi * phi - 1.0) * (phi + phi0) / eps
    xi = np.zeros_like(phi)
    diag = _diagnostics(
        ops, params, phi0, phi, r1, g, tau, mu, xi, newton_iterations=iterations
    )
    return SavState(phi, r1, state.time_index + 1), diag
