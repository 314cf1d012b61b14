"""Monte-Carlo refinement and scheme-comparison studies.

Each sample path draws one Wiener realisation at the finest step size
and reruns every requested scheme at every step size on that shared
realisation, so two kinds of pathwise errors are well defined:

* self-convergence: final field at step size tau against the same
  scheme's run at the finest step size;
* cross comparison: final field against the fully implicit reference
  scheme at the matching step size.

Paths are independent (seeded per path index, not per completion order)
and may execute in worker processes; aggregation always reduces in path
index order, so results are independent of scheduling.  A path that
fails (solver divergence, non-finite state) is recorded and excluded
from every statistic; the completed count is reported.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .fem import FemOperators, assemble, norm_grad, norm_h
from .linsolve import SolverError, build_sav_system
from .mesh import Mesh, build_torus_mesh
from .noise import SpectralBasis, build_basis, make_noise_field, nodal_increments, sample_path
from .potential import PotentialParams, discrete_energy
from .schemes import (
    NewtonConfig,
    SavState,
    SchemeError,
    augmented_sav_step,
    implicit_step,
    initial_state,
    standard_sav_step,
)

__all__ = [
    "EnsembleError",
    "PathFailure",
    "EnsembleReport",
    "run_ensemble",
    "ensemble_rms",
    "eoc",
    "path_seed",
]

logger = logging.getLogger(__name__)

IMPLICIT = "implicit_nonlinear"


class EnsembleError(RuntimeError):
    """No path of the ensemble completed."""


@dataclass(frozen=True)
class PathFailure:
    path_index: int
    scheme: str
    tau: float
    step: int
    message: str


@dataclass
class EnsembleReport:
    """Aggregated ensemble statistics, keyed by scheme name and step size."""

    config: ExperimentConfig
    tau_values: tuple[float, ...]
    reference_tau: float
    self_rms: dict
    self_eoc: dict
    cross_rms: dict
    cross_eoc: dict
    sav_error_max_mean: dict
    xi_cumulative_rms: dict
    energy_series: dict  # scheme -> tau -> array with columns (t, modified, total, sav_error)
    mean_fields: dict  # scheme -> tau -> checkpoint time -> nodal mean field
    n_paths_completed: int
    failures: list


def path_seed(base_seed: int, path_index: int) -> int:
    """Collision-resistant per-path seed, independent of execution order."""
    ss = np.random.SeedSequence((base_seed, path_index))
    return int(ss.generate_state(1, np.uint64)[0])


def ensemble_rms(fields_a, fields_b, ops: FemOperators) -> float:
    """Root mean square over paths of the lumped-norm field difference."""
    if len(fields_a) != len(fields_b):
        raise ValueError("ensembles have different sizes")
    if not fields_a:
        raise ValueError("empty ensemble")
    total = 0.0
    for a, b in zip(fields_a, fields_b):
        diff = norm_h(ops, np.asarray(a) - np.asarray(b))
        total += diff * diff
    return float(np.sqrt(total / len(fields_a)))


def eoc(errors) -> list:
    """Observed convergence rates from (step size, error) pairs.

    Input must be sorted by ascending step size with positive errors;
    each output entry pairs the larger step size of a consecutive pair
    with log(e_i / e_{i-1}) / log(tau_i / tau_{i-1}).
    """
    errors = list(errors)
    rates = []
    for i, (tau, err) in enumerate(errors):
        if err <= 0 or tau <= 0:
            raise ValueError(f"step sizes and errors must be positive, got {errors[i]}")
        if i == 0:
            continue
        tau_prev, err_prev = errors[i - 1]
        if tau <= tau_prev:
            raise ValueError("step sizes must be strictly increasing")
        rates.append((tau, float(np.log(err / err_prev) / np.log(tau / tau_prev))))
    return rates


@dataclass
class _Context:
    config: ExperimentConfig
    mesh: Mesh
    ops: FemOperators
    basis: SpectralBasis
    params: PotentialParams
    initial: SavState
    systems: dict
    newton: NewtonConfig
    levels: tuple
    initial_energy_row: np.ndarray


def _build_context(config: ExperimentConfig) -> _Context:
    mesh = build_torus_mesh(config.lx, config.ly, config.n_cells_x, config.n_cells_y)
    ops = assemble(mesh)
    basis = build_basis(mesh, config.k_max, config.l_max)
    params = PotentialParams(gamma=config.gamma, epsilon=config.epsilon)
    initial = initial_state(mesh, ops, params, config.ellipse_a, config.ellipse_b)
    systems = {
        tau: build_sav_system(ops, config.epsilon, tau) for tau in config.tau_levels
    }
    grad = norm_grad(ops, initial.phi)
    modified0 = 0.5 * config.epsilon * grad * grad + initial.r * initial.r
    total0 = 0.5 * config.epsilon * grad * grad + discrete_energy(params, ops, initial.phi)
    row0 = np.array([0.0, modified0, total0, 0.0])
    return _Context(
        config,
        mesh,
        ops,
        basis,
        params,
        initial,
        systems,
        NewtonConfig(tol=config.newton_tol, max_iter=config.newton_max_iter),
        config.level_factors(),
        row0,
    )


class _PathError(Exception):
    def __init__(self, scheme: str, tau: float, step: int, message: str):
        super().__init__(message)
        self.scheme = scheme
        self.tau = tau
        self.step = step


def _run_trajectory(ctx: _Context, scheme: str, tau: float, increments: np.ndarray):
    """One scheme at one step size along one noise realisation."""
    cfg = ctx.config
    ops = ctx.ops
    state = SavState(ctx.initial.phi.copy(), ctx.initial.r, 0)
    system = ctx.systems[tau]
    n_steps = increments.shape[0]
    checkpoint_steps = {
        int(round(t / tau)): t for t in cfg.checkpoint_times
    }

    energy = np.empty((n_steps + 1, 4))
    energy[0] = ctx.initial_energy_row
    sav_max = 0.0
    xi_total = 0.0
    checkpoints = {}
    for j in range(n_steps):
        noise = make_noise_field(state.phi, increments[j], cfg.alpha)
        try:
            if scheme == "augmented_sav":
                state, diag = augmented_sav_step(ops, ctx.params, state, noise, tau, system)
            elif scheme == "standard_sav":
                state, diag = standard_sav_step(ops, ctx.params, state, noise, tau, system)
            else:
                state, diag = implicit_step(ops, ctx.params, state, noise, tau, ctx.newton)
        except (SchemeError, SolverError) as err:
            raise _PathError(scheme, tau, j, str(err)) from err
        energy[j + 1] = (
            (j + 1) * tau,
            diag.modified_energy,
            diag.total_energy,
            diag.sav_tracking_error,
        )
        sav_max = max(sav_max, diag.sav_tracking_error)
        xi_norm = norm_h(ops, diag.xi_term)
        xi_total += tau * xi_norm * xi_norm
        if (j + 1) in checkpoint_steps:
            checkpoints[checkpoint_steps[j + 1]] = state.phi.copy()
    return state.phi, energy, sav_max, xi_total, checkpoints


def _simulate_path(ctx: _Context, path_index: int) -> dict:
    cfg = ctx.config
    path = sample_path(
        ctx.basis,
        cfg.n_fine_steps(),
        cfg.tau_min,
        cfg.distribution,
        path_seed(cfg.base_seed, path_index),
    )
    final = {scheme: {} for scheme in cfg.schemes}
    result = {
        "path_index": path_index,
        "sav_max": {},
        "xi_total": {},
        "energy": {},
        "checkpoints": {},
        "self_sq": {},
        "cross_sq": {},
    }
    for level, tau in zip(ctx.levels, cfg.tau_levels):
        increments = nodal_increments(ctx.basis, path, level)
        for scheme in cfg.schemes:
            phi_T, energy, sav_max, xi_total, checkpoints = _run_trajectory(
                ctx, scheme, tau, increments
            )
            final[scheme][tau] = phi_T
            result["sav_max"][(scheme, tau)] = sav_max
            result["xi_total"][(scheme, tau)] = xi_total
            result["energy"][(scheme, tau)] = energy
            result["checkpoints"][(scheme, tau)] = checkpoints
        del increments

    ref_tau = cfg.tau_levels[0]
    for scheme in cfg.schemes:
        for tau in cfg.tau_levels[1:]:
            diff = norm_h(ctx.ops, final[scheme][tau] - final[scheme][ref_tau])
            result["self_sq"][(scheme, tau)] = diff * diff
    if IMPLICIT in cfg.schemes:
        for scheme in cfg.schemes:
            if scheme == IMPLICIT:
                continue
            for tau in cfg.tau_levels:
                diff = norm_h(ctx.ops, final[scheme][tau] - final[IMPLICIT][tau])
                result["cross_sq"][(scheme, tau)] = diff * diff
    return result


def _simulate_path_safe(ctx: _Context, path_index: int):
    start = time.perf_counter()
    try:
        result = _simulate_path(ctx, path_index)
    except _PathError as err:
        logger.warning("path %d failed: %s", path_index, err)
        return PathFailure(path_index, err.scheme, err.tau, err.step, str(err))
    logger.info(
        "path %d/%d done in %.1fs",
        path_index + 1,
        ctx.config.n_paths,
        time.perf_counter() - start,
    )
    return result


_WORKER_CTX: _Context | None = None


def _worker_init(config_dict: dict) -> None:
    global _WORKER_CTX
    _WORKER_CTX = _build_context(ExperimentConfig(**config_dict))


def _worker_run(path_index: int):
    return _simulate_path_safe(_WORKER_CTX, path_index)


def run_ensemble(config: ExperimentConfig) -> EnsembleReport:
    """Run all paths and aggregate; see the module docstring for semantics."""
    ctx = _build_context(config)
    if config.n_workers > 1:
        with ProcessPoolExecutor(
            max_workers=config.n_workers,
            initializer=_worker_init,
            initargs=(config.to_dict(),),
        ) as pool:
            results = list(pool.map(_worker_run, range(config.n_paths)))
    else:
        results = [_simulate_path_safe(ctx, p) for p in range(config.n_paths)]

    failures = [r for r in results if isinstance(r, PathFailure)]
    completed = [r for r in results if not isinstance(r, PathFailure)]
    if not completed:
        raise EnsembleError(
            f"all {config.n_paths} paths failed; first failure: {failures[0].message}"
        )
    n = len(completed)

    def _mean_over_paths(key_fn) -> dict:
        acc: dict = {}
        for result in completed:
            for key, value in key_fn(result).items():
                acc[key] = acc.get(key, 0.0) + value
        return {key: value / n for key, value in acc.items()}

    self_ms = _mean_over_paths(lambda r: r["self_sq"])
    cross_ms = _mean_over_paths(lambda r: r["cross_sq"])
    sav_mean = _mean_over_paths(lambda r: r["sav_max"])
    xi_ms = _mean_over_paths(lambda r: r["xi_total"])

    def _nest(flat: dict, transform=lambda v: v) -> dict:
        nested: dict = {}
        for (scheme, tau), value in flat.items():
            nested.setdefault(scheme, {})[tau] = transform(value)
        return nested

    self_rms = _nest(self_ms, lambda v: float(np.sqrt(v)))
    cross_rms = _nest(cross_ms, lambda v: float(np.sqrt(v)))
    sav_error_max_mean = _nest(sav_mean, float)
    xi_cumulative_rms = _nest(xi_ms, lambda v: float(np.sqrt(v)))

    def _rates(rms_by_scheme: dict) -> dict:
        out = {}
        for scheme, by_tau in rms_by_scheme.items():
            pairs = sorted(by_tau.items())
            try:
                out[scheme] = eoc(pairs)
            except ValueError:
                out[scheme] = []
        return out

    energy_series: dict = {}
    mean_fields: dict = {}
    for result in completed:
        for (scheme, tau), series in result["energy"].items():
            slot = energy_series.setdefault(scheme, {})
            slot[tau] = slot.get(tau, 0.0) + series
        for (scheme, tau), stash in result["checkpoints"].items():
            slot = mean_fields.setdefault(scheme, {}).setdefault(tau, {})
            for t, phi in stash.items():
                slot[t] = slot.get(t, 0.0) + phi
    for by_tau in energy_series.values():
        for tau in by_tau:
            by_tau[tau] = by_tau[tau] / n
    for by_tau in mean_fields.values():
        for by_time in by_tau.values():
            for t in by_time:
                by_time[t] = by_time[t] / n

    if failures:
        logger.warning("%d of %d paths failed", len(failures), config.n_paths)
    return EnsembleReport(
        config=config,
        tau_values=config.tau_levels,
        reference_tau=config.tau_levels[0],
        self_rms=self_rms,
        self_eoc=_rates(self_rms),
        cross_rms=cross_rms,
        cross_eoc=_rates(cross_rms),
        sav_error_max_mean=sav_error_max_mean,
        xi_cumulative_rms=xi_cumulative_rms,
        energy_series=energy_series,
        mean_fields=mean_fields,
        n_paths_completed=n,
        failures=failures,
    )
