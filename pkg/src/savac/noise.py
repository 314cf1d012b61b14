"""Spectral Q-Wiener increments and the state-dependent noise intensity.

The driving noise lives on a truncated tensor basis of periodic
eigenfunctions with polynomially decaying weights.  A sampled path stores
the raw unit-variance variables at the finest resolution only; every
coarser step size reuses the same path by summing consecutive fine
increments, so refinement studies compare discretisations of one
realisation instead of independent ones.

Coarse sums are formed by a pairing tree, which makes the telescoping
between two dyadic levels exact in floating point (the coarse sum is
bit-identical to the sum of its fine halves).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

__all__ = [
    "RADEMACHER",
    "GAUSSIAN",
    "SpectralBasis",
    "NoisePath",
    "NoiseField",
    "build_basis",
    "mode_function_1d",
    "spectral_weight",
    "coloring_bound",
    "sample_path",
    "coarse_mode_sums",
    "wiener_increment",
    "nodal_increments",
    "sigma",
    "apply_phi_h",
    "make_noise_field",
    "zero_noise",
    "save_increments",
    "load_increments",
]

RADEMACHER = "rademacher"
GAUSSIAN = "gaussian"
_DISTRIBUTIONS = (RADEMACHER, GAUSSIAN)


def mode_function_1d(k: int, t: np.ndarray, length: float) -> np.ndarray:
    """Orthonormal periodic eigenfunction with integer index k.

    Positive k are cosines, negative k sines, k = 0 the constant mode.
    """
    t = np.asarray(t, dtype=float)
    if k > 0:
        return np.sqrt(2.0 / length) * np.cos(2.0 * np.pi * k * t / length)
    if k < 0:
        return np.sqrt(2.0 / length) * np.sin(2.0 * np.pi * k * t / length)
    return np.full_like(t, 1.0 / np.sqrt(length))


def spectral_weight(k: int) -> float:
    """Covariance weight per 1-D index: 1 for the constant mode, k^-2 otherwise."""
    return 1.0 if k == 0 else 1.0 / float(k * k)


@dataclass(frozen=True)
class SpectralBasis:
    """Nodal evaluations of the truncated tensor eigenbasis.

    ``nodal[:, j]`` is the interpolated product eigenfunction of mode
    ``modes[j] = (kx, ky)``; ``weights[j]`` the product covariance weight.
    """

    lx: float
    ly: float
    k_max: int
    l_max: int
    modes: np.ndarray  # (mode_count, 2) integer index pairs
    nodal: np.ndarray  # (node_count, mode_count)
    weights: np.ndarray  # (mode_count,)

    @property
    def mode_count(self) -> int:
        return self.modes.shape[0]


def build_basis(mesh: Mesh, k_max: int, l_max: int) -> SpectralBasis:
    """Evaluate all modes |kx| <= k_max, |ky| <= l_max at the mesh nodes."""
    if k_max < 0 or l_max < 0:
        raise ValueError("mode cut-offs must be non-negative")
    kxs = np.arange(-k_max, k_max + 1)
    kys = np.arange(-l_max, l_max + 1)
    gx = np.column_stack([mode_function_1d(k, mesh.nodes[:, 0], mesh.lx) for k in kxs])
    gy = np.column_stack([mode_function_1d(k, mesh.nodes[:, 1], mesh.ly) for k in kys])

    pairs = np.array([(kx, ky) for kx in kxs for ky in kys], dtype=np.int64)
    ix = pairs[:, 0] + k_max
    iy = pairs[:, 1] + l_max
    nodal = gx[:, ix] * gy[:, iy]
    weights = np.array(
        [spectral_weight(kx) * spectral_weight(ky) for kx, ky in pairs]
    )

    pairs.setflags(write=False)
    nodal.setflags(write=False)
    weights.setflags(write=False)
    return SpectralBasis(mesh.lx, mesh.ly, k_max, l_max, pairs, nodal, weights)


def coloring_bound(basis: SpectralBasis) -> float:
    """Summed squared W^{1,inf} envelope of the weighted modes.

    Finite (and convergent as the cut-offs grow) because the covariance
    weights decay like the fourth power of the index while the gradient
    of a mode only grows linearly.
    """
    total = 0.0
    for (kx, ky), w in zip(basis.modes, basis.weights):
        ax = np.sqrt((2.0 if kx != 0 else 1.0) / basis.lx)
        ay = np.sqrt((2.0 if ky != 0 else 1.0) / basis.ly)
        sup = ax * ay * (1.0 + 2.0 * np.pi * (abs(kx) / basis.lx + abs(ky) / basis.ly))
        total += float(w * w * sup * sup)
    return total


@dataclass(frozen=True)
class NoisePath:
    """Unit-variance mode variables of one path at the finest step size."""

    xi: np.ndarray  # (n_steps, mode_count)
    tau_min: float
    seed: int
    distribution: str

    @property
    def n_steps(self) -> int:
        return self.xi.shape[0]


def sample_path(
    basis: SpectralBasis,
    n_steps: int,
    tau_min: float,
    distribution: str,
    seed: int,
) -> NoisePath:
    """Draw the fine-level mode variables from an explicitly seeded stream."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be at least 1, got {n_steps}")
    if tau_min <= 0:
        raise ValueError(f"tau_min must be positive, got {tau_min}")
    if distribution not in _DISTRIBUTIONS:
        raise ValueError(
            f"unknown distribution {distribution!r}, expected one of {_DISTRIBUTIONS}"
        )
    rng = np.random.default_rng(seed)
    shape = (n_steps, basis.mode_count)
    if distribution == GAUSSIAN:
        xi = rng.standard_normal(shape)
    else:
        xi = rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
    xi.setflags(write=False)
    return NoisePath(xi, float(tau_min), int(seed), distribution)


def _tree_sum(block: np.ndarray) -> np.ndarray:
    """Pairing-tree reduction over axis 1 of a (windows, width, modes) block.

    Even widths split into halves by pairing neighbours, so a width-2w sum
    is bitwise the sum of its two width-w sub-sums whenever w is a power
    of two.
    """
    width = block.shape[1]
    if width == 1:
        return block[:, 0, :]
    if width % 2 == 0:
        return _tree_sum(block[:, 0::2, :] + block[:, 1::2, :])
    return _tree_sum(block[:, : width - 1, :]) + block[:, width - 1, :]


def coarse_mode_sums(path: NoisePath, level: int) -> np.ndarray:
    """Sum the fine mode variables over consecutive windows of ``level`` steps."""
    if level < 1:
        raise ValueError(f"level must be at least 1, got {level}")
    if path.n_steps % level != 0:
        raise ValueError(
            f"level {level} does not divide the path length {path.n_steps}"
        )
    n_coarse = path.n_steps // level
    block = path.xi.reshape(n_coarse, level, -1)
    return _tree_sum(block).copy()


def _project_fine(basis: SpectralBasis, path: NoisePath) -> np.ndarray:
    """Nodal fields of all fine increments: sqrt(tau) (xi * w) G^T.

    Always projects the complete path in one matrix product, so a fine
    increment has one well-defined floating-point value no matter which
    coarse level later consumes it.
    """
    return np.sqrt(path.tau_min) * ((path.xi * basis.weights) @ basis.nodal.T)


def wiener_increment(
    basis: SpectralBasis, path: NoisePath, level: int, index: int
) -> np.ndarray:
    """Nodal Wiener increment of coarse step ``index`` at step size level*tau_min.

    Coarse increments are pairing-tree sums of the projected fine
    increments, so for dyadic level ratios a coarse increment is bitwise
    the sum of the finer increments it covers.  This convenience accessor
    reprojects the whole path; use ``nodal_increments`` inside loops.
    """
    if level < 1:
        raise ValueError(f"level must be at least 1, got {level}")
    start = index * level
    stop = start + level
    if index < 0 or stop > path.n_steps:
        raise IndexError(
            f"coarse step {index} at level {level} exceeds the sampled horizon"
        )
    fine = _project_fine(basis, path)
    return _tree_sum(fine[start:stop][None, :, :])[0]


def nodal_increments(basis: SpectralBasis, path: NoisePath, level: int) -> np.ndarray:
    """All nodal increments of one coarse level as a (n_coarse, node_count) array."""
    if level < 1:
        raise ValueError(f"level must be at least 1, got {level}")
    if path.n_steps % level != 0:
        raise ValueError(
            f"level {level} does not divide the path length {path.n_steps}"
        )
    fine = _project_fine(basis, path)
    block = fine.reshape(path.n_steps // level, level, -1)
    return _tree_sum(block).copy()


def sigma(phi: np.ndarray, alpha: float) -> np.ndarray:
    """Noise intensity alpha * max(1 - phi^2, 0); vanishes outside [-1, 1]."""
    return alpha * np.maximum(1.0 - np.square(phi), 0.0)


def apply_phi_h(phi: np.ndarray, increment: np.ndarray, alpha: float) -> np.ndarray:
    """Interpolated multiplicative noise: nodal product sigma(phi) * increment."""
    phi = np.asarray(phi, dtype=float)
    increment = np.asarray(increment, dtype=float)
    if phi.shape != increment.shape:
        raise ValueError(
            f"field and increment shapes differ: {phi.shape} vs {increment.shape}"
        )
    return sigma(phi, alpha) * increment


@dataclass(frozen=True)
class NoiseField:
    """One step's noise data: the raw increment and its state-scaled forcing."""

    forcing: np.ndarray  # sigma(phi_prev) * increment, applied in the schemes
    increment: np.ndarray  # raw Wiener increment before scaling


def make_noise_field(phi_prev: np.ndarray, increment: np.ndarray, alpha: float) -> NoiseField:
    return NoiseField(apply_phi_h(phi_prev, increment, alpha), increment)


def zero_noise(node_count: int) -> NoiseField:
    z = np.zeros(node_count)
    return NoiseField(z, z)


def save_increments(path: NoisePath, file) -> None:
    """Dump a path for replay: int64 header (n_steps, mode_count, seed), then xi."""
    header = np.array([path.n_steps, path.xi.shape[1], path.seed], dtype="<i8")
    with open(file, "wb") as handle:
        handle.write(header.tobytes())
        handle.write(path.xi.astype("<f8").tobytes())


def load_increments(file, tau_min: float, distribution: str) -> NoisePath:
    """Reload a dumped path; step size and distribution are not stored."""
    with open(file, "rb") as handle:
        header = np.frombuffer(handle.read(24), dtype="<i8")
        n_steps, mode_count, seed = (int(v) for v in header)
        xi = np.frombuffer(handle.read(), dtype="<f8").reshape(n_steps, mode_count)
    xi = xi.copy()
    xi.setflags(write=False)
    return NoisePath(xi, float(tau_min), seed, distribution)
