import numpy as np
import pytest
from scipy import sparse

from savac.fem import assemble
from savac.linsolve import (
    SolverError,
    SpdSystem,
    build_sav_system,
    rank_one_solve,
    spd_solve,
)
from savac.mesh import build_torus_mesh


def random_spd_system(rng, n, tol=1e-12):
    raw = rng.normal(size=(n, n))
    dense = raw @ raw.T + n * np.eye(n)
    matrix = sparse.csr_matrix(dense)
    return SpdSystem(matrix, matrix.diagonal(), tol=tol), dense


def test_zero_rhs():
    system, _ = random_spd_system(np.random.default_rng(0), 20)
    assert np.array_equal(spd_solve(system, np.zeros(20)), np.zeros(20))


def test_recovers_columns():
    system, dense = random_spd_system(np.random.default_rng(1), 15)
    for i in range(5):
        e = np.zeros(15)
        e[i] = 1.0
        x = spd_solve(system, dense @ e)
        assert np.abs(x - e).max() < 1e-8


def test_matches_dense_solver():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(5, 60))
        system, dense = random_spd_system(rng, n)
        b = rng.normal(size=n)
        x = spd_solve(system, b)
        ref = np.linalg.solve(dense, b)
        assert np.abs(x - ref).max() < 1e-8 * max(1.0, np.abs(ref).max())


def test_residual_contract_on_fem_matrix():
    ops = assemble(build_torus_mesh(4.0, 4.0, 16, 16))
    system = build_sav_system(ops, epsilon=0.04, tau=1e-2)
    rng = np.random.default_rng(3)
    for _ in range(5):
        b = rng.normal(size=ops.node_count)
        x = spd_solve(system, b)
        res = np.linalg.norm(b - system.matrix @ x)
        assert res <= system.tol * np.linalg.norm(b)


def test_failure_reports_residual():
    system, _ = random_spd_system(np.random.default_rng(4), 40)
    strict = SpdSystem(system.matrix, system.diag, tol=1e-12, max_iter=2)
    with pytest.raises(SolverError) as excinfo:
        spd_solve(strict, np.ones(40))
    assert excinfo.value.residual is not None
    assert excinfo.value.residual > 0


def test_non_finite_rhs_rejected():
    system, _ = random_spd_system(np.random.default_rng(5), 10)
    bad = np.ones(10)
    bad[3] = np.nan
    with pytest.raises(SolverError):
        spd_solve(system, bad)


def test_rank_one_zero_update_matches_plain_solve():
    rng = np.random.default_rng(6)
    system, dense = random_spd_system(rng, 25)
    b = rng.normal(size=25)
    plain = spd_solve(system, b)
    for u, a, scale in [
        (np.zeros(25), rng.normal(size=25), 1.0),
        (rng.normal(size=25), np.zeros(25), 1.0),
        (rng.normal(size=25), rng.normal(size=25), 0.0),
    ]:
        x = rank_one_solve(system, u, a, scale, b)
        assert np.abs(x - plain).max() < 1e-9


def test_rank_one_matches_dense_oracle():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(5, 40))
        system, dense = random_spd_system(rng, n)
        u = rng.normal(size=n)
        a = rng.normal(size=n)
        scale = float(rng.uniform(-0.5, 0.5))
        b = rng.normal(size=n)
        full = dense + scale * np.outer(u, a)
        if abs(np.linalg.det(full)) < 1e-8:
            continue
        ref = np.linalg.solve(full, b)
        x = rank_one_solve(system, u, a, scale, b)
        assert np.abs(x - ref).max() < 1e-8 * max(1.0, np.abs(ref).max())


def test_singular_update_raises():
    rng = np.random.default_rng(8)
    system, dense = random_spd_system(rng, 12)
    u = rng.normal(size=12)
    # choose a so that 1 + scale * a . A^{-1} u = 0 exactly
    x1 = np.linalg.solve(dense, u)
    a = -x1 / float(x1 @ x1)
    with pytest.raises(SolverError):
        rank_one_solve(system, u, a, 1.0, rng.normal(size=12))


def test_build_sav_system_structure():
    ops = assemble(build_torus_mesh(4.0, 4.0, 8, 8))
    tau, eps = 2e-3, 0.04
    system = build_sav_system(ops, eps, tau)
    expected = np.diag(ops.lumped_mass) + tau * eps * ops.stiffness.toarray()
    assert np.abs(system.matrix.toarray() - expected).max() < 1e-14
    with pytest.raises(ValueError):
        build_sav_system(ops, eps, 0.0)


def test_deterministic():
    system, _ = random_spd_system(np.random.default_rng(9), 30)
    b = np.sin(np.arange(30.0))
    x1 = spd_solve(system, b)
    x2 = spd_solve(system, b)
    assert np.array_equal(x1, x2)
