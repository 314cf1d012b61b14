import numpy as np
import pytest

from savac.fem import assemble, inner_h, norm_h
from savac.mesh import build_torus_mesh
from savac.noise import (
    GAUSSIAN,
    RADEMACHER,
    apply_phi_h,
    build_basis,
    coarse_mode_sums,
    coloring_bound,
    load_increments,
    make_noise_field,
    mode_function_1d,
    nodal_increments,
    sample_path,
    save_increments,
    sigma,
    spectral_weight,
    wiener_increment,
    zero_noise,
)


def small_setup(n_cells=8, k_max=2, l_max=2):
    mesh = build_torus_mesh(4.0, 4.0, n_cells, n_cells)
    ops = assemble(mesh)
    basis = build_basis(mesh, k_max, l_max)
    return mesh, ops, basis


def test_constant_mode_value():
    # mode (0, 0) on the (-2,2)^2 torus is the constant 1/sqrt(area) = 1/4
    mesh, _, basis = small_setup()
    j = int(np.flatnonzero((basis.modes == 0).all(axis=1))[0])
    assert np.allclose(basis.nodal[:, j], 0.25)


def test_mode_values_match_formula():
    mesh, _, basis = small_setup()
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    for j, (kx, ky) in enumerate(basis.modes):
        expected = mode_function_1d(int(kx), x, mesh.lx) * mode_function_1d(
            int(ky), y, mesh.ly
        )
        assert np.allclose(basis.nodal[:, j], expected, atol=1e-14)


def test_spectral_weights():
    assert spectral_weight(0) == 1.0
    assert spectral_weight(3) == pytest.approx(1.0 / 9.0)
    assert spectral_weight(-2) == pytest.approx(0.25)
    _, _, basis = small_setup()
    j = int(
        np.flatnonzero((basis.modes[:, 0] == 2) & (basis.modes[:, 1] == -1))[0]
    )
    assert basis.weights[j] == pytest.approx(0.25 * 1.0)


def test_discrete_orthonormality():
    # lumped quadrature of trigonometric products is exact below the
    # aliasing threshold, so the nodal basis is orthonormal to roundoff
    _, ops, basis = small_setup(n_cells=64, k_max=3, l_max=3)
    gram = (basis.nodal * ops.lumped_mass[:, None]).T @ basis.nodal
    assert np.abs(gram - np.eye(basis.mode_count)).max() < 1e-8


def test_coloring_bound_finite_and_converging():
    mesh = build_torus_mesh(4.0, 4.0, 8, 8)
    values = [coloring_bound(build_basis(mesh, k, k)) for k in (5, 10, 20, 40)]
    assert all(np.isfinite(v) and v > 0 for v in values)
    assert values == sorted(values)  # monotone in the cut-off
    # tail decays like k^-2, so doubling the cut-off moves the sum only slightly
    assert values[3] - values[2] < 0.05 * values[2]


def test_sample_path_deterministic_and_shapes():
    _, _, basis = small_setup()
    a = sample_path(basis, 16, 1e-3, RADEMACHER, seed=42)
    b = sample_path(basis, 16, 1e-3, RADEMACHER, seed=42)
    c = sample_path(basis, 16, 1e-3, RADEMACHER, seed=43)
    assert np.array_equal(a.xi, b.xi)
    assert not np.array_equal(a.xi, c.xi)
    assert a.xi.shape == (16, basis.mode_count)


def test_rademacher_support_and_moments():
    _, _, basis = small_setup(k_max=1, l_max=1)
    path = sample_path(basis, 120000, 1e-3, RADEMACHER, seed=7)
    values = path.xi.reshape(-1)
    assert set(np.unique(values)) == {-1.0, 1.0}
    assert abs(values.mean()) < 0.005
    assert 0.99 <= values.var() <= 1.01


def test_gaussian_moments():
    _, _, basis = small_setup(k_max=1, l_max=1)
    path = sample_path(basis, 120000, 1e-3, GAUSSIAN, seed=8)
    values = path.xi.reshape(-1)
    assert abs(values.mean()) < 0.005
    assert 0.99 <= values.var() <= 1.01


def test_invalid_sample_arguments():
    _, _, basis = small_setup()
    with pytest.raises(ValueError):
        sample_path(basis, 0, 1e-3, RADEMACHER, 1)
    with pytest.raises(ValueError):
        sample_path(basis, 4, -1e-3, RADEMACHER, 1)
    with pytest.raises(ValueError):
        sample_path(basis, 4, 1e-3, "uniform", 1)


def test_single_fine_increment():
    _, _, basis = small_setup()
    path = sample_path(basis, 8, 4e-4, GAUSSIAN, seed=3)
    inc = wiener_increment(basis, path, 1, 2)
    expected = np.sqrt(4e-4) * basis.nodal @ (basis.weights * path.xi[2])
    assert np.allclose(inc, expected, atol=1e-15)


def test_mode_sums_telescope_bitwise():
    _, _, basis = small_setup()
    path = sample_path(basis, 16, 1e-3, GAUSSIAN, seed=21)
    for fine, factor in [(1, 2), (2, 2), (4, 2)]:
        a = coarse_mode_sums(path, fine)
        ab = coarse_mode_sums(path, fine * factor)
        assert np.array_equal(ab, a[0::2] + a[1::2])


def test_coarsening_telescopes_exactly():
    # a coarse increment is bitwise the sum of its two half increments
    # whenever the finer level is a power of two
    _, _, basis = small_setup()
    path = sample_path(basis, 24, 1e-3, GAUSSIAN, seed=5)
    for fine, factor in [(1, 2), (2, 2), (4, 2), (1, 3), (2, 3), (4, 3)]:
        coarse = fine * factor
        for index in range(path.n_steps // coarse):
            total = wiener_increment(basis, path, coarse, index)
            parts = [
                wiener_increment(basis, path, fine, index * factor + i)
                for i in range(factor)
            ]
            if factor == 2:
                recombined = parts[0] + parts[1]
            else:
                recombined = (parts[0] + parts[1]) + parts[2]
            assert np.array_equal(total, recombined)


def test_coarse_mode_sums_match_plain_sum():
    _, _, basis = small_setup()
    path = sample_path(basis, 12, 1e-3, GAUSSIAN, seed=6)
    sums = coarse_mode_sums(path, 3)
    assert sums.shape == (4, basis.mode_count)
    assert np.allclose(sums[1], path.xi[3:6].sum(axis=0), atol=1e-12)
    with pytest.raises(ValueError):
        coarse_mode_sums(path, 5)  # 5 does not divide the 12 sampled steps


def test_nodal_increments_match_single_calls():
    _, _, basis = small_setup()
    path = sample_path(basis, 8, 2e-3, RADEMACHER, seed=9)
    batch = nodal_increments(basis, path, 2)
    assert batch.shape == (4, basis.nodal.shape[0])
    for j in range(4):
        single = wiener_increment(basis, path, 2, j)
        assert np.allclose(batch[j], single, atol=1e-13)


def test_increment_horizon_checked():
    _, _, basis = small_setup()
    path = sample_path(basis, 8, 1e-3, RADEMACHER, seed=1)
    with pytest.raises(IndexError):
        wiener_increment(basis, path, 2, 4)
    with pytest.raises(IndexError):
        wiener_increment(basis, path, 1, 8)


def test_increment_variance_matches_isometry_oracle():
    # E ||dW||_h^2 = tau * sum_j weight_j^2 ||g_j||_h^2 by independence
    _, ops, basis = small_setup(n_cells=8, k_max=2, l_max=2)
    tau = 1e-3
    norms_sq = np.array(
        [inner_h(ops, basis.nodal[:, j], basis.nodal[:, j]) for j in range(basis.mode_count)]
    )
    expected = tau * float(np.sum(basis.weights**2 * norms_sq))
    path = sample_path(basis, 10000, tau, GAUSSIAN, seed=12)
    batch = nodal_increments(basis, path, 1)
    observed = float(np.mean(np.sum(ops.lumped_mass * batch * batch, axis=1)))
    assert observed == pytest.approx(expected, rel=0.05)


def test_scaled_increment_moment_scaling():
    # second and fourth moments of ||sigma(phi) dW||_h grow like tau and tau^2
    _, ops, basis = small_setup(n_cells=8, k_max=2, l_max=2)
    path = sample_path(basis, 20000, 5e-4, GAUSSIAN, seed=13)
    phi = np.zeros(ops.node_count)  # sigma = alpha everywhere
    moments = {}
    for level in (1, 4):
        batch = nodal_increments(basis, path, level)
        scaled = sigma(phi, 2.0)[None, :] * batch
        norms_sq = np.sum(ops.lumped_mass * scaled * scaled, axis=1)
        moments[level] = (float(np.mean(norms_sq)), float(np.mean(norms_sq**2)))
    assert moments[4][0] / moments[1][0] == pytest.approx(4.0, rel=0.2)
    assert moments[4][1] / moments[1][1] == pytest.approx(16.0, rel=0.2)


def test_sigma_properties():
    assert sigma(np.array([0.0]), 2.0)[0] == pytest.approx(2.0)
    assert sigma(np.array([1.0]), 2.0)[0] == 0.0
    assert sigma(np.array([-1.0]), 5.0)[0] == 0.0
    assert sigma(np.array([3.0]), 2.0)[0] == 0.0  # clipped outside [-1, 1]
    rng = np.random.default_rng(14)
    # globally Lipschitz with constant 2 alpha: |sigma(a)-sigma(b)| <= 2 alpha |a-b|
    a = rng.uniform(-3, 3, 1000)
    b = rng.uniform(-3, 3, 1000)
    gap = np.abs(sigma(a, 2.0) - sigma(b, 2.0))
    assert np.all(gap <= 2.0 * 2.0 * np.abs(a - b) + 1e-12)


def test_apply_phi_h_is_nodal_product():
    rng = np.random.default_rng(15)
    phi = rng.uniform(-1.5, 1.5, 64)
    inc = rng.normal(size=64)
    out = apply_phi_h(phi, inc, 2.0)
    assert np.allclose(out, sigma(phi, 2.0) * inc, atol=1e-15)
    assert np.array_equal(apply_phi_h(np.ones(64), inc, 2.0), np.zeros(64))
    with pytest.raises(ValueError):
        apply_phi_h(phi, inc[:10], 2.0)


def test_noise_field_helpers():
    field = make_noise_field(np.zeros(4), np.full(4, 0.5), alpha=2.0)
    assert np.allclose(field.forcing, 1.0)
    assert np.allclose(field.increment, 0.5)
    z = zero_noise(6)
    assert np.array_equal(z.forcing, np.zeros(6))


def test_dump_roundtrip(tmp_path):
    _, _, basis = small_setup()
    path = sample_path(basis, 10, 1e-3, RADEMACHER, seed=77)
    file = tmp_path / "path.bin"
    save_increments(path, file)
    loaded = load_increments(file, 1e-3, RADEMACHER)
    assert loaded.seed == 77
    assert loaded.n_steps == 10
    assert np.array_equal(loaded.xi, path.xi)
    # header is 3 little-endian int64 words
    raw = np.frombuffer(file.read_bytes()[:24], dtype="<i8")
    assert raw.tolist() == [10, basis.mode_count, 77]
