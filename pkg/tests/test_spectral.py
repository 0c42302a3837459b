import numpy as np
import pytest

from scns import oracles
from scns.spectral import (
    AliasingError,
    ConfigurationError,
    ScalarField,
    TorusGrid,
    VectorField,
    div,
    from_spectral,
    grad,
    inv_laplacian_grad,
    laplacian,
    project_trig,
    riesz,
    sobolev_norm,
    to_spectral,
)


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return ScalarField(grid, rng.standard_normal(grid.shape))


def resolved_random_field(grid, seed=0):
    # Nyquist-free: composition identities for odd-order derivatives only hold
    # below the Nyquist shell on an even grid.
    return project_trig(random_field(grid, seed), grid.m // 2 - 1)


class TestGrid:
    def test_rejects_bad_dimension(self):
        with pytest.raises(ConfigurationError):
            TorusGrid(4, 8)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ConfigurationError):
            TorusGrid(2, 12)

    def test_rejects_small_m(self):
        with pytest.raises(ConfigurationError):
            TorusGrid(2, 2)

    def test_wavenumber_range(self):
        grid = TorusGrid(1, 8)
        assert set(grid.kvec[0]) == {0, 1, 2, 3, 4, -1, -2, -3}


class TestTransforms:
    def test_constant_field(self):
        grid = TorusGrid(2, 16)
        coeffs = to_spectral(ScalarField.constant(grid, 3.0))
        assert abs(coeffs[0, 0] - 3.0) < 1e-13
        coeffs[0, 0] = 0.0
        assert np.max(np.abs(coeffs)) < 1e-13

    def test_single_cosine_mode(self):
        grid = TorusGrid(2, 16)
        f = ScalarField(grid, np.cos(2 * np.pi * grid.coords[0]))
        coeffs = to_spectral(f)
        assert abs(coeffs[1, 0] - 0.5) < 1e-13
        assert abs(coeffs[-1, 0] - 0.5) < 1e-13

    def test_roundtrip_matches_direct_dft_oracle(self):
        # oracle: direct O(m^{2d}) DFT on m=8
        grid = TorusGrid(2, 8)
        f = random_field(grid, seed=42)
        coeffs = to_spectral(f)
        ref = oracles.direct_dft(grid, f.values)
        assert np.max(np.abs(coeffs - ref)) < 1e-12
        back = from_spectral(grid, coeffs)
        assert np.max(np.abs(back.values - f.values)) < 1e-12

    def test_hermitian_symmetry(self):
        grid = TorusGrid(1, 16)
        coeffs = to_spectral(random_field(grid, seed=1))
        for k in range(1, 8):
            assert abs(coeffs[k] - np.conj(coeffs[-k])) < 1e-13

    def test_nonfinite_rejected(self):
        grid = TorusGrid(1, 8)
        with pytest.raises(ValueError):
            ScalarField(grid, np.full(grid.shape, np.nan))


class TestProjection:
    def test_constant_unchanged(self):
        grid = TorusGrid(2, 16)
        f = ScalarField.constant(grid, 2.5)
        out = project_trig(f, 3)
        assert np.max(np.abs(out.values - 2.5)) < 1e-13

    def test_mode_above_cutoff_killed(self):
        grid = TorusGrid(1, 16)
        f = ScalarField(grid, np.cos(2 * np.pi * 3 * grid.coords[0]))
        out = project_trig(f, 2)
        assert np.max(np.abs(out.values)) < 1e-13

    def test_matches_dft_truncation_oracle(self):
        grid = TorusGrid(2, 16)
        f = random_field(grid, seed=3)
        ref = oracles.direct_truncation(grid, f.values, 2)
        out = project_trig(f, 2)
        assert np.max(np.abs(out.values - ref)) < 1e-11

    def test_idempotent_and_self_adjoint(self):
        grid = TorusGrid(2, 16)
        f, g = random_field(grid, 4), random_field(grid, 5)
        pf = project_trig(f, 3)
        ppf = project_trig(pf, 3)
        assert np.max(np.abs(ppf.values - pf.values)) < 1e-12
        lhs = grid.inner(pf.values, g.values)
        rhs = grid.inner(f.values, project_trig(g, 3).values)
        assert abs(lhs - rhs) < 1e-12

    def test_aliasing_cutoff_rejected(self):
        grid = TorusGrid(1, 16)
        with pytest.raises(AliasingError):
            project_trig(random_field(grid), 8)


class TestInvLaplacianGrad:
    def test_mean_only_field(self):
        grid = TorusGrid(2, 16)
        out = inv_laplacian_grad(ScalarField.constant(grid, 4.0))
        for c in out.components:
            assert np.max(np.abs(c)) < 1e-13

    def test_cosine_eigenfunction(self):
        grid = TorusGrid(2, 16)
        rho = ScalarField(grid, np.cos(2 * np.pi * grid.coords[0]))
        out = inv_laplacian_grad(rho)
        expected = np.sin(2 * np.pi * grid.coords[0]) / (2 * np.pi)
        assert np.max(np.abs(out.components[0] - expected)) < 1e-12
        assert np.max(np.abs(out.components[1])) < 1e-13

    def test_divergence_recovers_mean_free_part(self):
        grid = TorusGrid(2, 16)
        rho = resolved_random_field(grid, seed=6)
        out = div(inv_laplacian_grad(rho))
        target = rho.values - rho.mean()
        assert np.max(np.abs(out.values - target)) < 1e-10

    def test_result_has_zero_mean(self):
        grid = TorusGrid(2, 16)
        out = inv_laplacian_grad(random_field(grid, seed=7))
        for c in out.components:
            assert abs(np.mean(c)) < 1e-14


class TestRiesz:
    def test_eigenfunction(self):
        grid = TorusGrid(2, 16)
        f = ScalarField(grid, np.cos(2 * np.pi * grid.coords[0]))
        r11 = riesz(0, 0, f)
        r12 = riesz(0, 1, f)
        assert np.max(np.abs(r11.values - f.values)) < 1e-12
        assert np.max(np.abs(r12.values)) < 1e-13

    def test_constant_annihilated(self):
        grid = TorusGrid(2, 16)
        f = ScalarField.constant(grid, 3.0)
        for i in range(2):
            for j in range(2):
                assert np.max(np.abs(riesz(i, j, f).values)) < 1e-13

    def test_trace_identity(self):
        grid = TorusGrid(2, 16)
        f = random_field(grid, seed=8)
        total = sum(riesz(i, i, f).values for i in range(2))
        assert np.max(np.abs(total - (f.values - f.mean()))) < 1e-10

    def test_symmetry_in_indices(self):
        grid = TorusGrid(2, 16)
        f = random_field(grid, seed=9)
        assert np.max(np.abs(riesz(0, 1, f).values - riesz(1, 0, f).values)) < 1e-13


class TestSobolevNorm:
    def test_constant(self):
        grid = TorusGrid(2, 16)
        f = ScalarField.constant(grid, -2.0)
        for s in (-2.0, 0.0, 1.0, 3.0):
            assert abs(sobolev_norm(f, s) - 2.0) < 1e-13

    def test_single_mode_weight(self):
        grid = TorusGrid(1, 16)
        f = ScalarField(grid, np.cos(2 * np.pi * grid.coords[0]))
        expected = np.sqrt((1 + 4 * np.pi**2) / 2)
        assert abs(sobolev_norm(f, 1.0) - expected) < 1e-12

    def test_s0_is_rms(self):
        grid = TorusGrid(2, 16)
        f = random_field(grid, seed=10)
        rms = np.sqrt(np.mean(f.values**2))
        assert abs(sobolev_norm(f, 0.0) - rms) < 1e-12


class TestCalculus:
    def test_grad_of_cosine(self):
        grid = TorusGrid(2, 16)
        f = ScalarField(grid, np.cos(2 * np.pi * grid.coords[0]))
        g = grad(f)
        expected = -2 * np.pi * np.sin(2 * np.pi * grid.coords[0])
        assert np.max(np.abs(g.components[0] - expected)) < 1e-11
        assert np.max(np.abs(g.components[1])) < 1e-12

    def test_div_of_constant_vector(self):
        grid = TorusGrid(2, 16)
        v = VectorField(grid, [np.full(grid.shape, 1.5), np.full(grid.shape, -0.5)])
        assert np.max(np.abs(div(v).values)) < 1e-13

    def test_div_grad_is_laplacian(self):
        grid = TorusGrid(2, 16)
        f = project_trig(random_field(grid, seed=11), 4)
        lhs = div(grad(f)).values
        rhs = laplacian(f).values
        assert np.max(np.abs(lhs - rhs)) < 1e-11

    def test_zero_mean_outputs(self):
        grid = TorusGrid(2, 16)
        f = random_field(grid, seed=12)
        assert abs(laplacian(f).mean()) < 1e-13
        assert abs(div(grad(f)).mean()) < 1e-13


class TestParseval:
    @pytest.mark.parametrize("d,m", [(1, 16), (2, 16), (2, 32)])
    def test_parseval(self, d, m):
        grid = TorusGrid(d, m)
        f = random_field(grid, seed=13)
        spatial = np.sqrt(np.mean(f.values**2))
        spectral = np.sqrt(np.sum(np.abs(to_spectral(f)) ** 2))
        assert abs(spatial - spectral) / spatial < 1e-12
