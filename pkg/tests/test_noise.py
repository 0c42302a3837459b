import numpy as np
import pytest

from scns.errors import PositivityLost, PreconditionError
from scns.mass import GalerkinBasis, assemble_M, sqrt_M
from scns.noise import (
    BrownianPath,
    NoiseModel,
    assemble_PhiN,
    embedding_constant,
    eval_g,
    growth_bounds,
    hs_norm_check,
    path_rng,
    sample_increment,
    u0_norm,
)
from scns.spectral import ScalarField, TorusGrid, VectorField, sobolev_norm


@pytest.fixture
def grid():
    return TorusGrid(2, 16)


def random_state(grid, rng, floor=0.3):
    rho = np.zeros(grid.shape)
    for _ in range(3):
        k = rng.integers(-2, 3, size=grid.d)
        rho += 0.2 * rng.standard_normal() * np.cos(
            2 * np.pi * sum(ki * xi for ki, xi in zip(k, grid.coords))
            + rng.uniform(0, 2 * np.pi)
        )
    rho = ScalarField(grid, rho - rho.min() + floor)
    q = VectorField(grid, [0.3 * rng.standard_normal(grid.shape) for _ in range(grid.d)])
    return rho, q


class TestEvalG:
    def test_affine_vanishes_at_zero_state(self, grid):
        model = NoiseModel(grid, K=4, family="affine")
        g = eval_g(model, 0, ScalarField.constant(grid, 0.0), VectorField.zero(grid))
        assert all(np.max(np.abs(c)) == 0.0 for c in g.components)

    def test_power_at_unit_density(self, grid):
        model = NoiseModel(grid, K=4, family="power", c0=0.2)
        for k in range(4):
            g = eval_g(model, k, ScalarField.constant(grid, 1.0), VectorField.zero(grid))
            expected = model.c[k] * model.f[k]
            assert np.max(np.abs(g.components[model.axis[k]] - expected)) < 1e-14
            for i, c in enumerate(g.components):
                if i != model.axis[k]:
                    assert np.max(np.abs(c)) == 0.0

    def test_power_vanishes_where_density_does(self, grid):
        model = NoiseModel(grid, K=2, family="power")
        rho = np.maximum(np.cos(2 * np.pi * grid.coords[0]), 0.0)
        g = eval_g(model, 0, ScalarField(grid, rho), VectorField.zero(grid))
        mask = rho == 0.0
        for c in g.components:
            assert np.max(np.abs(c[mask])) == 0.0

    @pytest.mark.parametrize("family", ["affine", "power", "split"])
    def test_matches_scalar_loop_oracle(self, grid, family):
        model = NoiseModel(grid, K=5, family=family, c0=0.3)
        rng = np.random.default_rng(2)
        rho, q = random_state(grid, rng)
        gamma = model.gamma
        for k in range(model.K):
            g = eval_g(model, k, rho, q)
            ck, fk, hk, a = model.c[k], model.f[k], model.h[k], model.axis[k]
            for idx in np.ndindex(grid.shape):
                r = rho.values[idx]
                qs = [qc[idx] for qc in q.components]
                if family == "affine":
                    ref = [ck * hk[idx] * qi for qi in qs]
                    ref[a] += ck * r * fk[idx]
                elif family == "power" or (family == "split" and k % 2 == 0):
                    ref = [0.0] * grid.d
                    ref[a] = ck * r ** ((gamma + 1) / 2) * fk[idx]
                else:
                    ref = [ck * hk[idx] * qi for qi in qs]
                for i in range(grid.d):
                    assert abs(g.components[i][idx] - ref[i]) < 1e-14

    def test_index_validation(self, grid):
        model = NoiseModel(grid, K=2)
        with pytest.raises(PreconditionError):
            eval_g(model, 2, ScalarField.constant(grid, 1.0), VectorField.zero(grid))


class TestGrowthConditions:
    @pytest.mark.parametrize("family", ["affine", "power", "split"])
    def test_audit_on_random_samples(self, grid, family):
        model = NoiseModel(grid, K=8, family=family, c0=0.5)
        rng = np.random.default_rng(7)
        rho = rng.uniform(0.0, 10.0, size=1000)
        q = rng.normal(0.0, 3.0, size=(1000, grid.d))
        lhs1, rhs1, lhs2, rhs2 = growth_bounds(model, rho, q)
        assert np.all(lhs1 <= rhs1 * (1 + 1e-12))
        assert np.all(lhs2 <= rhs2 * (1 + 1e-12))

    def test_tail_bound_dominates_true_tail(self, grid):
        model = NoiseModel(grid, K=8, c0=0.5)
        true_tail = 0.5**2 * sum(1.0 / k**2 for k in range(9, 100000))
        assert true_tail <= model.tail_bound


class TestPhiN:
    def test_unit_density_reduces_to_projection(self, grid):
        model = NoiseModel(grid, K=4, family="affine", c0=0.2)
        basis = GalerkinBasis(grid, 2)
        rho = ScalarField.constant(grid, 1.0)
        rng = np.random.default_rng(3)
        q = VectorField(grid, [0.2 * rng.standard_normal(grid.shape) for _ in range(2)])
        M = assemble_M(rho, basis)
        Phi = assemble_PhiN(model, rho, q, basis, M)
        for k in range(4):
            ref = basis.project(eval_g(model, k, rho, q))
            assert np.max(np.abs(Phi[:, k] - ref)) < 1e-10

    def test_zero_amplitude_model(self, grid):
        model = NoiseModel(grid, K=3, c0=0.0)
        basis = GalerkinBasis(grid, 2)
        rho = ScalarField.constant(grid, 1.0)
        M = assemble_M(rho, basis)
        Phi = assemble_PhiN(model, rho, VectorField.zero(grid), basis, M)
        assert np.max(np.abs(Phi)) == 0.0

    def test_composition_oracle(self, grid):
        # columns equal sqrt_M @ project(g_k / sqrt(rho)) assembled by hand
        model = NoiseModel(grid, K=4, family="affine", c0=0.2)
        basis = GalerkinBasis(grid, 2)
        rho = ScalarField(grid, 1.0 + 0.5 * np.cos(2 * np.pi * grid.coords[0]))
        rng = np.random.default_rng(4)
        q = VectorField(grid, [0.2 * rng.standard_normal(grid.shape) for _ in range(2)])
        M = assemble_M(rho, basis)
        Phi = assemble_PhiN(model, rho, q, basis, M)
        root = sqrt_M(M)
        for k in range(4):
            g = eval_g(model, k, rho, q)
            scaled = VectorField(
                grid, [c / np.sqrt(rho.values) for c in g.components]
            )
            ref = root @ basis.project(scaled)
            assert np.max(np.abs(Phi[:, k] - ref)) < 1e-12

    def test_positivity_floor(self, grid):
        model = NoiseModel(grid, K=2)
        basis = GalerkinBasis(grid, 2)
        rho = ScalarField(grid, 0.5 + 0.5 * np.cos(2 * np.pi * grid.coords[0]))
        M = assemble_M(rho, basis)
        with pytest.raises(PositivityLost):
            assemble_PhiN(model, rho, VectorField.zero(grid), basis, M)


class TestHSBound:
    def test_zero_density(self, grid):
        model = NoiseModel(grid, K=4)
        lhs, rhs = hs_norm_check(
            model, ScalarField.constant(grid, 0.0), VectorField.zero(grid)
        )
        assert lhs == 0.0 and rhs == 0.0

    def test_unit_density_zero_velocity_direct_sum(self, grid):
        model = NoiseModel(grid, K=6, family="affine", c0=0.3)
        lhs, _ = hs_norm_check(
            model, ScalarField.constant(grid, 1.0), VectorField.zero(grid)
        )
        direct = sum(
            model.c[k] ** 2
            * sobolev_norm(ScalarField(grid, model.f[k]), -1.0) ** 2
            for k in range(6)
        )
        assert abs(lhs - direct) < 1e-12

    @pytest.mark.parametrize("family", ["affine", "power", "split"])
    def test_random_audit(self, grid, family):
        model = NoiseModel(grid, K=6, family=family, c0=0.4)
        rng = np.random.default_rng(11)
        for _ in range(100):
            rho, q = random_state(grid, rng, floor=rng.uniform(0.1, 1.0))
            v = VectorField(grid, [qc / rho.values for qc in q.components])
            lhs, rhs = hs_norm_check(model, rho, v)
            assert lhs <= rhs * (1 + 1e-12)

    def test_embedding_constant_monotone_in_b(self, grid):
        assert embedding_constant(grid, 2.0) < embedding_constant(grid, 1.0)


class TestSampling:
    def test_moments(self):
        rng = path_rng(123, 0)
        draws = np.stack([sample_increment(4, 0.01, rng).dW for _ in range(25000)])
        flat = draws.ravel()  # 1e5 scalar draws
        assert abs(flat.mean()) <= 3 * np.sqrt(0.01 / flat.size)
        assert 0.0097 <= flat.var() <= 0.0103

    def test_requires_positive_dt(self):
        with pytest.raises(PreconditionError):
            sample_increment(2, 0.0, path_rng(0, 0))

    def test_counter_rng_order_independent(self):
        a = [sample_increment(3, 0.1, path_rng(9, 1, s)).dW for s in range(5)]
        b = [sample_increment(3, 0.1, path_rng(9, 1, s)).dW for s in reversed(range(5))]
        for s in range(5):
            assert np.array_equal(a[s], b[4 - s])

    def test_distinct_paths_and_steps_differ(self):
        x = sample_increment(3, 0.1, path_rng(9, 1, 0)).dW
        y = sample_increment(3, 0.1, path_rng(9, 2, 0)).dW
        z = sample_increment(3, 0.1, path_rng(9, 1, 1)).dW
        assert not np.array_equal(x, y) and not np.array_equal(x, z)

    def test_u0_norm(self):
        assert u0_norm(np.array([1.0, 0.0, 0.0])) == 1.0
        assert abs(u0_norm(np.array([0.0, 0.0, 1.0])) - 1.0 / 3.0) < 1e-15

    def test_brownian_path_refinement_consistency(self):
        bp = BrownianPath(seed=5, path_index=2, K=3, T=1.0, n_fine=64)
        fine = bp.increments(64)
        for n in (32, 16, 8, 1):
            coarse = bp.increments(n)
            assert np.allclose(
                coarse, fine.reshape(n, 64 // n, 3).sum(axis=1), atol=0
            )
        with pytest.raises(PreconditionError):
            bp.increments(48)


class TestItoIsometry:
    def test_frozen_state_isometry(self, grid):
        # with the state frozen, E[(sum_n <Phi dW_n, phi>)^2] = n dt |Phi^T phi|^2
        model = NoiseModel(grid, K=4, family="affine", c0=0.3)
        basis = GalerkinBasis(grid, 2)
        rng = np.random.default_rng(21)
        rho, q = random_state(grid, rng)
        M = assemble_M(rho, basis)
        Phi = assemble_PhiN(model, rho, q, basis, M)
        phi = rng.standard_normal(basis.N)
        proj = Phi.T @ phi  # (K,)

        n_steps, dt, n_paths = 10, 0.01, 10000
        samples = np.empty(n_paths)
        for p in range(n_paths):
            acc = 0.0
            for s in range(n_steps):
                dW = sample_increment(model.K, dt, path_rng(77, p, s)).dW
                acc += proj @ dW
            samples[p] = acc**2
        expected = n_steps * dt * float(proj @ proj)
        se = samples.std(ddof=1) / np.sqrt(n_paths)
        assert abs(samples.mean() - expected) <= 4 * se
