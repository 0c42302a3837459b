import numpy as np
import pytest

from scns import oracles
from scns.errors import PreconditionError, StepRejected
from scns.spectral import ScalarField, TorusGrid, VectorField
from scns.transport import (
    EXPONENTIAL,
    IMPLICIT,
    DensityBounds,
    RenormFunction,
    TransportConfig,
    advance_density,
    cutoff_Lk,
    cutoff_Tk,
    cutoff_Tk_prime,
    maximum_principle_bounds,
    ramp_T,
    ramp_T_prime,
    renormalized_residual,
)


def swirl_velocity(grid, amp=0.3):
    x, y = grid.coords
    return VectorField(
        grid,
        [amp * np.sin(2 * np.pi * y), amp * np.cos(2 * np.pi * x)],
    )


class TestAdvanceDensity:
    def test_heat_kernel_exact(self):
        grid = TorusGrid(2, 16)
        eps, dt = 0.05, 1e-2
        rho = ScalarField(grid, 1.0 + np.cos(2 * np.pi * grid.coords[0]))
        cfg = TransportConfig(epsilon=eps, dt=dt, scheme=EXPONENTIAL)
        out = advance_density(rho, VectorField.zero(grid), cfg)
        expected = 1.0 + np.exp(-4 * np.pi**2 * eps * dt) * np.cos(
            2 * np.pi * grid.coords[0]
        )
        assert np.max(np.abs(out.values - expected)) < 1e-10

    def test_zero_velocity_zero_eps_is_identity(self):
        grid = TorusGrid(2, 16)
        rho = ScalarField(grid, 1.0 + 0.4 * np.sin(2 * np.pi * grid.coords[1]))
        cfg = TransportConfig(epsilon=0.0, dt=1e-2)
        out = advance_density(rho, VectorField.zero(grid), cfg)
        assert np.max(np.abs(out.values - rho.values)) < 1e-14

    @pytest.mark.parametrize("scheme", [EXPONENTIAL, IMPLICIT])
    def test_mass_conserved_per_step(self, scheme):
        grid = TorusGrid(2, 16)
        rho = ScalarField(grid, 1.0 + 0.3 * np.cos(2 * np.pi * grid.coords[0]))
        u = swirl_velocity(grid)
        cfg = TransportConfig(epsilon=0.02, dt=1e-2, scheme=scheme)
        for _ in range(50):
            new = advance_density(rho, u, cfg)
            assert abs(new.mean() - rho.mean()) < 1e-13
            rho = new

    def test_first_order_against_fine_step_oracle(self):
        # fine-step self-oracle: 100x finer steps over the same interval
        grid = TorusGrid(2, 16)
        rho0 = ScalarField(grid, 1.0 + 0.3 * np.cos(2 * np.pi * grid.coords[0]))
        u = swirl_velocity(grid)

        def run(dt, steps):
            cfg = TransportConfig(epsilon=0.02, dt=dt)
            rho = rho0
            for _ in range(steps):
                rho = advance_density(rho, u, cfg)
            return rho.values

        errors = []
        for dt in (2e-2, 1e-2):
            coarse = run(dt, int(round(0.1 / dt)))
            fine = run(dt / 100, int(round(0.1 / dt * 100)))
            errors.append(np.max(np.abs(coarse - fine)))
        order = np.log2(errors[0] / errors[1])
        assert order >= 0.9

    def test_negative_undershoot_rejected(self):
        grid = TorusGrid(2, 16)
        # near-vacuum density with strong compressive velocity
        rho = ScalarField(grid, 1e-6 + 0.0 * grid.coords[0])
        x = grid.coords[0]
        u = VectorField(grid, [np.sin(2 * np.pi * x), np.zeros(grid.shape)])
        cfg = TransportConfig(epsilon=0.0, dt=0.5)
        with pytest.raises(StepRejected):
            advance_density(rho, u, cfg)

    def test_negative_density_precondition(self):
        grid = TorusGrid(2, 16)
        rho = ScalarField(grid, -0.5 + 0.0 * grid.coords[0])
        with pytest.raises(PreconditionError):
            advance_density(rho, VectorField.zero(grid), TransportConfig(dt=1e-3))


class TestMaximumPrinciple:
    def test_divergence_free_path(self):
        b = maximum_principle_bounds(0.5, 2.0, [0.0] * 10, dt=0.1)
        assert b.lower == 0.5 and b.upper == 2.0

    def test_constant_divergence(self):
        c, t = 0.7, 1.0
        steps = 100
        b = maximum_principle_bounds(0.5, 2.0, [c] * steps, dt=t / steps)
        assert abs(b.lower - 0.5 * np.exp(-c * t)) < 1e-12
        assert abs(b.upper - 2.0 * np.exp(c * t)) < 1e-12

    def test_monotone_in_time(self):
        rng = np.random.default_rng(0)
        series = rng.uniform(0, 1, size=50)
        lowers, uppers = [], []
        for n in range(1, 51):
            b = maximum_principle_bounds(0.5, 2.0, series[:n], dt=0.01)
            lowers.append(b.lower)
            uppers.append(b.upper)
        assert all(x >= y for x, y in zip(lowers, lowers[1:]))
        assert all(x <= y for x, y in zip(uppers, uppers[1:]))

    def test_transport_path_contained(self):
        grid = TorusGrid(2, 16)
        rho = ScalarField(grid, 1.0 + 0.3 * np.cos(2 * np.pi * grid.coords[0]))
        x, y = grid.coords
        u = VectorField(
            grid, [0.2 * np.sin(2 * np.pi * x), 0.1 * np.cos(2 * np.pi * y)]
        )
        cfg = TransportConfig(epsilon=0.01, dt=2e-3)
        sups = []
        r0_min, r0_max = np.min(rho.values), np.max(rho.values)
        for _ in range(100):
            rho = advance_density(rho, u, cfg)
            sups.append(np.max(np.abs(u.grid.div_arr(u.components))))
            b = maximum_principle_bounds(r0_min, r0_max, sups, cfg.dt)
            assert b.contains(rho.values, slack=1e-6)

    def test_requires_positive_min(self):
        with pytest.raises(PreconditionError):
            maximum_principle_bounds(0.0, 1.0, [0.0], dt=0.1)


class TestCutoffs:
    def test_tk_below_knee(self):
        grid = TorusGrid(1, 8)
        rho = ScalarField.constant(grid, 0.5)
        out = cutoff_Tk(rho, 1.0)
        assert np.max(np.abs(out.values - 0.5)) < 1e-14

    def test_tk_saturated(self):
        grid = TorusGrid(1, 8)
        rho = ScalarField.constant(grid, 10.0)
        out = cutoff_Tk(rho, 1.0)
        assert np.max(np.abs(out.values - 2.0)) < 1e-14

    def test_tk_matches_derivative_quadrature_oracle(self):
        # integrate the documented T' numerically and compare with T on [0,5]
        for z in np.linspace(0.1, 5.0, 23):
            ref = oracles.quadrature_1d(ramp_T_prime, 0.0, float(z))
            assert abs(ramp_T(z) - ref) < 1e-7

    def test_tk_pointwise_properties(self):
        z = np.linspace(0.0, 20.0, 2001)
        for k in (1.0, 2.0, 5.0):
            tk = k * ramp_T(z / k)
            tkp = ramp_T_prime(z / k)
            assert np.all(tk <= np.minimum(z, 2 * k) + 1e-12)
            assert np.all((tkp >= -1e-12) & (tkp <= 1.0 + 1e-12))
            assert np.all(tkp * z <= tk + 1e-12)
            # T_k(z) = z below the knee
            below = z <= k
            assert np.max(np.abs(tk[below] - z[below])) < 1e-12

    def test_tk_concave(self):
        z = np.linspace(0.0, 10.0, 1001)
        tk = 2.0 * ramp_T(z / 2.0)
        second = np.diff(tk, 2)
        assert np.all(second <= 1e-10)

    def test_lk_below_knee_is_zlogz(self):
        grid = TorusGrid(1, 8)
        rho = ScalarField.constant(grid, 0.5)
        out = cutoff_Lk(rho, 2.0)
        assert np.max(np.abs(out.values - 0.5 * np.log(0.5))) < 1e-13

    def test_lk_continuation_matches_quadrature_oracle(self):
        # L_k(z) = z ln k + z * int_k^z T_k(s)/s^2 ds for z >= k
        k = 2.0
        grid = TorusGrid(1, 8)
        for z in (2.5, 4.0, 7.0, 12.0):
            integral = oracles.quadrature_1d(
                lambda s: k * ramp_T(s / k) / s**2, k, z, n=200000
            )
            ref = z * np.log(k) + z * integral
            out = cutoff_Lk(ScalarField.constant(grid, z), k)
            assert abs(out.values.flat[0] - ref) < 1e-6

    def test_k_below_one_rejected(self):
        grid = TorusGrid(1, 8)
        with pytest.raises(PreconditionError):
            cutoff_Tk(ScalarField.constant(grid, 1.0), 0.5)


class TestRenormalizedResidual:
    def _path(self, grid, steps, cfg, amp=0.2):
        rho = ScalarField(grid, 1.0 + 0.3 * np.cos(2 * np.pi * grid.coords[0]))
        u = swirl_velocity(grid, amp=amp)
        path = [(rho, u)]
        for _ in range(steps):
            rho = advance_density(rho, u, cfg)
            path.append((rho, u))
        return path

    def test_identity_b_constant_psi_gives_mass_defect(self):
        grid = TorusGrid(2, 16)
        cfg = TransportConfig(epsilon=0.02, dt=2e-3)
        path = self._path(grid, 50, cfg)
        res = renormalized_residual(
            path, RenormFunction.identity(), ScalarField.constant(grid, 1.0), cfg
        )
        assert abs(res) < 1e-12

    def test_constant_state_zero_residual(self):
        grid = TorusGrid(2, 16)
        cfg = TransportConfig(epsilon=0.05, dt=1e-2)
        rho = ScalarField.constant(grid, 1.0)
        path = [(rho, VectorField.zero(grid))] * 20
        psi = ScalarField(grid, np.cos(2 * np.pi * grid.coords[0]))
        res = renormalized_residual(path, RenormFunction.tk(2.0), psi, cfg)
        assert abs(res) < 1e-13

    def test_residual_shrinks_with_dt(self):
        grid = TorusGrid(2, 16)
        psi = ScalarField(grid, np.cos(2 * np.pi * grid.coords[0]))
        b = RenormFunction.tk(2.0)
        res = []
        for dt in (4e-3, 2e-3):
            cfg = TransportConfig(epsilon=0.02, dt=dt)
            path = self._path(grid, int(round(0.2 / dt)), cfg)
            res.append(abs(renormalized_residual(path, b, psi, cfg)))
        ratio = res[0] / res[1]
        # halving dt should roughly halve the residual (+-30%)
        assert 1.4 <= ratio <= 2.6


def test_bounds_invariant():
    with pytest.raises(PreconditionError):
        DensityBounds(lower=2.0, upper=1.0, divu_integral=0.0)
