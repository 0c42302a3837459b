"""Identity and inequality checks on simulated paths and ensembles.

Everything here is computed from stored path records: energy reports, the
discrete Ito balance for the kinetic energy, the pressure-integrability
identity from testing momentum with the inverse-Laplacian gradient of the
density, martingale identification statistics, effective-viscous-flux sweeps,
and path-space Hoelder/commutator reports.

Deterministic integrals use left-endpoint Riemann sums with the same field
assembly as the time stepper, so the discrete defects reduce to time
discretization rather than operator mismatch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import PreconditionError
from .galerkin import (
    GalerkinState,
    PathRecord,
    SimConfig,
    System,
    dissipation_rate,
    energy,
    run_path,
)
from .mass import assemble_M
from .noise import eval_g
from .spectral import ScalarField, VectorField, sobolev_norm
from .transport import cutoff_Tk

__all__ = [
    "energy",
    "dissipation_rate",
    "energy_mc_report",
    "ito_energy_residual",
    "cancellation_checks",
    "pressure_identity_residual",
    "pressure_integrability",
    "theta_exponent_check",
    "martingale_functionals",
    "martingale_summaries",
    "martingale_test",
    "h_library",
    "effective_flux_sweep",
    "flux_integral",
    "path_space_norms",
    "riesz_commutator",
    "riesz_commutator_sweep",
]


# -- ensemble energy report ----------------------------------------------------


@dataclass
class EnergyReport:
    n_paths: int
    sup_energy_moment: dict  # p -> (estimate, stderr)
    dissipation_moment: dict
    initial_moment: dict
    ratio: dict  # p -> measured C-hat = (sup E + int D moment) / (1 + E0 moment)


def energy_mc_report(records: list[PathRecord], system: System, ps=(1, 2)):
    """Moments of pathwise sup-energy and total dissipation with MC errors."""
    if len(records) < 2:
        raise PreconditionError("need at least two independent paths")
    dt = system.cfg.dt
    sup_e = np.array([r.energy.max() for r in records])
    diss = np.array([np.sum(dt * r.dissipation) for r in records])
    e0 = np.array([r.energy[0] for r in records])
    n = len(records)

    def moment(x, p):
        v = x**p
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(n))

    report = EnergyReport(n, {}, {}, {}, {})
    for p in ps:
        report.sup_energy_moment[p] = moment(sup_e, p)
        report.dissipation_moment[p] = moment(diss, p)
        report.initial_moment[p] = moment(e0, p)
        lhs = float(np.mean((sup_e + diss) ** p))
        report.ratio[p] = lhs / (1.0 + report.initial_moment[p][0])
    return report


# -- Ito energy identity -------------------------------------------------------


def _state_at(rec: PathRecord, system: System, i: int) -> GalerkinState:
    """State at step index i, reconstructed from stored fields (store_rho runs)."""
    if len(rec.steps) != len(rec.times) - 1:
        raise PreconditionError(
            "path contains halved steps; identity checks need uniform steps"
        )
    t = rec.times[i]
    if t not in rec.snapshots:
        raise PreconditionError("path must be run with store_rho=True")
    rho_vals, u_coeffs = rec.snapshots[t]
    return GalerkinState(t, ScalarField(system.grid, rho_vals), u_coeffs.copy())


def _kinetic(state: GalerkinState, system: System) -> float:
    M = assemble_M(state.rho, system.basis)
    return 0.5 * float(state.u_coeffs @ M.entries @ state.u_coeffs)


def _energy_j_increments(state: GalerkinState, system: System):
    """Left-endpoint rates of the deterministic terms in the kinetic balance.

    Returns (j2..j7, j9, j10) rates; products are formed without extra
    truncation, which at desk-scale cutoffs matches the stepper pairings
    exactly (all participating modes are resolved).
    """
    cfg = system.cfg
    grid = system.grid
    u = state.velocity(system.basis)
    r = state.rho.values
    gu = [grid.grad_arr(c) for c in u.components]
    divu = grid.div_arr(u.components)
    gr = grid.grad_arr(r)
    speed2 = sum(c**2 for c in u.components)
    gspeed2 = grid.grad_arr(speed2)

    j2 = -cfg.nu * float(sum(np.mean(gij**2) for g in gu for gij in g))
    j3 = -(cfg.lam + cfg.nu) * float(np.mean(divu**2))
    j4 = float(
        np.mean(
            sum(
                r * u.components[i] * u.components[j] * gu[i][j]
                for i in range(grid.d)
                for j in range(grid.d)
            )
        )
    )
    j5 = -cfg.epsilon * float(
        np.mean(
            sum(gu[i][j] * gr[j] * u.components[i]
                for i in range(grid.d) for j in range(grid.d))
        )
    )
    j6 = cfg.a * float(np.mean(r**cfg.gamma * divu))
    j7 = cfg.delta * float(np.mean(r**cfg.beta * divu))
    j9 = 0.5 * cfg.epsilon * float(
        np.mean(sum(gspeed2[j] * gr[j] for j in range(grid.d)))
    )
    j10 = -0.5 * float(
        np.mean(sum(gspeed2[j] * r * u.components[j] for j in range(grid.d)))
    )
    return j2, j3, j4, j5, j6, j7, j9, j10


def ito_energy_residual(rec: PathRecord, system: System) -> np.ndarray:
    """Cumulative defect of the discrete kinetic-energy Ito balance.

    The balance equates the kinetic energy increment with the sum of viscous,
    convective, pressure-work, regularization, transport-coupling terms, the
    realized stochastic work, and the realized quadratic-variation correction.
    Returns the running residual at each step edge (residual[0] = 0).
    """
    out = [0.0]
    acc = 0.0
    for i, step in enumerate(rec.steps):
        s0 = _state_at(rec, system, i)
        s1 = _state_at(rec, system, i + 1)
        rates = _energy_j_increments(s0, system)
        det = sum(rates) * step.dt
        stoch = float(step.u_before @ step.noise)
        dkin = _kinetic(s1, system) - _kinetic(s0, system)
        acc += dkin - det - stoch - step.qv_real
        out.append(acc)
    return np.array(out)


def cancellation_checks(rec: PathRecord, system: System):
    """Per-step relative sizes of the two exact cancellations in the balance.

    The convective pair (transport of kinetic energy against its own
    gradient) and the epsilon pair cancel identically in the continuum;
    discretely they cancel to rounding when the quadratic fields are resolved.
    Returns (eps_pair, convective_pair) arrays of relative residuals.
    """
    eps_pair, conv_pair = [], []
    for i in range(len(rec.steps)):
        s = _state_at(rec, system, i)
        _, _, j4, j5, _, _, j9, j10 = _energy_j_increments(s, system)
        scale_eps = max(abs(j5), abs(j9), 1e-30)
        scale_conv = max(abs(j4), abs(j10), 1e-30)
        eps_pair.append(abs(j5 + j9) / scale_eps)
        conv_pair.append(abs(j4 + j10) / scale_conv)
    return np.array(eps_pair), np.array(conv_pair)


# -- pressure integrability identity -------------------------------------------


def _pressure_f(state: GalerkinState, system: System) -> float:
    """f(rho, q) = int q . (inverse-Laplacian gradient of rho)."""
    grid = system.grid
    u = state.velocity(system.basis)
    ilg = grid.inv_lap_grad_arr(state.rho.values)
    return float(
        np.mean(sum(state.rho.values * u.components[i] * ilg[i]
                    for i in range(grid.d)))
    )


def _pressure_j_rates(state: GalerkinState, system: System):
    """Left-endpoint rates of the deterministic terms of the pressure identity."""
    cfg = system.cfg
    grid = system.grid
    u = state.velocity(system.basis)
    r = state.rho.values
    q = [r * c for c in u.components]
    ilg = grid.inv_lap_grad_arr(r)
    # gradient of the inverse-Laplacian gradient: d_i (ilg_j)
    g_ilg = [grid.grad_arr(c) for c in ilg]
    gu = [grid.grad_arr(c) for c in u.components]
    divu = grid.div_arr(u.components)
    gr = grid.grad_arr(r)

    j2 = -cfg.nu * float(
        np.mean(sum(gu[i][j] * g_ilg[i][j] for i in range(grid.d)
                    for j in range(grid.d)))
    )
    j3 = -(cfg.lam + cfg.nu) * float(np.mean(divu * r))
    j4 = float(
        np.mean(sum(q[i] * u.components[j] * g_ilg[i][j]
                    for i in range(grid.d) for j in range(grid.d)))
    )
    j5 = -cfg.epsilon * float(
        np.mean(sum(gu[i][j] * gr[j] * ilg[i]
                    for i in range(grid.d) for j in range(grid.d)))
    )
    j6 = float(np.mean(cfg.a * r ** (cfg.gamma + 1) + cfg.delta * r ** (cfg.beta + 1)))
    j7 = -float(np.mean(r)) * float(
        np.mean(cfg.a * r**cfg.gamma + cfg.delta * r**cfg.beta)
    )
    j9 = cfg.epsilon * float(np.mean(sum(q[j] * gr[j] for j in range(grid.d))))
    divq = grid.div_arr(q)
    ilg_divq = grid.inv_lap_grad_arr(divq)
    j10 = -float(np.mean(sum(q[j] * ilg_divq[j] for j in range(grid.d))))
    return j2, j3, j4, j5, j6, j7, j9, j10


def pressure_identity_residual(rec: PathRecord, system: System) -> np.ndarray:
    """Cumulative defect of the discrete pressure-integrability identity.

    The identity tests momentum with the inverse-Laplacian gradient of the
    density; it is linear in q so no quadratic-variation correction appears.
    The stochastic term pairs the realized noise increment with that field.
    Requires a store_rho path.
    """
    grid = system.grid
    out = [0.0]
    acc = 0.0
    for i, step in enumerate(rec.steps):
        s0 = _state_at(rec, system, i)
        s1 = _state_at(rec, system, i + 1)
        det = sum(_pressure_j_rates(s0, system)) * step.dt
        # stochastic pairing: <ilg(rho), dq_noise> with the noise synthesized
        ilg = grid.inv_lap_grad_arr(s0.rho.values)
        noise_field = system.basis.synthesize(step.noise)
        stoch = float(
            np.mean(sum(ilg[i_] * noise_field.components[i_]
                        for i_ in range(grid.d)))
        )
        df = _pressure_f(s1, system) - _pressure_f(s0, system)
        acc += df - det - stoch
        out.append(acc)
    return np.array(out)


def theta_exponent_check(theta: float, gamma: float) -> float:
    """Validate the extra density exponent; returns theta if admissible."""
    limit = 2.0 * gamma / 3.0 - 1.0
    if theta > limit + 1e-12:
        raise PreconditionError(
            f"theta = {theta} exceeds the admissible bound 2*gamma/3 - 1 = {limit:.6g}"
        )
    return theta


def pressure_integrability(
    records: list[PathRecord],
    system: System,
    mode: str = "full_density",
    k: float = 1.0,
    theta: float = 0.0,
):
    """Ensemble estimate of the improved-integrability functional.

    mode full_density: E int (a rho^{gamma+1} + delta rho^{beta+1});
    mode tk: the analogue weighted by the truncated density T_k(rho);
    mode theta: E int (a rho^{gamma+theta} + delta rho^{beta+theta}), with the
    exponent bound theta <= 2 gamma / 3 - 1 enforced.

    Returns dict with estimate, stderr, and the per-path identity defects.
    """
    cfg = system.cfg
    if mode == "theta":
        theta_exponent_check(theta, cfg.gamma)
    vals, defects = [], []
    for rec in records:
        total = 0.0
        for i, step in enumerate(rec.steps):
            s = _state_at(rec, system, i)
            r = s.rho.values
            if mode == "full_density":
                w = r
            elif mode == "tk":
                w = cutoff_Tk(s.rho, k).values
            elif mode == "theta":
                w = r**theta
            else:
                raise PreconditionError(f"unknown mode {mode!r}")
            total += step.dt * float(
                np.mean((cfg.a * r**cfg.gamma + cfg.delta * r**cfg.beta) * w)
            )
        vals.append(total)
        defects.append(pressure_identity_residual(rec, system)[-1])
    vals = np.array(vals)
    return {
        "mode": mode,
        "estimate": float(vals.mean()),
        "stderr": float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0,
        "identity_defects": np.array(defects),
    }


# -- martingale identification --------------------------------------------------


def _q_pairing(state: GalerkinState, system: System, phi_field: VectorField):
    u = state.velocity(system.basis)
    return float(
        np.mean(sum(state.rho.values * u.components[i] * phi_field.components[i]
                    for i in range(system.grid.d)))
    )


def _drift_pairing_rate(state, system, phi_field, gphi, divphi) -> float:
    """<momentum drift, phi> with the stepper's own product truncations."""
    grid = system.grid
    cfg = system.cfg
    u = state.velocity(system.basis)
    r = state.rho.values
    gu = [grid.grad_arr(c) for c in u.components]
    divu = grid.div_arr(u.components)
    gr = grid.grad_arr(r)
    # convection paired through the same pairwise-truncated flux the stepper
    # uses, so the drift subtraction is discretely exact
    rate = float(
        np.mean(
            sum(
                grid.dealias_arr(
                    grid.dealias_arr(r * u.components[i_]) * u.components[j]
                )
                * gphi[i_][j]
                for i_ in range(grid.d)
                for j in range(grid.d)
            )
        )
    )
    rate -= cfg.nu * float(
        np.mean(sum(gu[i_][j] * gphi[i_][j]
                    for i_ in range(grid.d) for j in range(grid.d)))
    )
    rate -= (cfg.lam + cfg.nu) * float(np.mean(divu * divphi))
    rate += float(np.mean((cfg.a * r**cfg.gamma + cfg.delta * r**cfg.beta) * divphi))
    rate -= cfg.epsilon * float(
        np.mean(sum(gu[i_][j] * gr[j] * phi_field.components[i_]
                    for i_ in range(grid.d) for j in range(grid.d)))
    )
    return rate


def martingale_functionals(rec: PathRecord, system: System, phi: np.ndarray):
    """Martingale-candidate series for a test function phi in X_N coefficients.

    M is assembled term by term from the stored fields with the weak-form
    sign convention: momentum increment, plus convection paired with the test
    gradient, minus viscous and divergence pairings, plus both pressure terms
    paired with the test divergence, minus the epsilon coupling.  Requires a
    store_rho path.
    """
    grid = system.grid
    basis = system.basis
    phi_field = basis.synthesize(phi)
    gphi = [grid.grad_arr(c) for c in phi_field.components]
    divphi = grid.div_arr(phi_field.components)

    M_series = [0.0]
    base = _q_pairing(_state_at(rec, system, 0), system, phi_field)
    acc_det = 0.0
    for i, step in enumerate(rec.steps):
        s = _state_at(rec, system, i)
        acc_det += step.dt * _drift_pairing_rate(s, system, phi_field, gphi, divphi)
        s1 = _state_at(rec, system, i + 1)
        # deterministic terms are added back, so M is the momentum increment
        # left unexplained by the drift
        M_series.append(_q_pairing(s1, system, phi_field) - base - acc_det)
    return np.array(M_series)


def untruncated_compensators(rec: PathRecord, system: System, phi: np.ndarray):
    """Compensator series built from the raw (unprojected) noise fields.

    For a fixed test function these agree with the projected series whenever
    the test function lies in the Galerkin range; the comparison quantifies
    the truncation gap otherwise.  Requires a store_rho path.
    """
    grid = system.grid
    basis = system.basis
    phi_field = basis.synthesize(phi)
    K = system.noise.K
    N = [0.0]
    Nk = [np.zeros(K)]
    for i, step in enumerate(rec.steps):
        s = _state_at(rec, system, i)
        u = s.velocity(basis)
        q = VectorField(grid, [s.rho.values * c for c in u.components])
        pair = np.array(
            [
                float(
                    np.mean(
                        sum(
                            g.components[j] * phi_field.components[j]
                            for j in range(grid.d)
                        )
                    )
                )
                for g in (eval_g(system.noise, k, s.rho, q) for k in range(K))
            ]
        )
        N.append(N[-1] + step.dt * float(pair @ pair))
        Nk.append(Nk[-1] + step.dt * pair)
    return np.array(N), np.array(Nk)


@dataclass
class MartingaleSummary:
    """Per-path scalars needed by the identification test, per test vector."""

    M: np.ndarray  # (n_steps+1, n_phi) martingale candidate series
    N: np.ndarray  # (n_steps+1, n_phi) quadratic-variation compensator
    Nk: np.ndarray  # (n_steps+1, n_phi, K) cross-variation compensators
    beta: np.ndarray  # (n_steps+1, K) realized Wiener coordinates
    h_samples: np.ndarray  # (n_steps+1,) scalar adapted probe (u coefficient)
    times: np.ndarray


def martingale_summaries(rec: PathRecord, test_vectors: np.ndarray):
    """Reduce a path to the scalars used by the martingale test.

    Uses the discrete-exact reduction: the drift is subtracted with the
    stepper's own pairing, so M increments equal the realized noise pairings.
    """
    if rec.test_projections is None:
        raise PreconditionError("path must be run with test_vectors")
    if len(rec.steps) != len(rec.times) - 1:
        raise PreconditionError(
            "path contains halved steps; identity checks need uniform steps"
        )
    n_phi = test_vectors.shape[0]
    n = len(rec.steps)
    K = rec.steps[0].dW.shape[0]
    M = np.zeros((n + 1, n_phi))
    N = np.zeros((n + 1, n_phi))
    Nk = np.zeros((n + 1, n_phi, K))
    beta = np.zeros((n + 1, K))
    for i, step in enumerate(rec.steps):
        proj = rec.test_projections[i]  # (n_phi, K)
        M[i + 1] = M[i] + test_vectors @ step.noise
        N[i + 1] = N[i] + step.dt * np.sum(proj**2, axis=1)
        Nk[i + 1] = Nk[i] + step.dt * proj
        beta[i + 1] = beta[i] + step.dW
    u0 = np.array([step.u_before[1] for step in rec.steps] + [np.nan])
    return MartingaleSummary(M, N, Nk, beta, u0, rec.times)


def h_library(summary: MartingaleSummary, s_index: int):
    """Bounded functionals of the path up to time index s_index.

    A constant, a bounded sigmoid of the velocity probe at s, and a bounded
    sigmoid of the realized first Wiener coordinate at s.
    """
    return np.array(
        [
            1.0,
            math.tanh(5.0 * summary.h_samples[max(s_index - 1, 0)]),
            math.tanh(summary.beta[s_index, 0]),
        ]
    )


def martingale_test(
    summaries: list[MartingaleSummary],
    s_index: int,
    t_index: int,
    phi_index: int = 0,
    k_index: int = 0,
):
    """z-scores of the three identification statistics over an ensemble.

    For each bounded adapted functional h: E[h M_{s,t}], E[h ((M^2)_{s,t} -
    N_{s,t})], and E[h ((M beta_k)_{s,t} - (N_k)_{s,t})] all vanish when M is
    a martingale with the stated variations.  Returns a dict of z-score
    arrays, one entry per h in the library.
    """
    if len(summaries) < 100:
        raise PreconditionError("need at least 100 paths")
    rows_m, rows_q, rows_c = [], [], []
    for sm in summaries:
        h = h_library(sm, s_index)
        dM = sm.M[t_index, phi_index] - sm.M[s_index, phi_index]
        m2 = sm.M[t_index, phi_index] ** 2 - sm.M[s_index, phi_index] ** 2
        dN = sm.N[t_index, phi_index] - sm.N[s_index, phi_index]
        mb = (
            sm.M[t_index, phi_index] * sm.beta[t_index, k_index]
            - sm.M[s_index, phi_index] * sm.beta[s_index, k_index]
        )
        dNk = sm.Nk[t_index, phi_index, k_index] - sm.Nk[s_index, phi_index, k_index]
        rows_m.append(h * dM)
        rows_q.append(h * (m2 - dN))
        rows_c.append(h * (mb - dNk))

    def z(rows):
        x = np.array(rows)
        se = x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])
        return x.mean(axis=0) / np.where(se > 0, se, 1.0)

    return {"martingale": z(rows_m), "quadratic": z(rows_q), "cross": z(rows_c)}


def reversed_path_summary(
    rec: PathRecord, system: System, test_vectors: np.ndarray
) -> MartingaleSummary:
    """Negative control: run the identification reduction on the reversed path.

    The reversed field trajectory does not solve the equation — its increments
    carry the drift with the opposite sign — so the forward-style drift
    subtraction leaves a systematic component that the statistics must detect.
    Requires a store_rho path.
    """
    from .noise import assemble_PhiN

    grid = system.grid
    basis = system.basis
    n = len(rec.steps)
    if n != len(rec.times) - 1:
        raise PreconditionError(
            "path contains halved steps; identity checks need uniform steps"
        )
    n_phi = test_vectors.shape[0]
    K = rec.steps[0].dW.shape[0]
    fields = [basis.synthesize(v) for v in test_vectors]
    gphi = [[grid.grad_arr(c) for c in f.components] for f in fields]
    divphi = [grid.div_arr(f.components) for f in fields]

    states = [_state_at(rec, system, n - i) for i in range(n + 1)]
    M = np.zeros((n + 1, n_phi))
    N = np.zeros((n + 1, n_phi))
    Nk = np.zeros((n + 1, n_phi, K))
    beta = np.zeros((n + 1, K))
    for i in range(n):
        dt = rec.steps[n - 1 - i].dt
        s0, s1 = states[i], states[i + 1]
        q_vec = VectorField(
            grid,
            [s0.rho.values * c for c in s0.velocity(basis).components],
        )
        Phi = assemble_PhiN(system.noise, s0.rho, q_vec, basis,
                            assemble_M(s0.rho, basis))
        proj = test_vectors @ Phi
        for j in range(n_phi):
            rate = _drift_pairing_rate(s0, system, fields[j], gphi[j], divphi[j])
            M[i + 1, j] = (
                M[i, j]
                + _q_pairing(s1, system, fields[j])
                - _q_pairing(s0, system, fields[j])
                - dt * rate
            )
        N[i + 1] = N[i] + dt * np.sum(proj**2, axis=1)
        Nk[i + 1] = Nk[i] + dt * proj
        # reversed Wiener path: increments negated in reversed order
        beta[i + 1] = beta[i] - rec.steps[n - 1 - i].dW
    u0 = np.array([s.u_coeffs[1] for s in states[:-1]] + [np.nan])
    return MartingaleSummary(M, N, Nk, beta, u0, rec.times)


def time_reversed(summary: MartingaleSummary) -> MartingaleSummary:
    """Negative control: rebuild the summary from time-reversed increments.

    Reversal destroys adaptedness: the reversed quadratic/cross compensators
    depend on increments in their own future, so the variation statistics
    must reject whenever the noise coefficients are state-dependent.
    """

    def rev(series):
        inc = np.diff(series, axis=0)[::-1]
        out = np.zeros_like(series)
        out[1:] = np.cumsum(inc, axis=0)
        return out

    return replace(
        summary,
        M=rev(summary.M),
        N=rev(summary.N),
        Nk=rev(summary.Nk),
        beta=rev(summary.beta),
        h_samples=summary.h_samples[::-1].copy(),
    )


# -- effective viscous flux ------------------------------------------------------


def flux_integral(rec: PathRecord, system: System, k: float | None = None) -> float:
    """Time integral of int (a rho^g + d rho^b - (lam+2nu) div u) T_k(rho) dx.

    k = None uses the untruncated density weight.  Requires a store_rho path.
    """
    cfg = system.cfg
    grid = system.grid
    total = 0.0
    for i, step in enumerate(rec.steps):
        s = _state_at(rec, system, i)
        r = s.rho.values
        divu = grid.div_arr(s.velocity(system.basis).components)
        flux = (
            cfg.a * r**cfg.gamma + cfg.delta * r**cfg.beta
            - (cfg.lam + 2.0 * cfg.nu) * divu
        )
        w = r if k is None else cutoff_Tk(s.rho, k).values
        total += step.dt * float(np.mean(flux * w))
    return total


def effective_flux_sweep(
    base: SimConfig,
    deltas: tuple,
    n_paths: int,
    k: float | None = None,
    axis: str = "delta",
):
    """Flux estimates over a parameter sweep with common random numbers.

    Returns dict with per-point (value, estimate, stderr), the successive
    differences, and a growth flag (True when some successive difference more
    than doubles the previous one).
    """
    points = []
    for val in deltas:
        cfg = replace(base, **{axis: val})
        system = System(cfg)
        vals = []
        for p in range(n_paths):
            rec = run_path(system, p, store_rho=True)
            vals.append(flux_integral(rec, system, k))
        vals = np.array(vals)
        points.append(
            {
                "value": val,
                "estimate": float(vals.mean()),
                "stderr": float(vals.std(ddof=1) / math.sqrt(n_paths))
                if n_paths > 1
                else 0.0,
            }
        )
    diffs = [
        abs(points[i + 1]["estimate"] - points[i]["estimate"])
        for i in range(len(points) - 1)
    ]
    growth = any(b > 2.0 * a for a, b in zip(diffs, diffs[1:]) if a > 0)
    return {"points": points, "successive_diffs": diffs, "growth_flag": growth}


# -- path-space norms and Riesz commutator ---------------------------------------


def path_space_norms(
    rec: PathRecord, system: System, theta: float = 0.25, order: float = 2.0
):
    """Discrete Hoelder quotients of the momentum decomposition.

    The projected momentum splits as (everything else) + (epsilon coupling
    part); quotients sup |X_t - X_s| / |t-s|^theta are taken in the negative
    Sobolev norm of the synthesized fields over all sampled pairs.
    """
    basis = system.basis
    n = len(rec.steps)
    q = np.zeros((n + 1, basis.N))
    z = np.zeros((n + 1, basis.N))
    for i, step in enumerate(rec.steps):
        dq = step.drift + step.noise
        q[i + 1] = q[i] + dq
        z[i + 1] = z[i] + step.eps_drift
    y = q - z

    def norm(coeffs):
        field = basis.synthesize(coeffs)
        return math.sqrt(
            sum(
                sobolev_norm(ScalarField(system.grid, c), -order) ** 2
                for c in field.components
            )
        )

    def quotient(series):
        best = 0.0
        stride = max(1, n // 32)
        idx = list(range(0, n + 1, stride))
        for a_ in idx:
            for b_ in idx:
                if b_ > a_:
                    gap = (rec.times[b_] - rec.times[a_]) ** theta
                    best = max(best, norm(series[b_] - series[a_]) / gap)
        return best

    return {
        "theta": theta,
        "order": order,
        "Y": quotient(y),
        "Z": quotient(z),
        "momentum": quotient(q),
    }


def riesz_commutator(system: System, rho: ScalarField, u: VectorField) -> float:
    """int u_i ( rho R_ij[rho u_j] - rho u_j R_ij[rho] ) dx with the double
    Riesz multiplier."""
    grid = system.grid
    q = [rho.values * c for c in u.components]
    total = 0.0
    for i in range(grid.d):
        lhs = rho.values * sum(
            grid.riesz_arr(i, j, q[j]) for j in range(grid.d)
        )
        rhs = sum(q[j] * grid.riesz_arr(i, j, rho.values) for j in range(grid.d))
        total += float(np.mean(u.components[i] * (lhs - rhs)))
    return total


def riesz_commutator_sweep(system: System, rho: ScalarField, u: VectorField,
                           cutoffs: tuple):
    """Commutator values across spectral truncations of the inputs.

    Reports the successive differences across cutoff-doubling; a decreasing
    sequence is the convergence surrogate.
    """
    grid = system.grid
    vals = []
    for c in cutoffs:
        r_c = ScalarField(grid, grid.project_arr(rho.values, c))
        u_c = VectorField(grid, [grid.project_arr(x, c) for x in u.components])
        vals.append(riesz_commutator(system, r_c, u_c))
    full = riesz_commutator(system, rho, u)
    diffs = [abs(v - full) for v in vals]
    decreasing = all(a >= b for a, b in zip(diffs, diffs[1:]))
    return {"cutoffs": list(cutoffs), "values": vals, "reference": full,
            "diffs_to_reference": diffs, "decreasing": decreasing}
