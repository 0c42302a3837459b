"""Time integration of the coupled density/momentum Galerkin system.

The state is (rho, u) with u = sum_n u_n psi_n on the finite trig space X_N.
Momentum is advanced in the variables q = M[rho] u: the density moves first,
then q by an explicit increment plus the noise term, then u is recovered with
the mass matrix at the new density.  This ordering keeps the discrete energy
bookkeeping aligned with the Ito computation on (rho, q).

A per-step record keeps everything later diagnostics need (coefficients,
deterministic increments, noise increments, projected noise columns), so
identity checks never re-simulate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBlowup, PositivityLost, PreconditionError
from .mass import GalerkinBasis, assemble_M, inv_M
from .noise import NoiseModel, assemble_PhiN, path_rng, sample_increment
from .spectral import ScalarField, TorusGrid, VectorField
from .transport import StepRejected, TransportConfig, advance_density

logger = logging.getLogger(__name__)

SCHEMES = ("euler_maruyama", "fixed_point")


@dataclass(frozen=True)
class SimConfig:
    """Physical and numerical parameters with the standing inequalities."""

    d: int = 2
    m: int = 32
    gamma: float = 5.0 / 3.0
    beta: float = 5.0
    a: float = 1.0
    nu: float = 1.0
    lam: float = 0.0
    epsilon: float = 0.1
    delta: float = 0.1
    N_cutoff: int = 2
    K: int = 8
    R: float = 1e6
    dt: float = 1e-3
    T: float = 1.0
    scheme: str = "euler_maruyama"
    fp_tol: float = 1e-10
    fp_maxiter: int = 50
    seed: int = 0
    noise_family: str = "affine"
    c0: float = 0.1
    max_halvings: int = 6

    def __post_init__(self):
        problems = []
        if self.d == 3 and not self.gamma > 1.5:
            problems.append("gamma must exceed 3/2 in d=3")
        if self.d < 3 and not self.gamma > 1.0:
            problems.append("gamma must exceed 1")
        if not self.beta > max(4.5, self.gamma):
            problems.append("beta must exceed max(9/2, gamma)")
        if not self.a > 0:
            problems.append("pressure constant a must be positive")
        if not self.nu > 0:
            problems.append("shear viscosity nu must be positive")
        if self.lam + 2.0 * self.nu / 3.0 < 0:
            problems.append("lambda + 2 nu / 3 must be nonnegative")
        if not (0.0 <= self.epsilon < 1.0 and 0.0 <= self.delta < 1.0):
            problems.append("epsilon and delta must lie in [0, 1)")
        if self.scheme not in SCHEMES:
            problems.append(f"scheme must be one of {SCHEMES}")
        if not (self.dt > 0 and self.T > 0):
            problems.append("dt and T must be positive")
        if problems:
            raise PreconditionError("; ".join(problems))


class System:
    """Immutable bundle of config, grid, basis, and noise model; shared by paths."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.grid = TorusGrid(cfg.d, cfg.m)
        self.basis = GalerkinBasis(self.grid, cfg.N_cutoff)
        self.noise = NoiseModel(
            self.grid, cfg.K, family=cfg.noise_family, c0=cfg.c0, gamma=cfg.gamma
        )


@dataclass
class GalerkinState:
    t: float
    rho: ScalarField
    u_coeffs: np.ndarray
    events: list = field(default_factory=list)

    def velocity(self, basis: GalerkinBasis) -> VectorField:
        return basis.synthesize(self.u_coeffs)

    def u_norm(self) -> float:
        return float(np.linalg.norm(self.u_coeffs))


def default_initial(system: System, rho_amp: float = 0.2, u_amp: float = 0.1):
    """Smooth deterministic initial data: perturbed unit density, one velocity mode."""
    grid = system.grid
    rho = ScalarField(grid, 1.0 + rho_amp * np.cos(2 * np.pi * grid.coords[0]))
    u = np.zeros(system.basis.N)
    u[1] = u_amp
    return GalerkinState(t=0.0, rho=rho, u_coeffs=u)


def energy(state: GalerkinState, system: System) -> float:
    """E = int (1/2 rho |u|^2 + a/(gamma-1) rho^gamma + delta/(beta-1) rho^beta)."""
    cfg = system.cfg
    u = state.velocity(system.basis)
    speed2 = sum(c**2 for c in u.components)
    r = state.rho.values
    return float(
        np.mean(
            0.5 * r * speed2
            + cfg.a / (cfg.gamma - 1.0) * r**cfg.gamma
            + cfg.delta / (cfg.beta - 1.0) * r**cfg.beta
        )
    )


def dissipation_rate(state: GalerkinState, system: System) -> float:
    """D = int (nu |grad u|^2 + (lam+nu)|div u|^2)
         + eps int (a gamma rho^{gamma-2} + delta beta rho^{beta-2}) |grad rho|^2."""
    cfg = system.cfg
    grid = system.grid
    u = state.velocity(system.basis)
    gu2 = sum(
        np.sum(np.asarray(grid.grad_arr(c)) ** 2, axis=0) for c in u.components
    )
    divu = grid.div_arr(u.components)
    out = np.mean(cfg.nu * gu2 + (cfg.lam + cfg.nu) * divu**2)
    if cfg.epsilon > 0:
        r = state.rho.values
        gr2 = np.sum(np.asarray(grid.grad_arr(r)) ** 2, axis=0)
        out += cfg.epsilon * np.mean(
            (cfg.a * cfg.gamma * r ** (cfg.gamma - 2.0)
             + cfg.delta * cfg.beta * r ** (cfg.beta - 2.0)) * gr2
        )
    return float(out)


def momentum_rhs(state: GalerkinState, system: System) -> np.ndarray:
    """X_N coefficients of the drift operator applied to (rho, u).

    Assembled in physical space with dealiased products, then projected;
    for trig test modes this equals the integration-by-parts pairings.
    """
    total, _ = momentum_rhs_parts(state, system)
    return total


def momentum_rhs_parts(state: GalerkinState, system: System):
    """(total drift coefficients, coefficients of the eps grad-u grad-rho term)."""
    cfg = system.cfg
    grid = system.grid
    u = state.velocity(system.basis)
    r = state.rho.values

    comps = []
    eps_comps = []
    # pressure + viscous gradient potential: (lam+nu) div u - a rho^g - d rho^b
    divu = grid.div_arr(u.components)
    potential = (
        (cfg.lam + cfg.nu) * divu
        - grid.dealias_arr(cfg.a * r**cfg.gamma + cfg.delta * r**cfg.beta)
    )
    grad_pot = grid.grad_arr(potential)
    grad_r = grid.grad_arr(r)
    for i, ui in enumerate(u.components):
        acc = cfg.nu * grid.lap_arr(ui) + grad_pot[i]
        # - div(rho u_i u): quadratic then cubic product, dealiased pairwise
        flux = [
            grid.dealias_arr(grid.dealias_arr(r * ui) * uj) for uj in u.components
        ]
        acc -= grid.div_arr(flux)
        if cfg.epsilon > 0:
            gu = grid.grad_arr(ui)
            eps_i = -cfg.epsilon * grid.dealias_arr(
                sum(gu[j] * grad_r[j] for j in range(grid.d))
            )
            acc += eps_i
            eps_comps.append(eps_i)
        comps.append(acc)
    out = system.basis.project(VectorField(grid, comps))
    if not np.all(np.isfinite(out)):
        raise NumericalBlowup("non-finite drift coefficients")
    if eps_comps:
        eps_part = system.basis.project(VectorField(grid, eps_comps))
    else:
        eps_part = np.zeros(system.basis.N)
    return out, eps_part


def smooth_cutoff(x: np.ndarray, R: float) -> np.ndarray:
    """C^2 cutoff: 1 on [-R, R], 0 outside [-2R, 2R], smoothstep between."""
    s = np.clip((np.abs(x) - R) / R, 0.0, 1.0)
    return 1.0 - s**3 * (6.0 * s**2 - 15.0 * s + 10.0)


def apply_truncation(v: np.ndarray, R: float) -> np.ndarray:
    """Coordinate-wise truncation alpha -> theta_R(alpha) alpha."""
    return smooth_cutoff(v, R) * v


@dataclass
class StepRecord:
    """Everything one step contributes to post-hoc identity checks."""

    t: float
    dt: float
    u_before: np.ndarray
    q_before: np.ndarray
    drift: np.ndarray  # dt * momentum_rhs coefficients
    eps_drift: np.ndarray  # the eps grad-u grad-rho share of `drift`
    noise: np.ndarray  # Phi^N dW coefficients actually added to q
    dW: np.ndarray
    Phi_norm2: float  # sum_k |Phi^N e_k|^2
    qv_real: float  # (1/2) noise^T M^{-1} noise, realized quadratic variation
    qv_rate: float  # (1/2) sum_k |M^{-1/2} Phi e_k|^2, its dt-rate
    events: tuple = ()


def _transport_cfg(cfg: SimConfig, dt: float) -> TransportConfig:
    return TransportConfig(epsilon=cfg.epsilon, dt=dt)


def _advance(state, system, dt, dW, stoch_acc, scheme, phi_mats=None):
    """One step of either scheme; returns (new_state, StepRecord).

    `stoch_acc` is the running sum of noise coefficients (used by the
    truncation placement of the fixed-point scheme).  `phi_mats`, if a list,
    collects the projected noise matrix for registered test vectors.
    """
    cfg = system.cfg
    basis = system.basis
    grid = system.grid

    M = assemble_M(state.rho, basis)
    q = M.entries @ state.u_coeffs
    u_field = state.velocity(basis)
    q_field = VectorField(
        grid, [grid.dealias_arr(state.rho.values * c) for c in u_field.components]
    )
    Phi = assemble_PhiN(system.noise, state.rho, q_field, basis, M)
    if phi_mats is not None:
        phi_mats.append(Phi)

    events = []
    if scheme == "euler_maruyama":
        total, eps_part = momentum_rhs_parts(state, system)
        drift, eps_drift = dt * total, dt * eps_part
        noise_term = Phi @ dW
        rho_new = advance_density(state.rho, u_field, _transport_cfg(cfg, dt))
        q_new = q + drift + noise_term
    else:
        # Picard iteration with frozen Wiener increment; the truncation acts
        # on the accumulated stochastic integral, telescoped per step.
        noise_term = apply_truncation(stoch_acc + Phi @ dW, cfg.R) - apply_truncation(
            stoch_acc, cfg.R
        )
        u_iter = state.u_coeffs.copy()
        converged = False
        for it in range(cfg.fp_maxiter):
            iter_state = GalerkinState(state.t, state.rho, u_iter)
            total, eps_part = momentum_rhs_parts(iter_state, system)
            drift, eps_drift = dt * total, dt * eps_part
            rho_new = advance_density(
                state.rho, basis.synthesize(u_iter), _transport_cfg(cfg, dt)
            )
            q_new = q + drift + noise_term
            u_next = inv_M(assemble_M(rho_new, basis)) @ q_new
            if np.linalg.norm(u_next - u_iter) <= cfg.fp_tol:
                u_iter = u_next
                converged = True
                break
            u_iter = u_next
        if not converged:
            events.append(("FixedPointStall", state.t, cfg.fp_maxiter))
            logger.warning("fixed point stalled at t=%.4g; explicit fallback", state.t)
            total, eps_part = momentum_rhs_parts(state, system)
            drift, eps_drift = dt * total, dt * eps_part
            rho_new = advance_density(state.rho, u_field, _transport_cfg(cfg, dt))
            q_new = q + drift + noise_term

    u_new = inv_M(assemble_M(rho_new, basis)) @ q_new
    if not np.all(np.isfinite(u_new)):
        raise NumericalBlowup(f"non-finite velocity at t={state.t:.4g}")
    Minv = inv_M(M)
    rec = StepRecord(
        t=state.t,
        dt=dt,
        u_before=state.u_coeffs.copy(),
        q_before=q,
        drift=drift,
        eps_drift=eps_drift,
        noise=noise_term,
        dW=dW.copy(),
        Phi_norm2=float(np.sum(Phi**2)),
        qv_real=0.5 * float(noise_term @ Minv @ noise_term),
        qv_rate=0.5 * float(np.trace(Phi.T @ Minv @ Phi)),
        events=tuple(events),
    )
    new_state = GalerkinState(state.t + dt, rho_new, u_new, state.events)
    return new_state, rec


def step_em(state: GalerkinState, system: System, dW: np.ndarray):
    """Explicit step: density first, then q += dt*drift + Phi dW, then recover u."""
    return _advance(state, system, system.cfg.dt, dW, np.zeros(system.basis.N),
                    "euler_maruyama")


def step_fixed_point(state, system, dW, stoch_acc=None):
    if stoch_acc is None:
        stoch_acc = np.zeros(system.basis.N)
    return _advance(state, system, system.cfg.dt, dW, stoch_acc, "fixed_point")


@dataclass
class PathRecord:
    path_index: int
    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray  # rate at the right endpoint of each step
    u_norm: np.ndarray
    rho_min: np.ndarray
    rho_max: np.ndarray
    rho_probe: np.ndarray  # <rho, cos(2 pi x_1)> per sample time
    rho_mean: np.ndarray  # spatial mean per sample time (conserved mass)
    tau_R: float
    truncated: np.ndarray  # flag per sample: past the stopping time
    steps: list  # StepRecord per step
    events: list
    aborted: bool
    final_state: GalerkinState
    snapshots: dict  # t -> (rho values, u_coeffs) at requested times
    test_projections: np.ndarray | None = None  # (n_steps, n_phi, K)


def run_path(
    system: System,
    path_index: int,
    initial: GalerkinState | None = None,
    snapshot_times: tuple = (),
    test_vectors: np.ndarray | None = None,
    store_rho: bool = False,
) -> PathRecord:
    """Integrate one path to T; deterministic given (cfg.seed, path_index).

    The stopping time tau_R fires when either the velocity norm or the
    accumulated stochastic integral reaches R (never-fired convention: T).
    Rejected steps are retried as two half steps with fresh conditional
    increments from the step's own stream, up to cfg.max_halvings.
    """
    cfg = system.cfg
    state = initial if initial is not None else default_initial(system)
    n_steps = int(round(cfg.T / cfg.dt))
    probe = np.cos(2 * np.pi * system.grid.coords[0])

    times = [state.t]
    e_series = [energy(state, system)]
    d_series = []
    u_series = [state.u_norm()]
    rmin = [float(np.min(state.rho.values))]
    rmax = [float(np.max(state.rho.values))]
    rprobe = [float(np.mean(state.rho.values * probe))]
    rmean = [float(np.mean(state.rho.values))]
    steps: list[StepRecord] = []
    events: list = []
    snapshots = {}
    if store_rho:
        snapshots[state.t] = (state.rho.values.copy(), state.u_coeffs.copy())
    phi_proj = [] if test_vectors is not None else None

    stoch_acc = np.zeros(system.basis.N)
    tau = None
    truncated = [False]
    aborted = False
    if state.u_norm() >= cfg.R:
        tau = state.t

    for n in range(n_steps):
        rng = path_rng(cfg.seed, path_index, n)
        dW = sample_increment(cfg.K, cfg.dt, rng).dW
        phi_mats = [] if test_vectors is not None else None
        try:
            state, rec = _advance(
                state, system, cfg.dt, dW, stoch_acc, cfg.scheme, phi_mats
            )
            recs = [rec]
        except StepRejected:
            try:
                state, recs = _substep(
                    state, system, cfg.dt, dW, stoch_acc, rng, cfg.max_halvings,
                    phi_mats,
                )
                events.append(("StepHalved", times[-1], len(recs)))
            except (StepRejected, PositivityLost) as exc:
                events.append(("PathAborted", times[-1], str(exc)))
                aborted = True
                break

        for rec in recs:
            steps.append(rec)
            stoch_acc = stoch_acc + rec.noise
            events.extend(rec.events)
        if phi_mats is not None:
            # combined projection for the nominal step (sub-increments summed)
            phi_proj.append(
                np.mean([test_vectors @ P for P in phi_mats], axis=0)
            )

        times.append(state.t)
        e_series.append(energy(state, system))
        # post-step rate: the decayed state under-estimates the true integral,
        # which is the sign that keeps the discrete energy inequality one-sided
        d_series.append(dissipation_rate(state, system))
        u_series.append(state.u_norm())
        rmin.append(float(np.min(state.rho.values)))
        rmax.append(float(np.max(state.rho.values)))
        rprobe.append(float(np.mean(state.rho.values * probe)))
        rmean.append(float(np.mean(state.rho.values)))

        if tau is None and (
            state.u_norm() >= cfg.R or np.linalg.norm(stoch_acc) >= cfg.R
        ):
            tau = state.t
        truncated.append(tau is not None)

        for ts in snapshot_times:
            if abs(state.t - ts) < 0.5 * cfg.dt and ts not in snapshots:
                snapshots[ts] = (state.rho.values.copy(), state.u_coeffs.copy())
        if store_rho:
            snapshots[state.t] = (state.rho.values.copy(), state.u_coeffs.copy())

    return PathRecord(
        path_index=path_index,
        times=np.array(times),
        energy=np.array(e_series),
        dissipation=np.array(d_series),
        u_norm=np.array(u_series),
        rho_min=np.array(rmin),
        rho_max=np.array(rmax),
        rho_probe=np.array(rprobe),
        rho_mean=np.array(rmean),
        tau_R=cfg.T if tau is None else tau,
        truncated=np.array(truncated),
        steps=steps,
        events=events,
        aborted=aborted,
        final_state=state,
        snapshots=snapshots,
        test_projections=None if phi_proj is None else np.array(phi_proj),
    )


def _substep(state, system, dt, dW, stoch_acc, rng, budget, phi_mats):
    """Replace one rejected step by two half steps.

    The two half increments are a Brownian bridge split of dW: conditionally
    on the sum, the first half is dW/2 + N(0, dt/4), drawn from the step's
    own stream so the path stays deterministic.
    """
    if budget <= 0:
        raise PositivityLost("step halving budget exhausted")
    half = dt / 2.0
    mid = dW / 2.0 + rng.normal(0.0, np.sqrt(dt) / 2.0, size=dW.shape)
    out = []
    for sub_dW in (mid, dW - mid):
        try:
            sub_state, rec = _advance(
                state, system, half, sub_dW, stoch_acc, system.cfg.scheme, phi_mats
            )
            recs = [rec]
        except StepRejected:
            sub_state, recs = _substep(
                state, system, half, sub_dW, stoch_acc, rng, budget - 1, phi_mats
            )
        state = sub_state
        for rec in recs:
            stoch_acc = stoch_acc + rec.noise
        out.extend(recs)
    return state, out
