"""Multiplicative noise operator, Wiener sampling, and Hilbert-Schmidt bounds.

A noise model holds K coefficient fields g_k(x, rho, q) from one of three
built-in families, with square-summable weights c_k = c0/k and fixed smooth
shape functions of unit sup norm.  The projected, density-weighted operator
column is g_k^N = M^{1/2}[rho] P_N(g_k / sqrt(rho)).

Wiener increments come from a counter-based generator keyed by
(seed, path index) with the step index as counter, so draws are identical
regardless of execution order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PositivityLost, PreconditionError
from .mass import GalerkinBasis, MassMatrix, half_space_wavevectors, sqrt_M
from .spectral import ScalarField, TorusGrid, VectorField, sobolev_norm

FAMILIES = ("affine", "power", "split")

_RHO_FLOOR = 1e-12


class NoiseModel:
    """K noise directions of one family on a fixed grid.

    Families:
      affine: g_k = c_k (rho f_k(x) d_k + h_k(x) q)
      power:  g_k = c_k rho^{(gamma+1)/2} f_k(x) d_k
      split:  even k as the power (density-driven) part, odd k as the
              momentum part c_k h_k(x) q, realizing two independent drivers.

    d_k cycles through the coordinate axes.  The growth constants C1, C2 and
    the tail bound sum_{k>K} c_k^2 are computed in the constructor and
    exposed as attributes.
    """

    def __init__(
        self,
        grid: TorusGrid,
        K: int,
        family: str = "affine",
        c0: float = 0.1,
        gamma: float = 5.0 / 3.0,
    ):
        if family not in FAMILIES:
            raise PreconditionError(f"unknown noise family {family!r}")
        if K < 1:
            raise PreconditionError("need at least one noise direction")
        self.grid = grid
        self.K = K
        self.family = family
        self.c0 = float(c0)
        self.gamma = float(gamma)
        self.c = c0 / np.arange(1, K + 1, dtype=float)

        # fixed shape functions: unit sup norm, bounded gradients
        waves = half_space_wavevectors(grid.d, min(2, grid.m // 2 - 1))
        self.f = []
        self.h = []
        self.axis = []
        for k in range(K):
            kvec = waves[k % len(waves)]
            phase = 2 * np.pi * sum(
                ki * xi for ki, xi in zip(kvec, grid.coords)
            )
            self.f.append(np.cos(phase))
            self.h.append(np.sin(phase))
            self.axis.append(k % grid.d)

        sum_c2 = float(np.sum(self.c**2))
        # tail of the full series c0^2 sum_{k>K} k^{-2}, by integral comparison
        self.tail_bound = c0**2 / K
        # sum_k |g_k|^2 <= C1 (rho^2 + rho^{gamma+1} + |q|^2)
        # sum_k |grad_{rho,q} g_k|^2 <= C2 (1 + rho^{gamma-1})
        if family == "affine":
            self.C1 = 2.0 * sum_c2
            self.C2 = (1.0 + grid.d) * sum_c2
        elif family == "power":
            self.C1 = sum_c2
            self.C2 = ((gamma + 1.0) / 2.0) ** 2 * sum_c2
        else:
            self.C1 = sum_c2
            self.C2 = max(((gamma + 1.0) / 2.0) ** 2, grid.d) * sum_c2


def eval_g(model: NoiseModel, k: int, rho: ScalarField, q: VectorField) -> VectorField:
    """The k-th coefficient field g_k(x, rho(x), q(x))."""
    if not 0 <= k < model.K:
        raise PreconditionError(f"direction index {k} out of range 0..{model.K - 1}")
    if np.min(rho.values) < -_RHO_FLOOR:
        raise PreconditionError("negative density")
    grid = model.grid
    ck, fk, hk, a = model.c[k], model.f[k], model.h[k], model.axis[k]

    def density_part(power):
        comps = [np.zeros(grid.shape) for _ in range(grid.d)]
        comps[a] = ck * np.maximum(rho.values, 0.0) ** power * fk
        return comps

    def momentum_part():
        return [ck * hk * qc for qc in q.components]

    if model.family == "affine":
        comps = density_part(1.0)
        for i, mc in enumerate(momentum_part()):
            comps[i] = comps[i] + mc
    elif model.family == "power":
        comps = density_part((model.gamma + 1.0) / 2.0)
    else:  # split
        if k % 2 == 0:
            comps = density_part((model.gamma + 1.0) / 2.0)
        else:
            comps = momentum_part()
    return VectorField(grid, comps)


def growth_bounds(model: NoiseModel, rho: np.ndarray, q: np.ndarray):
    """Pointwise (lhs1, rhs1, lhs2, rhs2) of the two growth inequalities.

    `rho` is an array of density samples and `q` an array of momentum samples
    with a trailing component axis; the lhs sums run over all K directions and
    the sup over x is taken analytically (|f_k|, |h_k| <= 1).
    """
    g = model.gamma
    q2 = np.sum(q**2, axis=-1)
    lhs1 = np.zeros_like(rho)
    lhs2 = np.zeros_like(rho)
    for k in range(model.K):
        ck2 = model.c[k] ** 2
        if model.family == "affine":
            lhs1 += ck2 * (rho + np.sqrt(q2)) ** 2
            lhs2 += ck2 * (1.0 + model.grid.d)
        elif model.family == "power" or (model.family == "split" and k % 2 == 0):
            lhs1 += ck2 * rho ** (g + 1.0)
            lhs2 += ck2 * ((g + 1.0) / 2.0) ** 2 * rho ** (g - 1.0)
        else:
            lhs1 += ck2 * q2
            lhs2 += ck2 * model.grid.d
    rhs1 = model.C1 * (rho**2 + rho ** (g + 1.0) + q2)
    rhs2 = model.C2 * (1.0 + rho ** (g - 1.0))
    return lhs1, rhs1, lhs2, rhs2


def assemble_PhiN(
    model: NoiseModel,
    rho: ScalarField,
    q: VectorField,
    basis: GalerkinBasis,
    M: MassMatrix,
    rho_floor: float = 1e-10,
) -> np.ndarray:
    """N x K matrix whose column k holds the X_N coefficients of g_k^N."""
    if np.min(rho.values) < rho_floor:
        raise PositivityLost(
            f"density minimum {np.min(rho.values):.3e} below floor {rho_floor:.1e}"
        )
    root = sqrt_M(M)
    sqrt_rho = np.sqrt(rho.values)
    cols = np.empty((basis.N, model.K))
    for k in range(model.K):
        gk = eval_g(model, k, rho, q)
        scaled = VectorField(model.grid, [c / sqrt_rho for c in gk.components])
        cols[:, k] = root @ basis.project(scaled)
    return cols


def embedding_constant(grid: TorusGrid, b: float) -> float:
    """Discrete constant in ||w||_{W^{-b,2}} <= C ||w||_{L^1}.

    Each Fourier coefficient is bounded by the L^1 norm, so
    C^2 = sum over grid wavevectors of (1 + 4 pi^2 |k|^2)^{-b}.
    """
    return float(np.sqrt(np.sum((1.0 + 4.0 * np.pi**2 * grid.k2) ** (-b))))


def hs_norm_check(
    model: NoiseModel, rho: ScalarField, v: VectorField, b: float = 1.0
):
    """Hilbert-Schmidt bound: lhs = sum_k ||g_k(rho, rho v)||^2_{W^{-b,2}},
    rhs = C * mean(rho) * int (rho + rho^gamma + rho |v|^2).

    The documented constant C = 2 C_emb^2 sum_k c_k^2 makes lhs <= rhs for
    every built-in family (Cauchy-Schwarz against the measure rho dx).
    """
    grid = model.grid
    if np.min(rho.values) < -_RHO_FLOOR:
        raise PreconditionError("negative density")
    q = VectorField(grid, [rho.values * c for c in v.components])
    lhs = 0.0
    for k in range(model.K):
        gk = eval_g(model, k, rho, q)
        lhs += sum(sobolev_norm(ScalarField(grid, c), -b) ** 2 for c in gk.components)
    C = 2.0 * embedding_constant(grid, b) ** 2 * float(np.sum(model.c**2))
    speed2 = sum(c**2 for c in v.components)
    rhs = C * rho.mean() * float(
        np.mean(rho.values + rho.values**model.gamma + rho.values * speed2)
    )
    return lhs, rhs


# -- Wiener sampling ----------------------------------------------------------


def path_rng(seed: int, path_index: int, step_index: int = 0) -> np.random.Generator:
    """Counter-based generator: key (seed, path), counter block = step.

    Independent streams for distinct (seed, path, step) triples, regardless
    of the order in which they are drawn.
    """
    bitgen = np.random.Philox(
        key=np.array([seed, path_index], dtype=np.uint64),
        counter=np.array([0, 0, step_index, 0], dtype=np.uint64),
    )
    return np.random.Generator(bitgen)


@dataclass(frozen=True)
class WienerIncrement:
    dW: np.ndarray  # K independent N(0, dt) draws

    @property
    def K(self):
        return self.dW.shape[0]


def sample_increment(K: int, dt: float, rng: np.random.Generator) -> WienerIncrement:
    if dt <= 0:
        raise PreconditionError("dt must be positive")
    return WienerIncrement(rng.normal(0.0, np.sqrt(dt), size=K))


def u0_norm(alpha: np.ndarray) -> float:
    """Norm of a coefficient sequence in the auxiliary space: sum alpha_k^2/k^2."""
    alpha = np.asarray(alpha, dtype=float)
    k = np.arange(1, alpha.shape[0] + 1, dtype=float)
    return float(np.sqrt(np.sum(alpha**2 / k**2)))


class BrownianPath:
    """A K-channel Brownian path on [0, T] realized at a fine resolution.

    Coarse increments are sums of fine ones, so refinement studies compare
    schemes against the same underlying path.
    """

    def __init__(self, seed: int, path_index: int, K: int, T: float, n_fine: int):
        if n_fine < 1 or T <= 0:
            raise PreconditionError("need n_fine >= 1 and T > 0")
        self.K, self.T, self.n_fine = K, float(T), n_fine
        dt = T / n_fine
        self.fine = np.stack(
            [
                sample_increment(K, dt, path_rng(seed, path_index, step)).dW
                for step in range(n_fine)
            ]
        )

    def increments(self, n_coarse: int) -> np.ndarray:
        """(n_coarse, K) increments; n_coarse must divide n_fine."""
        if self.n_fine % n_coarse != 0:
            raise PreconditionError(
                f"{n_coarse} coarse steps do not divide {self.n_fine} fine steps"
            )
        return self.fine.reshape(n_coarse, self.n_fine // n_coarse, self.K).sum(axis=1)
