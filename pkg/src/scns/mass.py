"""Density-weighted Gram operator on the finite trigonometric Galerkin space.

The Galerkin space X_N consists of vector fields whose components are real
trigonometric polynomials with wavevectors bounded in the sup norm.  The
operator M[rho] acts on X_N by v -> P_N(rho * P_N v); its matrix in the
orthonormal trig basis is the Gram matrix M_ij = integral rho psi_i . psi_j.
Because the basis is a tensor product of a scalar mode set with the d
coordinate axes, the matrix is block diagonal with d identical scalar blocks,
which we exploit during assembly and factorization.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, SingularMass
from .spectral import ScalarField, TorusGrid, VectorField

logger = logging.getLogger(__name__)

_NEG_TOL = 1e-12


def half_space_wavevectors(d, cutoff):
    """Nonzero integer wavevectors with |k|_inf <= cutoff, one per +-k pair.

    The representative of each pair is the one whose first nonzero entry is
    positive (lexicographic half space).
    """
    out = []
    for k in itertools.product(range(-cutoff, cutoff + 1), repeat=d):
        if all(ki == 0 for ki in k):
            continue
        first = next(ki for ki in k if ki != 0)
        if first > 0:
            out.append(k)
    out.sort()
    return out


class GalerkinBasis:
    """Orthonormal vector trig basis: scalar modes times coordinate axes.

    Scalar modes are 1, sqrt(2)cos(2 pi k.x), sqrt(2)sin(2 pi k.x) over the
    half-space wavevectors with |k|_inf <= cutoff.  Entries are ordered
    component-major: all scalar modes on axis 0, then axis 1, ...
    """

    def __init__(self, grid: TorusGrid, cutoff: int):
        if cutoff < 1 or 2 * cutoff >= grid.m:
            raise PreconditionError(
                f"basis cutoff {cutoff} must satisfy 1 <= cutoff < m/2 = {grid.m // 2}"
            )
        self.grid = grid
        self.cutoff = cutoff
        self.wavevectors = half_space_wavevectors(grid.d, cutoff)

        points = grid.shape[0] ** grid.d
        modes = [np.ones(points)]
        labels = ["const"]
        flat_coords = [c.ravel() for c in grid.coords]
        for k in self.wavevectors:
            phase = 2 * np.pi * sum(ki * xi for ki, xi in zip(k, flat_coords))
            modes.append(np.sqrt(2.0) * np.cos(phase))
            modes.append(np.sqrt(2.0) * np.sin(phase))
            labels.append(f"cos{k}")
            labels.append(f"sin{k}")
        self.Phi = np.array(modes)  # (n_scalar, points)
        self.labels = labels
        self.n_scalar = len(modes)
        self.N = grid.d * self.n_scalar
        self.entries = [
            (n, a) for a in range(grid.d) for n in range(self.n_scalar)
        ]

    def project(self, v: VectorField) -> np.ndarray:
        """Coefficient vector of P_N v in the orthonormal basis."""
        return np.concatenate(
            [self.Phi @ comp.ravel() / self.Phi.shape[1] for comp in v.components]
        )

    def synthesize(self, coeffs: np.ndarray) -> VectorField:
        """Vector field with the given basis coefficients."""
        if coeffs.shape != (self.N,):
            raise PreconditionError(
                f"expected {self.N} coefficients, got {coeffs.shape}"
            )
        blocks = coeffs.reshape(self.grid.d, self.n_scalar)
        comps = [(b @ self.Phi).reshape(self.grid.shape) for b in blocks]
        return VectorField(self.grid, comps)

    def project_field(self, v: VectorField) -> VectorField:
        return self.synthesize(self.project(v))


@dataclass(frozen=True)
class MassMatrix:
    """Gram matrix of the basis weighted by a density, with assembly bounds."""

    entries: np.ndarray
    rho_min: float
    rho_max: float
    block: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        asym = np.max(np.abs(self.entries - self.entries.T))
        if asym > 1e-12:
            raise PreconditionError(f"mass matrix asymmetry {asym:.3e}")


def _scalar_block(weight: np.ndarray, basis: GalerkinBasis) -> np.ndarray:
    """Gram matrix of the scalar modes under a (signed) pointwise weight."""
    w = weight.ravel()
    block = (basis.Phi * w) @ basis.Phi.T / basis.Phi.shape[1]
    return 0.5 * (block + block.T)


def _expand_blocks(block: np.ndarray, d: int) -> np.ndarray:
    return np.kron(np.eye(d), block)


def assemble_M(rho: ScalarField, basis: GalerkinBasis) -> MassMatrix:
    """Gram matrix M_ij = integral rho psi_i . psi_j over the torus."""
    rmin = float(np.min(rho.values))
    if rmin < -_NEG_TOL:
        raise PreconditionError(f"density minimum {rmin:.3e} is negative")
    block = _scalar_block(rho.values, basis)
    return MassMatrix(
        entries=_expand_blocks(block, basis.grid.d),
        rho_min=max(rmin, 0.0),
        rho_max=float(np.max(rho.values)),
        block=block,
    )


def _eigh_block(M: MassMatrix):
    block = M.block if M.block is not None else M.entries
    return np.linalg.eigh(block)


def _from_block(M: MassMatrix, block_fn) -> np.ndarray:
    lam, Q = _eigh_block(M)
    out_block = (Q * block_fn(lam)) @ Q.T
    if M.block is not None:
        d = M.entries.shape[0] // M.block.shape[0]
        return _expand_blocks(out_block, d)
    return out_block


def sqrt_M(M: MassMatrix) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues are clamped at zero before the root; the clamp magnitude is
    logged since a large clamp signals an ill-conditioned assembly.
    """
    lam, _ = _eigh_block(M)
    clamp = -float(np.min(lam))
    if clamp > 1e-10:
        logger.warning("sqrt_M clamped eigenvalues by %.3e", clamp)
    return _from_block(M, lambda l: np.sqrt(np.maximum(l, 0.0)))


def inv_M(M: MassMatrix) -> np.ndarray:
    if M.rho_min <= 0.0:
        raise SingularMass(f"inverse requires rho_min > 0, got {M.rho_min}")
    return _from_block(M, lambda l: 1.0 / l)


def inv_sqrt_M(M: MassMatrix) -> np.ndarray:
    if M.rho_min <= 0.0:
        raise SingularMass(f"inverse root requires rho_min > 0, got {M.rho_min}")
    return _from_block(M, lambda l: 1.0 / np.sqrt(l))


def assemble_signed(v: ScalarField, basis: GalerkinBasis) -> MassMatrix:
    """Gram matrix for a signed weight (a perturbation direction, not a density)."""
    block = _scalar_block(v.values, basis)
    return MassMatrix(
        entries=_expand_blocks(block, basis.grid.d),
        rho_min=float(np.min(v.values)),
        rho_max=float(np.max(v.values)),
        block=block,
    )


def sqrt_derivative(
    M_at_rho: MassMatrix, v: ScalarField, basis: GalerkinBasis
) -> np.ndarray:
    """Directional derivative of rho -> sqrt(M[rho]) in direction v.

    Differentiating S(rho)^2 = M[rho] gives the Sylvester equation
    D S + S D = M[v] with S = sqrt(M[rho]); in the eigenbasis of the scalar
    block the solution is D_ij = (Q^T M[v] Q)_ij / (sqrt(l_i) + sqrt(l_j)).
    When M[rho] and M[v] commute this reduces to (1/2) M^{-1/2}[rho] M[v].
    Valid when rho is bounded away from zero.
    """
    if M_at_rho.rho_min <= 0.0:
        raise SingularMass(
            f"derivative requires rho_min > 0, got {M_at_rho.rho_min}"
        )
    lam, Q = _eigh_block(M_at_rho)
    roots = np.sqrt(np.maximum(lam, 0.0))
    v_block = _scalar_block(v.values, basis)
    D_block = (Q.T @ v_block @ Q) / (roots[:, None] + roots[None, :])
    D_block = Q @ D_block @ Q.T
    if M_at_rho.block is not None:
        d = M_at_rho.entries.shape[0] // M_at_rho.block.shape[0]
        return _expand_blocks(D_block, d)
    return D_block
