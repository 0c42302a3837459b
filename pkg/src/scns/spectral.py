"""Periodic-torus grids and FFT-based operators.

The torus is [0,1]^d with m points per axis, so the discrete L^2 inner
product of two grid functions is the plain mean of their pointwise product.
Fourier coefficients are normalized so that the k=0 coefficient equals the
mean of the field; with that convention Parseval reads
sum_k |f_hat_k|^2 = mean(|f|^2).

All operators act on the raw value arrays through TorusGrid methods; the
ScalarField / VectorField wrappers carry the grid along and are what the
rest of the package passes around.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Grid or operator parameters outside the supported range."""


class AliasingError(ValueError):
    """Projection cutoff too large for the grid."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class TorusGrid:
    """Uniform grid on [0,1]^d with m points per axis (m a power of two)."""

    def __init__(self, d: int, m: int):
        if d not in (1, 2, 3):
            raise ConfigurationError(f"dimension d must be 1, 2 or 3, got {d}")
        if m < 4 or m % 2 != 0:
            raise ConfigurationError(f"points per axis m must be >= 4 and even, got {m}")
        if not _is_power_of_two(m):
            raise ConfigurationError(f"points per axis m must be a power of two, got {m}")
        self.d = d
        self.m = m
        self.spacing = 1.0 / m
        self.shape = (m,) * d
        self.npoints = m**d

        # integer wavenumbers per axis in FFT order, each in (-m/2, m/2]
        k1 = np.fft.fftfreq(m, d=1.0 / m)
        k1[m // 2] = m // 2  # numpy puts -m/2 at the Nyquist slot
        mesh = np.meshgrid(*([k1] * d), indexing="ij")
        self.kvec = [ki.astype(np.int64) for ki in mesh]
        self.k2 = sum(ki.astype(float) ** 2 for ki in self.kvec)
        self.kinf = np.maximum.reduce([np.abs(ki) for ki in self.kvec])
        # odd-order derivative wavenumbers: the Nyquist cosine's derivative is a
        # sine that vanishes at the grid points, so its multiplier must be zero
        self.kderiv = [np.where(np.abs(ki) == m // 2, 0, ki) for ki in self.kvec]

        x1 = np.arange(m) / m
        self.coords = np.meshgrid(*([x1] * d), indexing="ij")

        # 2/3-rule dealiasing mask (keep |k|_inf <= m/3)
        self._dealias_mask = self.kinf <= m // 3

    # -- transforms ---------------------------------------------------------

    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fftn(values) / self.npoints

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        return np.real(np.fft.ifftn(coeffs * self.npoints))

    # -- operators on raw arrays --------------------------------------------

    def grad_arr(self, values: np.ndarray) -> list[np.ndarray]:
        fh = self.fft(values)
        return [self.ifft(2j * np.pi * self.kderiv[j] * fh) for j in range(self.d)]

    def div_arr(self, comps: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.shape)
        for j in range(self.d):
            out += self.ifft(2j * np.pi * self.kderiv[j] * self.fft(comps[j]))
        return out

    def lap_arr(self, values: np.ndarray) -> np.ndarray:
        return self.ifft(-4.0 * np.pi**2 * self.k2 * self.fft(values))

    def project_arr(self, values: np.ndarray, cutoff: int) -> np.ndarray:
        if cutoff >= self.m // 2:
            raise AliasingError(f"cutoff {cutoff} >= m/2 = {self.m // 2} would alias")
        fh = self.fft(values)
        fh[self.kinf > cutoff] = 0.0
        return self.ifft(fh)

    def dealias_arr(self, values: np.ndarray) -> np.ndarray:
        fh = self.fft(values)
        fh[~self._dealias_mask] = 0.0
        return self.ifft(fh)

    def heat_arr(self, values: np.ndarray, coeff: float) -> np.ndarray:
        """Apply the heat semigroup exp(coeff * Laplacian) exactly in spectral space."""
        fh = self.fft(values)
        fh *= np.exp(-4.0 * np.pi**2 * self.k2 * coeff)
        return self.ifft(fh)

    def inv_lap_grad_arr(self, values: np.ndarray) -> list[np.ndarray]:
        """inverse-Laplacian gradient of the mean-zero part, component symbols
        (2 pi i k_j) / (-4 pi^2 |k|^2)."""
        fh = self.fft(values)
        k2 = self.k2.copy()
        k2.flat[0] = 1.0  # k=0 excluded; its coefficient is zeroed below
        out = []
        for j in range(self.d):
            gh = fh * (2j * np.pi * self.kderiv[j]) / (-4.0 * np.pi**2 * k2)
            gh.flat[0] = 0.0
            out.append(self.ifft(gh))
        return out

    def riesz_arr(self, i: int, j: int, values: np.ndarray) -> np.ndarray:
        """Double Riesz transform, multiplier k_i k_j / |k|^2 on the mean-zero part."""
        fh = self.fft(values)
        k2 = self.k2.copy()
        k2.flat[0] = 1.0
        gh = fh * (self.kvec[i] * self.kvec[j]) / k2
        gh.flat[0] = 0.0
        return self.ifft(gh)

    def sobolev_norm_arr(self, values: np.ndarray, s: float) -> float:
        fh = self.fft(values)
        weight = (1.0 + 4.0 * np.pi**2 * self.k2) ** s
        return float(np.sqrt(np.sum(weight * np.abs(fh) ** 2)))

    def mean(self, values: np.ndarray) -> float:
        return float(np.mean(values))

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Discrete L^2(T^d) inner product (unit-volume torus)."""
        return float(np.mean(a * b))

    def __eq__(self, other) -> bool:
        return isinstance(other, TorusGrid) and (self.d, self.m) == (other.d, other.m)

    def __hash__(self) -> int:
        return hash((self.d, self.m))

    def __repr__(self) -> str:
        return f"TorusGrid(d={self.d}, m={self.m})"


@dataclass
class ScalarField:
    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scalar field contains non-finite entries")

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass
class VectorField:
    grid: TorusGrid
    components: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if len(self.components) != self.grid.d:
            raise ValueError(f"expected {self.grid.d} components, got {len(self.components)}")
        self.components = [
            np.asarray(c, dtype=float).reshape(self.grid.shape) for c in self.components
        ]
        for c in self.components:
            if not np.all(np.isfinite(c)):
                raise ValueError("vector field contains non-finite entries")

    @classmethod
    def zero(cls, grid: TorusGrid) -> "VectorField":
        return cls(grid, [np.zeros(grid.shape) for _ in range(grid.d)])


# -- field-level operations --------------------------------------------------


def to_spectral(f: ScalarField) -> np.ndarray:
    return f.grid.fft(f.values)


def from_spectral(grid: TorusGrid, coeffs: np.ndarray) -> ScalarField:
    return ScalarField(grid, grid.ifft(coeffs))


def project_trig(f: ScalarField, cutoff: int) -> ScalarField:
    return ScalarField(f.grid, f.grid.project_arr(f.values, cutoff))


def grad(f: ScalarField) -> VectorField:
    return VectorField(f.grid, f.grid.grad_arr(f.values))


def div(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, v.grid.div_arr(v.components))


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.lap_arr(f.values))


def inv_laplacian_grad(rho: ScalarField) -> VectorField:
    return VectorField(rho.grid, rho.grid.inv_lap_grad_arr(rho.values))


def riesz(i: int, j: int, f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.riesz_arr(i, j, f.values))


def sobolev_norm(f: ScalarField, s: float) -> float:
    return f.grid.sobolev_norm_arr(f.values, s)
