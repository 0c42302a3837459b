"""Brute-force reference computations.

Everything here is deliberately slow and independent of the FFT/quadrature
paths it is used to check: direct O(m^{2d}) discrete Fourier sums,
trapezoid-style quadrature on refined grids, central finite differences,
and fine-step time integration. The CLI exposes these as `scns oracle <case>`.
"""

from __future__ import annotations

import numpy as np

from .spectral import TorusGrid


def direct_dft(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Direct discrete Fourier transform, O(m^{2d}), same normalization as
    TorusGrid.fft (coefficient at k=0 equals the mean)."""
    m, d = grid.m, grid.d
    flat = values.reshape(-1)
    coords = np.stack([c.reshape(-1) for c in grid.coords], axis=1)  # (P, d)
    kflat = np.stack([k.reshape(-1) for k in grid.kvec], axis=1)  # (P, d)
    phase = np.exp(-2j * np.pi * (kflat @ coords.T))  # (P_k, P_x)
    out = phase @ flat / grid.npoints
    return out.reshape(grid.shape)


def direct_truncation(grid: TorusGrid, values: np.ndarray, cutoff: int) -> np.ndarray:
    """Sharp Fourier truncation via the direct DFT and its inverse sum."""
    coeffs = direct_dft(grid, values)
    coeffs[grid.kinf > cutoff] = 0.0
    coords = np.stack([c.reshape(-1) for c in grid.coords], axis=1)
    kflat = np.stack([k.reshape(-1) for k in grid.kvec], axis=1)
    phase = np.exp(2j * np.pi * (coords @ kflat.T))
    out = phase @ coeffs.reshape(-1)
    return np.real(out).reshape(grid.shape)


def refined_quadrature_inner(funcs: list, d: int, m_fine: int) -> np.ndarray:
    """Gram matrix of callables on [0,1]^d by midpoint quadrature on an
    m_fine^d grid (exact up to O(m_fine^{-2}) for smooth integrands; for
    trig products use m_fine well above the Nyquist requirement)."""
    x1 = np.arange(m_fine) / m_fine
    coords = np.meshgrid(*([x1] * d), indexing="ij")
    vals = np.stack([np.asarray(f(*coords), dtype=float).reshape(-1) for f in funcs])
    return (vals @ vals.T) / m_fine**d


def weighted_gram(weight: np.ndarray, funcs: list, d: int, m_fine: int) -> np.ndarray:
    """Quadrature of the density-weighted Gram matrix int w f_i f_j dx on a
    refined grid; `weight` is a callable of the coordinates."""
    x1 = np.arange(m_fine) / m_fine
    coords = np.meshgrid(*([x1] * d), indexing="ij")
    w = np.asarray(weight(*coords), dtype=float).reshape(-1)
    vals = np.stack([np.asarray(f(*coords), dtype=float).reshape(-1) for f in funcs])
    return ((vals * w) @ vals.T) / m_fine**d


def central_difference(f, x0: np.ndarray, v: np.ndarray, h: float = 1e-5):
    """Central finite difference of a matrix/vector-valued map along v."""
    return (f(x0 + h * v) - f(x0 - h * v)) / (2.0 * h)


def quadrature_1d(f, a: float, b: float, n: int = 20000) -> float:
    """Composite midpoint rule on [a, b]."""
    x = a + (np.arange(n) + 0.5) * (b - a) / n
    return float(np.sum(f(x)) * (b - a) / n)


ORACLE_CASES = {}


def oracle_case(name):
    def wrap(fn):
        ORACLE_CASES[name] = fn
        return fn

    return wrap


@oracle_case("dft_roundtrip")
def _oracle_dft_roundtrip() -> dict:
    """Round-trip max error of the direct DFT oracle itself at m=8, d=2."""
    grid = TorusGrid(2, 8)
    rng = np.random.default_rng(7)
    values = rng.standard_normal(grid.shape)
    coeffs = direct_dft(grid, values)
    back = grid.ifft(coeffs)
    return {"max_error": float(np.max(np.abs(back - values)))}


@oracle_case("single_mode_coefficients")
def _oracle_single_mode() -> dict:
    """Direct DFT of cos(2 pi x_1) at m=8, d=1: +-e1 coefficients."""
    grid = TorusGrid(1, 8)
    values = np.cos(2 * np.pi * grid.coords[0])
    coeffs = direct_dft(grid, values)
    return {"coeff_k1": complex(coeffs[1]).real, "coeff_k_minus1": complex(coeffs[-1]).real}


@oracle_case("cutoff_ramp_values")
def _oracle_cutoff_ramp() -> dict:
    """Values of the smooth concave ramp T recovered by integrating its
    derivative numerically from 0 (see transport.ramp_T / ramp_T_prime)."""
    from .transport import ramp_T_prime

    zs = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0]
    out = {}
    for z in zs:
        out[f"T({z})"] = quadrature_1d(ramp_T_prime, 0.0, z)
    return out


def run_oracle(case: str) -> dict:
    if case not in ORACLE_CASES:
        raise KeyError(f"unknown oracle case {case!r}; known: {sorted(ORACLE_CASES)}")
    return ORACLE_CASES[case]()
