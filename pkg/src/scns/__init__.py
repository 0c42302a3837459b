"""Spectral-Galerkin Monte Carlo simulator for stochastic isentropic
compressible flow on the periodic torus, with a diagnostics suite that
checks the energy, pressure-integrability and martingale identities the
scheme is built around."""

__version__ = "0.1.0"
