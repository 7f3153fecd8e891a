"""Ising-cluster ground-state simulation: dilated imaginary-time evolution,
variational compilation, noise emulation, zero-noise extrapolation and
entanglement measurements on a dense statevector core."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
