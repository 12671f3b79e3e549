"""Exact spectral gaps for the three-dimensional Kac walk with momentum and energy conservation."""

from .kernel import ScatteringKernel, delta2, moments, parse_kernel

__version__ = "0.1.0"
__all__ = ["ScatteringKernel", "delta2", "moments", "parse_kernel", "__version__"]
