"""Many-fermion response functions and bound-state spectra from the Lorentz
integral transform, evaluated through Chebyshev moments of a rescaled
(block-encoded) Hamiltonian."""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
