"""Phase-space simulator for two Coulomb-interacting electrons.

Three cross-validated models of the same physics:

- ``two_electron``: the full pair state on a 4D phase-space grid (d=1),
- ``bbgky``: two one-electron states coupled through mean-field kernels,
- ``force_model``: the initial product pulled back along classical
  two-body trajectories,

plus shared diagnostics (normalization, purity, separability), exact
trajectory integrators, and a scenario-runner CLI (``wigner2e``).
"""

__version__ = "1.0.0"

from .core import (CostGuardError, DomainError, GaussianPacket, UnitSystem,
                   ValidationError, WignerGrid, WignerState,
                   make_gaussian_state, marginal, moment, tensor_product)

__all__ = [
    "CostGuardError", "DomainError", "GaussianPacket", "UnitSystem",
    "ValidationError", "WignerGrid", "WignerState", "make_gaussian_state",
    "marginal", "moment", "tensor_product", "__version__",
]
