"""Renyi-2 correlators of dephased free fermions in the doubled space.

Two independent routes to the same observables: brute-force enumeration over
doubled Fock configurations (exact, small systems) and an auxiliary-field
determinant sampler (any size the determinants allow), plus per-configuration
verification of the bounds that relate charged correlators to their neutral
onsite envelopes.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConfigurationNode,
    DegenerateGroundState,
    DephlabError,
    IntegrityError,
    SignProblem,
    SizeLimit,
)
from .model import (
    BilinearSpec,
    DoubledModel,
    Geometry,
    SlaterOrbitals,
    TightBindingModel,
    build_model,
    double_hamiltonian,
    ground_orbitals,
    load_hamiltonian_file,
    su_generators,
)

__all__ = [
    "BilinearSpec",
    "ConfigError",
    "ConfigurationNode",
    "DegenerateGroundState",
    "DephlabError",
    "DoubledModel",
    "Geometry",
    "IntegrityError",
    "SignProblem",
    "SizeLimit",
    "SlaterOrbitals",
    "TightBindingModel",
    "build_model",
    "double_hamiltonian",
    "ground_orbitals",
    "load_hamiltonian_file",
    "su_generators",
    "__version__",
]
