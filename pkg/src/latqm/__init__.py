"""Lattice Schroedinger dynamics with the exact nonlocal kernel and the central-difference stencil."""

from latqm.errors import (
    InvalidArgument,
    NormDriftError,
    NumericalInstability,
    QuadratureError,
    ResourceLimit,
    WraparoundError,
)
from latqm.kernels import (
    Kernel,
    Variant,
    apply,
    apply_direct,
    apply_spectral,
    build_kernel,
    build_kernel_dd,
    dispersion,
    kernel_tail_sum,
)
from latqm.lattice import (
    Lattice,
    MomentumFunction,
    WaveFunction,
    gaussian_packet,
    make_lattice,
    probability_in_region,
    to_momentum,
    to_position,
)
from latqm.propagator import EvolutionConfig, Potential, evolve, step_euler, step_rk4

__version__ = "0.1.0"

__all__ = [
    "EvolutionConfig",
    "InvalidArgument",
    "Kernel",
    "Lattice",
    "MomentumFunction",
    "NormDriftError",
    "NumericalInstability",
    "Potential",
    "QuadratureError",
    "ResourceLimit",
    "Variant",
    "WaveFunction",
    "WraparoundError",
    "apply",
    "apply_direct",
    "apply_spectral",
    "build_kernel",
    "build_kernel_dd",
    "dispersion",
    "evolve",
    "gaussian_packet",
    "kernel_tail_sum",
    "make_lattice",
    "probability_in_region",
    "step_euler",
    "step_rk4",
    "to_momentum",
    "to_position",
]
