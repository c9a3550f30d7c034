"""
Polariton eigenmodes of a voxelized dispersive medium coupled to the vacuum field.

The coupled frequency operator is discretized on a plane-wave field grid and a
per-voxel reservoir grid; eigenfunctions are obtained from Lippmann-Schwinger
solves and checked against first-order perturbation theory, closed-form
kernels and a dense eigendecomposition.
"""
from .exceptions import (ConfigurationError, DenseCapError, DomainError, EmptyMediumError, InteriorPointError,
                         PlasmonLSError, ShapeMismatchError, SingularityError, SingularNodeError, SolverError,
                         ValidationError)
from .lssolver import (PolaritonEigenfunction, RegularizationPolicy, ScatteringMatrix, WaveOperatorMatrix,
                       assemble_wave_operator, born_series, scattering_matrix, solve_ls)
from .model import (ConstantDielectric, DrudeLorentz, MediumModel, Oscillator, PhysicalConstants,
                    TabulatedDielectric, coupling_alpha, epsilon_imag, voxelize)
from .observables import (FieldModeMap, bulk_identity_residual, efield_mode_map, first_order_field_kernel,
                          free_field_coefficients, spectral_report)
from .operator import BlockVector, OperatorHandle, assemble_dense
from .perturbation import KernelQuadrature, TensorKernel, first_order_psi, green_vacuum, kernel_L
from .quadrature import MINUS, PLUS
from .spectral import GridConfig, SpectralGrid, build_grids

__version__ = "0.1.0"

__all__ = [
    "PlasmonLSError", "DomainError", "ValidationError", "EmptyMediumError", "ConfigurationError",
    "ShapeMismatchError", "SingularNodeError", "SingularityError", "DenseCapError", "SolverError",
    "InteriorPointError",
    "PhysicalConstants", "ConstantDielectric", "DrudeLorentz", "Oscillator", "TabulatedDielectric", "MediumModel",
    "epsilon_imag", "coupling_alpha", "voxelize",
    "GridConfig", "SpectralGrid", "build_grids",
    "BlockVector", "OperatorHandle", "assemble_dense",
    "RegularizationPolicy", "PolaritonEigenfunction", "WaveOperatorMatrix", "ScatteringMatrix", "solve_ls",
    "born_series", "assemble_wave_operator", "scattering_matrix",
    "KernelQuadrature", "TensorKernel", "first_order_psi", "green_vacuum", "kernel_L",
    "FieldModeMap", "efield_mode_map", "free_field_coefficients", "first_order_field_kernel",
    "bulk_identity_residual", "spectral_report",
    "PLUS", "MINUS", "__version__",
]
