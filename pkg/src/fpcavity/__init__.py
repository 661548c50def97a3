"""Frequency-domain simulator of a suspended, misaligned, detuned
Fabry-Perot cavity.

The package models the intracavity field on a truncated Hermite-Gauss basis
and derives radiation-pressure stiffness, demodulated error signals,
closed-loop noise spectra of the suspended mirrors, and quantum correlations
between their internal modes.
"""
__version__ = "0.1.0"

from .bipartite import BipartiteResult, bipartite_spectrum, homodyne_variance
from .cavity import (CavityConfig, CavityGeometry, ResonanceSingularity,
                     SpectralPoint, derive_geometry, green_diagonal,
                     green_out_diagonal, harmonic_weights, spectral_point)
from .config import ConfigError, RunConfig, load_config
from .forces import (rin_force_coefficients, shot_force_rows,
                     static_observables, stiffness_coefficients,
                     stiffness_matrices)
from .mechanics import (DeformationMode, FreeOscillation, LangevinModel,
                        MechanicalSystem, Oscillator, build_model,
                        free_oscillations, mechanical_determinant)
from .modes import (InputBeam, ModeBasis, build_basis, input_vector,
                    ladder_matrix, overlap_matrix, quadrant_split_matrix,
                    quadrature_matrices)
from .noise import (shot_pairing, substrate_displacement_psd,
                    thermal_correlators, thermal_force_psd)
from .signals import rin_coefficient, shot_rows, signal_coefficients, static_signal

__all__ = [name for name in dir() if not name.startswith("_")]
