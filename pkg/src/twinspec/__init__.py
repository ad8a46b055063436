"""Sideband-resolved covariance reconstruction for bright twin beams.

Tools to model a four-wave-mixing twin-beam source mode-pair by mode-pair,
simulate cavity-based single-sideband noise spectra, reconstruct the full
8x8 sideband covariance matrix from such spectra, and evaluate two-mode
entanglement witnesses on any bipartition of the recovered state.
"""

from .modes import ModeLabel, SIDEBAND_ORDER, SYM_ASYM_ORDER
from .gaussian import (
    CovarianceMatrix,
    vacuum_covariance,
    two_mode_squeezed_covariance,
    change_basis,
    symplectic_eigenvalues,
    is_physical,
)
from .fwm import FwmParams, reference_fwm_params, synthesize_state
from .cavity import CavityParams, single_beam_spectrum, cross_spectrum, simulate_traces
from .witnesses import (
    dgcz_value,
    ppt_min_symplectic,
    sideband_energy,
    energy_imbalance,
    emulate_homodyne,
    witness_sweep,
)
from .reconstruction import FitConfig, FitResult, fit_covariance, TwinBeamReconstructor

__version__ = "0.1.0"
