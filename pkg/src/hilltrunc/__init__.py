"""Dirichlet-truncated spectra of Hill's equation.

Band edges from the Floquet discriminant, band states (N - 1 per band,
independent of the truncation point), gap states (one per gap, independent of
the truncation length) and a finite-difference oracle to check them.
"""
__version__ = "0.1.0"

from ._backend import BACKEND
from .coeffs import (ConstantShift, FreeParticle, InvalidCoefficients, KronigPenney, Mathieu,
                     PeriodicCoefficients, PiecewiseConstant, Segment, validate)
from .propagate import TransferMatrix, discriminant, monodromy
from .spectrum import BandEdges, decay_beta, dispersion_alpha, edge_eigenfunction, find_band_edges
from .truncated import (BandState, GapState, GapSubtype, TruncatedSpectrum, TruncationConfig,
                        band_states, classify_spectrum, eigenfunction, gap_state, tau_sweep)

__all__ = [
    "BACKEND", "BandEdges", "BandState", "ConstantShift", "FreeParticle", "GapState", "GapSubtype",
    "InvalidCoefficients", "KronigPenney", "Mathieu", "PeriodicCoefficients", "PiecewiseConstant",
    "Segment", "TransferMatrix", "TruncatedSpectrum", "TruncationConfig", "band_states",
    "classify_spectrum", "decay_beta", "discriminant", "dispersion_alpha", "edge_eigenfunction",
    "eigenfunction", "find_band_edges", "gap_state", "monodromy", "tau_sweep",
    "validate",
]
