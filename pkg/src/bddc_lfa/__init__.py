"""Local Fourier analysis of BDDC preconditioners for the Q1 Laplacian."""

from .linalg import (
    EigenvalueConvergenceError,
    LinAlgArgumentError,
    SingularMatrixError,
    Spectrum,
    dft_matrix,
    eig,
    solve,
)
from .optimizer import OptimizationResult, SweepGrid, optimize_1d, optimize_2d
from .oracle import assemble, lfa_union, ritz_estimate, spectra_match
from .preconditioners import (
    OperatorSymbol,
    PreconditionerSpec,
    SymbolFactory,
    coarse_preconditioner_symbol,
    multiplicative_coarse,
    multiplicative_fine,
    multiplicative_fine_and_coarse,
    three_level_symbol,
    two_level_symbol,
)
from .spectrum import SamplingPlan, SpectrumReport, fit_constant, histogram, sweep, sweep_many
from .stencil import Q1_LAPLACIAN, HarmonicGrid, Stencil9, classical_symbol, fine_symbol
from .subassembly import (
    BlockSymbol,
    BrokenIndexMap,
    SchurStencilCoeffs,
    broken_blocks,
    factor_symbols,
    injection_symbol_R1,
    jump_and_harmonic_symbols,
    schur_stencil,
)

__version__ = "0.1.0"

__all__ = [
    "EigenvalueConvergenceError",
    "LinAlgArgumentError",
    "SingularMatrixError",
    "Spectrum",
    "dft_matrix",
    "eig",
    "solve",
    "OptimizationResult",
    "SweepGrid",
    "optimize_1d",
    "optimize_2d",
    "assemble",
    "lfa_union",
    "ritz_estimate",
    "spectra_match",
    "OperatorSymbol",
    "PreconditionerSpec",
    "SymbolFactory",
    "coarse_preconditioner_symbol",
    "multiplicative_coarse",
    "multiplicative_fine",
    "multiplicative_fine_and_coarse",
    "three_level_symbol",
    "two_level_symbol",
    "SamplingPlan",
    "SpectrumReport",
    "fit_constant",
    "histogram",
    "sweep",
    "sweep_many",
    "Q1_LAPLACIAN",
    "HarmonicGrid",
    "Stencil9",
    "classical_symbol",
    "fine_symbol",
    "BlockSymbol",
    "BrokenIndexMap",
    "SchurStencilCoeffs",
    "broken_blocks",
    "factor_symbols",
    "injection_symbol_R1",
    "jump_and_harmonic_symbols",
    "schur_stencil",
]
