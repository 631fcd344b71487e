"""speclab: numerical laboratory for spectral projector asymptotics of 1D
Schrodinger operators with almost-periodic first-order perturbations.

Submodules
----------
freqsets     symmetric frequency sets, diophantine constants, subset-sum gaps
weights      recursive small-divisor weights and admissibility diagnostics
symbols      grid-sampled symbol calculus (seminorms, shifts, division)
families     modulated coefficient families theta -> symbol
gauge        one gauge-transform step on periodic matrix realizations
prufer       angle/amplitude flow and rotation shooting
embedded     potentials with eigenvalues inside the essential spectrum
spectral     Dirichlet discretization, projector kernels, wave propagator
asymptotics  oscillatory expansion fits of kernel sweeps
cli          batch experiment driver (speclab run/validate/schema)
"""

from . import (asymptotics, cli, cutoffs, embedded, families, freqsets, gauge,
               prufer, spectral, symbols, weights)

__version__ = "0.1.0"

__all__ = [
    "asymptotics", "cli", "cutoffs", "embedded", "families", "freqsets",
    "gauge", "prufer", "spectral", "symbols", "weights", "__version__",
]
