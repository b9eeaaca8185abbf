"""Essential-spectrum bottoms for pseudorelativistic multiparticle systems
restricted to permutation-symmetry sectors."""

from . import eigensolve, fourier_grid, symgroup, system, threshold, verify

__all__ = [
    "symgroup",
    "system",
    "fourier_grid",
    "eigensolve",
    "threshold",
    "verify",
]

__version__ = "0.1.0"
