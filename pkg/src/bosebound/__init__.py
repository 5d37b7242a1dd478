"""Bound states of bosonic excitations around a two-level impurity.

Numerical toolkit for single- and multi-excitation bound states of a
two-level system coupled to a free-boson band: spectral integrals,
bound-state root finding, projected effective Hamiltonians, a
coherent-plus-correction variational ground state, exact two- and
three-excitation Green-function solvers, and a brute-force sparse
diagonalization oracle, all driven by one sweep CLI.
"""

__version__ = "0.1.0"
