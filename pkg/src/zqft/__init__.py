"""Perturbative scalar field theory on model manifolds: zeta-regularized
determinants and tadpoles, Dirichlet-to-Neumann gluing, Feynman-graph
combinatorics and 1D perturbative partition functions."""

__version__ = "0.1.0"
