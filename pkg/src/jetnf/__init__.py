"""Exact normal forms for diffeomorphisms and constrained Hamiltonian pairs
in symplectic space, computed at finite jet order over the rationals."""

__version__ = "0.1.0"
