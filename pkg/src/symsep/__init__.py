"""Numerics for symmetry-induced entanglement: number entanglement, charge
twirls, symmetric separability, random ensembles and concentration runs."""

__version__ = "0.1.0"
