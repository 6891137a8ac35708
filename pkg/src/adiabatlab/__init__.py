"""
Numerical laboratory for adiabatic theory of gapped lattice fermions.
"""

__version__ = "0.1.0"
