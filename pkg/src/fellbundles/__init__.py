"""Numerical workbench for graded matrix bundles over finite groups.

Validate bundle and module axioms, certify positive definiteness of graded
maps, reconstruct actions from positive definite maps, and build and check
crossed-product correspondences and imprimitivity bimodules.
"""

__version__ = "0.1.0"
