"""Spectral spinor calculus on the round sphere S^n.

Gamma matrices, spherical harmonics and product quadrature feed a truncated
Galerkin model of the spinor bundle (Killing-spinor frame times harmonics), on
which the Dirac operator, the spinorial Sobolev functionals, their second
variations and the conformal (Möbius) action are evaluated.
"""
__version__ = "0.1.0"

from .clifford import CliffordRep, build_gamma, clifford_matrix, clifford_mul, relation_defect
from .conformal import (BubbleField, BubbleParam, MoebiusParam, bubble_eval, conformal_pullback,
                        killing_field, mtilde_counterexample, mtilde_field, optimizer_field)
from .errors import (ClusterError, ConstraintError, DomainError, ExactnessError,
                     InvalidDimensionError, PoleError, ShapeError, SingularIntegrandError,
                     SpinSphereError, TruncationError)
from .forms import (assemble_G, assemble_G2, assemble_Ga, assemble_S, crossing_max,
                    index_nullity, killing_base, scan_Ja, spectral_gap, subspace)
from .functionals import (F_functional, J_functional, Ja_functional, deficit, dist_to_M,
                          el_residual_F, el_residual_J)
from .harmonics import basis_Pk, dim_Pk
from .spinframe import SpinorField, SpinorSpace, assemble_dirac, eigenspaces, killing_frame
from .squad import build_rule, cached_rule, integrate, stereo, stereo_inv

__all__ = [
    "__version__",
    "CliffordRep", "build_gamma", "clifford_matrix", "clifford_mul", "relation_defect",
    "BubbleField", "BubbleParam", "MoebiusParam", "bubble_eval", "conformal_pullback",
    "killing_field", "mtilde_counterexample", "mtilde_field", "optimizer_field",
    "ClusterError", "ConstraintError", "DomainError", "ExactnessError", "InvalidDimensionError",
    "PoleError", "ShapeError", "SingularIntegrandError", "SpinSphereError", "TruncationError",
    "assemble_G", "assemble_G2", "assemble_Ga", "assemble_S", "crossing_max", "index_nullity",
    "killing_base", "scan_Ja", "spectral_gap", "subspace",
    "F_functional", "J_functional", "Ja_functional", "deficit", "dist_to_M", "el_residual_F",
    "el_residual_J",
    "basis_Pk", "dim_Pk",
    "SpinorField", "SpinorSpace", "assemble_dirac", "eigenspaces", "killing_frame",
    "build_rule", "cached_rule", "integrate", "stereo", "stereo_inv",
]
