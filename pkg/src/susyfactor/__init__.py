"""Supersymmetric factorizations ``P = d^{G,*}_{ψ,h} d_{φ,h}`` of second-order operators."""

from .analysis import fit_temperateness, invertibility_definite, invertibility_split
from .dsl import parse, to_text, x_context
from .jets import Jet
from .operator import FieldBundle, OperatorSpec, apply_P, eikonal_residuals
from .perturbation import build_perturbation_gallery
from .quadrature import QuadratureConfig
from .specfile import load_gallery, load_spec
from .susy import (
    SusyStructure,
    ThetaDecomposition,
    assemble_G,
    check_assumption,
    construct_B,
    factorization_residual,
    structure_from_B,
    tensorize,
)
from .synth import synthesize_operator

__version__ = "0.1.0"

__all__ = [
    "FieldBundle",
    "Jet",
    "OperatorSpec",
    "QuadratureConfig",
    "SusyStructure",
    "ThetaDecomposition",
    "apply_P",
    "assemble_G",
    "build_perturbation_gallery",
    "check_assumption",
    "construct_B",
    "eikonal_residuals",
    "factorization_residual",
    "fit_temperateness",
    "invertibility_definite",
    "invertibility_split",
    "load_gallery",
    "load_spec",
    "parse",
    "structure_from_B",
    "synthesize_operator",
    "tensorize",
    "to_text",
    "x_context",
]
