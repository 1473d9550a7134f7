"""Numerics and combinatorics for moduli of marked nodal Riemann surfaces."""

from .hardy import TruncatedLaurent, norm, product, rescale, split
from .local_model import GluingDatum, SolverConfig, newton_T
from .signature import SignatureGraph, VertexLabel, enumerate_stable_signatures

__all__ = [
    "GluingDatum",
    "SignatureGraph",
    "SolverConfig",
    "TruncatedLaurent",
    "VertexLabel",
    "enumerate_stable_signatures",
    "newton_T",
    "norm",
    "product",
    "rescale",
    "split",
]

__version__ = "0.1.0"
