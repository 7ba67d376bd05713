"""Kronecker graphs: generation, maximum-likelihood fitting and network statistics."""

__version__ = "0.1.0"

from .core import (
    InitiatorMatrix,
    KroneckerPowerSpec,
    edge_probability,
    generate_deterministic,
    generate_fast,
    kron_power_dense,
    kron_product,
    realize_naive,
)
from .graph import SparseGraph, load_edge_list, save_edge_list
from .kronfit import FitConfig, FitResult, NodePermutation, bic_score, fit, select_initiator_size

__all__ = [
    "InitiatorMatrix",
    "KroneckerPowerSpec",
    "edge_probability",
    "generate_deterministic",
    "generate_fast",
    "kron_power_dense",
    "kron_product",
    "realize_naive",
    "SparseGraph",
    "load_edge_list",
    "save_edge_list",
    "FitConfig",
    "FitResult",
    "NodePermutation",
    "bic_score",
    "fit",
    "select_initiator_size",
]
