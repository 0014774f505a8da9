"""Bus power injections and sparse Jacobians by two methods.

``ybus``        admittance matrix: sparse mat-vec, two-pass derivatives,
                indexed in-place J assembly
``elementwise`` per-branch vectorized evaluation, then reduction to buses
                and into a frozen J pattern
``oracle``      dense and finite-difference references
``bench``       per-step timing harness (``bench`` CLI)
"""

from .netcase import IndexedNetwork, RawCase, index_network, load_case, parse_matpower, replicate_case
from .sparse import CscMatrix, TripletList, concat4, csc_from_triplets, pattern_clone_with_values, spmv_complex

__all__ = [
    "CscMatrix",
    "IndexedNetwork",
    "RawCase",
    "TripletList",
    "concat4",
    "csc_from_triplets",
    "index_network",
    "load_case",
    "parse_matpower",
    "pattern_clone_with_values",
    "replicate_case",
    "spmv_complex",
]
