"""Capacity and explicit coding schemes for layered linear deterministic relay networks."""

from .gf import FieldElement, PrimeField
from .fmatrix import BlockMatrix, IndexSelection
from .transversal import FlowSolution, FlowVector, find_solution, supports_flow
from .netmodel import LayeredNetwork, NetworkFlow, capacity, decompose_flow, supports_network_flow

__all__ = [
    "BlockMatrix", "FieldElement", "FlowSolution", "FlowVector", "IndexSelection",
    "LayeredNetwork", "NetworkFlow", "PrimeField", "capacity", "decompose_flow",
    "find_solution", "supports_flow", "supports_network_flow",
]
