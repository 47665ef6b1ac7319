"""Kinetic wealth-exchange simulators sharing one pairwise transaction engine."""
from .backend import DEFAULT as BACKEND, available_backends, get_kernel
from .engine import (
    DRIVEN_OUT,
    KineticAgent,
    KineticRun,
    TransactionDraw,
    draw_pairs,
    driven_out_fraction,
    kinetic_to_macro,
    max_share,
    run_kinetic,
    singleton_taxonomy,
)
from .rules import KineticModel, Variant, pair_step

__all__ = [
    "BACKEND",
    "DRIVEN_OUT",
    "KineticAgent",
    "KineticModel",
    "KineticRun",
    "TransactionDraw",
    "Variant",
    "available_backends",
    "draw_pairs",
    "driven_out_fraction",
    "get_kernel",
    "kinetic_to_macro",
    "max_share",
    "pair_step",
    "run_kinetic",
    "singleton_taxonomy",
]
