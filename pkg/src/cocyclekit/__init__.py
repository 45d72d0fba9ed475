"""Numerics for quasi-periodic unitary cocycles: analytic conjugation steps,
resonance combinatorics, Gevrey approximation ladders, non-degeneracy
certificates, and continued-fraction renormalization of fibered Z^2 actions."""

from cocyclekit.torus_fourier import (
    FourierMap,
    UnitaryConstant,
    wiener_norm,
    strip_sup_norm,
    exp_map,
    log_map,
    cocycle_iterate,
)
from cocyclekit.kam_engine import (
    NearConstantCocycle,
    StepConstants,
    build_schedule,
    convergent_chain,
    detect_nr,
    iterate_chain,
    kam_step,
)
from cocyclekit.gevrey_approx import (
    GevreyFunction,
    build_ladder_green,
    build_ladder_truncation,
    inverse_ladder,
)
from cocyclekit.renormalization import (
    FiberedAction,
    cocycle_action,
    normalize_action,
    renorm_iterate,
    renorm_step,
    renormalized_upsilon_check,
)

__all__ = [
    "FourierMap",
    "UnitaryConstant",
    "wiener_norm",
    "strip_sup_norm",
    "exp_map",
    "log_map",
    "cocycle_iterate",
    "NearConstantCocycle",
    "StepConstants",
    "build_schedule",
    "convergent_chain",
    "detect_nr",
    "iterate_chain",
    "kam_step",
    "GevreyFunction",
    "build_ladder_green",
    "build_ladder_truncation",
    "inverse_ladder",
    "FiberedAction",
    "cocycle_action",
    "normalize_action",
    "renorm_iterate",
    "renorm_step",
    "renormalized_upsilon_check",
]

__version__ = "0.1.0"
