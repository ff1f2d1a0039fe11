"""Perpetual American put capped by the first drawdown of a jump-diffusion asset.

Closed-form pricing through exponential-sum scale functions, with a Monte
Carlo oracle and a small CLI.
"""

from .model import ContractState, DomainError, ModelParams, make_params
from .pricer import (
    BarrierNotFoundError,
    PriceModel,
    Regime,
    build_model,
    exercise_boundary,
    regime,
    solve_barrier,
    value,
)
from .scale import DegenerateRootsError, build_basis

__all__ = [
    "BarrierNotFoundError",
    "ContractState",
    "DegenerateRootsError",
    "DomainError",
    "ModelParams",
    "PriceModel",
    "Regime",
    "build_basis",
    "build_model",
    "exercise_boundary",
    "make_params",
    "regime",
    "solve_barrier",
    "value",
]
