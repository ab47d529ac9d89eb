"""Simulation and analysis toolkit for dc NV magnetometry with flux concentration and modulation."""

__version__ = "0.1.0"

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .params import TABLE_S1, TABLE_S3_IMPROVED, TABLE_S3_PRESENT, ProtocolParams, validate_params
from .sensitivity import duty_cycle, evaluate_sensitivity, improvement_ledger

__all__ = [
    "DEFAULT_CONSTANTS",
    "PhysicalConstants",
    "ProtocolParams",
    "TABLE_S1",
    "TABLE_S3_IMPROVED",
    "TABLE_S3_PRESENT",
    "duty_cycle",
    "evaluate_sensitivity",
    "improvement_ledger",
    "validate_params",
]
