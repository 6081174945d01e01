"""LED tilt/gain calibration and RSS localization."""

from ._vlpcal import (
    ContractViolation,
    CrlbReport,
    DomainError,
    LedCalibration,
    NumericalError,
    ParseError,
    PositionEstimate,
    ValidationError,
    calibrate,
    cli,
    crlb,
    localize_multilateration,
    localize_weighted_ls,
    optimal_radius,
    optimal_sum_mse,
    plan_points,
    radius_sweep,
    verify,
)

__all__ = [
    "ContractViolation",
    "CrlbReport",
    "DomainError",
    "LedCalibration",
    "NumericalError",
    "ParseError",
    "PositionEstimate",
    "ValidationError",
    "calibrate",
    "cli",
    "crlb",
    "localize_multilateration",
    "localize_weighted_ls",
    "optimal_radius",
    "optimal_sum_mse",
    "plan_points",
    "radius_sweep",
    "verify",
]
