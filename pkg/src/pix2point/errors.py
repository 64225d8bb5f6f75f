"""Exception types shared across the package."""


class Pix2PointError(Exception):
    """Base class for all package errors."""


class ConfigurationError(Pix2PointError):
    """Invalid configuration values or inconsistent flag combinations."""


class ContractError(Pix2PointError):
    """Caller violated an operation's input contract (shape/range mismatch)."""


class NumericError(Pix2PointError):
    """Non-finite values where finite numbers are required."""


class GenerationError(Pix2PointError):
    """Scene generation produced a degenerate result (e.g. no LiDAR returns)."""


class DataError(Pix2PointError):
    """Missing or malformed dataset / run artifacts on disk."""
