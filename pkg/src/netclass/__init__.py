"""Interactive and one-way protocols for distributed threshold classification."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ClassLabel,
    ConfigError,
    DyadicRational,
    InputVector,
    ProblemConfig,
    classify,
    gamma,
    parse_config,
    signed_sum,
)

__all__ = [
    "ClassLabel",
    "ConfigError",
    "DyadicRational",
    "InputVector",
    "ProblemConfig",
    "__version__",
    "classify",
    "gamma",
    "parse_config",
    "signed_sum",
]
