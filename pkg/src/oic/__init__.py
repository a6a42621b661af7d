"""Debiased out-of-sample evaluation of data-driven optimization models."""
from __future__ import annotations

__version__ = "0.1.0"

from oic._accel import USE_NUMBA  # noqa: F401
from oic.errors import (  # noqa: F401
    ConfigError,
    DegenerateDataError,
    DimensionError,
    DomainError,
    InputError,
    InsufficientDataError,
    OICError,
    RankError,
    RefitError,
    SingularityError,
    SolverError,
)
