"""Audit toolkit for conference peer-review datasets."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AuditError,
    DegenerateError,
    InfeasibleError,
    MissingDataError,
    ParseError,
    PreconditionError,
    ValidationError,
)
from .io import load_dataset, loads_dataset, write_dataset  # noqa: E402
from .model import Dataset, validate_dataset  # noqa: E402
from .synth import SynthConfig, generate_synthetic  # noqa: E402

__all__ = [
    "AuditError", "DegenerateError", "InfeasibleError", "MissingDataError", "ParseError",
    "PreconditionError", "ValidationError", "Dataset", "SynthConfig", "generate_synthetic",
    "load_dataset", "loads_dataset", "validate_dataset", "write_dataset",
]
