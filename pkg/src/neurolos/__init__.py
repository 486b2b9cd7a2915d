"""ICU length-of-stay class prediction benchmark.

Generates seeded synthetic cohorts shaped like critical-care source tables,
distills them into reusable data marts, and trains classical and sequence
models from scratch to predict short / medium / long stays, with a shared
evaluation and tuning kit and a stage-based pipeline CLI.
"""
from .errors import (
    DataError,
    NeurolosError,
    SchemaError,
    TrainingError,
    UnsupportedModelError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "NeurolosError",
    "SchemaError",
    "TrainingError",
    "UnsupportedModelError",
    "ValidationError",
    "__version__",
]
